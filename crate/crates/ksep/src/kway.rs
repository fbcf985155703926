//! k-way local search: preprocessing to directly-separating separators,
//! pairwise refinement of adjoint blocks through the 2-way machinery, and the
//! balancing routine.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, BTreeSet, VecDeque};

use rand::Rng;
use thiserror::Error;

use crate::flow_refine::{flow_improve_2way, fm_local_search, FlowConfig};
use crate::graph::{Graph, NodeId};
use crate::solution::{is_valid, quotient, SeparatorSolution};

#[derive(Debug, Error, PartialEq)]
pub enum BalanceError {
    #[error("unbalanceable instance: {0}")]
    Infeasible(String),
}

/// Number of distinct non-separator blocks adjacent to v.
fn adjacent_block_count(g: &Graph, sol: &SeparatorSolution, v: NodeId) -> u32 {
    let sep = sol.separator_label();
    let mut blocks = BTreeSet::new();
    for (u, _) in g.neighbors(v) {
        let l = sol.label(u);
        if l != sep {
            blocks.insert(l);
        }
    }
    blocks.len() as u32
}

/// Removes separator nodes that do not directly separate two blocks. Nodes
/// adjacent to a single block are absorbed into it; nodes with only separator
/// neighbors go to the lightest block. Processing order is by adjacent-block
/// count, highest first; removals can only raise a neighbor's count, and a
/// count of two or more is final. The output may be imbalanced.
pub fn preprocess(g: &Graph, sol: &SeparatorSolution) -> SeparatorSolution {
    let sep = sol.separator_label();
    let mut current = sol.clone();
    // Ties within a priority are processed in insertion order.
    let mut seq = 0u64;
    let mut heap: BinaryHeap<(u32, Reverse<u64>, NodeId)> = BinaryHeap::new();
    for v in g.nodes() {
        if current.label(v) == sep {
            heap.push((adjacent_block_count(g, &current, v), Reverse(seq), v));
            seq += 1;
        }
    }
    let mut done = vec![false; g.n()];
    while let Some((stored, _, v)) = heap.pop() {
        if done[v as usize] || current.label(v) != sep {
            continue;
        }
        let count = adjacent_block_count(g, &current, v);
        if count >= 2 {
            done[v as usize] = true;
            continue;
        }
        if count != stored {
            heap.push((count, Reverse(seq), v));
            seq += 1;
            continue;
        }
        let target = if count == 1 {
            // the single adjacent block
            g.neighbors(v)
                .map(|(u, _)| current.label(u))
                .find(|&l| l != sep)
                .unwrap()
        } else {
            current.lightest_block()
        };
        current.set_label(g, v, target);
        done[v as usize] = true;
        // Neighboring separator nodes may have gained an adjacent block.
        for (u, _) in g.neighbors(v) {
            if current.label(u) == sep && !done[u as usize] {
                heap.push((adjacent_block_count(g, &current, u), Reverse(seq), u));
                seq += 1;
            }
        }
    }
    debug_assert!(current.separator_weight() <= sol.separator_weight());
    current
}

/// Block pairs connected through at least one directly-separating node.
pub fn adjoint_pairs(g: &Graph, sol: &SeparatorSolution) -> BTreeSet<(u32, u32)> {
    quotient(g, sol).edges
}

#[derive(Debug, Clone, Copy)]
pub struct RefineConfig {
    pub flow: FlowConfig,
    pub rounds_cap: u32,
    /// FM stops after this many consecutive non-improving moves per start
    /// node.
    pub fm_unsuccessful_factor: u32,
}

impl Default for RefineConfig {
    fn default() -> Self {
        RefineConfig {
            flow: FlowConfig::default(),
            rounds_cap: 10,
            fm_unsuccessful_factor: 25,
        }
    }
}

/// One 2-way refinement of the subproblem induced by an adjoint pair.
/// Returns the refined solution when it improved the pair-local separator.
fn refine_pair<R: Rng>(
    g: &Graph,
    sol: &SeparatorSolution,
    pair: (u32, u32),
    l_max: f64,
    cfg: &RefineConfig,
    rng: &mut R,
) -> Option<SeparatorSolution> {
    let (a, b) = pair;
    let sep = sol.separator_label();
    let mut nodes = Vec::new();
    for v in g.nodes() {
        let l = sol.label(v);
        if l == a || l == b {
            nodes.push(v);
        } else if l == sep {
            // Only separator nodes that directly separate a and b, and touch
            // no third block; others stay fixed so global validity holds.
            let mut touches_a = false;
            let mut touches_b = false;
            let mut touches_other = false;
            for (u, _) in g.neighbors(v) {
                let lu = sol.label(u);
                if lu == a {
                    touches_a = true;
                } else if lu == b {
                    touches_b = true;
                } else if lu != sep {
                    touches_other = true;
                }
            }
            if touches_a && touches_b && !touches_other {
                nodes.push(v);
            }
        }
    }
    let (sub_g, sub_to_orig) = g.induced_subgraph(&nodes);
    let sub_assignment: Vec<u32> = sub_to_orig
        .iter()
        .map(|&v| {
            let l = sol.label(v);
            if l == a {
                0
            } else if l == b {
                1
            } else {
                2
            }
        })
        .collect();
    let sub_sol = SeparatorSolution::from_assignment(&sub_g, 2, sol.epsilon, sub_assignment);
    if sub_sol.separator_weight() == 0 {
        return None;
    }
    let before = sub_sol.separator_weight();
    let mut refined = flow_improve_2way(&sub_g, &sub_sol, l_max, cfg.flow);
    let starts = refined.separator_nodes();
    if !starts.is_empty() {
        let budget = cfg.fm_unsuccessful_factor * starts.len() as u32;
        refined = fm_local_search(&sub_g, &refined, &starts, l_max, budget, rng);
    }
    if refined.separator_weight() >= before {
        return None;
    }
    let mut out = sol.clone();
    for (i, &orig) in sub_to_orig.iter().enumerate() {
        let sub_label = refined.label(i as NodeId);
        let target = match sub_label {
            0 => a,
            1 => b,
            _ => sep,
        };
        out.set_label(g, orig, target);
    }
    debug_assert!(is_valid(g, &out).valid);
    debug_assert!(out.separator_weight() < sol.separator_weight());
    Some(out)
}

/// Rounds of 2-way refinement over all adjoint block pairs; a pair is dropped
/// once a round fails to improve it. Requires a preprocessed, balanced input.
pub fn pairwise_local_search<R: Rng>(
    g: &Graph,
    sol: &SeparatorSolution,
    cfg: &RefineConfig,
    rng: &mut R,
) -> SeparatorSolution {
    let mut current = sol.clone();
    let l_max = sol.l_max(g);
    let mut pairs: Vec<(u32, u32)> = adjoint_pairs(g, &current).into_iter().collect();
    for _ in 0..cfg.rounds_cap {
        if pairs.is_empty() {
            break;
        }
        let mut kept = Vec::new();
        for &pair in &pairs {
            match refine_pair(g, &current, pair, l_max, cfg, rng) {
                Some(better) => {
                    current = better;
                    kept.push(pair);
                }
                None => {}
            }
        }
        pairs = kept;
    }
    debug_assert!(current.separator_weight() <= sol.separator_weight());
    current
}

/// Gain of moving separator node s into block b: c(s) minus the weight of
/// s's non-separator neighbors outside b (they fall into the separator).
fn move_gain(g: &Graph, sol: &SeparatorSolution, s: NodeId, b: u32) -> i64 {
    let sep = sol.separator_label();
    let forced: u64 = g
        .neighbors(s)
        .filter(|&(u, _)| {
            let l = sol.label(u);
            l != sep && l != b
        })
        .map(|(u, _)| g.node_weight(u))
        .sum();
    g.node_weight(s) as i64 - forced as i64
}

/// Moves separator node s into block b, pushing its non-separator neighbors
/// outside b into the separator. Returns the weight block `from` lost.
fn apply_move(
    g: &Graph,
    sol: &mut SeparatorSolution,
    s: NodeId,
    b: u32,
    from: u32,
) -> u64 {
    let sep = sol.separator_label();
    sol.set_label(g, s, b);
    let mut shed = 0u64;
    let fallen: Vec<NodeId> = g
        .neighbors(s)
        .filter(|&(u, _)| {
            let l = sol.label(u);
            l != sep && l != b
        })
        .map(|(u, _)| u)
        .collect();
    for u in fallen {
        if sol.label(u) == from {
            shed += g.node_weight(u);
        }
        sol.set_label(g, u, sep);
    }
    shed
}

fn total_excess(sol: &SeparatorSolution, l_max: f64) -> f64 {
    sol.block_weights()
        .iter()
        .map(|&w| (w as f64 - l_max).max(0.0))
        .sum()
}

/// Shortest (hop-count) quotient-graph path from block `from` to block `to`;
/// ties prefer smaller block ids.
fn quotient_path(
    edges: &BTreeSet<(u32, u32)>,
    k: u32,
    from: u32,
    to: u32,
) -> Option<Vec<u32>> {
    let mut adj: Vec<Vec<u32>> = vec![Vec::new(); k as usize];
    for &(a, b) in edges {
        adj[a as usize].push(b);
        adj[b as usize].push(a);
    }
    for row in &mut adj {
        row.sort_unstable();
    }
    let mut prev = vec![u32::MAX; k as usize];
    let mut seen = vec![false; k as usize];
    seen[from as usize] = true;
    let mut queue = VecDeque::from([from]);
    while let Some(v) = queue.pop_front() {
        if v == to {
            let mut path = vec![to];
            let mut cur = to;
            while cur != from {
                cur = prev[cur as usize];
                path.push(cur);
            }
            path.reverse();
            return Some(path);
        }
        for &u in &adj[v as usize] {
            if !seen[u as usize] {
                seen[u as usize] = true;
                prev[u as usize] = v;
                queue.push_back(u);
            }
        }
    }
    None
}

/// Moves weight from block `a` to adjacent block `b` through separator nodes
/// that directly separate them, cheapest separator growth first. Stops once
/// `a` is within bounds or `sent_cap` weight has arrived in `b`.
fn shift_along_edge(
    g: &Graph,
    sol: &mut SeparatorSolution,
    a: u32,
    b: u32,
    l_max: f64,
    sent_cap: f64,
) -> f64 {
    let q = quotient(g, sol);
    let key = (a.min(b), a.max(b));
    let Some(witnesses) = q.witnesses.get(&key) else {
        return 0.0;
    };
    let mut heap: BinaryHeap<(i64, Reverse<NodeId>)> = witnesses
        .iter()
        .map(|&s| (move_gain(g, sol, s, b), Reverse(s)))
        .collect();
    let mut sent = 0.0f64;
    while let Some((stored, Reverse(s))) = heap.pop() {
        if sol.block_weight(a) as f64 <= l_max || sent >= sent_cap {
            break;
        }
        if sol.label(s) != sol.separator_label() {
            continue;
        }
        // s must still directly separate a and b
        let mut touches_a = false;
        for (u, _) in g.neighbors(s) {
            if sol.label(u) == a {
                touches_a = true;
                break;
            }
        }
        if !touches_a {
            continue;
        }
        let fresh = move_gain(g, sol, s, b);
        if fresh != stored {
            heap.push((fresh, Reverse(s)));
            continue;
        }
        sent += g.node_weight(s) as f64;
        apply_move(g, sol, s, b, a);
        // Newly created separator nodes around a become candidates.
        for (u, _) in g.neighbors(s) {
            if sol.label(u) == sol.separator_label() {
                heap.push((move_gain(g, sol, u, b), Reverse(u)));
            }
        }
    }
    sent
}

/// Fallback when no quotient path exists: relabel one block node directly to
/// the target block, pushing its old-block neighbors into the separator. The
/// node is chosen to minimize the separator growth.
fn direct_move(g: &Graph, sol: &mut SeparatorSolution, from: u32, to: u32) -> bool {
    let sep = sol.separator_label();
    let mut best: Option<(u64, NodeId)> = None;
    for v in g.nodes() {
        if sol.label(v) != from {
            continue;
        }
        let cost: u64 = g
            .neighbors(v)
            .filter(|&(u, _)| sol.label(u) == from)
            .map(|(u, _)| g.node_weight(u))
            .sum();
        if best.map_or(true, |(c, _)| cost < c) {
            best = Some((cost, v));
        }
    }
    let Some((_, v)) = best else {
        return false;
    };
    sol.set_label(g, v, to);
    let fallen: Vec<NodeId> = g
        .neighbors(v)
        .filter(|&(u, _)| {
            let l = sol.label(u);
            l != sep && l != to
        })
        .map(|(u, _)| u)
        .collect();
    for u in fallen {
        sol.set_label(g, u, sep);
    }
    true
}

/// Makes a valid solution balanced, possibly growing the separator. Weight
/// flows from overloaded blocks towards the lightest block along quotient
/// paths; disconnected cases fall back to direct moves.
pub fn balance(g: &Graph, sol: &SeparatorSolution) -> Result<SeparatorSolution, BalanceError> {
    let l_max = sol.l_max(g);
    if sol.k as usize > g.n() {
        return Err(BalanceError::Infeasible(format!(
            "k = {} exceeds node count {}",
            sol.k,
            g.n()
        )));
    }
    // Nodes heavier than L_max are not an error: the separator is exempt
    // from the balance constraint, so such nodes can always park there.
    let mut current = sol.clone();
    loop {
        let excess_before = total_excess(&current, l_max);
        if excess_before <= 0.0 {
            break;
        }
        let heavy = current.heaviest_block();
        let light = current.lightest_block();
        let q = quotient(g, &current);
        if let Some(path) = quotient_path(&q.edges, current.k, heavy, light) {
            let cap = (l_max - current.block_weight(light) as f64)
                .min(current.block_weight(heavy) as f64 - l_max)
                .max(1.0);
            let mut sent_cap = cap;
            for pair in path.windows(2) {
                let (a, b) = (pair[0], pair[1]);
                let sent = shift_along_edge(g, &mut current, a, b, l_max, sent_cap);
                if sent <= 0.0 {
                    break;
                }
                if (current.block_weight(b) as f64) <= l_max {
                    break; // receiver can keep the weight
                }
                sent_cap = sent;
            }
        } else {
            direct_move(g, &mut current, heavy, light);
        }
        if total_excess(&current, l_max) >= excess_before {
            // No progress: shed one boundary node of the heaviest block into
            // the separator. Strictly reduces the excess, so this terminates.
            let heavy = current.heaviest_block();
            let sep = current.separator_label();
            let boundary = g
                .nodes()
                .filter(|&v| current.label(v) == heavy)
                .min_by_key(|&v| {
                    let cost: u64 = g
                        .neighbors(v)
                        .filter(|&(u, _)| current.label(u) == heavy)
                        .map(|(u, _)| g.node_weight(u))
                        .sum();
                    (cost, v)
                });
            match boundary {
                Some(v) => current.set_label(g, v, sep),
                None => {
                    return Err(BalanceError::Infeasible(
                        "overweight block has no movable node".into(),
                    ))
                }
            }
        }
    }
    // Repopulate empty blocks: an empty block wastes capacity and never
    // shows up in the quotient graph, so pairwise refinement cannot grow it.
    // Seed each with the separator node whose move forces the least weight
    // back into the separator (its non-separator neighbors outside the
    // target block fall in).
    let sep = current.separator_label();
    for _ in 0..current.k {
        let Some(b) = (0..current.k).find(|&b| current.block_weight(b) == 0) else {
            break;
        };
        let mut best: Option<(u64, NodeId)> = None;
        for v in g.nodes() {
            if current.label(v) != sep || g.node_weight(v) as f64 > l_max {
                continue;
            }
            let forced: u64 = g
                .neighbors(v)
                .filter(|&(u, _)| {
                    let l = current.label(u);
                    l != sep && l != b
                })
                .map(|(u, _)| g.node_weight(u))
                .sum();
            if best.map_or(true, |(c, _)| forced < c) {
                best = Some((forced, v));
            }
        }
        match best {
            Some((_, v)) => {
                apply_move(g, &mut current, v, b, b);
            }
            None => {
                // empty separator: pull a light node out of the heaviest block
                let heavy = current.heaviest_block();
                let candidate = g
                    .nodes()
                    .filter(|&v| {
                        current.label(v) == heavy && (g.node_weight(v) as f64) <= l_max
                    })
                    .min_by_key(|&v| {
                        let cost: u64 = g
                            .neighbors(v)
                            .filter(|&(u, _)| current.label(u) == heavy)
                            .map(|(u, _)| g.node_weight(u))
                            .sum();
                        (cost, v)
                    });
                let heavy_nodes = g.nodes().filter(|&v| current.label(v) == heavy).count();
                let Some(v) = candidate.filter(|_| heavy_nodes > 1) else {
                    break;
                };
                current.set_label(g, v, b);
                let fallen: Vec<NodeId> = g
                    .neighbors(v)
                    .filter(|&(u, _)| {
                        let l = current.label(u);
                        l != sep && l != b
                    })
                    .map(|(u, _)| u)
                    .collect();
                for u in fallen {
                    current.set_label(g, u, sep);
                }
            }
        }
    }
    debug_assert!(is_valid(g, &current).valid);
    Ok(current)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(5)
    }

    fn path(n: usize) -> Graph {
        let edges: Vec<_> = (0..n - 1).map(|i| (i as NodeId, i as NodeId + 1, 1)).collect();
        Graph::from_edges(n, &edges, None).unwrap()
    }

    #[test]
    fn preprocess_absorbs_one_block_nodes() {
        // thick separator on P5: node 1 touches only block 0, node 3 only
        // block 1; both get absorbed, node 2 keeps separating
        let g = path(5);
        let sol = SeparatorSolution::from_assignment(&g, 2, 1.0, vec![0, 2, 2, 2, 1]);
        let out = preprocess(&g, &sol);
        assert_eq!(out.separator_nodes(), vec![2]);
        assert!(is_valid(&g, &out).valid);
    }

    #[test]
    fn preprocess_fixed_point() {
        let g = path(3);
        let sol = SeparatorSolution::from_assignment(&g, 2, 0.03, vec![0, 2, 1]);
        assert_eq!(preprocess(&g, &sol), sol);
    }

    #[test]
    fn preprocess_isolated_separator_to_lightest() {
        // two components: an isolated node in S with no non-separator
        // neighbors goes to the lightest block
        let g = Graph::from_edges(4, &[(0, 1, 1), (1, 2, 1)], None).unwrap();
        let sol = SeparatorSolution::from_assignment(&g, 2, 2.0, vec![0, 2, 0, 2]);
        let out = preprocess(&g, &sol);
        // node 3 is isolated in S; lightest block is 1 (empty)
        assert_eq!(out.label(3), 1);
        assert!(is_valid(&g, &out).valid);
    }

    #[test]
    fn preprocess_is_monotone() {
        let g = path(7);
        let sol =
            SeparatorSolution::from_assignment(&g, 2, 1.0, vec![0, 0, 2, 2, 2, 1, 1]);
        let out = preprocess(&g, &sol);
        let before = sol.separator_set();
        let after = out.separator_set();
        assert!(after.is_subset(&before));
        for &s in &after {
            assert!(adjacent_block_count(&g, &out, s) >= 2);
        }
    }

    #[test]
    fn adjoint_pairs_on_block_path() {
        // blocks 0 - S - 1 - S - 2 on P7: pairs (0,1) and (1,2), not (0,2)
        let g = path(7);
        let sol =
            SeparatorSolution::from_assignment(&g, 3, 1.0, vec![0, 0, 3, 1, 3, 2, 2]);
        let pairs = adjoint_pairs(&g, &sol);
        assert_eq!(
            pairs.into_iter().collect::<Vec<_>>(),
            vec![(0, 1), (1, 2)]
        );
    }

    #[test]
    fn pairwise_zero_rounds_is_identity() {
        let g = path(5);
        let sol = SeparatorSolution::from_assignment(&g, 2, 0.5, vec![0, 0, 2, 1, 1]);
        let cfg = RefineConfig {
            rounds_cap: 0,
            ..Default::default()
        };
        assert_eq!(pairwise_local_search(&g, &sol, &cfg, &mut rng()), sol);
    }

    #[test]
    fn pairwise_improves_p9_three_way() {
        // a wasteful 3-way separator on P9; refinement reaches weight 2
        let g = path(9);
        let sol = SeparatorSolution::from_assignment(
            &g,
            3,
            0.03,
            vec![0, 0, 3, 3, 1, 1, 3, 3, 2],
        );
        assert!(is_valid(&g, &sol).balanced);
        let pre = preprocess(&g, &sol);
        let bal = balance(&g, &pre).unwrap();
        let out = pairwise_local_search(&g, &bal, &RefineConfig::default(), &mut rng());
        let report = is_valid(&g, &out);
        assert!(report.valid && report.balanced);
        assert_eq!(out.separator_weight(), 2);
    }

    #[test]
    fn balance_fixed_point() {
        let g = path(5);
        let sol = SeparatorSolution::from_assignment(&g, 2, 0.5, vec![0, 0, 2, 1, 1]);
        let out = balance(&g, &sol).unwrap();
        assert_eq!(out, sol);
    }

    #[test]
    fn balance_moves_along_quotient_path() {
        // block 0 holds 5 of 7 nodes; quotient edge (0,1) lets weight flow
        let g = path(7);
        let sol =
            SeparatorSolution::from_assignment(&g, 2, 0.03, vec![0, 0, 0, 0, 0, 2, 1]);
        assert!(!sol.is_balanced(&g));
        let out = balance(&g, &sol).unwrap();
        let report = is_valid(&g, &out);
        assert!(report.valid && report.balanced);
    }

    #[test]
    fn balance_direct_move_without_path() {
        // two disjoint paths, whole graph in block 0, block 1 empty: no
        // quotient path, so a node moves directly
        let g = Graph::from_edges(6, &[(0, 1, 1), (1, 2, 1), (3, 4, 1), (4, 5, 1)], None)
            .unwrap();
        let sol = SeparatorSolution::from_assignment(&g, 2, 0.03, vec![0; 6]);
        let out = balance(&g, &sol).unwrap();
        let report = is_valid(&g, &out);
        assert!(report.valid && report.balanced);
        assert!(out.block_weight(1) > 0);
    }

    #[test]
    fn balance_rejects_too_many_blocks() {
        let g = path(3);
        let sol = SeparatorSolution::from_assignment(&g, 5, 0.03, vec![0, 1, 2]);
        assert!(balance(&g, &sol).is_err());
    }
}
