//! 2-way separator improvement: node-capacitated flow problems over a region
//! around the separator, localized FM search, and conversion of edge-cut
//! bipartitions into node separators.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap, VecDeque};

use rand::Rng;
use thiserror::Error;

use crate::dinic::Dinic;
use crate::graph::{Graph, NodeId};
use crate::solution::SeparatorSolution;

#[derive(Debug, Error, PartialEq)]
pub enum RefineError {
    #[error("nothing to refine: separator is empty")]
    NothingToRefine,
}

/// Node-split flow network over a region A. Each region node v becomes an
/// in/out pair joined by an arc of capacity c(v); region edges become
/// infinite arcs in both directions, so every min cut consists of node-split
/// arcs only.
#[derive(Debug, Clone)]
pub struct FlowProblem {
    pub region: Vec<NodeId>,
    pub source_attach: Vec<NodeId>,
    pub sink_attach: Vec<NodeId>,
    index: HashMap<NodeId, usize>,
    inf: u64,
}

/// Result of solving a flow problem: the max-flow value, the min-cut node
/// set, and the source/sink sides of the region.
#[derive(Debug, Clone)]
pub struct FlowCut {
    pub value: u64,
    pub min_cut_nodes: Vec<NodeId>,
    pub source_side: Vec<NodeId>,
    pub sink_side: Vec<NodeId>,
}

impl FlowProblem {
    pub fn build(
        g: &Graph,
        region: Vec<NodeId>,
        source_attach: Vec<NodeId>,
        sink_attach: Vec<NodeId>,
    ) -> Self {
        let index: HashMap<NodeId, usize> =
            region.iter().enumerate().map(|(i, &v)| (v, i)).collect();
        FlowProblem {
            region,
            source_attach,
            sink_attach,
            index,
            inf: g.total_node_weight() + 1,
        }
    }

    fn node_in(&self, v: NodeId) -> usize {
        2 * self.index[&v]
    }

    fn node_out(&self, v: NodeId) -> usize {
        2 * self.index[&v] + 1
    }
}

/// Solves the flow problem exactly. The returned value always equals the
/// total weight of the returned cut nodes (strong duality).
pub fn max_flow(g: &Graph, fp: &FlowProblem) -> FlowCut {
    let n = fp.region.len();
    let s = 2 * n;
    let t = 2 * n + 1;
    let mut dinic = Dinic::new(2 * n + 2);
    for &v in &fp.region {
        dinic.add_arc(fp.node_in(v), fp.node_out(v), g.node_weight(v));
    }
    for &v in &fp.region {
        for (u, _) in g.neighbors(v) {
            if fp.index.contains_key(&u) {
                dinic.add_arc(fp.node_out(v), fp.node_in(u), fp.inf);
            }
        }
    }
    for &v in &fp.source_attach {
        dinic.add_arc(s, fp.node_in(v), fp.inf);
    }
    for &v in &fp.sink_attach {
        dinic.add_arc(fp.node_out(v), t, fp.inf);
    }
    let value = dinic.max_flow(s, t);
    let reach = dinic.source_side(s);
    let mut min_cut_nodes = Vec::new();
    let mut source_side = Vec::new();
    let mut sink_side = Vec::new();
    for &v in &fp.region {
        let in_reach = reach[fp.node_in(v)];
        let out_reach = reach[fp.node_out(v)];
        if in_reach && !out_reach {
            min_cut_nodes.push(v);
        } else if out_reach {
            source_side.push(v);
        } else {
            sink_side.push(v);
        }
    }
    let cut_weight: u64 = min_cut_nodes.iter().map(|&v| g.node_weight(v)).sum();
    assert_eq!(value, cut_weight, "min cut must consist of node-split arcs");
    FlowCut {
        value,
        min_cut_nodes,
        source_side,
        sink_side,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RegionMode {
    /// Budgets sized so that every min cut yields a balanced solution.
    Strict,
    /// Budgets scaled by alpha; cuts may be imbalanced.
    Aggressive(f64),
}

/// A flow region for a 2-way solution, remembering which block sits on the
/// source side.
#[derive(Debug, Clone)]
pub struct RegionProblem {
    pub fp: FlowProblem,
    pub source_block: u32,
    pub sink_block: u32,
}

/// Grows the region A around the separator: one BFS into each block, each
/// stopped when its weight budget is exhausted. In strict mode the budget for
/// growth into block b is l_max - c(other block) - c(S), which guarantees
/// that any min cut of the region yields a balanced solution.
pub fn construct_flow_region(
    g: &Graph,
    sol: &SeparatorSolution,
    mode: RegionMode,
    l_max: f64,
) -> Result<RegionProblem, RefineError> {
    assert_eq!(sol.k, 2);
    let separator = sol.separator_nodes();
    if separator.is_empty() {
        return Err(RefineError::NothingToRefine);
    }
    // Source side is the heavier block (ties toward block 0).
    let (source_block, sink_block) = if sol.block_weight(1) > sol.block_weight(0) {
        (1, 0)
    } else {
        (0, 1)
    };
    let sep_weight = sol.separator_weight() as f64;
    let budget = |into_block: u32| -> f64 {
        let other = if into_block == source_block {
            sink_block
        } else {
            source_block
        };
        let strict = l_max - sol.block_weight(other) as f64 - sep_weight;
        match mode {
            RegionMode::Strict => strict.max(0.0),
            RegionMode::Aggressive(alpha) => (alpha * strict).max(0.0),
        }
    };

    let mut in_region = vec![false; g.n()];
    let mut region = separator.clone();
    for &v in &separator {
        in_region[v as usize] = true;
    }
    for block in [source_block, sink_block] {
        let budget = budget(block);
        let mut consumed = 0.0f64;
        let mut queue: VecDeque<NodeId> = separator.iter().copied().collect();
        let mut stopped = false;
        while let Some(v) = queue.pop_front() {
            if stopped {
                break;
            }
            for (u, _) in g.neighbors(v) {
                if in_region[u as usize] || sol.label(u) != block {
                    continue;
                }
                let w = g.node_weight(u) as f64;
                if consumed + w > budget {
                    stopped = true;
                    break;
                }
                consumed += w;
                in_region[u as usize] = true;
                region.push(u);
                queue.push_back(u);
            }
        }
    }
    region.sort_unstable();
    // Border attachments: region nodes with a neighbor in the corresponding
    // block outside the region.
    let mut source_attach = Vec::new();
    let mut sink_attach = Vec::new();
    for &v in &region {
        let mut to_source = false;
        let mut to_sink = false;
        for (u, _) in g.neighbors(v) {
            if in_region[u as usize] {
                continue;
            }
            if sol.label(u) == source_block {
                to_source = true;
            } else if sol.label(u) == sink_block {
                to_sink = true;
            }
        }
        if to_source {
            source_attach.push(v);
        }
        if to_sink {
            sink_attach.push(v);
        }
    }
    Ok(RegionProblem {
        fp: FlowProblem::build(g, region, source_attach, sink_attach),
        source_block,
        sink_block,
    })
}

/// Applies a solved region cut back to the full graph.
pub fn apply_cut(
    g: &Graph,
    sol: &SeparatorSolution,
    rp: &RegionProblem,
    cut: &FlowCut,
) -> SeparatorSolution {
    let mut assignment = sol.assignment().to_vec();
    for &v in &cut.source_side {
        assignment[v as usize] = rp.source_block;
    }
    for &v in &cut.sink_side {
        assignment[v as usize] = rp.sink_block;
    }
    for &v in &cut.min_cut_nodes {
        assignment[v as usize] = sol.separator_label();
    }
    SeparatorSolution::from_assignment(g, sol.k, sol.epsilon, assignment)
}

fn balanced_under(sol: &SeparatorSolution, l_max: f64) -> bool {
    sol.block_weights().iter().all(|&w| w as f64 <= l_max)
}

#[derive(Debug, Clone, Copy)]
pub struct FlowConfig {
    pub alpha: f64,
    pub max_halvings: u32,
}

impl Default for FlowConfig {
    fn default() -> Self {
        FlowConfig {
            alpha: 2.0,
            max_halvings: 3,
        }
    }
}

/// Flow-based improvement for a 2-way solution: aggressive regions first,
/// halving alpha on imbalanced outcomes, then the strict region, then the
/// input unchanged. Never returns a heavier separator than the input.
pub fn flow_improve_2way(
    g: &Graph,
    sol: &SeparatorSolution,
    l_max: f64,
    cfg: FlowConfig,
) -> SeparatorSolution {
    assert_eq!(sol.k, 2);
    let try_mode = |mode: RegionMode| -> Option<SeparatorSolution> {
        let rp = construct_flow_region(g, sol, mode, l_max).ok()?;
        let cut = max_flow(g, &rp.fp);
        let candidate = apply_cut(g, sol, &rp, &cut);
        if balanced_under(&candidate, l_max)
            && candidate.separator_weight() <= sol.separator_weight()
        {
            Some(candidate)
        } else {
            None
        }
    };
    let mut alpha = cfg.alpha;
    for _ in 0..=cfg.max_halvings {
        if let Some(candidate) = try_mode(RegionMode::Aggressive(alpha)) {
            return candidate;
        }
        alpha /= 2.0;
    }
    if let Some(candidate) = try_mode(RegionMode::Strict) {
        return candidate;
    }
    sol.clone()
}

/// Localized FM search on a 2-way separator, seeded with a subset of the
/// separator. The gain of moving v into block b is c(v) minus the weight of
/// the opposite-block neighbors that must join the separator. Each node
/// leaves the separator at most once per call; the best snapshot seen is
/// returned.
pub fn fm_local_search<R: Rng>(
    g: &Graph,
    sol: &SeparatorSolution,
    start_nodes: &[NodeId],
    l_max: f64,
    max_unsuccessful: u32,
    rng: &mut R,
) -> SeparatorSolution {
    assert_eq!(sol.k, 2);
    let sep = sol.separator_label();
    let mut current = sol.clone();
    let mut best = sol.clone();
    let mut moved = vec![false; g.n()];
    // Max-heap over (gain, random tiebreak, node, target block).
    let mut queue: BinaryHeap<(i64, Reverse<u64>, NodeId, u32)> = BinaryHeap::new();

    let gain_of = |cur: &SeparatorSolution, v: NodeId, b: u32| -> i64 {
        let other = 1 - b;
        let forced: u64 = g
            .neighbors(v)
            .filter(|&(u, _)| cur.label(u) == other)
            .map(|(u, _)| g.node_weight(u))
            .sum();
        g.node_weight(v) as i64 - forced as i64
    };
    let push = |queue: &mut BinaryHeap<_>, cur: &SeparatorSolution, v: NodeId, rng: &mut R| {
        for b in 0..2u32 {
            queue.push((gain_of(cur, v, b), Reverse(rng.gen::<u64>()), v, b));
        }
    };
    for &v in start_nodes {
        assert_eq!(sol.label(v), sep, "start nodes must lie in the separator");
        push(&mut queue, &current, v, rng);
    }

    let mut unsuccessful = 0u32;
    while let Some((gain, _, v, b)) = queue.pop() {
        if unsuccessful >= max_unsuccessful {
            break;
        }
        if moved[v as usize] || current.label(v) != sep {
            continue;
        }
        let fresh = gain_of(&current, v, b);
        if fresh != gain {
            queue.push((fresh, Reverse(rng.gen::<u64>()), v, b));
            continue;
        }
        if current.block_weight(b) as f64 + g.node_weight(v) as f64 > l_max {
            continue; // balance would break; drop this move
        }
        // Move v out of the separator; opposite-block neighbors fall in.
        current.set_label(g, v, b);
        moved[v as usize] = true;
        let other = 1 - b;
        let fallen: Vec<NodeId> = g
            .neighbors(v)
            .filter(|&(u, _)| current.label(u) == other)
            .map(|(u, _)| u)
            .collect();
        for u in fallen {
            current.set_label(g, u, sep);
            if !moved[u as usize] {
                push(&mut queue, &current, u, rng);
            }
        }
        if current.separator_weight() < best.separator_weight() {
            best = current.clone();
            unsuccessful = 0;
        } else {
            unsuccessful += 1;
        }
    }
    debug_assert!(best.separator_weight() <= sol.separator_weight());
    best
}

/// Converts an edge-cut bipartition into a 2-way node separator by taking a
/// minimum-weight vertex cover of the bipartite subgraph induced by the cut
/// edges (computed via max-flow).
pub fn separator_from_boundary(g: &Graph, side: &[u32], epsilon: f64) -> SeparatorSolution {
    assert_eq!(side.len(), g.n());
    let mut cut_edges = Vec::new();
    for u in g.nodes() {
        for (v, _) in g.neighbors(u) {
            if u < v && side[u as usize] != side[v as usize] {
                let (l, r) = if side[u as usize] == 0 { (u, v) } else { (v, u) };
                cut_edges.push((l, r));
            }
        }
    }
    let cover = min_vertex_cover(g, &cut_edges);
    let mut assignment: Vec<u32> = side.to_vec();
    for v in cover {
        assignment[v as usize] = 2;
    }
    SeparatorSolution::from_assignment(g, 2, epsilon, assignment)
}

/// Minimum-weight vertex cover of a bipartite edge set, by Koenig duality on
/// a max-flow network: s -> left with c(v), left -> right with infinity,
/// right -> t with c(v).
pub fn min_vertex_cover(g: &Graph, cut_edges: &[(NodeId, NodeId)]) -> Vec<NodeId> {
    let mut left: Vec<NodeId> = cut_edges.iter().map(|&(l, _)| l).collect();
    let mut right: Vec<NodeId> = cut_edges.iter().map(|&(_, r)| r).collect();
    left.sort_unstable();
    left.dedup();
    right.sort_unstable();
    right.dedup();
    let l_index: HashMap<NodeId, usize> = left.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let r_index: HashMap<NodeId, usize> = right.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let nl = left.len();
    let nr = right.len();
    let s = nl + nr;
    let t = s + 1;
    let inf = g.total_node_weight() + 1;
    let mut dinic = Dinic::new(nl + nr + 2);
    for (i, &v) in left.iter().enumerate() {
        dinic.add_arc(s, i, g.node_weight(v));
    }
    for (i, &v) in right.iter().enumerate() {
        dinic.add_arc(nl + i, t, g.node_weight(v));
    }
    for &(l, r) in cut_edges {
        dinic.add_arc(l_index[&l], nl + r_index[&r], inf);
    }
    dinic.max_flow(s, t);
    let reach = dinic.source_side(s);
    let mut cover = Vec::new();
    for (i, &v) in left.iter().enumerate() {
        if !reach[i] {
            cover.push(v);
        }
    }
    for (i, &v) in right.iter().enumerate() {
        if reach[nl + i] {
            cover.push(v);
        }
    }
    cover.sort_unstable();
    cover
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solution::is_valid;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(11)
    }

    fn path(n: usize) -> Graph {
        let edges: Vec<_> = (0..n - 1).map(|i| (i as NodeId, i as NodeId + 1, 1)).collect();
        Graph::from_edges(n, &edges, None).unwrap()
    }

    #[test]
    fn bottleneck_chain() {
        // s -> a -> b -> t with c(a)=2, c(b)=3: value 2, cut {a}
        let g = Graph::from_edges(2, &[(0, 1, 1)], Some(vec![2, 3])).unwrap();
        let fp = FlowProblem::build(&g, vec![0, 1], vec![0], vec![1]);
        let cut = max_flow(&g, &fp);
        assert_eq!(cut.value, 2);
        assert_eq!(cut.min_cut_nodes, vec![0]);
    }

    #[test]
    fn two_disjoint_paths() {
        // two unit-capacity paths from source border to sink border
        let g = Graph::from_edges(4, &[(0, 1, 1), (2, 3, 1)], None).unwrap();
        let fp = FlowProblem::build(&g, vec![0, 1, 2, 3], vec![0, 2], vec![1, 3]);
        let cut = max_flow(&g, &fp);
        assert_eq!(cut.value, 2);
    }

    #[test]
    fn p5_strict_region_is_everything() {
        let g = path(5);
        let sol = SeparatorSolution::from_assignment(&g, 2, 10.0, vec![0, 0, 2, 1, 1]);
        let l_max = sol.l_max(&g);
        let rp = construct_flow_region(&g, &sol, RegionMode::Strict, l_max).unwrap();
        assert_eq!(rp.fp.region, vec![0, 1, 2, 3, 4]);
        assert!(rp.fp.source_attach.is_empty());
        assert!(rp.fp.sink_attach.is_empty());
    }

    #[test]
    fn alpha_one_matches_strict() {
        let g = path(7);
        let sol =
            SeparatorSolution::from_assignment(&g, 2, 0.1, vec![0, 0, 0, 2, 1, 1, 1]);
        let l_max = sol.l_max(&g);
        let strict = construct_flow_region(&g, &sol, RegionMode::Strict, l_max).unwrap();
        let aggr =
            construct_flow_region(&g, &sol, RegionMode::Aggressive(1.0), l_max).unwrap();
        assert_eq!(strict.fp.region, aggr.fp.region);
    }

    #[test]
    fn empty_separator_is_an_error() {
        let g = Graph::from_edges(4, &[(0, 1, 1), (2, 3, 1)], None).unwrap();
        let sol = SeparatorSolution::from_assignment(&g, 2, 1.0, vec![0, 0, 1, 1]);
        let err = construct_flow_region(&g, &sol, RegionMode::Strict, 100.0).unwrap_err();
        assert_eq!(err, RefineError::NothingToRefine);
    }

    #[test]
    fn flow_improve_fixed_point_on_p3() {
        let g = path(3);
        let sol = SeparatorSolution::from_assignment(&g, 2, 0.03, vec![0, 2, 1]);
        let improved = flow_improve_2way(&g, &sol, sol.l_max(&g), FlowConfig::default());
        assert_eq!(improved.separator_weight(), 1);
        assert!(is_valid(&g, &improved).valid);
    }

    #[test]
    fn flow_improve_shrinks_thick_separator() {
        // P7 with a 3-node separator; optimum for a path is 1
        let g = path(7);
        let sol =
            SeparatorSolution::from_assignment(&g, 2, 0.5, vec![0, 0, 2, 2, 2, 1, 1]);
        let improved = flow_improve_2way(&g, &sol, sol.l_max(&g), FlowConfig::default());
        assert_eq!(improved.separator_weight(), 1);
        let report = is_valid(&g, &improved);
        assert!(report.valid && report.balanced);
    }

    #[test]
    fn fm_takes_free_gain() {
        // separator node 1 has all non-separator neighbors in block 0: moving
        // it removes it from S entirely
        let g = Graph::from_edges(4, &[(0, 1, 1), (1, 2, 1), (2, 3, 1)], None).unwrap();
        let sol = SeparatorSolution::from_assignment(&g, 2, 1.0, vec![0, 2, 2, 1]);
        let out = fm_local_search(&g, &sol, &[1, 2], sol.l_max(&g), 50, &mut rng());
        assert_eq!(out.separator_weight(), 1);
        assert!(is_valid(&g, &out).valid);
    }

    #[test]
    fn fm_empty_start_is_identity() {
        let g = path(5);
        let sol = SeparatorSolution::from_assignment(&g, 2, 0.5, vec![0, 0, 2, 1, 1]);
        let out = fm_local_search(&g, &sol, &[], sol.l_max(&g), 50, &mut rng());
        assert_eq!(out, sol);
    }

    #[test]
    fn boundary_star_takes_center() {
        // star K1,3 with center on side 0: cover = center
        let g = Graph::from_edges(4, &[(0, 1, 1), (0, 2, 1), (0, 3, 1)], None).unwrap();
        let sol = separator_from_boundary(&g, &[0, 1, 1, 1], 1.0);
        assert_eq!(sol.separator_nodes(), vec![0]);
        assert_eq!(sol.separator_weight(), 1);
        assert!(is_valid(&g, &sol).valid);
    }

    #[test]
    fn boundary_matching_needs_three() {
        // perfect matching of 3 cut edges: cover size 3
        let g = Graph::from_edges(6, &[(0, 3, 1), (1, 4, 1), (2, 5, 1)], None).unwrap();
        let sol = separator_from_boundary(&g, &[0, 0, 0, 1, 1, 1], 1.0);
        assert_eq!(sol.separator_nodes().len(), 3);
        assert!(is_valid(&g, &sol).valid);
    }
}
