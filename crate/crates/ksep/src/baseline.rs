//! Simple baseline: recursive greedy edge bisection into k blocks, then a
//! minimum vertex cover of the cut edges of every adjacent block pair. The
//! union of the covers becomes the separator, followed by a balancing pass.

use std::collections::BTreeMap;
use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::flow_refine::min_vertex_cover;
use crate::graph::{Graph, NodeId};
use crate::kway::balance;
use crate::multilevel::SolveError;
use crate::solution::SeparatorSolution;

/// Greedy BFS bisection of `nodes` by weight ratio `left_parts / parts`,
/// restarting at random unvisited nodes across components.
fn grow_half<R: Rng>(g: &Graph, nodes: &[NodeId], target: f64, rng: &mut R) -> Vec<bool> {
    let member: BTreeSet<NodeId> = nodes.iter().copied().collect();
    let mut in_left = vec![false; g.n()];
    let mut taken: BTreeSet<NodeId> = BTreeSet::new();
    let mut order = nodes.to_vec();
    order.shuffle(rng);
    let mut weight = 0.0f64;
    let mut queue = std::collections::VecDeque::new();
    let mut next_seed = 0usize;
    while weight < target {
        let v = match queue.pop_front() {
            Some(v) => v,
            None => {
                while next_seed < order.len() && taken.contains(&order[next_seed]) {
                    next_seed += 1;
                }
                match order.get(next_seed) {
                    Some(&v) => v,
                    None => break,
                }
            }
        };
        if taken.contains(&v) {
            continue;
        }
        taken.insert(v);
        in_left[v as usize] = true;
        weight += g.node_weight(v) as f64;
        for (u, _) in g.neighbors(v) {
            if member.contains(&u) && !taken.contains(&u) {
                queue.push_back(u);
            }
        }
    }
    in_left
}

fn split_blocks<R: Rng>(
    g: &Graph,
    nodes: &[NodeId],
    parts: u32,
    first_label: u32,
    blocks: &mut [u32],
    rng: &mut R,
) {
    if parts == 1 {
        for &v in nodes {
            blocks[v as usize] = first_label;
        }
        return;
    }
    let left_parts = parts.div_ceil(2);
    let subtotal: u64 = nodes.iter().map(|&v| g.node_weight(v)).sum();
    let target = subtotal as f64 * left_parts as f64 / parts as f64;
    let in_left = grow_half(g, nodes, target, rng);
    let (left, right): (Vec<NodeId>, Vec<NodeId>) =
        nodes.iter().partition(|&&v| in_left[v as usize]);
    split_blocks(g, &left, left_parts, first_label, blocks, rng);
    split_blocks(g, &right, parts - left_parts, first_label + left_parts, blocks, rng);
}

/// Computes a k-way separator by edge-bisecting the graph and covering the
/// cut edges of each adjacent block pair with a minimum vertex cover.
pub fn simple_baseline<R: Rng>(
    g: &Graph,
    k: u32,
    epsilon: f64,
    rng: &mut R,
) -> Result<SeparatorSolution, SolveError> {
    assert!(k >= 1);
    if k as usize > g.n() {
        return Err(SolveError::TooManyBlocks(k, g.n()));
    }
    let mut blocks = vec![0u32; g.n()];
    let nodes: Vec<NodeId> = g.nodes().collect();
    split_blocks(g, &nodes, k, 0, &mut blocks, rng);
    let mut pair_edges: BTreeMap<(u32, u32), Vec<(NodeId, NodeId)>> = BTreeMap::new();
    for (u, v, _) in g.edges() {
        let (a, b) = (blocks[u as usize], blocks[v as usize]);
        if a == b {
            continue;
        }
        // orient every cut edge from the smaller block label to the larger
        let ((a, b), (l, r)) = if a < b { ((a, b), (u, v)) } else { ((b, a), (v, u)) };
        pair_edges.entry((a, b)).or_default().push((l, r));
    }
    let mut separator: BTreeSet<NodeId> = BTreeSet::new();
    for edges in pair_edges.values() {
        separator.extend(min_vertex_cover(g, edges));
    }
    let assignment: Vec<u32> = (0..g.n())
        .map(|v| {
            if separator.contains(&(v as NodeId)) {
                k
            } else {
                blocks[v]
            }
        })
        .collect();
    let sol = SeparatorSolution::from_assignment(g, k, epsilon, assignment);
    balance(g, &sol).map_err(Into::into)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solution::is_valid;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn grid(rows: usize, cols: usize) -> Graph {
        let mut edges = Vec::new();
        let id = |r: usize, c: usize| (r * cols + c) as NodeId;
        for r in 0..rows {
            for c in 0..cols {
                if c + 1 < cols {
                    edges.push((id(r, c), id(r, c + 1), 1));
                }
                if r + 1 < rows {
                    edges.push((id(r, c), id(r + 1, c), 1));
                }
            }
        }
        Graph::from_edges(rows * cols, &edges, None).unwrap()
    }

    fn path(n: usize) -> Graph {
        let edges: Vec<_> = (0..n - 1).map(|i| (i as NodeId, (i + 1) as NodeId, 1)).collect();
        Graph::from_edges(n, &edges, None).unwrap()
    }

    #[test]
    fn baseline_valid_on_grid() {
        let g = grid(8, 8);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for k in [2, 4] {
            let sol = simple_baseline(&g, k, 0.1, &mut rng).unwrap();
            let report = is_valid(&g, &sol);
            assert!(report.valid && report.balanced, "k={k}: {report:?}");
        }
    }

    #[test]
    fn baseline_valid_on_path() {
        let g = path(40);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let sol = simple_baseline(&g, 4, 0.03, &mut rng).unwrap();
        let report = is_valid(&g, &sol);
        assert!(report.valid && report.balanced);
        // a path splits at single nodes; 4 blocks need at most 3 of them
        assert!(sol.separator_weight() <= 6);
    }

    #[test]
    fn baseline_rejects_oversized_k() {
        let g = path(3);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(matches!(
            simple_baseline(&g, 5, 0.1, &mut rng),
            Err(SolveError::TooManyBlocks(5, 3))
        ));
    }

    #[test]
    fn baseline_handles_disconnected_graph() {
        // two disjoint paths of 10 nodes
        let mut edges = Vec::new();
        for i in 0..9 {
            edges.push((i as NodeId, (i + 1) as NodeId, 1));
            edges.push(((10 + i) as NodeId, (11 + i) as NodeId, 1));
        }
        let g = Graph::from_edges(20, &edges, None).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let sol = simple_baseline(&g, 2, 0.1, &mut rng).unwrap();
        let report = is_valid(&g, &sol);
        assert!(report.valid && report.balanced);
    }
}
