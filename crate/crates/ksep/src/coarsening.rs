//! Coarsening: edge ratings, the global path algorithm (GPA) for weighted
//! matchings, and multilevel hierarchy construction.
//!
//! GPA scans edges in order of decreasing rating, growing a collection of
//! paths and even-length cycles, then picks the maximum-rating matching on
//! each segment by dynamic programming.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::graph::{contract_with_blocked, ContractionMap, Graph, NodeId};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rating {
    /// omega(e)^2 / (c(u) * c(v))
    Expansion2,
    /// omega(e)
    Weight,
}

impl std::str::FromStr for Rating {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "expansion2" => Ok(Rating::Expansion2),
            "weight" => Ok(Rating::Weight),
            other => Err(format!("unknown rating function '{other}'")),
        }
    }
}

/// Rates every undirected edge of g, aligned with `g.edges()` order.
pub fn rate_edges(g: &Graph, rating: Rating) -> Vec<f64> {
    g.edges()
        .iter()
        .map(|&(u, v, w)| match rating {
            Rating::Expansion2 => {
                (w * w) as f64 / (g.node_weight(u) * g.node_weight(v)) as f64
            }
            Rating::Weight => w as f64,
        })
        .collect()
}

struct UnionFind {
    parent: Vec<u32>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n as u32).collect(),
        }
    }
    fn find(&mut self, v: u32) -> u32 {
        let mut root = v;
        while self.parent[root as usize] != root {
            root = self.parent[root as usize];
        }
        let mut cur = v;
        while self.parent[cur as usize] != root {
            let next = self.parent[cur as usize];
            self.parent[cur as usize] = root;
            cur = next;
        }
        root
    }
    fn union(&mut self, a: u32, b: u32) -> u32 {
        let (ra, rb) = (self.find(a), self.find(b));
        self.parent[ra as usize] = rb;
        rb
    }
}

/// Maximum-rating matching of a path given its edge ratings, via the classic
/// take-or-skip DP. Returns the selected edge positions.
fn path_dp(ratings: &[f64]) -> (f64, Vec<usize>) {
    let l = ratings.len();
    if l == 0 {
        return (0.0, vec![]);
    }
    let mut best = vec![0.0f64; l + 1];
    let mut take = vec![false; l + 1];
    for i in 1..=l {
        let skip = best[i - 1];
        let with = if i >= 2 { best[i - 2] } else { 0.0 } + ratings[i - 1];
        if with > skip {
            best[i] = with;
            take[i] = true;
        } else {
            best[i] = skip;
        }
    }
    let mut chosen = Vec::new();
    let mut i = l;
    while i > 0 {
        if take[i] {
            chosen.push(i - 1);
            i = i.saturating_sub(2);
        } else {
            i -= 1;
        }
    }
    chosen.reverse();
    (best[l], chosen)
}

/// Maximum-rating matching of a cycle: either the first edge is excluded
/// (path DP on the rest) or included (its neighbors are excluded).
fn cycle_dp(ratings: &[f64]) -> Vec<usize> {
    let l = ratings.len();
    debug_assert!(l >= 2);
    let (without_first, sel_a) = path_dp(&ratings[1..]);
    let (with_first_inner, sel_b) = if l > 3 {
        path_dp(&ratings[2..l - 1])
    } else {
        (0.0, vec![])
    };
    let with_first = ratings[0] + with_first_inner;
    if with_first > without_first {
        let mut out = vec![0];
        out.extend(sel_b.into_iter().map(|i| i + 2));
        out
    } else {
        sel_a.into_iter().map(|i| i + 1).collect()
    }
}

/// Computes a matching of g by GPA. `blocked` is a per-arc flag; blocked
/// edges never enter the path/cycle structure. Ties in the edge ordering are
/// broken by a random shuffle before the stable sort.
pub fn gpa_matching<R: Rng>(
    g: &Graph,
    ratings: &[f64],
    blocked: &[bool],
    rng: &mut R,
) -> Vec<(NodeId, NodeId)> {
    let edges = g.edges();
    assert_eq!(ratings.len(), edges.len());
    // Arc lookup for the blocked check: first arc of each (u,v) with u < v.
    let mut edge_blocked = vec![false; edges.len()];
    {
        let mut idx = 0;
        for u in g.nodes() {
            for arc in g.arcs(u) {
                let v = g.arc_target(arc);
                if u < v {
                    debug_assert_eq!((edges[idx].0, edges[idx].1), (u, v));
                    edge_blocked[idx] = blocked[arc];
                    idx += 1;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..edges.len()).collect();
    order.shuffle(rng);
    order.sort_by(|&a, &b| ratings[b].total_cmp(&ratings[a]));

    let n = g.n();
    let mut deg = vec![0u8; n];
    let mut uf = UnionFind::new(n);
    let mut comp_edges = vec![0u32; n]; // indexed by current root
    let mut is_cycle = vec![false; n];
    let mut incident: Vec<Vec<usize>> = vec![Vec::new(); n];

    for &e in &order {
        if edge_blocked[e] {
            continue;
        }
        let (u, v, _) = edges[e];
        let (ui, vi) = (u as usize, v as usize);
        if deg[ui] >= 2 || deg[vi] >= 2 {
            continue;
        }
        let (ru, rv) = (uf.find(u), uf.find(v));
        if ru == rv {
            // Closing a cycle; only even cycles are admitted.
            if is_cycle[ru as usize] || (comp_edges[ru as usize] + 1) % 2 != 0 {
                continue;
            }
            is_cycle[ru as usize] = true;
            comp_edges[ru as usize] += 1;
        } else {
            if is_cycle[ru as usize] || is_cycle[rv as usize] {
                continue;
            }
            let total = comp_edges[ru as usize] + comp_edges[rv as usize] + 1;
            let root = uf.union(ru, rv);
            comp_edges[root as usize] = total;
        }
        deg[ui] += 1;
        deg[vi] += 1;
        incident[ui].push(e);
        incident[vi].push(e);
    }

    // Walk each segment and run the DP.
    let mut matching = Vec::new();
    let mut visited_edge = vec![false; edges.len()];
    let other = |e: usize, v: NodeId| -> NodeId {
        let (a, b, _) = edges[e];
        if a == v {
            b
        } else {
            a
        }
    };
    let mut handle_segment = |segment: &[usize], cyclic: bool| {
        let seg_ratings: Vec<f64> = segment.iter().map(|&e| ratings[e]).collect();
        let chosen = if cyclic {
            cycle_dp(&seg_ratings)
        } else {
            path_dp(&seg_ratings).1
        };
        for i in chosen {
            let (a, b, _) = edges[segment[i]];
            matching.push((a, b));
        }
    };
    // Paths: start from nodes of structure-degree 1.
    for start in 0..n {
        if deg[start] != 1 {
            continue;
        }
        let first = incident[start][0];
        if visited_edge[first] {
            continue;
        }
        let mut segment = Vec::new();
        let mut node = start as NodeId;
        let mut edge = first;
        loop {
            visited_edge[edge] = true;
            segment.push(edge);
            let next = other(edge, node);
            let next_edge = incident[next as usize]
                .iter()
                .copied()
                .find(|&e| !visited_edge[e]);
            match next_edge {
                Some(e) => {
                    node = next;
                    edge = e;
                }
                None => break,
            }
        }
        handle_segment(&segment, false);
    }
    // Remaining structures are cycles.
    for start in 0..n {
        if deg[start] != 2 {
            continue;
        }
        let first = incident[start][0];
        if visited_edge[first] {
            continue;
        }
        let mut segment = Vec::new();
        let mut node = start as NodeId;
        let mut edge = first;
        loop {
            visited_edge[edge] = true;
            segment.push(edge);
            node = other(edge, node);
            match incident[node as usize].iter().copied().find(|&e| !visited_edge[e]) {
                Some(e) => edge = e,
                None => break,
            }
        }
        handle_segment(&segment, true);
    }
    matching.sort_unstable();
    matching
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopRule {
    /// Stop once the coarsest graph has at most this many nodes.
    NodeThreshold(usize),
    /// Coarsen until no unblocked edge can be matched.
    NoContractibleEdge,
}

/// A coarsening hierarchy. Level 0 is the input graph; level l+1 is the
/// contraction of level l by its matching. Blocked arcs are carried level to
/// level (a coarse arc is blocked if any merged fine arc was).
#[derive(Debug)]
pub struct Hierarchy {
    input: Graph,
    pub maps: Vec<ContractionMap>,
    pub matchings: Vec<Vec<(NodeId, NodeId)>>,
    pub blocked: Vec<Vec<bool>>,
}

impl Hierarchy {
    pub fn levels(&self) -> usize {
        self.maps.len() + 1
    }

    pub fn graph(&self, level: usize) -> &Graph {
        if level == 0 {
            &self.input
        } else {
            &self.maps[level - 1].coarse
        }
    }

    pub fn coarsest(&self) -> &Graph {
        self.graph(self.levels() - 1)
    }

    pub fn coarsest_blocked(&self) -> &[bool] {
        self.blocked.last().unwrap()
    }
}

pub fn build_hierarchy<R: Rng>(
    g: &Graph,
    blocked: &[bool],
    stop: StopRule,
    rating: Rating,
    rng: &mut R,
) -> Hierarchy {
    let mut hierarchy = Hierarchy {
        input: g.clone(),
        maps: Vec::new(),
        matchings: Vec::new(),
        blocked: vec![blocked.to_vec()],
    };
    loop {
        let current = hierarchy.graph(hierarchy.levels() - 1);
        if let StopRule::NodeThreshold(t) = stop {
            if current.n() <= t {
                break;
            }
        }
        let ratings = rate_edges(current, rating);
        let matching = gpa_matching(current, &ratings, hierarchy.coarsest_blocked(), rng);
        if matching.is_empty() {
            break; // no progress possible
        }
        let (map, coarse_blocked) =
            contract_with_blocked(current, &matching, hierarchy.coarsest_blocked())
                .expect("GPA output is a valid matching");
        hierarchy.maps.push(map);
        hierarchy.matchings.push(matching);
        hierarchy.blocked.push(coarse_blocked);
    }
    hierarchy
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(7)
    }

    fn path(n: usize) -> Graph {
        let edges: Vec<_> = (0..n - 1).map(|i| (i as NodeId, i as NodeId + 1, 1)).collect();
        Graph::from_edges(n, &edges, None).unwrap()
    }

    #[test]
    fn expansion2_unit_graph_all_ones() {
        let g = path(4);
        let ratings = rate_edges(&g, Rating::Expansion2);
        assert!(ratings.iter().all(|&r| (r - 1.0).abs() < 1e-12));
    }

    #[test]
    fn expansion2_formula() {
        let g = Graph::from_edges(2, &[(0, 1, 2)], Some(vec![1, 4])).unwrap();
        let ratings = rate_edges(&g, Rating::Expansion2);
        assert!((ratings[0] - 1.0).abs() < 1e-12); // 4 / 4
    }

    #[test]
    fn weight_rating() {
        let g = Graph::from_edges(2, &[(0, 1, 5)], None).unwrap();
        assert_eq!(rate_edges(&g, Rating::Weight), vec![5.0]);
    }

    #[test]
    fn p4_picks_outer_edges() {
        // ratings [5, 6, 5]: optimum is the two outer edges, total 10
        let g = path(4);
        let ratings = vec![5.0, 6.0, 5.0];
        let m = gpa_matching(&g, &ratings, &vec![false; g.arc_count()], &mut rng());
        assert_eq!(m, vec![(0, 1), (2, 3)]);
    }

    #[test]
    fn blocked_single_edge_gives_empty_matching() {
        let g = Graph::from_edges(2, &[(0, 1, 1)], None).unwrap();
        let ratings = rate_edges(&g, Rating::Weight);
        let m = gpa_matching(&g, &ratings, &vec![true; g.arc_count()], &mut rng());
        assert!(m.is_empty());
    }

    #[test]
    fn c4_perfect_matching() {
        let g =
            Graph::from_edges(4, &[(0, 1, 1), (1, 2, 1), (2, 3, 1), (0, 3, 1)], None).unwrap();
        let ratings = rate_edges(&g, Rating::Weight);
        let m = gpa_matching(&g, &ratings, &vec![false; g.arc_count()], &mut rng());
        assert_eq!(m.len(), 2);
        let mut nodes: Vec<_> = m.iter().flat_map(|&(a, b)| [a, b]).collect();
        nodes.sort_unstable();
        assert_eq!(nodes, vec![0, 1, 2, 3]);
    }

    #[test]
    fn p8_hierarchy_shrinks_to_two() {
        let g = path(8);
        let h = build_hierarchy(
            &g,
            &vec![false; g.arc_count()],
            StopRule::NodeThreshold(2),
            Rating::Expansion2,
            &mut rng(),
        );
        let sizes: Vec<_> = (0..h.levels()).map(|l| h.graph(l).n()).collect();
        assert_eq!(sizes, vec![8, 4, 2]);
    }

    #[test]
    fn all_blocked_single_level() {
        let g = path(5);
        let h = build_hierarchy(
            &g,
            &vec![true; g.arc_count()],
            StopRule::NoContractibleEdge,
            Rating::Expansion2,
            &mut rng(),
        );
        assert_eq!(h.levels(), 1);
    }

    #[test]
    fn hierarchy_conserves_total_weight() {
        let g = path(20);
        let h = build_hierarchy(
            &g,
            &vec![false; g.arc_count()],
            StopRule::NodeThreshold(3),
            Rating::Expansion2,
            &mut rng(),
        );
        for l in 0..h.levels() {
            assert_eq!(h.graph(l).total_node_weight(), g.total_node_weight());
        }
    }

    #[test]
    fn determinism_under_fixed_seed() {
        let g = path(30);
        let run = || {
            let mut r = ChaCha8Rng::seed_from_u64(99);
            let h = build_hierarchy(
                &g,
                &vec![false; g.arc_count()],
                StopRule::NodeThreshold(4),
                Rating::Expansion2,
                &mut r,
            );
            h.matchings.clone()
        };
        assert_eq!(run(), run());
    }
}
