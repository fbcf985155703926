//! Immutable weighted graph in CSR form plus contraction machinery.

use std::collections::HashMap;

use thiserror::Error;

pub type NodeId = u32;

#[derive(Debug, Error, PartialEq)]
pub enum GraphError {
    #[error("self-loop at node {0}")]
    SelfLoop(NodeId),
    #[error("node index {0} out of range (n = {1})")]
    IndexOutOfRange(NodeId, usize),
    #[error("node weight must be >= 1 (node {0})")]
    ZeroNodeWeight(NodeId),
    #[error("edge weight must be >= 1 ({0}, {1})")]
    ZeroEdgeWeight(NodeId, NodeId),
    #[error("matching edges share node {0}")]
    MatchingConflict(NodeId),
    #[error("edge ({0}, {1}) not present in graph")]
    MissingEdge(NodeId, NodeId),
}

/// Undirected graph with positive node and edge weights.
///
/// Stored as symmetric CSR adjacency; every undirected edge appears as two
/// arcs. Parallel edges are merged at construction (weights summed) and
/// self-loops are rejected.
#[derive(Debug, Clone)]
pub struct Graph {
    offsets: Vec<usize>,
    targets: Vec<NodeId>,
    edge_weights: Vec<u64>,
    node_weights: Vec<u64>,
    total_node_weight: u64,
}

impl Graph {
    /// Builds a graph from an undirected edge list. Each edge should appear
    /// once; duplicates (in either orientation) are merged by weight sum.
    pub fn from_edges(
        n: usize,
        edges: &[(NodeId, NodeId, u64)],
        node_weights: Option<Vec<u64>>,
    ) -> Result<Self, GraphError> {
        let node_weights = node_weights.unwrap_or_else(|| vec![1; n]);
        assert_eq!(node_weights.len(), n);
        for (v, &w) in node_weights.iter().enumerate() {
            if w == 0 {
                return Err(GraphError::ZeroNodeWeight(v as NodeId));
            }
        }
        let mut merged: HashMap<(NodeId, NodeId), u64> = HashMap::new();
        for &(u, v, w) in edges {
            if u == v {
                return Err(GraphError::SelfLoop(u));
            }
            if u as usize >= n {
                return Err(GraphError::IndexOutOfRange(u, n));
            }
            if v as usize >= n {
                return Err(GraphError::IndexOutOfRange(v, n));
            }
            if w == 0 {
                return Err(GraphError::ZeroEdgeWeight(u, v));
            }
            let key = (u.min(v), u.max(v));
            *merged.entry(key).or_insert(0) += w;
        }
        let mut degree = vec![0usize; n];
        for &(u, v) in merged.keys() {
            degree[u as usize] += 1;
            degree[v as usize] += 1;
        }
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0);
        for d in &degree {
            offsets.push(offsets.last().unwrap() + d);
        }
        let arc_count = offsets[n];
        let mut targets = vec![0 as NodeId; arc_count];
        let mut edge_weights = vec![0u64; arc_count];
        let mut cursor = offsets[..n].to_vec();
        let mut sorted: Vec<_> = merged.into_iter().collect();
        sorted.sort_unstable();
        for ((u, v), w) in sorted {
            for (a, b) in [(u, v), (v, u)] {
                let pos = cursor[a as usize];
                targets[pos] = b;
                edge_weights[pos] = w;
                cursor[a as usize] += 1;
            }
        }
        // Re-sort each adjacency row by target id.
        for v in 0..n {
            let range = offsets[v]..offsets[v + 1];
            let mut row: Vec<_> = range
                .clone()
                .map(|a| (targets[a], edge_weights[a]))
                .collect();
            row.sort_unstable();
            for (i, (t, w)) in row.into_iter().enumerate() {
                targets[offsets[v] + i] = t;
                edge_weights[offsets[v] + i] = w;
            }
        }
        let total_node_weight = node_weights.iter().sum();
        Ok(Graph {
            offsets,
            targets,
            edge_weights,
            node_weights,
            total_node_weight,
        })
    }

    pub fn n(&self) -> usize {
        self.node_weights.len()
    }

    /// Number of undirected edges.
    pub fn m(&self) -> usize {
        self.targets.len() / 2
    }

    pub fn node_weight(&self, v: NodeId) -> u64 {
        self.node_weights[v as usize]
    }

    pub fn total_node_weight(&self) -> u64 {
        self.total_node_weight
    }

    pub fn degree(&self, v: NodeId) -> usize {
        self.offsets[v as usize + 1] - self.offsets[v as usize]
    }

    /// Arc index range of node v's adjacency row.
    pub fn arcs(&self, v: NodeId) -> std::ops::Range<usize> {
        self.offsets[v as usize]..self.offsets[v as usize + 1]
    }

    pub fn arc_target(&self, arc: usize) -> NodeId {
        self.targets[arc]
    }

    pub fn arc_weight(&self, arc: usize) -> u64 {
        self.edge_weights[arc]
    }

    pub fn arc_count(&self) -> usize {
        self.targets.len()
    }

    pub fn neighbors(&self, v: NodeId) -> impl Iterator<Item = (NodeId, u64)> + '_ {
        self.arcs(v).map(move |a| (self.targets[a], self.edge_weights[a]))
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> {
        0..self.n() as NodeId
    }

    /// Undirected edge list with u < v, in row order.
    pub fn edges(&self) -> Vec<(NodeId, NodeId, u64)> {
        let mut out = Vec::with_capacity(self.m());
        for u in self.nodes() {
            for (v, w) in self.neighbors(u) {
                if u < v {
                    out.push((u, v, w));
                }
            }
        }
        out
    }

    pub fn has_edge(&self, u: NodeId, v: NodeId) -> bool {
        self.neighbors(u).any(|(t, _)| t == v)
    }

    /// Subgraph induced by `nodes`; returns the graph and the map from
    /// subgraph node id to original node id.
    pub fn induced_subgraph(&self, nodes: &[NodeId]) -> (Graph, Vec<NodeId>) {
        let mut index = HashMap::with_capacity(nodes.len());
        for (i, &v) in nodes.iter().enumerate() {
            index.insert(v, i as NodeId);
        }
        let mut edges = Vec::new();
        for &v in nodes {
            for (u, w) in self.neighbors(v) {
                if let Some(&iu) = index.get(&u) {
                    let iv = index[&v];
                    if iv < iu {
                        edges.push((iv, iu, w));
                    }
                }
            }
        }
        let weights = nodes.iter().map(|&v| self.node_weight(v)).collect();
        let g = Graph::from_edges(nodes.len(), &edges, Some(weights)).unwrap();
        (g, nodes.to_vec())
    }
}

/// Result of contracting a matching: the coarse graph plus the fine-to-coarse
/// node map.
#[derive(Debug, Clone)]
pub struct ContractionMap {
    pub fine_to_coarse: Vec<NodeId>,
    pub coarse: Graph,
}

impl ContractionMap {
    pub fn coarse_n(&self) -> usize {
        self.coarse.n()
    }
}

/// Contracts the given matching. Matched pairs become one coarse node with
/// summed weight; parallel coarse edges are merged by weight sum.
pub fn contract(g: &Graph, matching: &[(NodeId, NodeId)]) -> Result<ContractionMap, GraphError> {
    let (map, _) = contract_with_blocked(g, matching, &vec![false; g.arc_count()])?;
    Ok(map)
}

/// Contraction that also propagates per-arc blocked flags: a coarse arc is
/// blocked if any fine arc merged into it was blocked.
pub fn contract_with_blocked(
    g: &Graph,
    matching: &[(NodeId, NodeId)],
    blocked: &[bool],
) -> Result<(ContractionMap, Vec<bool>), GraphError> {
    assert_eq!(blocked.len(), g.arc_count());
    let n = g.n();
    let mut partner: Vec<Option<NodeId>> = vec![None; n];
    for &(u, v) in matching {
        if !g.has_edge(u, v) {
            return Err(GraphError::MissingEdge(u, v));
        }
        if partner[u as usize].is_some() {
            return Err(GraphError::MatchingConflict(u));
        }
        if partner[v as usize].is_some() {
            return Err(GraphError::MatchingConflict(v));
        }
        partner[u as usize] = Some(v);
        partner[v as usize] = Some(u);
    }
    let mut fine_to_coarse = vec![NodeId::MAX; n];
    let mut coarse_weights = Vec::new();
    for v in 0..n as NodeId {
        if fine_to_coarse[v as usize] != NodeId::MAX {
            continue;
        }
        let id = coarse_weights.len() as NodeId;
        fine_to_coarse[v as usize] = id;
        let mut w = g.node_weight(v);
        if let Some(p) = partner[v as usize] {
            fine_to_coarse[p as usize] = id;
            w += g.node_weight(p);
        }
        coarse_weights.push(w);
    }
    let coarse_n = coarse_weights.len();
    // Merge edges and blocked flags on coarse endpoints.
    let mut merged: HashMap<(NodeId, NodeId), (u64, bool)> = HashMap::new();
    for u in g.nodes() {
        for arc in g.arcs(u) {
            let v = g.arc_target(arc);
            if u >= v {
                continue;
            }
            let cu = fine_to_coarse[u as usize];
            let cv = fine_to_coarse[v as usize];
            if cu == cv {
                continue; // contracted matching edge
            }
            let key = (cu.min(cv), cu.max(cv));
            let entry = merged.entry(key).or_insert((0, false));
            entry.0 += g.arc_weight(arc);
            entry.1 |= blocked[arc];
        }
    }
    let edges: Vec<_> = merged.iter().map(|(&(u, v), &(w, _))| (u, v, w)).collect();
    let coarse = Graph::from_edges(coarse_n, &edges, Some(coarse_weights))?;
    let mut coarse_blocked = vec![false; coarse.arc_count()];
    for u in coarse.nodes() {
        for arc in coarse.arcs(u) {
            let v = coarse.arc_target(arc);
            let key = (u.min(v), u.max(v));
            coarse_blocked[arc] = merged[&key].1;
        }
    }
    let map = ContractionMap {
        fine_to_coarse,
        coarse,
    };
    Ok((map, coarse_blocked))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn triangle() -> Graph {
        Graph::from_edges(3, &[(0, 1, 1), (1, 2, 1), (0, 2, 1)], None).unwrap()
    }

    #[test]
    fn from_edges_merges_parallel() {
        let g = Graph::from_edges(2, &[(0, 1, 2), (1, 0, 3)], None).unwrap();
        assert_eq!(g.m(), 1);
        assert_eq!(g.neighbors(0).next(), Some((1, 5)));
    }

    #[test]
    fn from_edges_rejects_self_loop() {
        let err = Graph::from_edges(2, &[(1, 1, 1)], None).unwrap_err();
        assert_eq!(err, GraphError::SelfLoop(1));
    }

    #[test]
    fn contract_triangle_edge() {
        let g = triangle();
        let map = contract(&g, &[(0, 1)]).unwrap();
        assert_eq!(map.coarse_n(), 2);
        let mut weights: Vec<_> = map.coarse.nodes().map(|v| map.coarse.node_weight(v)).collect();
        weights.sort_unstable();
        assert_eq!(weights, vec![1, 2]);
        // the two triangle edges to c merge into one edge of weight 2
        assert_eq!(map.coarse.m(), 1);
        let (_, w) = map.coarse.neighbors(0).next().unwrap();
        assert_eq!(w, 2);
    }

    #[test]
    fn contract_empty_matching_is_copy() {
        let g = triangle();
        let map = contract(&g, &[]).unwrap();
        assert_eq!(map.coarse_n(), 3);
        assert_eq!(map.coarse.m(), 3);
        assert_eq!(map.coarse.total_node_weight(), g.total_node_weight());
    }

    #[test]
    fn contract_p4_middle_edge() {
        let g = Graph::from_edges(4, &[(0, 1, 1), (1, 2, 1), (2, 3, 1)], None).unwrap();
        let map = contract(&g, &[(1, 2)]).unwrap();
        assert_eq!(map.coarse_n(), 3);
        let mid = map.fine_to_coarse[1];
        assert_eq!(map.fine_to_coarse[2], mid);
        assert_eq!(map.coarse.node_weight(mid), 2);
        assert_eq!(map.coarse.m(), 2);
    }

    #[test]
    fn contract_rejects_shared_endpoint() {
        let g = triangle();
        let err = contract(&g, &[(0, 1), (1, 2)]).unwrap_err();
        assert!(matches!(err, GraphError::MatchingConflict(1)));
    }

    #[test]
    fn blocked_flags_propagate() {
        // P4 with the outer edges blocked; contract the middle edge.
        let g = Graph::from_edges(4, &[(0, 1, 1), (1, 2, 1), (2, 3, 1)], None).unwrap();
        let mut blocked = vec![false; g.arc_count()];
        for u in g.nodes() {
            for arc in g.arcs(u) {
                let v = g.arc_target(arc);
                let e = (u.min(v), u.max(v));
                if e == (0, 1) || e == (2, 3) {
                    blocked[arc] = true;
                }
            }
        }
        let (map, coarse_blocked) = contract_with_blocked(&g, &[(1, 2)], &blocked).unwrap();
        assert_eq!(map.coarse_n(), 3);
        assert!(coarse_blocked.iter().all(|&b| b));
    }

    #[test]
    fn total_weight_conserved_under_contraction() {
        let g = Graph::from_edges(
            5,
            &[(0, 1, 1), (1, 2, 1), (2, 3, 1), (3, 4, 1), (0, 4, 1)],
            Some(vec![2, 3, 1, 1, 5]),
        )
        .unwrap();
        let map = contract(&g, &[(0, 1), (2, 3)]).unwrap();
        assert_eq!(map.coarse.total_node_weight(), g.total_node_weight());
    }
}
