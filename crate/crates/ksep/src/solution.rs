//! Separator solutions: per-node block assignment, balance bookkeeping,
//! validation, projection through contraction maps and the quotient graph.

use std::collections::{BTreeMap, BTreeSet};

use crate::graph::{ContractionMap, Graph, NodeId};

/// A k-way node separator. The separator itself is encoded as block id `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct SeparatorSolution {
    pub k: u32,
    pub epsilon: f64,
    assignment: Vec<u32>,
    block_weights: Vec<u64>,
    separator_weight: u64,
}

impl PartialOrd for SeparatorSolution {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        self.separator_weight.partial_cmp(&other.separator_weight)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    /// Edge between two distinct non-separator blocks.
    Edge(NodeId, NodeId),
    /// Block exceeding the balance bound.
    Overweight { block: u32, weight: u64, l_max: f64 },
    /// Cached weights disagree with recomputation.
    StaleCache,
}

#[derive(Debug, Clone)]
pub struct ValidityReport {
    pub valid: bool,
    pub balanced: bool,
    pub violations: Vec<Violation>,
    /// Some block is empty: removal of S then yields fewer than k components.
    pub empty_block_warning: bool,
}

impl SeparatorSolution {
    pub fn separator_label(&self) -> u32 {
        self.k
    }

    /// Builds a solution from an assignment array, computing the cached
    /// weights. Labels must lie in 0..=k.
    pub fn from_assignment(g: &Graph, k: u32, epsilon: f64, assignment: Vec<u32>) -> Self {
        assert_eq!(assignment.len(), g.n());
        let mut block_weights = vec![0u64; k as usize];
        let mut separator_weight = 0u64;
        for (v, &label) in assignment.iter().enumerate() {
            assert!(label <= k, "label {label} out of range for k={k}");
            let w = g.node_weight(v as NodeId);
            if label == k {
                separator_weight += w;
            } else {
                block_weights[label as usize] += w;
            }
        }
        SeparatorSolution {
            k,
            epsilon,
            assignment,
            block_weights,
            separator_weight,
        }
    }

    pub fn assignment(&self) -> &[u32] {
        &self.assignment
    }

    pub fn label(&self, v: NodeId) -> u32 {
        self.assignment[v as usize]
    }

    pub fn is_separator(&self, v: NodeId) -> bool {
        self.assignment[v as usize] == self.k
    }

    pub fn separator_weight(&self) -> u64 {
        self.separator_weight
    }

    pub fn block_weight(&self, block: u32) -> u64 {
        self.block_weights[block as usize]
    }

    pub fn block_weights(&self) -> &[u64] {
        &self.block_weights
    }

    pub fn separator_nodes(&self) -> Vec<NodeId> {
        self.assignment
            .iter()
            .enumerate()
            .filter(|&(_, &l)| l == self.k)
            .map(|(v, _)| v as NodeId)
            .collect()
    }

    pub fn separator_set(&self) -> BTreeSet<NodeId> {
        self.separator_nodes().into_iter().collect()
    }

    /// Balance bound: (1 + epsilon) * ceil(c(V) / k).
    pub fn l_max(&self, g: &Graph) -> f64 {
        l_max(g.total_node_weight(), self.k, self.epsilon)
    }

    /// Relabels node v, keeping the cached weights in sync.
    pub fn set_label(&mut self, g: &Graph, v: NodeId, label: u32) {
        let old = self.assignment[v as usize];
        if old == label {
            return;
        }
        let w = g.node_weight(v);
        if old == self.k {
            self.separator_weight -= w;
        } else {
            self.block_weights[old as usize] -= w;
        }
        if label == self.k {
            self.separator_weight += w;
        } else {
            self.block_weights[label as usize] += w;
        }
        self.assignment[v as usize] = label;
    }

    pub fn is_balanced(&self, g: &Graph) -> bool {
        let bound = self.l_max(g);
        self.block_weights.iter().all(|&w| w as f64 <= bound)
    }

    pub fn heaviest_block(&self) -> u32 {
        (0..self.k)
            .max_by_key(|&b| self.block_weights[b as usize])
            .unwrap()
    }

    pub fn lightest_block(&self) -> u32 {
        (0..self.k)
            .min_by_key(|&b| self.block_weights[b as usize])
            .unwrap()
    }

    /// Arcs whose endpoints carry different labels (cut arcs, including
    /// block-to-separator arcs). Symmetric per-arc flags.
    pub fn cut_arcs(&self, g: &Graph) -> Vec<bool> {
        let mut flags = vec![false; g.arc_count()];
        for u in g.nodes() {
            for arc in g.arcs(u) {
                let v = g.arc_target(arc);
                flags[arc] = self.assignment[u as usize] != self.assignment[v as usize];
            }
        }
        flags
    }

    /// Undirected cut edge set {u, v} with differing labels.
    pub fn cut_edge_set(&self, g: &Graph) -> BTreeSet<(NodeId, NodeId)> {
        let mut set = BTreeSet::new();
        for u in g.nodes() {
            for (v, _) in g.neighbors(u) {
                if u < v && self.assignment[u as usize] != self.assignment[v as usize] {
                    set.insert((u, v));
                }
            }
        }
        set
    }
}

pub fn l_max(total_weight: u64, k: u32, epsilon: f64) -> f64 {
    (1.0 + epsilon) * ((total_weight + k as u64 - 1) / k as u64) as f64
}

/// Validity and balance check. Valid iff no edge joins two distinct
/// non-separator blocks; balanced iff every block respects L_max.
pub fn is_valid(g: &Graph, sol: &SeparatorSolution) -> ValidityReport {
    let mut violations = Vec::new();
    let sep = sol.separator_label();
    for u in g.nodes() {
        for (v, _) in g.neighbors(u) {
            if u < v {
                let (a, b) = (sol.label(u), sol.label(v));
                if a != b && a != sep && b != sep {
                    violations.push(Violation::Edge(u, v));
                }
            }
        }
    }
    let valid = violations.is_empty();
    let recomputed =
        SeparatorSolution::from_assignment(g, sol.k, sol.epsilon, sol.assignment().to_vec());
    if recomputed.separator_weight != sol.separator_weight
        || recomputed.block_weights != sol.block_weights
    {
        violations.push(Violation::StaleCache);
    }
    let bound = sol.l_max(g);
    let mut balanced = true;
    for b in 0..sol.k {
        let w = sol.block_weight(b);
        if w as f64 > bound {
            balanced = false;
            violations.push(Violation::Overweight {
                block: b,
                weight: w,
                l_max: bound,
            });
        }
    }
    let empty_block_warning = (0..sol.k).any(|b| sol.block_weight(b) == 0);
    ValidityReport {
        valid: valid && !violations.iter().any(|v| matches!(v, Violation::StaleCache)),
        balanced,
        violations,
        empty_block_warning,
    }
}

/// Transfers a coarse solution to the fine graph: every fine node takes the
/// label of its coarse node. Weights are unchanged by projection.
pub fn project_solution(coarse_sol: &SeparatorSolution, map: &ContractionMap) -> SeparatorSolution {
    let assignment: Vec<u32> = map
        .fine_to_coarse
        .iter()
        .map(|&c| coarse_sol.label(c))
        .collect();
    SeparatorSolution {
        k: coarse_sol.k,
        epsilon: coarse_sol.epsilon,
        assignment,
        block_weights: coarse_sol.block_weights.clone(),
        separator_weight: coarse_sol.separator_weight,
    }
}

/// Quotient graph on blocks: an edge joins two blocks iff some separator node
/// has non-separator neighbors in both (adjoint blocks). Witness lists record
/// those directly-separating nodes per pair.
#[derive(Debug, Clone)]
pub struct QuotientGraph {
    pub k: u32,
    pub edges: BTreeSet<(u32, u32)>,
    pub witnesses: BTreeMap<(u32, u32), Vec<NodeId>>,
}

impl QuotientGraph {
    pub fn neighbors(&self, block: u32) -> Vec<u32> {
        self.edges
            .iter()
            .filter_map(|&(a, b)| {
                if a == block {
                    Some(b)
                } else if b == block {
                    Some(a)
                } else {
                    None
                }
            })
            .collect()
    }
}

pub fn quotient(g: &Graph, sol: &SeparatorSolution) -> QuotientGraph {
    let sep = sol.separator_label();
    let mut edges = BTreeSet::new();
    let mut witnesses: BTreeMap<(u32, u32), Vec<NodeId>> = BTreeMap::new();
    for s in g.nodes() {
        if sol.label(s) != sep {
            continue;
        }
        let mut blocks: BTreeSet<u32> = BTreeSet::new();
        for (u, _) in g.neighbors(s) {
            let l = sol.label(u);
            if l != sep {
                blocks.insert(l);
            }
        }
        let blocks: Vec<u32> = blocks.into_iter().collect();
        for i in 0..blocks.len() {
            for j in i + 1..blocks.len() {
                let pair = (blocks[i], blocks[j]);
                edges.insert(pair);
                witnesses.entry(pair).or_default().push(s);
            }
        }
    }
    QuotientGraph {
        k: sol.k,
        edges,
        witnesses,
    }
}
