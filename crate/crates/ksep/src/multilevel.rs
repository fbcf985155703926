//! Multilevel solver: coarsen, compute an initial separator on the coarsest
//! graph, then uncoarsen with local search per level. Also the iterated
//! V-cycle, which re-coarsens around an existing solution with its cut edges
//! blocked.

use std::collections::VecDeque;

use rand::seq::SliceRandom;
use rand::Rng;
use thiserror::Error;

use crate::coarsening::{build_hierarchy, Hierarchy, Rating, StopRule};
use crate::flow_refine::{flow_improve_2way, fm_local_search, separator_from_boundary};
use crate::graph::{Graph, NodeId};
use crate::kway::{balance, pairwise_local_search, preprocess, BalanceError, RefineConfig};
use crate::solution::{is_valid, project_solution, SeparatorSolution};

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("too many blocks: k = {0} but graph has {1} nodes")]
    TooManyBlocks(u32, usize),
    #[error(transparent)]
    Balance(#[from] BalanceError),
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    /// Coarsening stops at this node count; None means max(1000, 30 k).
    pub coarsest: Option<usize>,
    pub rating: Rating,
    pub refine: RefineConfig,
    /// Independent initial-separator attempts on the coarsest graph.
    pub initial_tries: u32,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            coarsest: None,
            rating: Rating::Expansion2,
            refine: RefineConfig::default(),
            initial_tries: 5,
        }
    }
}

impl SolverConfig {
    pub fn coarsest_threshold(&self, k: u32) -> usize {
        self.coarsest.unwrap_or_else(|| 1000usize.max(30 * k as usize))
    }
}

/// BFS region growing from a random start until the region holds at least
/// `target_weight`; restarts at random unvisited nodes across components.
fn grow_region<R: Rng>(g: &Graph, target_weight: f64, rng: &mut R) -> Vec<bool> {
    let mut in_region = vec![false; g.n()];
    let mut weight = 0.0f64;
    let mut order: Vec<NodeId> = g.nodes().collect();
    order.shuffle(rng);
    let mut queue = VecDeque::new();
    let mut seed_iter = order.into_iter();
    while weight < target_weight {
        let v = match queue.pop_front() {
            Some(v) => v,
            None => match seed_iter.find(|&v| !in_region[v as usize]) {
                Some(v) => v,
                None => break,
            },
        };
        if in_region[v as usize] {
            continue;
        }
        in_region[v as usize] = true;
        weight += g.node_weight(v) as f64;
        for (u, _) in g.neighbors(v) {
            if !in_region[u as usize] {
                queue.push_back(u);
            }
        }
    }
    in_region
}

/// 2-way separator on a (small) graph: greedy edge bisection, boundary to
/// separator conversion, then flow improvement under the given block bound.
fn bisect<R: Rng>(
    g: &Graph,
    epsilon: f64,
    fraction: f64,
    l_max: f64,
    cfg: &SolverConfig,
    rng: &mut R,
) -> SeparatorSolution {
    let target = g.total_node_weight() as f64 * fraction;
    let region = grow_region(g, target, rng);
    let side: Vec<u32> = region.iter().map(|&r| if r { 0 } else { 1 }).collect();
    let sol = separator_from_boundary(g, &side, epsilon);
    let improved = flow_improve_2way(g, &sol, l_max, cfg.refine.flow);
    let starts = improved.separator_nodes();
    if starts.is_empty() {
        return improved;
    }
    let budget = cfg.refine.fm_unsuccessful_factor * starts.len() as u32;
    fm_local_search(g, &improved, &starts, l_max, budget, rng)
}

/// Recursively splits `nodes` (one current block) into `parts` blocks,
/// writing labels starting at `next_id`. Returns the next free block id.
fn split_recursive<R: Rng>(
    g: &Graph,
    assignment: &mut Vec<u32>,
    sep_label: u32,
    nodes: Vec<NodeId>,
    parts: u32,
    next_id: u32,
    epsilon: f64,
    cfg: &SolverConfig,
    rng: &mut R,
) -> u32 {
    if parts <= 1 {
        for &v in &nodes {
            assignment[v as usize] = next_id;
        }
        return next_id + 1;
    }
    if nodes.is_empty() {
        // unavoidable empty blocks; still consume the ids
        return next_id + parts;
    }
    let left_parts = parts.div_ceil(2);
    let right_parts = parts - left_parts;
    let (sub_g, sub_to_orig) = g.induced_subgraph(&nodes);
    let fraction = left_parts as f64 / parts as f64;
    // Generous local bound: the global balance routine runs afterwards.
    let local_l_max = sub_g.total_node_weight() as f64 * fraction.max(1.0 - fraction) * 1.25;
    let sub_sol = bisect(&sub_g, epsilon, fraction, local_l_max, cfg, rng);
    let mut left = Vec::new();
    let mut right = Vec::new();
    for (i, &orig) in sub_to_orig.iter().enumerate() {
        match sub_sol.label(i as NodeId) {
            0 => left.push(orig),
            1 => right.push(orig),
            _ => assignment[orig as usize] = sep_label,
        }
    }
    let next = split_recursive(
        g, assignment, sep_label, left, left_parts, next_id, epsilon, cfg, rng,
    );
    split_recursive(
        g, assignment, sep_label, right, right_parts, next, epsilon, cfg, rng,
    )
}

fn initial_attempt<R: Rng>(
    g: &Graph,
    k: u32,
    epsilon: f64,
    cfg: &SolverConfig,
    rng: &mut R,
) -> Result<SeparatorSolution, SolveError> {
    if k == 1 {
        return Ok(SeparatorSolution::from_assignment(
            g,
            1,
            epsilon,
            vec![0; g.n()],
        ));
    }
    let mut assignment = vec![0u32; g.n()];
    let all: Vec<NodeId> = g.nodes().collect();
    split_recursive(g, &mut assignment, k, all, k, 0, epsilon, cfg, rng);
    let sol = SeparatorSolution::from_assignment(g, k, epsilon, assignment);
    let refined = refine_sequence(g, &sol, cfg, rng)?;
    Ok(refined)
}

/// Valid, balanced k-way separator on a small (post-coarsening) graph.
pub fn initial_separator<R: Rng>(
    g: &Graph,
    k: u32,
    epsilon: f64,
    cfg: &SolverConfig,
    rng: &mut R,
) -> Result<SeparatorSolution, SolveError> {
    assert!(k >= 1);
    if k as usize > g.n() {
        return Err(SolveError::TooManyBlocks(k, g.n()));
    }
    let mut best: Option<SeparatorSolution> = None;
    for _ in 0..cfg.initial_tries.max(1) {
        let candidate = initial_attempt(g, k, epsilon, cfg, rng)?;
        if best
            .as_ref()
            .map_or(true, |b| candidate.separator_weight() < b.separator_weight())
        {
            best = Some(candidate);
        }
    }
    Ok(best.unwrap())
}

/// One uncoarsening refinement step: preprocess, rebalance, then pairwise
/// local search.
pub fn refine_sequence<R: Rng>(
    g: &Graph,
    sol: &SeparatorSolution,
    cfg: &SolverConfig,
    rng: &mut R,
) -> Result<SeparatorSolution, SolveError> {
    let mut current = {
        let pre = preprocess(g, sol);
        let balanced = balance(g, &pre)?;
        pairwise_local_search(g, &balanced, &cfg.refine, rng)
    };
    // Balancing and pairwise refinement can leave separator nodes touching a
    // single block; re-run the sequence while it keeps paying off.
    for _ in 1..cfg.refine.rounds_cap {
        let pre = preprocess(g, &current);
        let balanced = balance(g, &pre)?;
        let next = pairwise_local_search(g, &balanced, &cfg.refine, rng);
        if next.separator_weight() < current.separator_weight() {
            current = next;
        } else {
            break;
        }
    }
    Ok(current)
}

fn uncoarsen<R: Rng>(
    hierarchy: &Hierarchy,
    mut sol: SeparatorSolution,
    cfg: &SolverConfig,
    rng: &mut R,
) -> Result<SeparatorSolution, SolveError> {
    for level in (0..hierarchy.levels() - 1).rev() {
        sol = project_solution(&sol, &hierarchy.maps[level]);
        sol = refine_sequence(hierarchy.graph(level), &sol, cfg, rng)?;
    }
    Ok(sol)
}

/// Full multilevel solve: coarsen to the threshold, compute an initial
/// separator, refine on every level on the way up.
pub fn solve<R: Rng>(
    g: &Graph,
    k: u32,
    epsilon: f64,
    cfg: &SolverConfig,
    rng: &mut R,
) -> Result<SeparatorSolution, SolveError> {
    if k as usize > g.n() {
        return Err(SolveError::TooManyBlocks(k, g.n()));
    }
    let hierarchy = build_hierarchy(
        g,
        &vec![false; g.arc_count()],
        StopRule::NodeThreshold(cfg.coarsest_threshold(k)),
        cfg.rating,
        rng,
    );
    let coarsest = hierarchy.coarsest();
    let initial = initial_separator(coarsest, k, epsilon, cfg, rng)?;
    let sol = uncoarsen(&hierarchy, initial, cfg, rng)?;
    debug_assert!({
        let report = is_valid(g, &sol);
        report.valid && report.balanced
    });
    Ok(sol)
}

/// Pushes a solution down a blocked hierarchy. Every contracted edge was
/// label-uniform, so each coarse node inherits a unique label.
pub fn project_to_coarsest(
    hierarchy: &Hierarchy,
    sol: &SeparatorSolution,
) -> SeparatorSolution {
    let mut labels = sol.assignment().to_vec();
    for level in 0..hierarchy.levels() - 1 {
        let map = &hierarchy.maps[level];
        let coarse_n = map.coarse_n();
        let mut coarse_labels = vec![u32::MAX; coarse_n];
        for (fine, &coarse) in map.fine_to_coarse.iter().enumerate() {
            let label = labels[fine];
            debug_assert!(
                coarse_labels[coarse as usize] == u32::MAX
                    || coarse_labels[coarse as usize] == label,
                "contracted edge crosses labels"
            );
            coarse_labels[coarse as usize] = label;
        }
        labels = coarse_labels;
    }
    SeparatorSolution::from_assignment(
        hierarchy.coarsest(),
        sol.k,
        sol.epsilon,
        labels,
    )
}

/// Iterated multilevel cycle: re-coarsen with the solution's cut edges
/// blocked, seed the coarsest level with the solution itself, refine upward.
/// Never returns a heavier separator than the input.
pub fn vcycle<R: Rng>(
    g: &Graph,
    sol: &SeparatorSolution,
    cfg: &SolverConfig,
    rng: &mut R,
) -> Result<SeparatorSolution, SolveError> {
    let blocked = sol.cut_arcs(g);
    let hierarchy = build_hierarchy(g, &blocked, StopRule::NoContractibleEdge, cfg.rating, rng);
    let coarse_sol = project_to_coarsest(&hierarchy, sol);
    let refined = uncoarsen(&hierarchy, coarse_sol, cfg, rng)?;
    if refined.separator_weight() <= sol.separator_weight() {
        Ok(refined)
    } else {
        Ok(sol.clone())
    }
}
