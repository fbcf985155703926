//! Evolutionary components: population with similarity-based eviction,
//! tournament selection, and the blocked-coarsening combine and mutation
//! operators.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::coarsening::{build_hierarchy, StopRule};
use crate::graph::{Graph, NodeId};
use crate::multilevel::{
    initial_separator, project_to_coarsest, refine_sequence, SolveError, SolverConfig,
};
use crate::solution::{is_valid, project_solution, SeparatorSolution};

#[derive(Debug, Clone)]
pub struct Individual {
    pub solution: SeparatorSolution,
    pub fitness: u64,
    pub birth_round: u64,
}

impl Individual {
    pub fn new(solution: SeparatorSolution, birth_round: u64) -> Self {
        let fitness = solution.separator_weight();
        Individual {
            solution,
            fitness,
            birth_round,
        }
    }
}

/// Bounded multiset of individuals. All members are valid and balanced; the
/// caller enforces this at insertion boundaries.
#[derive(Debug, Clone)]
pub struct Population {
    members: Vec<Individual>,
    capacity: usize,
}

impl Population {
    pub fn new(capacity: usize) -> Self {
        Population {
            members: Vec::new(),
            capacity,
        }
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Raises or lowers the target size. Existing members are kept even if
    /// the new capacity is smaller; eviction resumes at the new bound.
    pub fn set_capacity(&mut self, capacity: usize) {
        self.capacity = capacity.max(1);
    }

    pub fn members(&self) -> &[Individual] {
        &self.members
    }

    pub fn best(&self) -> Option<&Individual> {
        self.members.iter().min_by_key(|i| i.fitness)
    }

    /// Inserts the offspring. Below capacity this is a plain insert. At
    /// capacity, the member most similar to the offspring among those with
    /// fitness no better is evicted; without such a member the offspring is
    /// discarded.
    pub fn insert_with_eviction<R: Rng>(&mut self, off: Individual, rng: &mut R) -> bool {
        if self.members.len() < self.capacity {
            self.members.push(off);
            return true;
        }
        let off_set = off.solution.separator_set();
        let mut best: Option<(usize, u64, u64)> = None; // (index, similarity, fitness)
        for (i, member) in self.members.iter().enumerate() {
            if member.fitness < off.fitness {
                continue;
            }
            let sim = similarity(&member.solution.separator_set(), &off_set);
            let better = match best {
                None => true,
                Some((_, bs, bf)) => {
                    sim < bs || (sim == bs && member.fitness > bf)
                        || (sim == bs && member.fitness == bf && rng.gen::<bool>())
                }
            };
            if better {
                best = Some((i, sim, member.fitness));
            }
        }
        match best {
            Some((i, _, _)) => {
                self.members[i] = off;
                true
            }
            None => false,
        }
    }
}

/// Population size: the build phase should take about t_total / f, so
/// S = max(3, round((t_total / f) / t_one)).
pub fn estimate_population_size(t_one: f64, t_total: f64, f: f64) -> usize {
    assert!(t_one > 0.0 && f >= 1.0);
    let s = (t_total / f / t_one).round() as i64;
    s.max(3) as usize
}

/// Fittest of two random members (smaller separator wins; ties random).
pub fn tournament_select<'a, R: Rng>(pop: &'a Population, rng: &mut R) -> &'a Individual {
    assert!(!pop.is_empty(), "tournament on empty population");
    if pop.len() == 1 {
        return &pop.members[0];
    }
    let picks: Vec<&Individual> = pop.members.choose_multiple(rng, 2).collect();
    let (a, b) = (picks[0], picks[1]);
    if a.fitness < b.fitness {
        a
    } else if b.fitness < a.fitness {
        b
    } else if rng.gen::<bool>() {
        a
    } else {
        b
    }
}

/// Cardinality of the symmetric difference of two separator node sets.
pub fn similarity(s1: &BTreeSet<NodeId>, s2: &BTreeSet<NodeId>) -> u64 {
    s1.symmetric_difference(s2).count() as u64
}

/// Combine operator: block the cut edges of both parents during coarsening,
/// coarsen until nothing is contractible, seed with the fitter parent, refine
/// upward. The offspring is never worse than the better parent.
pub fn combine<R: Rng>(
    g: &Graph,
    first: &Individual,
    second: &Individual,
    cfg: &SolverConfig,
    birth_round: u64,
    rng: &mut R,
) -> Result<Individual, SolveError> {
    let (p, c) = if first.fitness <= second.fitness {
        (first, second)
    } else {
        (second, first)
    };
    let p_cut = p.solution.cut_arcs(g);
    let c_cut = c.solution.cut_arcs(g);
    let blocked: Vec<bool> = p_cut.iter().zip(&c_cut).map(|(&a, &b)| a || b).collect();
    let hierarchy = build_hierarchy(g, &blocked, StopRule::NoContractibleEdge, cfg.rating, rng);
    let coarse_sol = project_to_coarsest(&hierarchy, &p.solution);
    let mut sol = refine_sequence(hierarchy.coarsest(), &coarse_sol, cfg, rng)?;
    for level in (0..hierarchy.levels() - 1).rev() {
        sol = project_solution(&sol, &hierarchy.maps[level]);
        sol = refine_sequence(hierarchy.graph(level), &sol, cfg, rng)?;
    }
    let offspring = if sol.separator_weight() <= p.fitness {
        sol
    } else {
        p.solution.clone()
    };
    debug_assert!(offspring.separator_weight() <= p.fitness.min(c.fitness));
    Ok(Individual::new(offspring, birth_round))
}

/// Mutation operator: block only this individual's cut edges, coarsen until
/// nothing is contractible, then compute a fresh initial separator on the
/// coarsest graph instead of applying the parent. The offspring may be less
/// fit.
pub fn mutate<R: Rng>(
    g: &Graph,
    parent: &Individual,
    cfg: &SolverConfig,
    birth_round: u64,
    rng: &mut R,
) -> Result<Individual, SolveError> {
    let blocked = parent.solution.cut_arcs(g);
    let hierarchy = build_hierarchy(g, &blocked, StopRule::NoContractibleEdge, cfg.rating, rng);
    let coarsest = hierarchy.coarsest();
    let mut sol = initial_separator(
        coarsest,
        parent.solution.k,
        parent.solution.epsilon,
        cfg,
        rng,
    )?;
    for level in (0..hierarchy.levels() - 1).rev() {
        sol = project_solution(&sol, &hierarchy.maps[level]);
        sol = refine_sequence(hierarchy.graph(level), &sol, cfg, rng)?;
    }
    debug_assert!({
        let report = is_valid(g, &sol);
        report.valid && report.balanced
    });
    Ok(Individual::new(sol, birth_round))
}
