//! Asynchronous island-model driver: one worker per simulated PE, each
//! running build-then-evolve rounds, exchanging its best separator through a
//! randomized rumor-spreading protocol. Workers communicate only through
//! message queues; there is no global barrier. A deterministic round-robin
//! mode with a virtual clock backs the tests.

use std::collections::HashSet;
use std::sync::mpsc;
use std::sync::Arc;
use std::thread;
use std::time::Instant;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use serde::Serialize;

use crate::evolution::{
    combine, estimate_population_size, mutate, tournament_select, Individual, Population,
};
use crate::graph::Graph;
use crate::multilevel::{solve, SolveError, SolverConfig};
use crate::solution::{is_valid, SeparatorSolution};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    Create,
    Combine,
    Mutate,
    Recv,
}

/// One reported (time, separator size) pair.
#[derive(Debug, Clone, Serialize)]
pub struct EventRecord {
    pub t: f64,
    pub size: u64,
    pub pe: u32,
    pub kind: EventKind,
}

#[derive(Debug, Clone)]
pub struct IslandConfig {
    pub pes: u32,
    pub t_total: f64,
    /// Build-phase fraction f: individual creation runs for t_total / f.
    pub fraction: f64,
    pub mutation_prob: f64,
    pub solver: SolverConfig,
}

impl Default for IslandConfig {
    fn default() -> Self {
        IslandConfig {
            pes: 1,
            t_total: 10.0,
            fraction: 10.0,
            mutation_prob: 0.1,
            solver: SolverConfig::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Message {
    pub sender: u32,
    pub solution: SeparatorSolution,
    pub timestamp: f64,
}

#[derive(Debug)]
pub struct RunResult {
    pub best: SeparatorSolution,
    pub events: Vec<EventRecord>,
    pub warning: Option<String>,
}

/// ceil(log2 p): send rounds granted per improvement.
pub fn comm_rounds(p: u32) -> u32 {
    if p <= 1 {
        0
    } else {
        u32::BITS - (p - 1).leading_zeros()
    }
}

/// Protocol state of one PE: which peers already received the current best
/// and how many send rounds remain for it.
#[derive(Debug, Clone)]
pub struct PeState {
    pub pe_id: u32,
    pub p: u32,
    pub best_fitness: Option<u64>,
    pub best_sent_to: HashSet<u32>,
    pub rounds_remaining: u32,
}

impl PeState {
    pub fn new(pe_id: u32, p: u32) -> Self {
        PeState {
            pe_id,
            p,
            best_fitness: None,
            best_sent_to: HashSet::new(),
            rounds_remaining: 0,
        }
    }

    /// Records a (possibly) improved best. On strict improvement all peers
    /// become eligible again and the send budget resets to ceil(log2 p).
    pub fn record_best(&mut self, fitness: u64) -> bool {
        let improved = self.best_fitness.map_or(true, |b| fitness < b);
        if improved {
            self.best_fitness = Some(fitness);
            self.best_sent_to.clear();
            self.rounds_remaining = comm_rounds(self.p);
        }
        improved
    }

    /// A received copy of the current best (same fitness) refreshes the send
    /// budget without clearing the sent-to set, so the rumor keeps moving
    /// while no target ever receives it twice from the same sender.
    pub fn refresh_budget(&mut self, fitness: u64) {
        if self.best_fitness == Some(fitness) {
            self.rounds_remaining = comm_rounds(self.p);
        }
    }

    /// Picks the next communication partner uniformly among peers that have
    /// not yet received the current best; None once the budget or the peer
    /// set is exhausted.
    pub fn next_target<R: Rng>(&mut self, rng: &mut R) -> Option<u32> {
        if self.rounds_remaining == 0 || self.best_fitness.is_none() {
            return None;
        }
        let candidates: Vec<u32> = (0..self.p)
            .filter(|&q| q != self.pe_id && !self.best_sent_to.contains(&q))
            .collect();
        if candidates.is_empty() {
            return None;
        }
        let target = candidates[rng.gen_range(0..candidates.len())];
        self.best_sent_to.insert(target);
        self.rounds_remaining -= 1;
        Some(target)
    }
}

struct Worker<'a> {
    state: PeState,
    population: Population,
    rng: ChaCha8Rng,
    g: &'a Graph,
    k: u32,
    epsilon: f64,
    cfg: &'a IslandConfig,
    events: Vec<EventRecord>,
    round: u64,
    sized: bool,
}

impl<'a> Worker<'a> {
    fn new(pe_id: u32, g: &'a Graph, k: u32, epsilon: f64, cfg: &'a IslandConfig, seed: u64) -> Self {
        Worker {
            state: PeState::new(pe_id, cfg.pes),
            population: Population::new(3),
            rng: ChaCha8Rng::seed_from_u64(seed ^ pe_id as u64),
            g,
            k,
            epsilon,
            cfg,
            events: Vec::new(),
            round: 0,
            sized: false,
        }
    }

    fn log(&mut self, now: f64, size: u64, kind: EventKind) {
        self.events.push(EventRecord {
            t: now,
            size,
            pe: self.state.pe_id,
            kind,
        });
    }

    /// Creates one individual; `t_one` (time of the first creation) fixes
    /// the population capacity.
    fn create_individual(&mut self, now: f64, t_one: Option<f64>) -> Result<(), SolveError> {
        let sol = solve(self.g, self.k, self.epsilon, &self.cfg.solver, &mut self.rng)?;
        let ind = Individual::new(sol, self.round);
        if !self.sized {
            if let Some(t_one) = t_one {
                let capacity =
                    estimate_population_size(t_one.max(1e-9), self.cfg.t_total, self.cfg.fraction);
                self.population.set_capacity(capacity);
                self.sized = true;
            }
        }
        self.log(now, ind.fitness, EventKind::Create);
        self.state.record_best(ind.fitness);
        self.population.insert_with_eviction(ind, &mut self.rng);
        Ok(())
    }

    fn evolve_step(&mut self, now: f64) -> Result<(), SolveError> {
        self.round += 1;
        let (offspring, kind) = if self.rng.gen::<f64>() < self.cfg.mutation_prob {
            let parent = tournament_select(&self.population, &mut self.rng).clone();
            (
                mutate(self.g, &parent, &self.cfg.solver, self.round, &mut self.rng)?,
                EventKind::Mutate,
            )
        } else {
            let a = tournament_select(&self.population, &mut self.rng).clone();
            let b = tournament_select(&self.population, &mut self.rng).clone();
            (
                combine(self.g, &a, &b, &self.cfg.solver, self.round, &mut self.rng)?,
                EventKind::Combine,
            )
        };
        self.log(now, offspring.fitness, kind);
        self.state.record_best(offspring.fitness);
        self.population.insert_with_eviction(offspring, &mut self.rng);
        Ok(())
    }

    fn receive(&mut self, msg: Message, now: f64) {
        debug_assert!({
            let report = is_valid(self.g, &msg.solution);
            report.valid && report.balanced
        });
        let ind = Individual::new(msg.solution, self.round);
        self.log(now, ind.fitness, EventKind::Recv);
        if !self.state.record_best(ind.fitness) {
            self.state.refresh_budget(ind.fitness);
        }
        self.population.insert_with_eviction(ind, &mut self.rng);
    }

    /// At most one send per main-loop iteration.
    fn outgoing(&mut self, now: f64) -> Option<(u32, Message)> {
        let best = self.population.best()?.solution.clone();
        let target = self.state.next_target(&mut self.rng)?;
        Some((
            target,
            Message {
                sender: self.state.pe_id,
                solution: best,
                timestamp: now,
            },
        ))
    }

    fn best(&self) -> Option<Individual> {
        self.population.best().cloned()
    }
}

/// Runs the full island model with one thread per PE and real wall-clock
/// deadlines. Workers exchange messages over unbounded channels; the final
/// best is collected with a single join after the deadline.
pub fn run(
    g: &Graph,
    k: u32,
    epsilon: f64,
    cfg: &IslandConfig,
    seed: u64,
) -> Result<RunResult, SolveError> {
    assert!(cfg.pes >= 1 && cfg.t_total > 0.0);
    let g = Arc::new(g.clone());
    let p = cfg.pes;
    let mut senders = Vec::new();
    let mut receivers = Vec::new();
    for _ in 0..p {
        let (tx, rx) = mpsc::channel::<Message>();
        senders.push(tx);
        receivers.push(Some(rx));
    }
    let start = Instant::now();
    let mut handles = Vec::new();
    for pe in 0..p {
        let g = Arc::clone(&g);
        let cfg = cfg.clone();
        let senders = senders.clone();
        let rx = receivers[pe as usize].take().unwrap();
        let handle = thread::spawn(move || -> Result<(Option<Individual>, Vec<EventRecord>, Option<String>), SolveError> {
            let mut worker = Worker::new(pe, &g, k, epsilon, &cfg, seed);
            let elapsed = || start.elapsed().as_secs_f64();
            // Always create at least one individual, even past the deadline.
            let t0 = elapsed();
            worker.create_individual(t0, None)?;
            let t_one = elapsed() - t0;
            let mut warning = None;
            if elapsed() >= cfg.t_total {
                warning = Some(format!(
                    "time limit {}s too small: a single creation took {:.3}s",
                    cfg.t_total, t_one
                ));
            }
            while elapsed() < cfg.t_total {
                let now = elapsed();
                if now < cfg.t_total / cfg.fraction {
                    worker.create_individual(now, Some(t_one))?;
                } else {
                    if !worker.sized {
                        let capacity =
                            estimate_population_size(t_one.max(1e-9), cfg.t_total, cfg.fraction);
                        worker.population.set_capacity(capacity);
                        worker.sized = true;
                    }
                    worker.evolve_step(now)?;
                }
                let now = elapsed();
                while let Ok(msg) = rx.try_recv() {
                    worker.receive(msg, now);
                }
                if let Some((target, msg)) = worker.outgoing(now) {
                    let _ = senders[target as usize].send(msg);
                }
            }
            Ok((worker.best(), worker.events, warning))
        });
        handles.push(handle);
    }
    drop(senders);
    let mut best: Option<Individual> = None;
    let mut events = Vec::new();
    let mut warning = None;
    for handle in handles {
        let (local_best, local_events, local_warning) =
            handle.join().expect("island worker panicked")?;
        if let Some(ind) = local_best {
            if best.as_ref().map_or(true, |b| ind.fitness < b.fitness) {
                best = Some(ind);
            }
        }
        events.extend(local_events);
        warning = warning.or(local_warning);
    }
    events.sort_by(|a, b| a.t.total_cmp(&b.t));
    Ok(RunResult {
        best: best.expect("at least one individual per worker").solution,
        events,
        warning,
    })
}

/// Deterministic round-robin execution with a virtual clock: every worker
/// iteration costs one time unit and `iterations` plays the role of t_total.
/// Messages are delivered instantly and drained on the receiver's next turn.
pub fn run_deterministic(
    g: &Graph,
    k: u32,
    epsilon: f64,
    p: u32,
    iterations: u64,
    cfg: &IslandConfig,
    seed: u64,
) -> Result<RunResult, SolveError> {
    let cfg = IslandConfig {
        pes: p,
        t_total: iterations as f64,
        ..cfg.clone()
    };
    let mut workers: Vec<Worker> = (0..p)
        .map(|pe| Worker::new(pe, g, k, epsilon, &cfg, seed))
        .collect();
    let mut inboxes: Vec<Vec<Message>> = vec![Vec::new(); p as usize];
    let build_until = (iterations as f64 / cfg.fraction).max(1.0);
    for step in 0..iterations {
        let now = step as f64;
        for pe in 0..p as usize {
            let worker = &mut workers[pe];
            if (now as f64) < build_until {
                worker.create_individual(now, Some(1.0))?;
            } else {
                worker.evolve_step(now)?;
            }
            for msg in std::mem::take(&mut inboxes[pe]) {
                workers[pe].receive(msg, now);
            }
            if let Some((target, msg)) = workers[pe].outgoing(now) {
                inboxes[target as usize].push(msg);
            }
        }
    }
    let mut best: Option<Individual> = None;
    let mut events = Vec::new();
    for worker in workers {
        if let Some(ind) = worker.best() {
            if best.as_ref().map_or(true, |b| ind.fitness < b.fitness) {
                best = Some(ind);
            }
        }
        events.extend(worker.events);
    }
    events.sort_by(|a, b| a.t.total_cmp(&b.t).then(a.pe.cmp(&b.pe)));
    Ok(RunResult {
        best: best.expect("at least one individual").solution,
        events,
        warning: None,
    })
}

/// Serializes events as JSON lines.
pub fn write_event_log<W: std::io::Write>(
    events: &[EventRecord],
    mut out: W,
) -> std::io::Result<()> {
    for record in events {
        serde_json::to_writer(&mut out, record)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}
