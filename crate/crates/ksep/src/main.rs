use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use ksep::baseline::simple_baseline;
use ksep::convergence::{average_repetitions, event_geomean, min_prefix, normalize, write_tsv, Point};
use ksep::graph::Graph;
use ksep::island::{run, EventKind, EventRecord, IslandConfig};
use ksep::metis::{load_metis, write_separator};
use ksep::multilevel::{solve, SolveError, SolverConfig};
use ksep::solution::{is_valid, SeparatorSolution};

const EXIT_USAGE: u8 = 1;
const EXIT_INPUT: u8 = 2;
const EXIT_INFEASIBLE: u8 = 3;

#[derive(Parser)]
#[command(name = "ksep", about = "Small balanced k-way node separators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute a k-way node separator for a graph in METIS format.
    Solve(SolveArgs),
    /// Aggregate event logs into a normalized convergence curve (TSV).
    Convergence(ConvergenceArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    /// Multilevel solver; with --time-limit, repeated independent runs.
    Adv,
    /// Evolutionary island model (requires --time-limit).
    Advevo,
    /// Greedy bisection baseline with vertex-cover separators.
    Simple,
}

#[derive(Args)]
struct SolveArgs {
    /// Input graph in METIS format.
    #[arg(long)]
    graph: PathBuf,
    /// Number of blocks.
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    k: u32,
    /// Allowed imbalance epsilon.
    #[arg(long, default_value_t = 0.03)]
    imbalance: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Wall-clock budget in seconds.
    #[arg(long)]
    time_limit: Option<f64>,
    /// Number of parallel workers (advevo mode).
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
    pes: u32,
    /// Build-phase fraction f: individuals are created for time_limit / f.
    #[arg(long, default_value_t = 10.0)]
    fraction: f64,
    #[arg(long, default_value_t = 0.1)]
    mutation_prob: f64,
    #[arg(long, value_enum, default_value_t = Mode::Adv)]
    mode: Mode,
    /// Separator output file.
    #[arg(long)]
    output: Option<PathBuf>,
    /// JSON-lines event log output file.
    #[arg(long)]
    log: Option<PathBuf>,
    /// Coarsening threshold override.
    #[arg(long)]
    coarsest: Option<usize>,
}

#[derive(Args)]
struct ConvergenceArgs {
    /// Instances as NAME=LOG[,LOG...]; multiple logs per instance are
    /// averaged pointwise before the running minimum is taken.
    #[arg(required = true)]
    instances: Vec<String>,
    /// Per-instance normalization time as NAME=SECONDS (default 1).
    #[arg(long = "t-ref")]
    t_ref: Vec<String>,
    /// Output TSV file (stdout when omitted).
    #[arg(long)]
    output: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // clap's own help/version output still exits 0
            if err.use_stderr() {
                eprint!("{err}");
                return ExitCode::from(EXIT_USAGE);
            }
            print!("{err}");
            return ExitCode::SUCCESS;
        }
    };
    match cli.command {
        Command::Solve(args) => run_solve(&args),
        Command::Convergence(args) => match run_convergence(&args) {
            Ok(()) => ExitCode::SUCCESS,
            Err(err) => {
                eprintln!("error: {err:#}");
                ExitCode::from(EXIT_INPUT)
            }
        },
    }
}

fn load_graph(path: &PathBuf) -> Result<Graph> {
    let file = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    load_metis(BufReader::new(file)).with_context(|| format!("invalid graph {}", path.display()))
}

fn run_solve(args: &SolveArgs) -> ExitCode {
    if args.imbalance < 0.0 || args.fraction <= 0.0 || !(0.0..=1.0).contains(&args.mutation_prob) {
        eprintln!("error: invalid flag values");
        return ExitCode::from(EXIT_USAGE);
    }
    if args.mode == Mode::Advevo && args.time_limit.is_none() {
        eprintln!("error: --mode advevo requires --time-limit");
        return ExitCode::from(EXIT_USAGE);
    }
    let g = match load_graph(&args.graph) {
        Ok(g) => g,
        Err(err) => {
            eprintln!("error: {err:#}");
            return ExitCode::from(EXIT_INPUT);
        }
    };
    let solver = SolverConfig {
        coarsest: args.coarsest,
        ..SolverConfig::default()
    };
    let outcome = match args.mode {
        Mode::Advevo => {
            let cfg = IslandConfig {
                pes: args.pes,
                t_total: args.time_limit.unwrap(),
                fraction: args.fraction,
                mutation_prob: args.mutation_prob,
                solver,
            };
            run(&g, args.k, args.imbalance, &cfg, args.seed).map(|r| {
                if let Some(warning) = &r.warning {
                    eprintln!("warning: {warning}");
                }
                (r.best, r.events)
            })
        }
        Mode::Adv => solve_repeated(&g, args, &solver),
        Mode::Simple => {
            let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
            let start = Instant::now();
            simple_baseline(&g, args.k, args.imbalance, &mut rng).map(|sol| {
                let events = vec![EventRecord {
                    t: start.elapsed().as_secs_f64(),
                    size: sol.separator_weight(),
                    pe: 0,
                    kind: EventKind::Create,
                }];
                (sol, events)
            })
        }
    };
    let (best, events) = match outcome {
        Ok(pair) => pair,
        Err(SolveError::TooManyBlocks(k, n)) => {
            eprintln!("error: infeasible instance: k = {k} exceeds node count {n}");
            return ExitCode::from(EXIT_INFEASIBLE);
        }
        Err(err) => {
            eprintln!("error: infeasible instance: {err}");
            return ExitCode::from(EXIT_INFEASIBLE);
        }
    };
    if let Err(err) = write_outputs(args, &best, &events) {
        eprintln!("error: {err:#}");
        return ExitCode::from(EXIT_INPUT);
    }
    let report = is_valid(&g, &best);
    println!("{} {} {}", best.separator_weight(), report.balanced, report.valid);
    ExitCode::SUCCESS
}

/// adv mode: one multilevel solve, or repeated independent solves while a
/// time budget remains, keeping the best result.
fn solve_repeated(
    g: &Graph,
    args: &SolveArgs,
    solver: &SolverConfig,
) -> Result<(SeparatorSolution, Vec<EventRecord>), SolveError> {
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let start = Instant::now();
    let mut events = Vec::new();
    let mut best = solve(g, args.k, args.imbalance, solver, &mut rng)?;
    events.push(EventRecord {
        t: start.elapsed().as_secs_f64(),
        size: best.separator_weight(),
        pe: 0,
        kind: EventKind::Create,
    });
    if let Some(limit) = args.time_limit {
        while start.elapsed().as_secs_f64() < limit {
            let sol = solve(g, args.k, args.imbalance, solver, &mut rng)?;
            events.push(EventRecord {
                t: start.elapsed().as_secs_f64(),
                size: sol.separator_weight(),
                pe: 0,
                kind: EventKind::Create,
            });
            if sol.separator_weight() < best.separator_weight() {
                best = sol;
            }
        }
    }
    Ok((best, events))
}

fn write_outputs(
    args: &SolveArgs,
    best: &SeparatorSolution,
    events: &[EventRecord],
) -> Result<()> {
    if let Some(path) = &args.output {
        let file = File::create(path)
            .with_context(|| format!("cannot create {}", path.display()))?;
        write_separator(best, BufWriter::new(file))?;
    }
    if let Some(path) = &args.log {
        let file = File::create(path)
            .with_context(|| format!("cannot create {}", path.display()))?;
        ksep::island::write_event_log(events, BufWriter::new(file))?;
    }
    Ok(())
}

fn read_event_log(path: &str) -> Result<Vec<Point>> {
    let file = File::open(path).with_context(|| format!("cannot open {path}"))?;
    let mut points = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: serde_json::Value =
            serde_json::from_str(&line).with_context(|| format!("bad event in {path}"))?;
        let t = record["t"].as_f64().context("event missing t")?;
        let size = record["size"].as_f64().context("event missing size")?;
        points.push((t, size));
    }
    points.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(points)
}

fn run_convergence(args: &ConvergenceArgs) -> Result<()> {
    let mut t_refs: BTreeMap<String, f64> = BTreeMap::new();
    for entry in &args.t_ref {
        let (name, value) = entry
            .split_once('=')
            .with_context(|| format!("expected NAME=SECONDS, got {entry}"))?;
        t_refs.insert(name.to_string(), value.parse()?);
    }
    let mut per_instance = BTreeMap::new();
    for entry in &args.instances {
        let (name, paths) = entry
            .split_once('=')
            .with_context(|| format!("expected NAME=LOG[,LOG...], got {entry}"))?;
        let reps: Vec<Vec<Point>> = paths
            .split(',')
            .map(read_event_log)
            .collect::<Result<_>>()?;
        let averaged = average_repetitions(&reps);
        let prefixed = min_prefix(&averaged)?;
        let t_i = t_refs.get(name).copied().unwrap_or(1.0);
        per_instance.insert(name.to_string(), normalize(&prefixed, t_i)?);
    }
    let curve = event_geomean(&per_instance)?;
    match &args.output {
        Some(path) => {
            let file = File::create(path)
                .with_context(|| format!("cannot create {}", path.display()))?;
            write_tsv(&curve, BufWriter::new(file))?;
        }
        None => {
            let stdout = std::io::stdout();
            write_tsv(&curve, stdout.lock())?;
        }
    }
    Ok(())
}
