//! Command-line driver: build and dump lattices, verify the chain
//! decomposition, run the chain oracles, simulate routes, and sweep.
//!
//! Exit codes are a stable contract: 0 success, 2 spec or argument error,
//! 3 structure violation, 4 unroutable, 5 verdict failure.

use clap::{Parser, Subcommand, ValueEnum};
use hexpst::chains::ChainHamiltonian;
use hexpst::dynamics::TrajectoryOptions;
use hexpst::hamiltonian::{verify_block_structure, Hamiltonian, XiTransform};
use hexpst::lattice::{LatticeGraph, LatticeSpec, VertexId};
use hexpst::routing::{all_head_pairs, RouteError, RunConfig, Simulator, SweepOutcome, Verdict};
use hexpst::{T0, T1};
use rand::SeedableRng;
use serde::Serialize;
use std::fmt::Display;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "hexpst",
    version,
    about = "Perfect state transfer on switch lattices: build, verify, route, sweep"
)]
struct Cli {
    /// Pass/fail tolerance on |modulus − 1|.
    #[arg(long, global = true, env = "HEXPST_TOL")]
    tol: Option<f64>,
    /// Pass/fail tolerance on the phase error, radians.
    #[arg(long, global = true)]
    tol_phase: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the lattice from a spec and dump deterministic tables.
    Build {
        /// Lattice spec (JSON).
        #[arg(long)]
        spec: PathBuf,
        /// What to dump: the site/coupling tables or the matrix triplets.
        #[arg(long, value_enum, default_value_t = DumpFormat::Sites)]
        format: DumpFormat,
        /// Write here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check that conjugating by the switch basis splits the Hamiltonian
    /// into uniform 2- and 3-chains, and print the census.
    VerifyBlocks {
        #[arg(long)]
        spec: PathBuf,
        /// Corrupt one coupling first (test hook for the failure path).
        #[arg(long, hide = true)]
        corrupt: bool,
    },
    /// Run the closed-form chain oracles end to end.
    VerifyChains,
    /// Plan, compile, and simulate one transfer; print the report.
    Route {
        #[arg(long)]
        spec: PathBuf,
        /// Input head, e.g. p0:0,1
        #[arg(long)]
        from: String,
        /// Output head, e.g. p0:1,2
        #[arg(long)]
        to: String,
        /// Replace the spec's faulty-switch list (repeat per vertex).
        #[arg(long)]
        faults: Option<Vec<String>>,
        /// Sample the evolution to a CSV file.
        #[arg(long)]
        trajectory: Option<PathBuf>,
        /// Shift pulse INDEX and everything after it by OFFSET
        /// (seconds, or multiples of t0/t1 such as 2t1).
        #[arg(long, num_args = 2, value_names = ["INDEX", "OFFSET"])]
        delay_pulse: Option<Vec<String>>,
    },
    /// Simulate every ordered head pair and aggregate.
    Sweep {
        #[arg(long)]
        spec: PathBuf,
        /// Treat unroutable pairs as fatal (exit 4).
        #[arg(long)]
        strict: bool,
        /// Worker threads (default: one per core).
        #[arg(long)]
        workers: Option<usize>,
        /// Re-run the sweep once per additionally faulted switch.
        #[arg(long)]
        single_faults: bool,
        /// Deterministically subsample this many pairs.
        #[arg(long)]
        sample: Option<usize>,
        /// Seed for --sample.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the JSON report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum DumpFormat {
    Sites,
    Triplets,
}

/// An error carrying its exit code.
struct Failure {
    code: u8,
    message: String,
}

fn fail(code: u8, message: impl Display) -> Failure {
    Failure { code, message: message.to_string() }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            if !failure.message.is_empty() {
                eprintln!("error: {}", failure.message);
            }
            ExitCode::from(failure.code)
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let tol = cli.tol;
    let tol_phase = cli.tol_phase;
    match cli.command {
        Command::Build { spec, format, out } => cmd_build(&spec, format, out.as_deref()),
        Command::VerifyBlocks { spec, corrupt } => cmd_verify_blocks(&spec, corrupt),
        Command::VerifyChains => cmd_verify_chains(),
        Command::Route { spec, from, to, faults, trajectory, delay_pulse } => cmd_route(
            &spec,
            &from,
            &to,
            faults.as_deref(),
            trajectory.as_deref(),
            delay_pulse.as_deref(),
            tol,
            tol_phase,
        ),
        Command::Sweep { spec, strict, workers, single_faults, sample, seed, out } => cmd_sweep(
            &spec,
            SweepFlags { strict, workers, single_faults, sample, seed },
            out.as_deref(),
            tol,
            tol_phase,
        ),
    }
}

fn read_spec(path: &std::path::Path) -> Result<LatticeSpec, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| fail(2, format!("cannot read {}: {e}", path.display())))?;
    LatticeSpec::from_json(&text).map_err(|e| fail(2, e))
}

fn build_graph(spec: &LatticeSpec) -> Result<LatticeGraph, Failure> {
    LatticeGraph::build(spec).map_err(|e| fail(2, e))
}

fn parse_vertex(label: &str) -> Result<VertexId, Failure> {
    label.parse().map_err(|e| fail(2, e))
}

/// Accept "0.5", "t0", "t1", "2t1", "1.5t0", …
fn parse_offset(text: &str) -> Result<f64, Failure> {
    let (prefix, unit) = if let Some(p) = text.strip_suffix("t0") {
        (p, T0)
    } else if let Some(p) = text.strip_suffix("t1") {
        (p, T1)
    } else {
        (text, 1.0)
    };
    let scale: f64 = if prefix.is_empty() {
        1.0
    } else {
        prefix.parse().map_err(|_| fail(2, format!("bad time offset {text:?}")))?
    };
    Ok(scale * unit)
}

fn emit(text: &str, out: Option<&std::path::Path>) -> Result<(), Failure> {
    match out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| fail(2, format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run_config(tol: Option<f64>, tol_phase: Option<f64>) -> Result<RunConfig, Failure> {
    let mut cfg = RunConfig::default();
    if let Some(t) = tol {
        if t.is_nan() || t <= 0.0 {
            return Err(fail(2, format!("tolerance must be positive, got {t}")));
        }
        cfg.tol_modulus = t;
    }
    if let Some(t) = tol_phase {
        if t.is_nan() || t <= 0.0 {
            return Err(fail(2, format!("phase tolerance must be positive, got {t}")));
        }
        cfg.tol_phase = t;
    }
    Ok(cfg)
}

fn cmd_build(
    path: &std::path::Path,
    format: DumpFormat,
    out: Option<&std::path::Path>,
) -> Result<(), Failure> {
    let spec = read_spec(path)?;
    let graph = build_graph(&spec)?;
    let violations = graph.validate();
    if !violations.is_empty() {
        for v in &violations {
            eprintln!("violation: {v}");
        }
        return Err(fail(3, format!("{} structure violations", violations.len())));
    }
    let text = match format {
        DumpFormat::Sites => graph.dump(),
        DumpFormat::Triplets => Hamiltonian::assemble(&graph).dump(&graph),
    };
    emit(&text, out)
}

fn cmd_verify_blocks(path: &std::path::Path, corrupt: bool) -> Result<(), Failure> {
    let spec = read_spec(path)?;
    let graph = build_graph(&spec)?;
    let mut h = Hamiltonian::assemble(&graph);
    if corrupt {
        // Flip the sign of the first coupling; the verifier must notice.
        let mut triplets = h.triplets().to_vec();
        if let Some(first) = triplets.first_mut() {
            first.2 = -first.2;
        }
        h = Hamiltonian::from_triplets(h.dim(), triplets);
    }
    let q = XiTransform::from_graph(&graph);
    match verify_block_structure(&graph, &h, &q) {
        Ok(inventory) => {
            println!("{}", inventory.census_line());
            println!(
                "max off-pattern: {:e}, max coupling error: {:e}",
                inventory.max_off_pattern, inventory.max_coupling_error
            );
            Ok(())
        }
        Err(report) => {
            eprint!("{}", report.describe(&graph));
            Err(fail(3, "block structure violated"))
        }
    }
}

fn cmd_verify_chains() -> Result<(), Failure> {
    let mut failures = Vec::new();

    let two = ChainHamiltonian::uniform(2);
    let deficit = (two.transfer_amplitude(0, 1, T0).norm() - 1.0).abs();
    println!("uniform 2-chain @ t0: modulus deficit {deficit:e}");
    if deficit > 1e-12 {
        failures.push("uniform 2-chain");
    }

    let three = ChainHamiltonian::uniform(3);
    let deficit = (three.transfer_amplitude(0, 2, T1).norm() - 1.0).abs();
    println!("uniform 3-chain @ t1: modulus deficit {deficit:e}");
    if deficit > 1e-12 {
        failures.push("uniform 3-chain");
    }

    let mut worst = 0.0f64;
    for n in 2..=32 {
        let chain = ChainHamiltonian::engineered(n);
        let eig = chain.eigensystem();
        for site in 0..n {
            let deficit = (eig.amplitude(site, chain.mirror(site), T0).norm() - 1.0).abs();
            worst = worst.max(deficit);
        }
    }
    println!("engineered chains N ≤ 32, mirror pairs @ transfer time: worst deficit {worst:e}");
    if worst > 1e-10 {
        failures.push("engineered chains");
    }

    // A uniform 4-chain never completes a transfer: scan a dense grid.
    let four = ChainHamiltonian::uniform(4).eigensystem();
    let mut peak = 0.0f64;
    for step in 0..=50_000 {
        let t = step as f64 * 0.001;
        peak = peak.max(four.amplitude(0, 3, t).norm());
    }
    println!("uniform 4-chain end-to-end peak modulus over [0, 50]: {peak:.6}");
    if peak >= 0.999 {
        failures.push("uniform 4-chain negative check");
    }

    if failures.is_empty() {
        Ok(())
    } else {
        Err(fail(5, format!("oracle checks failed: {}", failures.join(", "))))
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_route(
    path: &std::path::Path,
    from: &str,
    to: &str,
    faults: Option<&[String]>,
    trajectory: Option<&std::path::Path>,
    delay: Option<&[String]>,
    tol: Option<f64>,
    tol_phase: Option<f64>,
) -> Result<(), Failure> {
    let mut spec = read_spec(path)?;
    if let Some(labels) = faults {
        spec.faulty_switches =
            labels.iter().map(|l| parse_vertex(l)).collect::<Result<Vec<_>, _>>()?;
    }
    let graph = build_graph(&spec)?;
    let from = parse_vertex(from)?;
    let to = parse_vertex(to)?;

    let mut cfg = run_config(tol, tol_phase)?;
    if trajectory.is_some() {
        cfg.trajectory = Some(TrajectoryOptions::default());
    }
    if let Some(args) = delay {
        let index: usize =
            args[0].parse().map_err(|_| fail(2, format!("bad pulse index {:?}", args[0])))?;
        cfg.delay = Some((index, parse_offset(&args[1])?));
    }

    let sim = Simulator::new(graph);
    let run = sim.route(from, to, &cfg).map_err(route_failure)?;
    if let Some(csv_path) = trajectory {
        let csv = hexpst::dynamics::write_trajectory_csv(sim.graph(), &run.trajectory);
        std::fs::write(csv_path, csv)
            .map_err(|e| fail(2, format!("cannot write {}: {e}", csv_path.display())))?;
    }
    let mut json = serde_json::to_string_pretty(&run.report).expect("report serializes");
    json.push('\n');
    print!("{json}");
    match run.report.verdict {
        Verdict::Pass => Ok(()),
        Verdict::Fail => Err(fail(5, "")),
    }
}

fn route_failure(err: RouteError) -> Failure {
    match &err {
        RouteError::Unroutable { .. } => fail(4, err),
        RouteError::NotAHead(_) | RouteError::UnknownVertex(_) => fail(2, err),
        RouteError::Dynamics(_) => fail(2, err),
    }
}

struct SweepFlags {
    strict: bool,
    workers: Option<usize>,
    single_faults: bool,
    sample: Option<usize>,
    seed: u64,
}

/// One fault scenario of a --single-faults sweep.
#[derive(Serialize)]
struct FaultScenario {
    fault: VertexId,
    outcome: SweepOutcome,
}

#[derive(Serialize)]
struct FaultSweep {
    schema: &'static str,
    scenarios: Vec<FaultScenario>,
    min_modulus: f64,
    max_phase_error: f64,
    pass: usize,
    fail: usize,
    unroutable: usize,
}

fn subsample(
    pairs: Vec<(VertexId, VertexId)>,
    sample: Option<usize>,
    seed: u64,
) -> Vec<(VertexId, VertexId)> {
    match sample {
        Some(n) if n < pairs.len() => {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut picked: Vec<usize> =
                rand::seq::index::sample(&mut rng, pairs.len(), n).into_vec();
            picked.sort_unstable();
            picked.into_iter().map(|i| pairs[i]).collect()
        }
        _ => pairs,
    }
}

fn cmd_sweep(
    path: &std::path::Path,
    flags: SweepFlags,
    out: Option<&std::path::Path>,
    tol: Option<f64>,
    tol_phase: Option<f64>,
) -> Result<(), Failure> {
    let spec = read_spec(path)?;
    let mut cfg = run_config(tol, tol_phase)?;
    cfg.workers = flags.workers;

    let (text, failed, unroutable) = if flags.single_faults {
        let base = build_graph(&spec)?;
        let candidates: Vec<VertexId> =
            base.vertices().filter(|&v| !base.is_faulty(v)).collect();
        let mut scenarios = Vec::with_capacity(candidates.len());
        let mut summary = FaultSweep {
            schema: "hexpst-fault-sweep/1",
            scenarios: Vec::new(),
            min_modulus: 1.0,
            max_phase_error: 0.0,
            pass: 0,
            fail: 0,
            unroutable: 0,
        };
        for fault in candidates {
            let mut variant = spec.clone();
            variant.faulty_switches.push(fault);
            let graph = build_graph(&variant)?;
            let pairs: Vec<(VertexId, VertexId)> = all_head_pairs(&graph)
                .into_iter()
                .filter(|&(a, b)| a != fault && b != fault)
                .collect();
            let pairs = subsample(pairs, flags.sample, flags.seed);
            let sim = Simulator::new(graph);
            let outcome = sim.sweep(&pairs, &cfg).map_err(route_failure)?;
            summary.min_modulus = summary.min_modulus.min(outcome.min_modulus);
            summary.max_phase_error = summary.max_phase_error.max(outcome.max_phase_error);
            summary.pass += outcome.pass;
            summary.fail += outcome.fail;
            summary.unroutable += outcome.unroutable.len();
            scenarios.push(FaultScenario { fault, outcome });
        }
        summary.scenarios = scenarios;
        let failed = summary.fail > 0;
        let unroutable = summary.unroutable > 0;
        let mut json = serde_json::to_string_pretty(&summary).expect("sweep serializes");
        json.push('\n');
        (json, failed, unroutable)
    } else {
        let graph = build_graph(&spec)?;
        let pairs = subsample(all_head_pairs(&graph), flags.sample, flags.seed);
        let sim = Simulator::new(graph);
        let outcome = sim.sweep(&pairs, &cfg).map_err(route_failure)?;
        let failed = outcome.fail > 0;
        let unroutable = !outcome.unroutable.is_empty();
        let mut json = serde_json::to_string_pretty(&outcome).expect("sweep serializes");
        json.push('\n');
        (json, failed, unroutable)
    };

    emit(&text, out)?;
    if failed {
        Err(fail(5, "sweep recorded failing verdicts"))
    } else if flags.strict && unroutable {
        Err(fail(4, "sweep recorded unroutable pairs (strict mode)"))
    } else {
        Ok(())
    }
}
