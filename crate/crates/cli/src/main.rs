use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use qmemopt_core::advantage::{
    ambiguity_report, certify, minimize_cq, phase_plane, AlphaBetaSet, DEFAULT_PHASE_GRID,
};
use qmemopt_core::circuit::{build_unitary, embed_states, exact_word_distribution, sample_trajectory_with, total_variation};
use qmemopt_core::gram::{fixed_point_overlaps, markov_overlaps, memory_spectrum, OverlapMatrix, DEFAULT_MAX_ITER};
use qmemopt_core::sweep::{write_dimensional_csv, write_entropic_csv, SamplingMeasure, SweepConfig, SweepReport};
use qmemopt_core::{models, Error, Phases, Process, SCHEMA_VERSION};

#[derive(Parser, Debug)]
#[command(name = "qmemopt", version)]
#[command(about = "Classical and phase-enhanced quantum memory costs of stochastic processes")]
struct Cli {
    /// Worker threads for parallel work (default: all cores)
    #[arg(long, global = true, env = "QMEMOPT_WORKERS")]
    workers: Option<usize>,

    /// Relative eigenvalue threshold for the memory rank
    #[arg(long, global = true, default_value_t = 1e-9)]
    rank_tol: f64,

    /// Max-norm tolerance of the overlap fixed point
    #[arg(long, global = true, default_value_t = 1e-12)]
    fp_tol: f64,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Classical and zero-phase quantum memory costs of a process
    Analyze(AnalyzeArgs),
    /// Minimise the entropic memory over phase assignments
    Optimize(OptimizeArgs),
    /// Search for a dimensional certificate of a three-state Markov process
    Certify(CertifyArgs),
    /// Build the unitary model, verify it and sample output trajectories
    Simulate(SimulateArgs),
    /// Sweep three-state Markov processes for advantages
    Sweep(SweepArgs),
}

#[derive(Args, Debug)]
struct Io {
    /// Process description (JSON)
    #[arg(long, short)]
    input: Option<PathBuf>,

    /// Output file; stdout if omitted
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct AnalyzeArgs {
    #[command(flatten)]
    io: Io,

    /// Longest word length in the synchronization-entropy profile
    #[arg(long, default_value_t = 8)]
    sync_length: usize,
}

#[derive(Args, Debug)]
struct OptimizeArgs {
    #[command(flatten)]
    io: Io,

    /// Grid points per free phase
    #[arg(long, default_value_t = DEFAULT_PHASE_GRID)]
    phase_grid: usize,

    /// Refine the best grid point by coordinate descent
    #[arg(long)]
    refine: bool,

    /// Quasi-cycle sweep START:END:POINTS, written as CSV instead of JSON
    #[arg(long, value_name = "START:END:POINTS")]
    p_sweep: Option<String>,

    /// Scan two phases SYMBOL,STATE:SYMBOL,STATE of the input, written as CSV
    #[arg(long, value_name = "X,J:X,J")]
    phase_plane: Option<String>,

    /// Grid points per axis for --phase-plane
    #[arg(long, default_value_t = 24)]
    plane_resolution: usize,
}

#[derive(Args, Debug)]
struct CertifyArgs {
    #[command(flatten)]
    io: Io,

    /// Candidate coefficients: standard, unit, continuous[:N] or a:b,a:b,...
    #[arg(long, default_value = "standard")]
    alpha_beta_set: String,

    /// Also compare certificate, zero-phase and optimal entropies
    #[arg(long)]
    ambiguity: bool,

    /// Phase grid for the entropic optimum used by --ambiguity
    #[arg(long, default_value_t = 16)]
    phase_grid: usize,

    /// Refine the entropic optimum used by --ambiguity
    #[arg(long)]
    refine: bool,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[command(flatten)]
    io: Io,

    /// Phase assignment (JSON map "symbol,state" -> radians); zero if omitted
    #[arg(long)]
    phases: Option<PathBuf>,

    /// Trajectory length
    #[arg(short = 'L', long = "length", default_value_t = 10)]
    length: usize,

    /// Number of trajectories
    #[arg(long, default_value_t = 10)]
    samples: usize,

    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Initial memory state
    #[arg(long, default_value_t = 0)]
    start: usize,

    /// Word length of the exact verification
    #[arg(long, default_value_t = 4)]
    verify_length: usize,

    /// Include the unitary matrix in the output
    #[arg(long)]
    unitary: bool,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Mode {
    Dimensional,
    Entropic,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[arg(long, value_enum, default_value_t = Mode::Dimensional)]
    mode: Mode,

    /// Grid points per spherical angle
    #[arg(long, default_value_t = 20)]
    steps: usize,

    /// Candidate coefficients: standard, unit, continuous[:N] or a:b,a:b,...
    #[arg(long, default_value = "standard")]
    alpha_beta_set: String,

    /// Random processes in the entropic sweep
    #[arg(long, default_value_t = 2000)]
    samples: usize,

    /// Grid points per free phase in the entropic sweep
    #[arg(long, default_value_t = 16)]
    phase_grid: usize,

    /// Skip coordinate-descent refinement in the entropic sweep
    #[arg(long)]
    no_refine: bool,

    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Sampling measure of the entropic sweep: angles, surface or simplex
    #[arg(long, default_value = "angles")]
    measure: String,

    /// Extra three-state Markov process files for the entropic sweep
    #[arg(long)]
    inject: Vec<PathBuf>,

    /// Per-cell CSV output
    #[arg(long)]
    csv: Option<PathBuf>,

    /// JSON report output; stdout if omitted
    #[arg(long, short)]
    output: Option<PathBuf>,
}

/// Marks failures in reading or parsing user input.
#[derive(Debug)]
struct InputError(String);

impl std::fmt::Display for InputError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for InputError {}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<InputError>().is_some() {
        return 2;
    }
    match err.downcast_ref::<Error>() {
        Some(Error::WrongArity { .. }) => 3,
        Some(
            Error::InvalidProcess(_)
            | Error::Validation(_)
            | Error::Reducible
            | Error::NotMarkov
            | Error::InvalidPhase(_)
            | Error::InvalidConfig(_)
            | Error::DimensionMismatch(_)
            | Error::Json(_),
        ) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if let Some(n) = cli.workers.filter(|&n| n > 0) {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring worker pool")?;
    }
    let tol = Tolerances {
        rank: cli.rank_tol,
        fixed_point: cli.fp_tol,
    };
    if !(tol.rank > 0.0 && tol.fixed_point > 0.0) {
        return Err(Error::InvalidConfig("tolerances must be positive".into()).into());
    }
    match cli.command {
        Command::Analyze(a) => analyze(a, tol),
        Command::Optimize(a) => optimize(a),
        Command::Certify(a) => certify_cmd(a),
        Command::Simulate(a) => simulate(a, tol),
        Command::Sweep(a) => sweep(a),
    }
}

#[derive(Clone, Copy)]
struct Tolerances {
    rank: f64,
    fixed_point: f64,
}

fn read_process(path: Option<&Path>) -> anyhow::Result<Process> {
    let path = path.ok_or_else(|| InputError("--input is required".into()))?;
    let text = fs::read_to_string(path)
        .map_err(|e| InputError(format!("cannot read {}: {e}", path.display())))?;
    let process = Process::from_json(&text)
        .map_err(|e| InputError(format!("{}: {e}", path.display())))?;
    let report = process.validate();
    if !report.is_valid() {
        return Err(InputError(format!("{}: {report}", path.display())).into());
    }
    Ok(process)
}

fn emit(output: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match output {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut out = io::stdout().lock();
            out.write_all(text.as_bytes())?;
            Ok(out.flush()?)
        }
    }
}

fn emit_json(output: Option<&Path>, value: &Value) -> anyhow::Result<()> {
    emit(output, &(serde_json::to_string_pretty(value)? + "\n"))
}

fn overlaps_with(process: &Process, phases: &Phases, tol: Tolerances) -> qmemopt_core::Result<OverlapMatrix<f64>> {
    if process.is_markov() {
        markov_overlaps(process, phases)
    } else {
        fixed_point_overlaps(process, phases, tol.fixed_point, DEFAULT_MAX_ITER)
    }
}

fn analyze(args: AnalyzeArgs, tol: Tolerances) -> anyhow::Result<()> {
    let process = read_process(args.io.input.as_deref())?;
    let pi = process.stationary_distribution()?;
    let zeros = Phases::zeros(&process);
    let spec = memory_spectrum(&overlaps_with(&process, &zeros, tol)?, &pi, tol.rank)?;
    let c_mu = process.c_mu()?;
    let d_mu = process.d_mu()?;
    let sync: Vec<Value> = (1..=args.sync_length)
        .map(|l| Ok(json!({"length": l, "bits": process.synchronization_entropy(l)?})))
        .collect::<qmemopt_core::Result<_>>()?;

    eprintln!("{:<24}{:>12}", "quantity", "bits");
    eprintln!("{:<24}{:>12.6}", "C_mu", c_mu);
    eprintln!("{:<24}{:>12.6}", "D_mu", d_mu);
    eprintln!("{:<24}{:>12.6}", "C_q (zero phases)", spec.cq_bits);
    eprintln!("{:<24}{:>12.6}", "D_q (zero phases)", spec.dq_bits);

    let value = json!({
        "schema_version": SCHEMA_VERSION,
        "process_hash": process.content_hash(),
        "num_states": process.num_states(),
        "alphabet_size": process.alphabet_size(),
        "markov": process.is_markov(),
        "stationary_distribution": pi.0,
        "c_mu_bits": c_mu,
        "d_mu_bits": d_mu,
        "cq_bits": spec.cq_bits,
        "dq_bits": spec.dq_bits,
        "rank": spec.rank,
        "eigenvalues": spec.eigenvalues,
        "sync_entropy": sync,
        "tolerances": {"rank": tol.rank, "fixed_point": tol.fixed_point},
    });
    emit_json(args.io.output.as_deref(), &value)
}

fn parse_range(spec: &str) -> anyhow::Result<(f64, f64, usize)> {
    let parts: Vec<&str> = spec.split(':').collect();
    let bad = || InputError(format!("expected START:END:POINTS, got {spec:?}"));
    if parts.len() != 3 {
        return Err(bad().into());
    }
    let start: f64 = parts[0].parse().map_err(|_| bad())?;
    let end: f64 = parts[1].parse().map_err(|_| bad())?;
    let points: usize = parts[2].parse().map_err(|_| bad())?;
    if points == 0 || !(0.0..=1.0).contains(&start) || !(0.0..=1.0).contains(&end) {
        return Err(bad().into());
    }
    Ok((start, end, points))
}

fn parse_key(s: &str) -> anyhow::Result<(usize, usize)> {
    let bad = || InputError(format!("expected SYMBOL,STATE, got {s:?}"));
    let (x, j) = s.split_once(',').ok_or_else(bad)?;
    Ok((x.trim().parse().map_err(|_| bad())?, j.trim().parse().map_err(|_| bad())?))
}

fn optimize(args: OptimizeArgs) -> anyhow::Result<()> {
    if let Some(range) = &args.p_sweep {
        let (start, end, points) = parse_range(range)?;
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["schema_version", "p", "cq", "cq_phi_min"])?;
        for i in 0..points {
            let p = if points == 1 {
                start
            } else {
                start + (end - start) * i as f64 / (points - 1) as f64
            };
            let q = models::quasi_cycle(p);
            if !q.is_irreducible() {
                eprintln!("skipping reducible p = {p}");
                continue;
            }
            let r = minimize_cq(&q, args.phase_grid, args.refine)?;
            w.write_record([
                SCHEMA_VERSION.to_string(),
                format!("{p}"),
                format!("{:.12}", r.cq_zero_bits),
                format!("{:.12}", r.cq_min_bits),
            ])?;
        }
        let text = String::from_utf8(w.into_inner()?)?;
        return emit(args.io.output.as_deref(), &text);
    }
    let process = read_process(args.io.input.as_deref())?;
    if let Some(plane) = &args.phase_plane {
        let (a, b) = plane
            .split_once(':')
            .ok_or_else(|| InputError(format!("expected X,J:X,J, got {plane:?}")))?;
        let points = phase_plane(&process, parse_key(a)?, parse_key(b)?, args.plane_resolution)?;
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["schema_version", "phi_a", "phi_b", "cq"])?;
        for pt in points {
            w.write_record([
                SCHEMA_VERSION.to_string(),
                format!("{:.12}", pt.phi_a),
                format!("{:.12}", pt.phi_b),
                format!("{:.12}", pt.cq_bits),
            ])?;
        }
        let text = String::from_utf8(w.into_inner()?)?;
        return emit(args.io.output.as_deref(), &text);
    }
    let r = minimize_cq(&process, args.phase_grid, args.refine)?;
    eprintln!(
        "C_q {:.6} bits, C_phi_min {:.6} bits ({} free phases, grid {})",
        r.cq_zero_bits,
        r.cq_min_bits,
        r.gauge.free.len(),
        r.grid_resolution
    );
    emit_json(args.io.output.as_deref(), &r.to_json())
}

fn parse_set(s: &str) -> anyhow::Result<AlphaBetaSet> {
    s.parse::<AlphaBetaSet>().map_err(|e| InputError(e.to_string()).into())
}

fn certify_cmd(args: CertifyArgs) -> anyhow::Result<()> {
    let process = read_process(args.io.input.as_deref())?;
    let set = parse_set(&args.alpha_beta_set)?;
    if args.ambiguity {
        if process.num_states() != 3 {
            return Err(Error::WrongArity {
                states: process.num_states(),
            }
            .into());
        }
        let r = ambiguity_report(&process, &set, args.phase_grid, args.refine)?;
        eprintln!(
            "C_cert {} C_q {:.6} C_min {:.6} ambiguous {}",
            r.cq_at_dim_cert.map_or("none".to_string(), |v| format!("{v:.6}")),
            r.cq_zero,
            r.cq_min,
            r.ambiguous
        );
        return emit_json(args.io.output.as_deref(), &r.to_json(&process));
    }
    let value = match certify(&process, &set)? {
        Some(cert) => {
            eprintln!(
                "certificate: state {} = {}·state {} + {}·state {}, rank {}",
                cert.dependent_state, cert.alpha, cert.labeling.x, cert.beta, cert.labeling.y, cert.achieved_rank
            );
            cert.to_json(&process)
        }
        None => {
            eprintln!("none");
            Value::String("none".into())
        }
    };
    emit_json(args.io.output.as_deref(), &value)
}

fn simulate(args: SimulateArgs, tol: Tolerances) -> anyhow::Result<()> {
    let process = read_process(args.io.input.as_deref())?;
    let phases = match &args.phases {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| InputError(format!("cannot read {}: {e}", path.display())))?;
            Phases::from_json(&process, &text)
                .map_err(|e| InputError(format!("{}: {e}", path.display())))?
        }
        None => Phases::zeros(&process),
    };
    if args.start >= process.num_states() {
        return Err(InputError(format!("start state {} outside 0..{}", args.start, process.num_states())).into());
    }
    let c = overlaps_with(&process, &phases, tol)?;
    let states = embed_states(&c, tol.rank)?;
    let model = build_unitary(&process, &phases, &states)?;
    let mut tv: f64 = 0.0;
    for j in 0..process.num_states() {
        let circuit = exact_word_distribution(&model, j, args.verify_length)?;
        let classical = process.word_distribution(j, args.verify_length)?;
        tv = tv.max(total_variation(&circuit, &classical));
    }
    let unitarity = model.unitarity_residual();
    let action = model.action_residual(&process, &phases)?;
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let trajectories: Vec<Vec<usize>> = (0..args.samples)
        .map(|_| sample_trajectory_with(&model, args.start, args.length, &mut rng))
        .collect::<qmemopt_core::Result<_>>()?;
    eprintln!(
        "memory dimension {}, unitarity {unitarity:.2e}, action {action:.2e}, TV(L={}) {tv:.2e}",
        model.memory_dim(),
        args.verify_length
    );
    let mut value = json!({
        "schema_version": SCHEMA_VERSION,
        "process_hash": process.content_hash(),
        "phases": phases.to_json(),
        "seed": args.seed,
        "start": args.start,
        "length": args.length,
        "memory_dim": model.memory_dim(),
        "verification": {
            "unitarity_residual": unitarity,
            "action_residual": action,
            "tv_distance": tv,
            "word_length": args.verify_length,
        },
        "trajectories": trajectories,
    });
    if args.unitary {
        value["unitary"] = model.to_json();
    }
    emit_json(args.io.output.as_deref(), &value)
}

fn sweep(args: SweepArgs) -> anyhow::Result<()> {
    let config = SweepConfig {
        steps_per_edge: args.steps,
        alpha_beta_set: parse_set(&args.alpha_beta_set)?,
        entropic_samples: args.samples,
        phase_grid: args.phase_grid,
        refine: !args.no_refine,
        seed: args.seed,
        measure: args
            .measure
            .parse::<SamplingMeasure>()
            .map_err(|e| InputError(e.to_string()))?,
    };
    config.validate()?;
    let injected = args
        .inject
        .iter()
        .map(|p| read_process(Some(p)))
        .collect::<anyhow::Result<Vec<_>>>()?;
    let sink: Box<dyn Write> = match &args.csv {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(io::sink()),
    };
    eprintln!("sweep {:?} started", args.mode);
    let report: SweepReport = match args.mode {
        Mode::Dimensional => write_dimensional_csv(&config, sink)?,
        Mode::Entropic => write_entropic_csv(&config, &injected, sink)?,
    };
    match args.mode {
        Mode::Dimensional => eprintln!(
            "{} of {} tested cells feasible (rate {:.4}), {} skipped, {:.1}s",
            report.dimensional_feasible_count,
            report.tested_cells,
            report.dimensional_rate,
            report.skipped_cells,
            report.runtime_seconds
        ),
        Mode::Entropic => eprintln!(
            "{} of {} samples with entropic advantage (rate {:.4}), {:.1}s",
            report.entropic_advantage_count, report.entropic_tested, report.entropic_rate, report.runtime_seconds
        ),
    }
    let value = serde_json::to_value(&report).map_err(|e| anyhow!(e))?;
    emit_json(args.output.as_deref(), &value)
}
