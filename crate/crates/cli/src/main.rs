//! Command-line front end: seeded tomography / detector-self-characterization
//! experiments, the state-space projection utility, and file validation.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use measopt::gilbert::{project_matrix, GilbertConfig};
use measopt::optimizer::{Algorithm, IterationTrace, OptimizerConfig, RunStatus};
use measopt::povm::{is_valid_povm, FidelityReport};
use measopt::qdsc::{run_qdsc, QdscConfig};
use measopt::serialize::{
    read_json, write_json, CountsFile, MatrixFile, PovmFile, ProbeEnsembleFile, SCHEMA_VERSION,
};
use measopt::tomography::{run_tomography, Scenario};

const EXIT_STALLED: u8 = 2;
const EXIT_USAGE: u8 = 64;

#[derive(Parser)]
#[command(
    name = "measopt",
    about = "Optimization over POVM space: measurement tomography and detector self-characterization",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a scenario's detector and reconstruct it by maximum likelihood.
    Tomography(TomographyArgs),
    /// Self-characterize the qubit SIC detector from outcome statistics alone.
    Qdsc(QdscArgs),
    /// Project a Hermitian matrix onto the state space (nearest density matrix).
    Project(ProjectArgs),
    /// Validate a POVM, probe-ensemble, or counts JSON file.
    Validate(ValidateArgs),
}

#[derive(Args)]
struct CommonRunArgs {
    /// RNG seed for sampling and initialization.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Inclusive..exclusive seed range for batch mode, e.g. 0..10.
    /// Parallelism is capped by the POVM_OPT_THREADS environment variable.
    #[arg(long)]
    seeds: Option<String>,
    /// Initial step size.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Step shrink factor on rejected steps.
    #[arg(long)]
    beta: Option<f64>,
    /// Convergence threshold on the objective improvement.
    #[arg(long)]
    stop_tol: Option<f64>,
    /// Iteration budget.
    #[arg(long)]
    max_iters: Option<usize>,
    /// Directory for output files (created if missing).
    #[arg(long, default_value = "out")]
    output_dir: PathBuf,
    /// Trace file format.
    #[arg(long, value_enum, default_value_t = TraceFormat::Csv)]
    format: TraceFormat,
}

#[derive(Clone, Copy, ValueEnum)]
enum TraceFormat {
    Csv,
    Json,
}

#[derive(Args)]
struct TomographyArgs {
    /// one-qubit, one-qutrit, two-qubits, or two-qutrits.
    #[arg(long)]
    scenario: String,
    /// dg or apg.
    #[arg(long, default_value = "apg")]
    algorithm: String,
    /// Shots per probe state; defaults to the scenario's reference value.
    #[arg(long)]
    shots: Option<u64>,
    #[command(flatten)]
    common: CommonRunArgs,
}

#[derive(Args)]
struct QdscArgs {
    /// Shots per probe state.
    #[arg(long, default_value_t = 200)]
    shots: u64,
    #[command(flatten)]
    common: CommonRunArgs,
}

#[derive(Args)]
struct ProjectArgs {
    /// Input matrix JSON file.
    #[arg(long)]
    input: PathBuf,
    /// Output file for the projected density matrix.
    #[arg(long, default_value = "projected.json")]
    output: PathBuf,
}

#[derive(Args)]
struct ValidateArgs {
    /// File to validate (POVM, probe ensemble, or counts JSON).
    #[arg(long)]
    input: PathBuf,
}

#[derive(Serialize)]
struct FidelityFile {
    schema_version: u32,
    overall: f64,
    per_element: Vec<f64>,
    weights: Vec<f64>,
}

impl FidelityFile {
    fn new(rep: &FidelityReport) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            overall: rep.overall,
            per_element: rep.per_element.clone(),
            weights: rep.weights.clone(),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Tomography(args) => cmd_tomography(args),
        Command::Qdsc(args) => cmd_qdsc(args),
        Command::Project(args) => cmd_project(args),
        Command::Validate(args) => cmd_validate(args),
    }
    .unwrap_or_else(|e| {
        eprintln!("error: {e}");
        ExitCode::FAILURE
    })
}

type CmdResult = Result<ExitCode, Box<dyn std::error::Error>>;

fn parse_seed_range(spec: &str) -> Option<(u64, u64)> {
    let (a, b) = spec.split_once("..")?;
    let a: u64 = a.trim().parse().ok()?;
    let b: u64 = b.trim().parse().ok()?;
    (a < b).then_some((a, b))
}

fn seeds_of(common: &CommonRunArgs) -> Result<Vec<u64>, ExitCode> {
    match &common.seeds {
        None => Ok(vec![common.seed]),
        Some(spec) => match parse_seed_range(spec) {
            Some((a, b)) => Ok((a..b).collect()),
            None => {
                eprintln!("error: --seeds expects a range like 0..10");
                Err(ExitCode::from(EXIT_USAGE))
            }
        },
    }
}

fn thread_cap() -> usize {
    std::env::var("POVM_OPT_THREADS")
        .ok()
        .and_then(|v| v.parse().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| {
            std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
        })
}

/// Run one closure per seed, at most `thread_cap()` at a time.
fn run_batch<F>(seeds: &[u64], job: F) -> Vec<(u64, Result<RunStatus, String>)>
where
    F: Fn(u64) -> Result<RunStatus, String> + Sync,
{
    let cap = thread_cap().max(1);
    let job = &job;
    let mut results = Vec::with_capacity(seeds.len());
    for chunk in seeds.chunks(cap) {
        std::thread::scope(|scope| {
            let handles: Vec<_> = chunk
                .iter()
                .map(|&seed| (seed, scope.spawn(move || job(seed))))
                .collect();
            for (seed, handle) in handles {
                let res = handle.join().unwrap_or_else(|_| Err("worker panicked".into()));
                results.push((seed, res));
            }
        });
    }
    results
}

fn batch_exit(results: &[(u64, Result<RunStatus, String>)]) -> ExitCode {
    let mut stalled = false;
    for (seed, res) in results {
        match res {
            Err(e) => {
                eprintln!("error: seed {seed}: {e}");
                return ExitCode::FAILURE;
            }
            Ok(RunStatus::Stalled) => stalled = true,
            Ok(_) => {}
        }
    }
    if stalled { ExitCode::from(EXIT_STALLED) } else { ExitCode::SUCCESS }
}

fn write_trace(dir: &Path, stem: &str, format: TraceFormat, trace: &IterationTrace) -> CmdResult {
    match format {
        TraceFormat::Csv => {
            std::fs::write(dir.join(format!("{stem}.trace.csv")), trace.to_csv())?
        }
        TraceFormat::Json => {
            std::fs::write(dir.join(format!("{stem}.trace.jsonl")), trace.to_jsonl()?)?
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_tomography(args: TomographyArgs) -> CmdResult {
    let scenario: Scenario = match args.scenario.parse() {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return Ok(ExitCode::from(EXIT_USAGE));
        }
    };
    let algorithm: Algorithm = match args.algorithm.parse() {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return Ok(ExitCode::from(EXIT_USAGE));
        }
    };
    let shots = args.shots.unwrap_or_else(|| scenario.default_shots());
    if shots == 0 {
        eprintln!("error: --shots must be >= 1");
        return Ok(ExitCode::from(EXIT_USAGE));
    }
    let mut cfg = OptimizerConfig::default();
    if let Some(v) = args.common.epsilon {
        cfg.epsilon = v;
    }
    if let Some(v) = args.common.beta {
        cfg.beta = v;
    }
    if let Some(v) = args.common.stop_tol {
        cfg.stop_tol = v;
    }
    if let Some(v) = args.common.max_iters {
        cfg.max_iters = v;
    }
    let seeds = match seeds_of(&args.common) {
        Ok(s) => s,
        Err(code) => return Ok(code),
    };
    std::fs::create_dir_all(&args.common.output_dir)?;

    let dir = args.common.output_dir.clone();
    let format = args.common.format;
    let alg_name = match algorithm {
        Algorithm::Dg => "dg",
        Algorithm::Apg => "apg",
    };
    let results = run_batch(&seeds, |seed| {
        let out = run_tomography(scenario, algorithm, shots, seed, &cfg)
            .map_err(|e| e.to_string())?;
        let stem = format!("{}-{alg_name}-s{seed}", scenario.name());
        write_json(&dir.join(format!("{stem}.povm.json")), &PovmFile::from_povm(&out.povm))
            .map_err(|e| e.to_string())?;
        write_json(
            &dir.join(format!("{stem}.fidelity.json")),
            &FidelityFile::new(&out.fidelity),
        )
        .map_err(|e| e.to_string())?;
        write_trace(&dir, &stem, format, &out.trace).map_err(|e| e.to_string())?;
        println!(
            "{} {alg_name} seed {seed}: overall fidelity {:.6} ({} iterations, {:?})",
            scenario.name(),
            out.fidelity.overall,
            out.iterations,
            out.status
        );
        Ok(out.status)
    });
    Ok(batch_exit(&results))
}

fn cmd_qdsc(args: QdscArgs) -> CmdResult {
    if args.shots == 0 {
        eprintln!("error: --shots must be >= 1");
        return Ok(ExitCode::from(EXIT_USAGE));
    }
    let mut cfg = QdscConfig::default();
    if let Some(v) = args.common.epsilon {
        cfg.epsilon = v;
    }
    if let Some(v) = args.common.beta {
        cfg.beta = v;
    }
    if let Some(v) = args.common.stop_tol {
        cfg.stop_tol = v;
    }
    if let Some(v) = args.common.max_iters {
        cfg.max_iters = v;
    }
    let seeds = match seeds_of(&args.common) {
        Ok(s) => s,
        Err(code) => return Ok(code),
    };
    std::fs::create_dir_all(&args.common.output_dir)?;
    let dir = args.common.output_dir.clone();
    let format = args.common.format;
    let results = run_batch(&seeds, |seed| {
        let out = run_qdsc(seed, args.shots, &cfg).map_err(|e| e.to_string())?;
        let stem = format!("qdsc-s{seed}");
        write_json(&dir.join(format!("{stem}.povm.json")), &PovmFile::from_povm(&out.povm))
            .map_err(|e| e.to_string())?;
        write_json(
            &dir.join(format!("{stem}.fidelity.json")),
            &FidelityFile::new(&out.fidelity),
        )
        .map_err(|e| e.to_string())?;
        write_trace(&dir, &stem, format, &out.trace).map_err(|e| e.to_string())?;
        let per: Vec<String> =
            out.fidelity.per_element.iter().map(|f| format!("{f:.4}")).collect();
        println!(
            "qdsc seed {seed}: element fidelities [{}], cost {:.3e} ({} iterations)",
            per.join(", "),
            out.cost,
            out.iterations
        );
        Ok(out.status)
    });
    Ok(batch_exit(&results))
}

fn cmd_project(args: ProjectArgs) -> CmdResult {
    let file: MatrixFile = read_json(&args.input)?;
    let m = file.to_matrix()?;
    let herm = (&m + m.adjoint()) * measopt::C64::from(0.5);
    if (&m - &herm).iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt() > 1e-6 {
        return Err("input matrix is not Hermitian (beyond 1e-6 symmetrization)".into());
    }
    let out = project_matrix(&m, &GilbertConfig::default());
    let diff = out.state.matrix() - &herm;
    let distance = diff.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    write_json(&args.output, &MatrixFile::from_matrix(out.state.matrix()))?;
    println!(
        "projected in {} iterations (converged: {}); Frobenius distance {distance:.6e}",
        out.iterations, out.converged
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_validate(args: ValidateArgs) -> CmdResult {
    let text = std::fs::read_to_string(&args.input)?;
    if let Ok(file) = serde_json::from_str::<PovmFile>(&text) {
        let povm = file.to_povm()?;
        let valid = is_valid_povm(&povm, 1e-9);
        println!(
            "POVM file: {} elements, dim {}, {}",
            povm.len(),
            povm.dim(),
            if valid { "valid" } else { "INVALID" }
        );
        return Ok(if valid { ExitCode::SUCCESS } else { ExitCode::FAILURE });
    }
    if let Ok(file) = serde_json::from_str::<ProbeEnsembleFile>(&text) {
        let probes = file.to_ensemble()?;
        println!("probe ensemble: {} states, dim {}", probes.len(), probes.dim());
        return Ok(ExitCode::SUCCESS);
    }
    if let Ok(file) = serde_json::from_str::<CountsFile>(&text) {
        let counts = file.to_counts()?;
        println!(
            "counts table: {} outcomes x {} states, {} shots/state",
            counts.counts.nrows(),
            counts.counts.ncols(),
            counts.shots_per_state
        );
        return Ok(ExitCode::SUCCESS);
    }
    Err("file does not parse as a POVM, probe ensemble, or counts table".into())
}
