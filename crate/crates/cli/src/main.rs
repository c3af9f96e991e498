use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use discgs::io::{read_dataset, read_labels, write_dataset, write_json, write_labels, write_metrics, write_trace};
use discgs::runtime::resolve_hyper;
use discgs::synth::{generate_gmm, preset, GmmSpec};
use discgs::{run_cgs, run_discgs, Dataset, ErrorKind, Metrics, NiwParams, RunConfig};
use serde::Serialize;

const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Parser)]
#[command(name = "discgs", version, about = "Dirichlet process Gaussian mixture clustering")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic dataset and its ground-truth labels.
    Generate(GenerateArgs),
    /// Centralized collapsed Gibbs sampler.
    Fit(FitArgs),
    /// Master/worker sampler over `--workers` shards.
    FitDistributed(FitDistributedArgs),
    /// Compare predicted labels against ground truth.
    Evaluate(EvaluateArgs),
    /// Wall-time comparison across worker counts.
    Bench(BenchArgs),
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, conflicts_with = "spec", required_unless_present = "spec")]
    preset: Option<String>,
    /// Mixture description as JSON.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Overrides the seed stored in `--spec`.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SamplerArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long, default_value_t = 100)]
    iters: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Ground-truth labels as `index,label` CSV.
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    sampler: SamplerArgs,
}

#[derive(Args)]
struct FitDistributedArgs {
    #[command(flatten)]
    sampler: SamplerArgs,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Skip the per-iteration ARI even when `--truth` is given.
    #[arg(long)]
    no_trace_ari: bool,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    truth: PathBuf,
    /// Metrics JSON path; printed to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    sampler: SamplerArgs,
    #[arg(long, value_delimiter = ',', required = true, num_args = 1..)]
    workers_list: Vec<usize>,
    /// Also time the centralized sampler.
    #[arg(long)]
    include_central: bool,
    /// Allow per-iteration ARI tracing during timed runs.
    #[arg(long)]
    force: bool,
}

#[derive(Debug)]
struct CliError {
    kind: ErrorKind,
    message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            kind: ErrorKind::Usage,
            message: message.into(),
        }
    }

    fn code(&self) -> u8 {
        match self.kind {
            ErrorKind::Usage => 2,
            ErrorKind::Io => 3,
            ErrorKind::Numerical => 4,
        }
    }

    fn tag(&self) -> &'static str {
        match self.kind {
            ErrorKind::Usage => "usage",
            ErrorKind::Io => "io",
            ErrorKind::Numerical => "numerical",
        }
    }
}

impl From<discgs::Error> for CliError {
    fn from(e: discgs::Error) -> Self {
        Self {
            kind: e.kind(),
            message: e.to_string(),
        }
    }
}

type CliResult<T> = Result<T, CliError>;

#[derive(Serialize)]
struct PriorRecord {
    mean: Vec<f64>,
    kappa: f64,
    nu: f64,
    scale: Vec<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    ridge: Option<f64>,
}

impl PriorRecord {
    fn new(p: &NiwParams, ridge: Option<f64>) -> Self {
        let d = p.dim();
        Self {
            mean: p.mu.iter().copied().collect(),
            kappa: p.kappa,
            nu: p.nu,
            scale: (0..d).map(|i| (0..d).map(|j| p.psi[(i, j)]).collect()).collect(),
            ridge,
        }
    }
}

#[derive(Serialize, Default)]
struct Manifest {
    command: &'static str,
    version: &'static str,
    seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    data: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    preset: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    iterations: Option<usize>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    workers: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    prior: Option<PriorRecord>,
}

fn prepare_out(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError {
        kind: ErrorKind::Io,
        message: format!("{}: {e}", dir.display()),
    })
}

fn load_truth(path: Option<&Path>, n: usize) -> CliResult<Option<Vec<usize>>> {
    let Some(path) = path else { return Ok(None) };
    let labels = read_labels(path)?;
    if labels.len() != n {
        return Err(CliError::usage(format!(
            "{}: {} labels for {n} data rows",
            path.display(),
            labels.len()
        )));
    }
    Ok(Some(labels))
}

fn load(args: &SamplerArgs) -> CliResult<(Dataset, Option<Vec<usize>>)> {
    if args.iters == 0 {
        return Err(CliError::usage("--iters must be at least 1"));
    }
    if !(args.alpha > 0.0 && args.alpha.is_finite()) {
        return Err(CliError::usage("--alpha must be positive"));
    }
    let (data, _) = read_dataset(&args.data)?;
    let truth = load_truth(args.truth.as_deref(), data.len())?;
    Ok((data, truth))
}

fn sampler_manifest(command: &'static str, args: &SamplerArgs, workers: Vec<usize>, prior: PriorRecord) -> Manifest {
    Manifest {
        command,
        version: VERSION,
        seed: args.seed,
        data: Some(args.data.display().to_string()),
        alpha: Some(args.alpha),
        iterations: Some(args.iters),
        workers,
        prior: Some(prior),
        ..Manifest::default()
    }
}

fn write_outputs(
    out: &Path,
    labels: &[usize],
    trace: &discgs::RunTrace,
    truth: Option<&[usize]>,
    manifest: &Manifest,
) -> CliResult<()> {
    prepare_out(out)?;
    write_labels(out.join("labels.csv"), labels)?;
    write_trace(out.join("trace.json"), trace)?;
    write_metrics(out.join("metrics.json"), &Metrics::evaluate(labels, truth)?)?;
    write_json(out.join("manifest.json"), manifest)?;
    Ok(())
}

fn generate(args: GenerateArgs) -> CliResult<()> {
    let (spec, name) = match (&args.preset, &args.spec) {
        (Some(name), _) => (preset(name, args.seed.unwrap_or(0))?, Some(name.clone())),
        (None, Some(path)) => {
            let text = fs::read_to_string(path).map_err(|e| CliError {
                kind: ErrorKind::Io,
                message: format!("{}: {e}", path.display()),
            })?;
            let mut spec: GmmSpec = serde_json::from_str(&text).map_err(|e| CliError {
                kind: ErrorKind::Io,
                message: format!("{}: {e}", path.display()),
            })?;
            if let Some(seed) = args.seed {
                spec.seed = seed;
            }
            (spec, None)
        }
        (None, None) => return Err(CliError::usage("one of --preset or --spec is required")),
    };
    let (data, labels) = generate_gmm(&spec)?;
    prepare_out(&args.out)?;
    write_dataset(args.out.join("data.csv"), &data, None)?;
    write_labels(args.out.join("labels.csv"), &labels)?;
    write_json(
        args.out.join("manifest.json"),
        &Manifest {
            command: "generate",
            version: VERSION,
            seed: spec.seed,
            preset: name,
            ..Manifest::default()
        },
    )?;
    write_json(args.out.join("spec.json"), &spec)?;
    Ok(())
}

fn fit(args: FitArgs) -> CliResult<()> {
    let a = &args.sampler;
    let (data, truth) = load(a)?;
    let (hyper, ridge) = resolve_hyper(&data, a.alpha, None)?;
    let prior = PriorRecord::new(&hyper.g0, ridge);
    let (state, trace) = run_cgs(&data, hyper, a.iters, a.seed, truth.as_deref())?;
    write_outputs(
        &a.out,
        state.labels(),
        &trace,
        truth.as_deref(),
        &sampler_manifest("fit", a, vec![], prior),
    )
}

fn fit_distributed(args: FitDistributedArgs) -> CliResult<()> {
    let a = &args.sampler;
    let (data, truth) = load(a)?;
    let config = RunConfig {
        alpha: a.alpha,
        iterations: a.iters,
        workers: args.workers,
        seed: a.seed,
        prior: None,
        record_trace: !args.no_trace_ari,
    };
    let run = run_discgs(&data, truth.as_deref(), &config)?;
    let manifest = sampler_manifest(
        "fit-distributed",
        a,
        vec![args.workers],
        PriorRecord::new(&run.prior, run.ridge),
    );
    write_outputs(&a.out, &run.labels, &run.trace, truth.as_deref(), &manifest)
}

fn evaluate(args: EvaluateArgs) -> CliResult<()> {
    let pred = read_labels(&args.pred)?;
    let truth = read_labels(&args.truth)?;
    let metrics = Metrics::evaluate(&pred, Some(&truth))?;
    match args.out {
        Some(path) => write_metrics(path, &metrics)?,
        None => println!("{}", serde_json::to_string_pretty(&metrics).expect("metrics serialize")),
    }
    Ok(())
}

#[derive(Serialize)]
struct TimingRow {
    method: &'static str,
    workers: usize,
    iterations: usize,
    total_secs: f64,
    mean_iteration_secs: f64,
    num_clusters: usize,
}

fn bench(args: BenchArgs) -> CliResult<()> {
    let a = &args.sampler;
    if args.workers_list.is_empty() {
        return Err(CliError::usage("--workers-list must not be empty"));
    }
    if a.truth.is_some() && !args.force {
        return Err(CliError::usage(
            "per-iteration ARI distorts timings; pass --force to trace it anyway",
        ));
    }
    let (data, truth) = load(a)?;
    let mut rows = Vec::new();
    let mut prior = None;
    for &workers in &args.workers_list {
        let config = RunConfig {
            alpha: a.alpha,
            iterations: a.iters,
            workers,
            seed: a.seed,
            prior: None,
            record_trace: truth.is_some(),
        };
        let start = Instant::now();
        let run = run_discgs(&data, truth.as_deref(), &config)?;
        let total_secs = start.elapsed().as_secs_f64();
        rows.push(TimingRow {
            method: "distributed",
            workers,
            iterations: a.iters,
            total_secs,
            mean_iteration_secs: run.trace.mean_wall_time_secs(),
            num_clusters: run.num_clusters,
        });
        prior.get_or_insert_with(|| PriorRecord::new(&run.prior, run.ridge));
    }
    if args.include_central {
        let (hyper, _) = resolve_hyper(&data, a.alpha, None)?;
        let start = Instant::now();
        let (state, trace) = run_cgs(&data, hyper, a.iters, a.seed, truth.as_deref())?;
        rows.push(TimingRow {
            method: "central",
            workers: 1,
            iterations: a.iters,
            total_secs: start.elapsed().as_secs_f64(),
            mean_iteration_secs: trace.mean_wall_time_secs(),
            num_clusters: state.num_clusters(),
        });
    }

    prepare_out(&a.out)?;
    let mut csv = String::from("method,workers,iterations,total_secs,mean_iteration_secs,num_clusters\n");
    for r in &rows {
        csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.method, r.workers, r.iterations, r.total_secs, r.mean_iteration_secs, r.num_clusters
        ));
    }
    let path = a.out.join("timing.csv");
    fs::write(&path, csv).map_err(|e| CliError {
        kind: ErrorKind::Io,
        message: format!("{}: {e}", path.display()),
    })?;
    write_json(a.out.join("timing.json"), &rows)?;
    let manifest = sampler_manifest("bench", a, args.workers_list.clone(), prior.expect("at least one run"));
    write_json(a.out.join("manifest.json"), &manifest)?;
    Ok(())
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Generate(a) => generate(a),
        Command::Fit(a) => fit(a),
        Command::FitDistributed(a) => fit_distributed(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Bench(a) => bench(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let rendered = e.to_string();
            let first = rendered
                .lines()
                .find(|l| !l.trim().is_empty())
                .unwrap_or("invalid arguments");
            eprintln!("error[usage]: {}", first.trim_start_matches("error: "));
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {}", e.tag(), e.message.replace('\n', " "));
            ExitCode::from(e.code())
        }
    }
}
