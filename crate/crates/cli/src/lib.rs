//! Command-line front end: argument parsing, report types and atomic output.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use hardcoreboost::bounds::{
    estimate_constants, full_risk_bound, BoundInputs, BoundReport, EstimatedConstants,
};
use hardcoreboost::dataset::load_sample;
use hardcoreboost::experiments::{
    consistency_sweep, impossibility_report, write_curve_csv, ImpossibilityReport, SweepConfig,
    SweepCurve,
};
use hardcoreboost::hardcore::{separator_tableau, unweighted_correlation};
use hardcoreboost::optimize::{optimize, suboptimality_certificate, Method, StopReason};
use hardcoreboost::{
    compute_hardcore, FeatureMatrix, HardCoreCertificate, HypothesisClass, Loss, OptimizerConfig,
    Weighting,
};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Environment variable capping the worker thread count.
pub const THREADS_ENV: &str = "HARDCOREBOOST_THREADS";

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Domain(#[from] hardcoreboost::Error),
    #[error("{0}")]
    Path(String),
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl CliError {
    fn kind(&self) -> &'static str {
        match self {
            CliError::Domain(e) => match e {
                hardcoreboost::Error::DimensionMismatch { .. } => "dimension_mismatch",
                hardcoreboost::Error::InvalidArgument(_) => "invalid_argument",
                hardcoreboost::Error::UnsupportedLoss { .. } => "unsupported_loss",
                hardcoreboost::Error::ResourceLimit(_) => "resource_limit",
                hardcoreboost::Error::UnknownInstance(_) => "unknown_instance",
                hardcoreboost::Error::Lp(_) => "lp",
                hardcoreboost::Error::Inconsistent(_) => "inconsistent_certificate",
                hardcoreboost::Error::NotDecorrelating { .. } => "not_decorrelating",
                hardcoreboost::Error::NotSeparable { .. } => "not_separable",
                hardcoreboost::Error::Parse(_) => "parse",
                hardcoreboost::Error::Io(_) => "io",
                hardcoreboost::Error::Csv(_) => "csv",
            },
            CliError::Path(_) => "path",
            CliError::Config(_) => "config",
            CliError::Json(_) => "json",
            CliError::Io(_) => "io",
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Error body written to standard error on exit code 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub error: ErrorBody,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub kind: String,
    pub message: String,
}

#[derive(Debug, Parser)]
#[command(name = "hardcoreboost", version, about = "Hard cores, boosting oracles and risk bounds")]
pub struct Cli {
    /// Omit timestamps so reports are byte-for-byte reproducible.
    #[arg(long, global = true)]
    pub no_timestamp: bool,
    /// Progress messages on standard error; repeat for more.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Minimize the empirical surrogate risk over the span of a class.
    Train(TrainArgs),
    /// Compute and verify the hard core of a sample.
    Hardcore(HardcoreArgs),
    /// Evaluate the generalization bound.
    Bounds(BoundsArgs),
    /// Reproduce the separable-case counterexample on the staggered world.
    Impossibility(ImpossibilityArgs),
    /// Run a consistency sweep over nested lattice classes.
    Sweep(SweepArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Sub,
    Coord,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Sub => Method::Subgradient,
            MethodArg::Coord => Method::Coordinate,
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// CSV with feature columns, a `label` column and an optional `weight` column.
    pub dataset: PathBuf,
    /// `proj:<d>`, `lattice:<i>x<d>` or `explicit:<path.csv>`.
    #[arg(long)]
    pub class: String,
    /// `exp`, `logistic`, `hinge` or `cone:<c1>,<c2>`.
    #[arg(long, value_parser = clap::value_parser!(Loss))]
    pub loss: Loss,
    #[arg(long, value_enum, default_value = "coord")]
    pub method: MethodArg,
    #[arg(long, default_value_t = 1e-3)]
    pub rho: f64,
    #[arg(long, default_value_t = 10_000)]
    pub max_iters: usize,
    /// Stop once the gradient sup-norm falls to this value.
    #[arg(long, default_value_t = 1e-10)]
    pub grad_tol: f64,
    #[arg(long, default_value_t = 1.0)]
    pub step_scale: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Compute the hard core and report the duality gap of the result.
    #[arg(long)]
    pub certify: bool,
    /// Per-iteration CSV: iter, objective, l1_norm, grad_sup_norm.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Report path; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct HardcoreArgs {
    pub dataset: PathBuf,
    #[arg(long)]
    pub class: String,
    /// Write the final tableau of the separator LP to this text file.
    #[arg(long)]
    pub dump_tableau: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BoundsArgs {
    /// Sample size; taken from the dataset with `--from-certificate`.
    #[arg(long)]
    pub m: Option<f64>,
    /// Class size; taken from the class with `--from-certificate`.
    #[arg(long)]
    pub n: Option<f64>,
    #[arg(long)]
    pub delta: f64,
    #[arg(long, value_parser = clap::value_parser!(Loss))]
    pub loss: Loss,
    #[arg(long, default_value_t = 0.0)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 0.0)]
    pub rho: f64,
    #[arg(long)]
    pub phi0: Option<f64>,
    /// Mass of the hard core; the empirical mass with `--from-certificate`.
    #[arg(long)]
    pub core_mass: Option<f64>,
    #[arg(long)]
    pub c: Option<f64>,
    #[arg(long)]
    pub b: Option<f64>,
    #[arg(long)]
    pub m_core: Option<f64>,
    #[arg(long)]
    pub m_plus: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    pub approx_error: f64,
    /// Hard-core report written by the `hardcore` command.
    #[arg(long, requires_all = ["dataset", "class"])]
    pub from_certificate: Option<PathBuf>,
    /// Dataset the certificate was computed on.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[arg(long)]
    pub class: Option<String>,
    /// Train report whose weighting sets `c` and `b`; the separator otherwise.
    #[arg(long, requires = "from_certificate")]
    pub weights_from: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ImpossibilityArgs {
    #[arg(long)]
    pub depth: usize,
    #[arg(long)]
    pub m: usize,
    /// Comma-separated positive scales.
    #[arg(long, value_delimiter = ',', default_value = "1,2,4,8,16,32")]
    pub scales: Vec<f64>,
    #[arg(long, value_parser = clap::value_parser!(Loss), default_value = "exp")]
    pub loss: Loss,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// JSON sweep configuration; `seed` is required, everything else defaults.
    #[arg(long)]
    pub config: PathBuf,
    /// Curve CSV: stage, m, class_size, epsilon, excess_risk_median, excess_risk_p90, replication_count.
    #[arg(long)]
    pub out: PathBuf,
    /// Full curve with per-replication values as JSON.
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<u64>,
    pub dataset: String,
    pub class: String,
    pub loss: Loss,
    pub method: Method,
    pub lambda: Weighting,
    pub objective: f64,
    pub iterations: usize,
    pub stop_reason: StopReason,
    pub truncated: bool,
    /// Duality gap certified through the hard core, with `--certify`.
    pub suboptimality_gap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verification {
    pub ok: bool,
    pub core_size: usize,
    pub core_mass: f64,
    pub decorrelation_violation: f64,
    /// Smallest separator margin off the core; absent when the core is everything.
    pub margin_floor: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HardcoreReport {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<u64>,
    pub dataset: String,
    pub class: String,
    pub certificate: HardCoreCertificate,
    pub verification: Verification,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsReport {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<u64>,
    pub estimated: Option<EstimatedConstants>,
    pub report: BoundReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpossibilityOutput {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<u64>,
    pub report: ImpossibilityReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepOutput {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<u64>,
    pub config: SweepConfig,
    pub curve: SweepCurve,
}

/// Parses `argv` (program name first) and runs the command, writing reports
/// to `out` and diagnostics to `err`. Returns the process exit code.
pub fn run_with<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let rendered = e.render().to_string();
            let _ = if code == 0 { out.write_all(rendered.as_bytes()) } else { err.write_all(rendered.as_bytes()) };
            return code;
        }
    };
    match execute(&cli, out, err) {
        Ok(()) => 0,
        Err(e) => {
            let report = ErrorReport { error: ErrorBody { kind: e.kind().into(), message: e.to_string() } };
            let body = serde_json::to_string(&report).unwrap_or_else(|_| format!("{{\"error\":\"{e}\"}}"));
            let _ = writeln!(err, "{body}");
            1
        }
    }
}

/// [`run_with`] on the process's standard streams.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with(argv, &mut stdout.lock(), &mut stderr.lock())
}

fn thread_pool() -> CliResult<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(raw) = std::env::var(THREADS_ENV) {
        let n: usize = raw
            .trim()
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| CliError::Config(format!("{THREADS_ENV} must be a positive integer, got `{raw}`")))?;
        builder = builder.num_threads(n);
    }
    builder.build().map_err(|e| CliError::Config(format!("cannot start worker pool: {e}")))
}

fn execute(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> CliResult<()> {
    validate_paths(&cli.command)?;
    let pool = thread_pool()?;
    let timestamp = (!cli.no_timestamp).then(now);
    let ctx = Context { timestamp, verbose: cli.verbose };
    let (mut report, mut log) = (Vec::new(), Vec::new());
    let result = pool.install(|| match &cli.command {
        Command::Train(args) => train(&ctx, args, &mut report, &mut log),
        Command::Hardcore(args) => hardcore(&ctx, args, &mut report, &mut log),
        Command::Bounds(args) => bounds(&ctx, args, &mut report),
        Command::Impossibility(args) => impossibility(&ctx, args, &mut report, &mut log),
        Command::Sweep(args) => sweep(&ctx, args, &mut log),
    });
    err.write_all(&log)?;
    result?;
    out.write_all(&report)?;
    Ok(())
}

struct Context {
    timestamp: Option<u64>,
    verbose: u8,
}

impl Context {
    fn log(&self, err: &mut dyn Write, msg: &str) {
        if self.verbose > 0 {
            let _ = writeln!(err, "{msg}");
        }
    }
}

fn now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

fn require_file(path: &Path) -> CliResult<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::Path(format!("input file {} does not exist", path.display())))
    }
}

fn require_output_dir(path: &Path) -> CliResult<()> {
    let parent = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    if !parent.is_dir() {
        return Err(CliError::Path(format!("output directory {} does not exist", parent.display())));
    }
    if path.is_dir() {
        return Err(CliError::Path(format!("output path {} is a directory", path.display())));
    }
    Ok(())
}

fn validate_paths(command: &Command) -> CliResult<()> {
    let (inputs, outputs): (Vec<&Path>, Vec<&Path>) = match command {
        Command::Train(a) => (vec![&a.dataset], [&a.trace, &a.out].into_iter().flatten().map(|p| p.as_path()).collect()),
        Command::Hardcore(a) => (vec![&a.dataset], [&a.dump_tableau, &a.out].into_iter().flatten().map(|p| p.as_path()).collect()),
        Command::Bounds(a) => (
            [&a.from_certificate, &a.dataset, &a.weights_from].into_iter().flatten().map(|p| p.as_path()).collect(),
            a.out.iter().map(|p| p.as_path()).collect(),
        ),
        Command::Impossibility(a) => (Vec::new(), a.out.iter().map(|p| p.as_path()).collect()),
        Command::Sweep(a) => (vec![&a.config], std::iter::once(&a.out).chain(&a.json).map(|p| p.as_path()).collect()),
    };
    for p in inputs {
        require_file(p)?;
    }
    for p in outputs {
        require_output_dir(p)?;
    }
    Ok(())
}

/// Writes through a temporary file in the target directory, then renames.
fn write_atomic(path: &Path, fill: impl FnOnce(&mut dyn Write) -> CliResult<()>) -> CliResult<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let tmp = tempfile::NamedTempFile::new_in(dir)?;
    {
        let mut w = BufWriter::new(tmp.as_file());
        fill(&mut w)?;
        w.flush()?;
    }
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| CliError::Io(e.error))?;
    Ok(())
}

fn emit_json<T: Serialize>(value: &T, path: Option<&Path>, out: &mut dyn Write) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    match path {
        Some(p) => write_atomic(p, |w| Ok(w.write_all(text.as_bytes())?)),
        None => Ok(out.write_all(text.as_bytes())?),
    }
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> CliResult<T> {
    let file = File::open(path)?;
    Ok(serde_json::from_reader(std::io::BufReader::new(file))?)
}

fn load_problem(dataset: &Path, class: &str) -> CliResult<(HypothesisClass, FeatureMatrix)> {
    let class: HypothesisClass = class.parse()?;
    let sample = load_sample(dataset)?;
    let fm = class.materialize(&sample)?;
    Ok((class, fm))
}

fn train(ctx: &Context, args: &TrainArgs, out: &mut dyn Write, err: &mut dyn Write) -> CliResult<()> {
    let (class, fm) = load_problem(&args.dataset, &args.class)?;
    let cfg = OptimizerConfig {
        method: args.method.into(),
        max_iters: args.max_iters,
        rho: args.rho,
        grad_tol: args.grad_tol,
        step_scale: args.step_scale,
        seed: args.seed,
        init: None,
        dual_bound: None,
    };
    ctx.log(err, &format!("training on {} points with {} hypotheses", fm.rows(), fm.cols()));
    let run = optimize(&fm, &args.loss, &cfg)?;
    let suboptimality_gap = if args.certify {
        let cert = compute_hardcore(&fm)?;
        Some(suboptimality_certificate(&fm, &args.loss, run.lambda.as_slice(), &cert)?)
    } else {
        None
    };
    if let Some(path) = &args.trace {
        write_atomic(path, |w| {
            let mut wtr = csv::Writer::from_writer(w);
            wtr.write_record(["iter", "objective", "l1_norm", "grad_sup_norm"]).map_err(hardcoreboost::Error::from)?;
            for t in &run.trace {
                wtr.write_record([
                    t.iter.to_string(),
                    t.objective.to_string(),
                    t.l1_norm.to_string(),
                    t.grad_sup_norm.to_string(),
                ])
                .map_err(hardcoreboost::Error::from)?;
            }
            wtr.flush()?;
            Ok(())
        })?;
    }
    let report = TrainReport {
        timestamp: ctx.timestamp,
        dataset: args.dataset.display().to_string(),
        class: class.to_string(),
        loss: args.loss,
        method: cfg.method,
        lambda: run.lambda,
        objective: run.objective,
        iterations: run.iterations,
        stop_reason: run.stop_reason,
        truncated: run.truncated,
        suboptimality_gap,
    };
    emit_json(&report, args.out.as_deref(), out)
}

fn hardcore(ctx: &Context, args: &HardcoreArgs, out: &mut dyn Write, err: &mut dyn Write) -> CliResult<()> {
    let (class, fm) = load_problem(&args.dataset, &args.class)?;
    ctx.log(err, &format!("solving {} decorrelation programs", fm.rows()));
    let cert = compute_hardcore(&fm)?;
    if let Some(path) = &args.dump_tableau {
        let text = separator_tableau(&fm, &cert.core)?
            .unwrap_or_else(|| "separator LP is empty: every point lies in the hard core\n".into());
        write_atomic(path, |w| Ok(w.write_all(text.as_bytes())?))?;
    }
    let verification = Verification {
        ok: cert.verify(&fm).is_ok(),
        core_size: cert.core.len(),
        core_mass: cert.core.mass(fm.weights()),
        decorrelation_violation: unweighted_correlation(&fm, &cert.p),
        margin_floor: cert.t,
    };
    let report = HardcoreReport {
        timestamp: ctx.timestamp,
        dataset: args.dataset.display().to_string(),
        class: class.to_string(),
        certificate: cert,
        verification,
    };
    emit_json(&report, args.out.as_deref(), out)
}

fn bounds(ctx: &Context, args: &BoundsArgs, out: &mut dyn Write) -> CliResult<()> {
    let mut inputs = BoundInputs {
        m: args.m.unwrap_or(f64::NAN),
        n: args.n.unwrap_or(f64::NAN),
        delta: args.delta,
        epsilon: args.epsilon,
        rho: args.rho,
        phi0: args.phi0,
        core_mass: args.core_mass.unwrap_or(f64::NAN),
        c: args.c.unwrap_or(f64::NAN),
        b: args.b.unwrap_or(f64::NAN),
        m_core: args.m_core,
        m_plus: args.m_plus,
    };
    let mut estimated = None;
    if let (Some(cert_path), Some(dataset), Some(class)) = (&args.from_certificate, &args.dataset, &args.class) {
        let report: HardcoreReport = read_json(cert_path)?;
        let (_, fm) = load_problem(dataset, class)?;
        report.certificate.verify(&fm)?;
        let lambda = match &args.weights_from {
            Some(p) => read_json::<TrainReport>(p)?.lambda,
            None => report.certificate.lambda.clone(),
        };
        let est = estimate_constants(&fm, &args.loss, &report.certificate, &lambda)?;
        let core = &report.certificate.core;
        inputs.m = args.m.unwrap_or(fm.rows() as f64);
        inputs.n = args.n.unwrap_or(fm.cols() as f64);
        inputs.core_mass = args.core_mass.unwrap_or(core.mass(fm.weights()).clamp(0.0, 1.0));
        inputs.c = args.c.unwrap_or(est.c);
        inputs.b = args.b.unwrap_or(est.b);
        inputs.m_core = args.m_core.or(Some(core.len() as f64));
        inputs.m_plus = args.m_plus.or(Some((fm.rows() - core.len()) as f64));
        estimated = Some(est);
    }
    let missing: Vec<&str> = [("--m", inputs.m), ("--n", inputs.n), ("--core-mass", inputs.core_mass), ("--c", inputs.c), ("--b", inputs.b)]
        .into_iter()
        .filter(|(_, v)| v.is_nan())
        .map(|(name, _)| name)
        .collect();
    if !missing.is_empty() {
        return Err(CliError::Config(format!(
            "missing {} (or pass --from-certificate with --dataset and --class)",
            missing.join(", ")
        )));
    }
    let report = full_risk_bound(&inputs, &args.loss, args.approx_error)?;
    emit_json(&BoundsReport { timestamp: ctx.timestamp, estimated, report }, args.out.as_deref(), out)
}

fn impossibility(ctx: &Context, args: &ImpossibilityArgs, out: &mut dyn Write, err: &mut dyn Write) -> CliResult<()> {
    let report = impossibility_report(args.depth, args.m, &args.scales, &args.loss, args.seed)?;
    ctx.log(
        err,
        &format!("{} draw(s); misclassification found: {}", report.attempts, report.found),
    );
    emit_json(&ImpossibilityOutput { timestamp: ctx.timestamp, report }, args.out.as_deref(), out)
}

fn sweep(ctx: &Context, args: &SweepArgs, err: &mut dyn Write) -> CliResult<()> {
    let config: SweepConfig = read_json(&args.config)?;
    ctx.log(
        err,
        &format!("{} stages x {} replications", config.stages.len(), config.replications),
    );
    let curve = consistency_sweep(&config)?;
    write_atomic(&args.out, |w| Ok(write_curve_csv(&curve, w)?))?;
    if let Some(path) = &args.json {
        let full = SweepOutput { timestamp: ctx.timestamp, config, curve };
        emit_json(&full, Some(path), &mut std::io::sink())?;
    }
    Ok(())
}
