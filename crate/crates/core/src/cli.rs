//! Command-line front end: `train`, `predict`, `region`, `breakdown`, `cv`.
//!
//! Exit codes: 0 success, 1 internal failure, 2 usage error, 3 data error,
//! 4 infeasible (unbounded) training problem.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_rational::Ratio;

use crate::data::{
    self, label_ratio, load_csv, load_csv_unlabelled, load_libsvm, Dataset, LabelColumn,
};
use crate::kernel::{median_heuristic_gamma, KernelSpec};
use crate::lab::{self, ContaminationMode, ContaminationSpec, SweepConfig};
use crate::model_io::{self, write_atomic};
use crate::objective::LevelPolicy;
use crate::region::{self, lambda_regions, LambdaRegions};
use crate::select::{self, grid_search_cv};
use crate::trainer::{self, Model, TrainConfig, TrainError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_INFEASIBLE: i32 = 4;

#[derive(Debug, Parser)]
#[command(
    name = "robust-svm",
    version,
    about = "Robust (nu, mu)-SVM training and breakdown analysis"
)]
pub struct Cli {
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a model and write it as JSON.
    Train(TrainArgs),
    /// Score new samples with a saved model.
    Predict(PredictArgs),
    /// Classify a lattice of (nu, mu) by breakdown behaviour.
    Region(RegionArgs),
    /// Contaminate, train and record worst-case norms over a (nu, mu) grid.
    Breakdown(BreakdownArgs),
    /// Cross-validated grid search over the admissible region.
    Cv(CvArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KernelKind {
    Linear,
    Gaussian,
    Precomputed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InputFormat {
    Auto,
    Csv,
    Libsvm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Replace,
    Flip,
    Adversarial,
}

#[derive(Debug, Clone, Args)]
pub struct KernelArgs {
    #[arg(long, value_enum, default_value_t = KernelKind::Gaussian)]
    pub kernel: KernelKind,
    /// Gaussian width; defaults to the median heuristic.
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Declared bound on k(x, x) for precomputed kernels.
    #[arg(long)]
    pub kernel_bound: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct InputArgs {
    /// Training data (CSV with header, or LIBSVM).
    pub data: PathBuf,
    /// Label column name, or zero-based index.
    #[arg(long, default_value = "label")]
    pub label_column: String,
    #[arg(long, value_enum, default_value_t = InputFormat::Auto)]
    pub format: InputFormat,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub kernel: KernelArgs,
    #[arg(long)]
    pub nu: f64,
    #[arg(long, default_value_t = 0.0)]
    pub mu: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub restarts: usize,
    #[arg(long, default_value_t = 200)]
    pub max_outer_iter: usize,
    /// Relative objective change that stops the DC iterations.
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
    /// Reject nu, mu whose product with m is not an integer.
    #[arg(long)]
    pub strict_levels: bool,
    /// Train on the raw features.
    #[arg(long)]
    pub no_standardize: bool,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Samples to score; a label column, if present, is used to report the error rate.
    pub data: PathBuf,
    #[arg(long, default_value = "label")]
    pub label_column: String,
    #[arg(long, value_enum, default_value_t = InputFormat::Auto)]
    pub format: InputFormat,
    /// Output CSV; standard output when omitted.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct RegionArgs {
    /// Observed label ratio r' in (0, 1/2], as a decimal.
    #[arg(long)]
    pub label_ratio: String,
    /// Sample size; the lattice uses multiples of 1/m.
    #[arg(long)]
    pub m: usize,
    /// Known upper bound on the outlier ratio.
    #[arg(long)]
    pub mu_bar: Option<String>,
    /// Maximum number of grid points.
    #[arg(long, default_value_t = 400)]
    pub points: usize,
    #[arg(long, value_enum, default_value_t = KernelKind::Gaussian)]
    pub kernel: KernelKind,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct BreakdownArgs {
    /// Clean training data; a spiral sample is generated when omitted.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long, default_value = "label")]
    pub label_column: String,
    /// Size of the generated training spiral.
    #[arg(long, default_value_t = 200)]
    pub spiral: usize,
    /// Clean test data; a spiral sample is generated when omitted.
    #[arg(long)]
    pub test: Option<PathBuf>,
    #[arg(long, default_value_t = 400)]
    pub test_spiral: usize,
    #[arg(long, default_value_t = 0.1)]
    pub noise: f64,
    #[command(flatten)]
    pub kernel: KernelArgs,
    #[arg(long, value_enum, default_value_t = ModeArg::Replace)]
    pub mode: ModeArg,
    #[arg(long, default_value_t = 1e4)]
    pub outlier_scale: f64,
    #[arg(long, default_value_t = 30)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.25)]
    pub mu_max: f64,
    /// Largest nu - mu on the grid.
    #[arg(long, default_value_t = 0.9)]
    pub gap_max: f64,
    #[arg(long, default_value_t = 100)]
    pub points: usize,
    #[arg(long, default_value_t = 200)]
    pub max_outer_iter: usize,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct CvArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub kernel: KernelArgs,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Maximum number of grid points.
    #[arg(long, default_value_t = 24)]
    pub points: usize,
    /// Lattice denominator; defaults to the training-fold size.
    #[arg(long)]
    pub grid_m: Option<usize>,
    #[arg(long)]
    pub mu_bar: Option<String>,
    /// Restrict the grid to mu = 0 (plain nu-SVM).
    #[arg(long)]
    pub mu_zero: bool,
    #[arg(long)]
    pub no_standardize: bool,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

/// Error with its exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn usage(msg: impl Into<String>) -> Self {
        CliError {
            code: EXIT_USAGE,
            message: msg.into(),
        }
    }

    fn data(msg: impl std::fmt::Display) -> Self {
        CliError {
            code: EXIT_DATA,
            message: msg.to_string(),
        }
    }

    fn failure(msg: impl std::fmt::Display) -> Self {
        CliError {
            code: EXIT_FAILURE,
            message: msg.to_string(),
        }
    }
}

fn from_train(e: TrainError<f64>) -> CliError {
    match e {
        TrainError::SubproblemInfeasible { .. } => CliError {
            code: EXIT_INFEASIBLE,
            message: e.to_string(),
        },
        TrainError::SingleClass | TrainError::DimensionMismatch(_) | TrainError::Kernel(_) => {
            CliError::data(e)
        }
        TrainError::Level(_) => CliError::usage(e.to_string()),
        other => CliError::failure(other),
    }
}

/// Parses arguments and runs the command; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new().filter_level(level).try_init();
    match execute(&cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

pub fn execute(cmd: &Command) -> Result<(), CliError> {
    match cmd {
        Command::Train(a) => cmd_train(a),
        Command::Predict(a) => cmd_predict(a),
        Command::Region(a) => cmd_region(a),
        Command::Breakdown(a) => cmd_breakdown(a),
        Command::Cv(a) => cmd_cv(a),
    }
}

fn label_column(s: &str) -> LabelColumn {
    match s.parse::<usize>() {
        Ok(i) => LabelColumn::Index(i),
        Err(_) => LabelColumn::Name(s.to_string()),
    }
}

fn resolve_format(path: &Path, format: InputFormat) -> InputFormat {
    match format {
        InputFormat::Auto => match path.extension().and_then(|e| e.to_str()) {
            Some("libsvm" | "svm" | "txt") => InputFormat::Libsvm,
            _ => InputFormat::Csv,
        },
        f => f,
    }
}

fn load(path: &Path, label: &str, format: InputFormat) -> Result<Dataset<f64>, CliError> {
    match resolve_format(path, format) {
        InputFormat::Libsvm => load_libsvm(path),
        _ => load_csv(path, &label_column(label)),
    }
    .map_err(CliError::data)
}

fn check_levels(nu: f64, mu: f64) -> Result<(), CliError> {
    if !(nu > 0.0 && nu < 1.0) {
        return Err(CliError::usage(format!(
            "--nu must lie in (0, 1), got {}",
            nu
        )));
    }
    if !(mu >= 0.0 && mu < nu) {
        return Err(CliError::usage(format!(
            "--mu must lie in [0, nu), got {}",
            mu
        )));
    }
    Ok(())
}

fn resolve_kernel(
    args: &KernelArgs,
    x: &ndarray::Array2<f64>,
) -> Result<KernelSpec<f64>, CliError> {
    if let Some(g) = args.gamma {
        if args.kernel != KernelKind::Gaussian {
            return Err(CliError::usage(
                "--gamma applies to the gaussian kernel only",
            ));
        }
        if !(g > 0.0 && g.is_finite()) {
            return Err(CliError::usage(format!(
                "--gamma must be positive, got {}",
                g
            )));
        }
    }
    if let Some(b) = args.kernel_bound {
        if args.kernel != KernelKind::Precomputed || !(b > 0.0 && b.is_finite()) {
            return Err(CliError::usage(
                "--kernel-bound takes a positive value and a precomputed kernel",
            ));
        }
    }
    Ok(match args.kernel {
        KernelKind::Linear => KernelSpec::Linear,
        KernelKind::Gaussian => KernelSpec::Gaussian {
            gamma: args
                .gamma
                .unwrap_or_else(|| median_heuristic_gamma(x.view())),
        },
        KernelKind::Precomputed => KernelSpec::Precomputed {
            bound: args.kernel_bound,
        },
    })
}

fn kernel_desc(k: &KernelSpec<f64>) -> String {
    match k {
        KernelSpec::Linear => "linear".into(),
        KernelSpec::Gaussian { gamma } => format!("gaussian gamma={}", gamma),
        KernelSpec::Precomputed { bound } => match bound {
            Some(b) => format!("precomputed bound={}", b),
            None => "precomputed".into(),
        },
    }
}

fn emit(output: Option<&Path>, text: &str) -> Result<(), CliError> {
    match output {
        Some(p) => write_atomic(p, text.as_bytes())
            .map_err(|e| CliError::failure(format!("{}: {}", p.display(), e))),
        None => {
            print!("{}", text);
            Ok(())
        }
    }
}

fn cmd_train(a: &TrainArgs) -> Result<(), CliError> {
    check_levels(a.nu, a.mu)?;
    if a.restarts == 0 || a.max_outer_iter == 0 || !(a.tol > 0.0) {
        return Err(CliError::usage(
            "--restarts, --max-outer-iter and --tol must be positive",
        ));
    }
    let raw = load(&a.input.data, &a.input.label_column, a.input.format)?;
    let (pos, neg) = raw.class_counts();
    if pos == 0 || neg == 0 {
        return Err(CliError::data("training data contains a single class"));
    }
    let standardize = !a.no_standardize && a.kernel.kernel != KernelKind::Precomputed;
    let (ds, scaler) = if standardize {
        let (d, s) = data::standardize(&raw);
        (d, Some(s))
    } else {
        (raw, None)
    };
    let kernel = resolve_kernel(&a.kernel, &ds.features)?;
    let cfg = TrainConfig {
        nu: a.nu,
        mu: a.mu,
        kernel,
        tol_objective: a.tol,
        max_outer_iter: a.max_outer_iter,
        restarts: a.restarts,
        seed: a.seed,
        integrality: if a.strict_levels {
            LevelPolicy::Strict
        } else {
            LevelPolicy::Snap
        },
    };
    let mut model: Model<f64> = match trainer::train(&ds, &cfg) {
        Ok(m) => m,
        Err(TrainError::NotConverged(m)) => {
            log::warn!("DC iterations did not converge; writing the best iterate");
            *m
        }
        Err(e) => return Err(from_train(e)),
    };
    model.scaler = scaler;
    model_io::save(&model, &a.output).map_err(CliError::failure)?;
    println!(
        "# robust-svm train nu={} mu={} kernel={} m={} support={} objective={} output={}",
        a.nu,
        a.mu,
        kernel_desc(&kernel),
        ds.len(),
        model.support_idx.len(),
        model.objective,
        a.output.display()
    );
    Ok(())
}

fn cmd_predict(a: &PredictArgs) -> Result<(), CliError> {
    let model: Model<f64> = model_io::load(&a.model).map_err(CliError::data)?;
    let (x, labels) = match resolve_format(&a.data, a.format) {
        InputFormat::Libsvm => {
            let ds = load_libsvm::<f64>(&a.data).map_err(CliError::data)?;
            (ds.features, Some(ds.labels))
        }
        _ => match load_csv::<f64>(&a.data, &label_column(&a.label_column)) {
            Ok(ds) => (ds.features, Some(ds.labels)),
            Err(data::DataError::Invalid(msg))
                if msg.starts_with("no column named") || msg.starts_with("label column") =>
            {
                (load_csv_unlabelled(&a.data).map_err(CliError::data)?, None)
            }
            Err(e) => return Err(CliError::data(e)),
        },
    };
    let (scores, pred) = model.predict(x.view()).map_err(CliError::data)?;
    let mut out = String::new();
    let _ = write!(
        out,
        "# robust-svm predict model={} data={}",
        a.model.display(),
        a.data.display()
    );
    if let Some(y) = &labels {
        let wrong = y.iter().zip(&pred).filter(|(a, b)| a != b).count();
        let _ = write!(out, " error={}", wrong as f64 / y.len().max(1) as f64);
    }
    out.push('\n');
    out.push_str("score,label\n");
    for (s, l) in scores.iter().zip(&pred) {
        let _ = writeln!(out, "{},{}", s, l);
    }
    emit(a.output.as_deref(), &out)
}

/// Parses a decimal such as `0.4` or `2/5` into an exact ratio.
pub fn parse_ratio(s: &str) -> Option<Ratio<i64>> {
    let s = s.trim();
    if let Some((n, d)) = s.split_once('/') {
        let (n, d): (i64, i64) = (n.trim().parse().ok()?, d.trim().parse().ok()?);
        return (d != 0).then(|| Ratio::new(n, d));
    }
    let (int, frac) = s.split_once('.').unwrap_or((s, ""));
    if frac.len() > 15 || !frac.chars().all(|c| c.is_ascii_digit()) {
        return None;
    }
    let neg = int.starts_with('-');
    let int_val: i64 = if int.is_empty() || int == "-" {
        0
    } else {
        int.parse().ok()?
    };
    let den = 10i64.checked_pow(frac.len() as u32)?;
    let frac_val: i64 = if frac.is_empty() {
        0
    } else {
        frac.parse().ok()?
    };
    let num = int_val.abs().checked_mul(den)?.checked_add(frac_val)?;
    Some(Ratio::new(if neg { -num } else { num }, den))
}

fn region_of(
    r_prime: Ratio<i64>,
    mu_bar: Option<&str>,
) -> Result<LambdaRegions<Ratio<i64>>, CliError> {
    let mb = match mu_bar {
        Some(s) => {
            Some(parse_ratio(s).ok_or_else(|| CliError::usage(format!("bad --mu-bar {:?}", s)))?)
        }
        None => None,
    };
    lambda_regions(r_prime, mb).map_err(|e| CliError::usage(e.to_string()))
}

fn ratio_str(r: Ratio<i64>) -> String {
    format!("{}", *r.numer() as f64 / *r.denom() as f64)
}

fn cmd_region(a: &RegionArgs) -> Result<(), CliError> {
    let r = parse_ratio(&a.label_ratio)
        .ok_or_else(|| CliError::usage(format!("bad --label-ratio {:?}", a.label_ratio)))?;
    if a.m < 2 || a.points == 0 {
        return Err(CliError::usage(
            "--m must be at least 2 and --points positive",
        ));
    }
    let regions = region_of(r, a.mu_bar.as_deref())?;
    let bounded = a.kernel != KernelKind::Linear;
    let pts = region::grid(|nu, mu| regions.contains_up(nu, mu), a.m, a.points)
        .map_err(|e| CliError::data(e.to_string()))?;
    let mut out = String::new();
    let _ = writeln!(
        out,
        "# robust-svm region label_ratio={} m={} mu_bar={} points={} kernel={:?} r_low={} r_up={}",
        a.label_ratio,
        a.m,
        a.mu_bar.as_deref().unwrap_or("none"),
        a.points,
        a.kernel,
        ratio_str(regions.r_low),
        ratio_str(regions.r_up)
    );
    out.push_str("nu,mu,classification,in_lambda_low,in_lambda_up\n");
    for p in pts {
        let class = region::classify(p.nu, p.mu, r, bounded)
            .map(|c| c.as_str())
            .unwrap_or("mu_too_large");
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            ratio_str(p.nu),
            ratio_str(p.mu),
            class,
            regions.contains_low(p.nu, p.mu),
            regions.contains_up(p.nu, p.mu)
        );
    }
    emit(a.output.as_deref(), &out)
}

fn fmt_opt(v: Option<f64>, unbounded: bool) -> String {
    match v {
        Some(x) => format!("{}", x),
        None if unbounded => "inf".into(),
        None => "NA".into(),
    }
}

fn cmd_breakdown(a: &BreakdownArgs) -> Result<(), CliError> {
    if a.trials == 0 || a.points == 0 || !(a.outlier_scale > 0.0) || !(a.noise >= 0.0) {
        return Err(CliError::usage(
            "--trials, --points and --outlier-scale must be positive",
        ));
    }
    let clean = match &a.data {
        Some(p) => load(p, &a.label_column, InputFormat::Auto)?,
        None => {
            lab::spiral(a.spiral, a.noise, a.seed).map_err(|e| CliError::usage(e.to_string()))?
        }
    };
    let test = match &a.test {
        Some(p) => load(p, &a.label_column, InputFormat::Auto)?,
        None => lab::spiral(a.test_spiral, a.noise, a.seed.wrapping_add(1))
            .map_err(|e| CliError::usage(e.to_string()))?,
    };
    if a.kernel.kernel == KernelKind::Precomputed {
        return Err(CliError::usage("breakdown needs a feature-space kernel"));
    }
    let kernel = resolve_kernel(&a.kernel, &clean.features)?;
    let m = clean.len();
    let mu_max = a.mu_max;
    let gap_max = a.gap_max;
    let pts = region::grid(
        |nu: f64, mu: f64| mu <= mu_max + 1e-12 && nu - mu <= gap_max + 1e-12,
        m,
        a.points,
    )
    .map_err(|e| CliError::usage(e.to_string()))?;
    let grid: Vec<(f64, f64)> = pts.iter().map(|p| (p.nu, p.mu)).collect();
    let mode = match a.mode {
        ModeArg::Replace => ContaminationMode::ReplacePositiveWithOutliers,
        ModeArg::Flip => ContaminationMode::FlipPositiveLabels,
        ModeArg::Adversarial => ContaminationMode::AdversarialFlipNegatives,
    };
    let cfg = SweepConfig {
        kernel,
        trials: a.trials,
        template: ContaminationSpec {
            mode,
            count: 0,
            outlier_scale: a.outlier_scale,
            seed: a.seed,
        },
        max_outer_iter: a.max_outer_iter,
        restarts: 1,
    };
    let res = lab::breakdown_sweep(&clean, &grid, &cfg, &test).map_err(CliError::data)?;
    let mut out = String::new();
    let _ = writeln!(
        out,
        "# robust-svm breakdown m={} test={} kernel={} mode={:?} outlier_scale={} trials={} seed={} mu_max={} gap_max={} points={}",
        m,
        test.len(),
        kernel_desc(&kernel),
        a.mode,
        a.outlier_scale,
        a.trials,
        a.seed,
        a.mu_max,
        a.gap_max,
        a.points
    );
    out.push_str("nu,mu,max_norm_f,max_abs_b,max_test_error,unbounded_count\n");
    for r in &res.records {
        let unb = r.unbounded_count > 0;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.nu,
            r.mu,
            fmt_opt(r.max_norm_f, unb),
            fmt_opt(r.max_abs_b, unb),
            fmt_opt(r.max_test_error, unb),
            r.unbounded_count
        );
        if r.failed_count > 0 {
            log::warn!(
                "nu = {}, mu = {}: {} failed runs",
                r.nu,
                r.mu,
                r.failed_count
            );
        }
    }
    emit(a.output.as_deref(), &out)
}

fn cmd_cv(a: &CvArgs) -> Result<(), CliError> {
    if a.folds < 2 || a.points == 0 {
        return Err(CliError::usage(
            "--folds must be at least 2 and --points positive",
        ));
    }
    let raw = load(&a.input.data, &a.input.label_column, a.input.format)?;
    let standardize = !a.no_standardize && a.kernel.kernel != KernelKind::Precomputed;
    let ds = if standardize {
        data::standardize(&raw).0
    } else {
        raw
    };
    let kernel = resolve_kernel(&a.kernel, &ds.features)?;
    let m = ds.len();
    let r = label_ratio(&ds.labels);
    if r == 0.0 {
        return Err(CliError::data("training data contains a single class"));
    }
    let r_exact = Ratio::new(crate::data::minority_count(&ds.labels) as i64, m as i64);
    let regions = region_of(r_exact, a.mu_bar.as_deref())?;
    let grid_m = a.grid_m.unwrap_or(m - m / a.folds);
    let mu_zero = a.mu_zero;
    let pts = region::grid(
        |nu, mu| regions.contains_up(nu, mu) && (!mu_zero || mu == Ratio::from_integer(0)),
        grid_m,
        a.points,
    )
    .map_err(|e| CliError::data(e.to_string()))?;
    let grid: Vec<(f64, f64)> = pts
        .iter()
        .map(|p| {
            (
                p.nu_count as f64 / grid_m as f64,
                p.mu_count as f64 / grid_m as f64,
            )
        })
        .collect();
    let template = TrainConfig {
        seed: a.seed,
        ..TrainConfig::new(0.5, 0.0, kernel)
    };
    let table = grid_search_cv(&ds, &grid, a.folds, &template, a.seed).map_err(|e| match e {
        select::SelectError::TooFewSamples { .. } => CliError::data(e),
        select::SelectError::AllFailed => CliError {
            code: EXIT_INFEASIBLE,
            message: e.to_string(),
        },
        other => CliError::failure(other),
    })?;
    let mut out = String::new();
    let _ = writeln!(
        out,
        "# robust-svm cv data={} m={} label_ratio={} kernel={} folds={} seed={} points={} grid_m={} mu_zero={} chosen_nu={} chosen_mu={}",
        a.input.data.display(),
        m,
        r,
        kernel_desc(&kernel),
        a.folds,
        a.seed,
        a.points,
        grid_m,
        a.mu_zero,
        table.chosen.0,
        table.chosen.1
    );
    out.push_str("nu,mu,mean_error,sd_error,failed_folds,chosen\n");
    for row in &table.rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            row.nu,
            row.mu,
            row.mean_error,
            row.sd_error,
            row.failed_folds,
            (row.nu, row.mu) == table.chosen
        );
    }
    emit(a.output.as_deref(), &out)
}
