//! Command-line front end: `account`, `calibrate`, `generate-data`,
//! `train`, `evaluate` and `sweep`.
//!
//! A `--config FILE` of `key = value` lines is expanded into flags placed
//! right after the subcommand, so flags given on the command line win.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{ArgAction, Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::accounting::{
    account_gaussian, calibrate_sigma, default_alpha_grid, validate_grid, DpBudget, GaussianMechanism,
};
use crate::admm::ScheduleKind;
use crate::data::{generate_synthetic, load_csv, preprocess, Dataset, LabelColumn, SyntheticSpec};
use crate::error::{Error, Result};
use crate::harness::{calibrate_config, run_experiment, write_outputs, ExperimentData, Hyper, PrivacyLevel, SweepPlan};
use crate::losses::LossModel;
use crate::mechanisms::NoiseSource;
use crate::metrics::{evaluate, XI_LEVELS};
use crate::report::{train, Algorithm, PrivacyReport, RunReport, TrainConfig};

/// Environment variable naming the default sweep output directory.
pub const OUT_DIR_ENV: &str = "RDP_ADMM_OUT_DIR";

#[derive(Debug, Parser)]
#[command(
    name = "rdp-admm",
    version,
    about = "Private stochastic ADMM with Renyi DP accounting"
)]
pub struct Cli {
    /// File of `key = value` defaults for the subcommand's flags.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Log more (repeat for debug output).
    #[arg(short, long, global = true, action = ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the RDP curve and (epsilon, delta) of a mechanism or training run.
    #[command(args_override_self = true)]
    Account(AccountArgs),
    /// Find the smallest noise level that meets a privacy target.
    #[command(args_override_self = true)]
    Calibrate(CalibrateArgs),
    /// Write the correlated-Gaussian logistic dataset as CSV.
    #[command(name = "generate-data", args_override_self = true)]
    GenerateData(GenerateArgs),
    /// Train one model and emit a JSON run report.
    #[command(args_override_self = true)]
    Train(TrainArgs),
    /// Score a saved run report on a test set.
    #[command(args_override_self = true)]
    Evaluate(EvaluateArgs),
    /// Cross-validated sweep over algorithms, lambdas and privacy levels.
    #[command(args_override_self = true)]
    Sweep(SweepArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LossArg {
    Logistic,
    Hsvm,
}

#[derive(Debug, Clone, Args)]
pub struct HyperArgs {
    #[arg(long, value_enum, default_value = "logistic")]
    pub loss: LossArg,
    /// Smoothing width of the huberized hinge.
    #[arg(long, default_value_t = crate::losses::DEFAULT_HUBER_H)]
    pub huber_h: f64,
    /// Penalty; defaults to 0.25 for ssadmm and 0.5 for mpadmm.
    #[arg(long)]
    pub rho: Option<f64>,
    /// Base step size of ssadmm and dpsgd.
    #[arg(long, default_value_t = 1.0)]
    pub eta0: f64,
    /// Constant step size of mpadmm.
    #[arg(long, default_value_t = 1.0)]
    pub eta: f64,
    #[arg(long, default_value = "inverse-epoch")]
    pub schedule: ScheduleKind,
    /// Mini-batch size; defaults to ceil(sqrt(n)).
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long, default_value_t = 1000)]
    pub iters: usize,
    #[arg(long, default_value_t = 50)]
    pub epochs: usize,
    /// Per-example gradient clipping norm.
    #[arg(long, default_value_t = 1.0)]
    pub clip: f64,
    #[arg(long, default_value_t = crate::ssadmm::DEFAULT_DELTA)]
    pub delta: f64,
    /// Renyi orders, as `lo..hi` (integers, inclusive) or a comma list.
    #[arg(long, value_parser = parse_alphas)]
    pub alphas: Option<AlphaGrid>,
}

impl HyperArgs {
    pub fn loss(&self) -> Result<LossModel> {
        match self.loss {
            LossArg::Logistic => Ok(LossModel::Logistic),
            LossArg::Hsvm => LossModel::huber(self.huber_h),
        }
    }

    pub fn hyper(&self, record_trace: bool) -> Result<Hyper> {
        let defaults = Hyper::default();
        Ok(Hyper {
            loss: self.loss()?,
            iterations: self.iters,
            epochs: self.epochs,
            batch_size: self.batch,
            ss_rho: self.rho.unwrap_or(defaults.ss_rho),
            mp_rho: self.rho.unwrap_or(defaults.mp_rho),
            eta0: self.eta0,
            mp_eta: self.eta,
            schedule: self.schedule,
            clip: self.clip,
            delta: self.delta,
            alpha_grid: self.alpha_grid(),
            record_trace,
        })
    }
}

/// Explicit list of Renyi orders.
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaGrid(pub Vec<f64>);

impl HyperArgs {
    pub fn alpha_grid(&self) -> Vec<f64> {
        self.alphas.clone().map(|g| g.0).unwrap_or_else(default_alpha_grid)
    }
}

fn parse_alphas(s: &str) -> std::result::Result<AlphaGrid, String> {
    let grid: Vec<f64> = if let Some((lo, hi)) = s.split_once("..") {
        let lo: u32 = lo.trim().parse().map_err(|e| format!("bad lower order: {e}"))?;
        let hi: u32 = hi
            .trim()
            .trim_start_matches('=')
            .parse()
            .map_err(|e| format!("bad upper order: {e}"))?;
        (lo..=hi).map(f64::from).collect()
    } else {
        s.split(',')
            .map(|t| t.trim().parse::<f64>().map_err(|e| format!("bad order '{t}': {e}")))
            .collect::<std::result::Result<_, _>>()?
    };
    validate_grid(&grid).map_err(|e| e.to_string())?;
    Ok(AlphaGrid(grid))
}

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// Numeric CSV with one label column.
    #[arg(long)]
    pub data: PathBuf,
    /// Label column: `last`, a 0-based index or a header name.
    #[arg(long, default_value = "last")]
    pub label_column: LabelColumn,
    /// The first row is a header.
    #[arg(long)]
    pub has_header: bool,
    /// Do not append a constant intercept feature.
    #[arg(long)]
    pub no_intercept: bool,
}

impl DataArgs {
    fn load_raw(&self) -> Result<Dataset> {
        load_csv(&self.data, &self.label_column, self.has_header)
    }
}

/// Sidecar written next to generated data.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DataMeta {
    pub spec: SyntheticSpec,
    pub relevant_features: Vec<usize>,
    pub true_model: Vec<f64>,
}

pub fn meta_path(data: &Path) -> PathBuf {
    let mut s = data.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

fn read_meta(data: &Path) -> Result<Option<DataMeta>> {
    let p = meta_path(data);
    if !p.exists() {
        return Ok(None);
    }
    let text = fs::read_to_string(&p)?;
    serde_json::from_str(&text)
        .map(Some)
        .map_err(|e| Error::Io(format!("{}: {e}", p.display())))
}

#[derive(Debug, Clone, Args)]
pub struct AccountArgs {
    /// Account a training run instead of a bare Gaussian mechanism.
    #[arg(long)]
    pub algo: Option<Algorithm>,
    /// Training records (with --algo).
    #[arg(long)]
    pub n: Option<usize>,
    /// L2 sensitivity of a bare mechanism.
    #[arg(long)]
    pub sensitivity: Option<f64>,
    /// Sampling ratio of a bare mechanism.
    #[arg(long, default_value_t = 1.0)]
    pub q: f64,
    #[arg(long)]
    pub sigma: f64,
    #[command(flatten)]
    pub hyper: HyperArgs,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct CalibrateArgs {
    #[arg(long)]
    pub target_eps: f64,
    #[arg(long, default_value_t = crate::ssadmm::DEFAULT_DELTA)]
    pub target_delta: f64,
    #[arg(long)]
    pub algo: Option<Algorithm>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub sensitivity: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub q: f64,
    #[command(flatten)]
    pub hyper: HyperArgs,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
}

#[derive(Debug, Clone, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 100)]
    pub dim: usize,
    #[arg(long, default_value_t = 0.5)]
    pub ar: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub algo: Algorithm,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub hyper: HyperArgs,
    #[arg(long, default_value_t = 0.0)]
    pub lambda: f64,
    #[arg(long, default_value_t = 0.0)]
    pub sigma: f64,
    /// Calibrate sigma to this epsilon instead of using --sigma.
    #[arg(long)]
    pub target_eps: Option<f64>,
    #[arg(long)]
    pub target_delta: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Optional held-out CSV scored into the report.
    #[arg(long)]
    pub test: Option<PathBuf>,
    /// Skip the per-iteration diagnostic trace.
    #[arg(long)]
    pub no_trace: bool,
    /// Include wall-clock time in the report.
    #[arg(long)]
    pub timing: bool,
    /// Report path; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub report: PathBuf,
    /// Raw test CSV; the report's training scaling is applied to it.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = "last")]
    pub label_column: LabelColumn,
    #[arg(long)]
    pub has_header: bool,
    /// Relevant feature indices (`lo..hi` or comma list); read from the data
    /// sidecar when absent.
    #[arg(long, value_parser = parse_indices)]
    pub relevant: Option<Indices>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Feature indices given as `lo..hi` (exclusive) or a comma list.
#[derive(Debug, Clone, PartialEq)]
pub struct Indices(pub Vec<usize>);

fn parse_indices(s: &str) -> std::result::Result<Indices, String> {
    if let Some((lo, hi)) = s.split_once("..") {
        let lo: usize = lo.trim().parse().map_err(|e| format!("{e}"))?;
        let hi: usize = hi.trim().parse().map_err(|e| format!("{e}"))?;
        Ok(Indices((lo..hi).collect()))
    } else {
        s.split(',')
            .map(|t| t.trim().parse::<usize>().map_err(|e| format!("bad index '{t}': {e}")))
            .collect::<std::result::Result<_, _>>()
            .map(Indices)
    }
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    /// Input CSV; mutually exclusive with --synthetic-n.
    #[arg(long, conflicts_with = "synthetic_n")]
    pub data: Option<PathBuf>,
    #[arg(long, default_value = "last")]
    pub label_column: LabelColumn,
    #[arg(long)]
    pub has_header: bool,
    #[arg(long)]
    pub no_intercept: bool,
    /// Generate synthetic data of this size in memory.
    #[arg(long)]
    pub synthetic_n: Option<usize>,
    #[arg(long, default_value = "ssadmm", value_delimiter = ',', action = ArgAction::Set)]
    pub algos: Vec<Algorithm>,
    #[arg(long, default_value = "0.0001,0.001", value_delimiter = ',', action = ArgAction::Set)]
    pub lambdas: Vec<f64>,
    /// Target epsilons; sigma is calibrated per run.
    #[arg(long, value_delimiter = ',', action = ArgAction::Set, conflicts_with = "sigmas")]
    pub epsilons: Option<Vec<f64>>,
    /// Fixed noise levels.
    #[arg(long, value_delimiter = ',', action = ArgAction::Set)]
    pub sigmas: Option<Vec<f64>>,
    #[arg(long, default_value_t = 10)]
    pub folds: usize,
    #[arg(long, default_value_t = 10)]
    pub reps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[command(flatten)]
    pub hyper: HyperArgs,
    #[arg(long, env = OUT_DIR_ENV, default_value = "results")]
    pub out_dir: PathBuf,
    /// Also write plot_data.csv.
    #[arg(long)]
    pub emit_plot_data: bool,
    #[arg(long)]
    pub timing: bool,
}

/// Parses `key = value` lines into flags. `true` becomes a bare flag,
/// `false` is dropped.
pub fn config_to_flags(text: &str) -> Result<Vec<OsString>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::InvalidConfig(format!("config line {}: expected key = value", i + 1)))?;
        let key = key.trim().replace('_', "-");
        let value = value.trim().trim_matches('"');
        match value {
            "true" => out.push(format!("--{key}").into()),
            "false" => {}
            _ => {
                out.push(format!("--{key}").into());
                out.push(value.into());
            }
        }
    }
    Ok(out)
}

/// Removes `--config FILE` from `args` and splices the file's flags in
/// right after the subcommand name.
pub fn expand_config(args: Vec<OsString>) -> Result<Vec<OsString>> {
    let mut rest = Vec::with_capacity(args.len());
    let mut config = None;
    let mut it = args.into_iter();
    while let Some(a) = it.next() {
        if a == "--config" {
            let path = it
                .next()
                .ok_or_else(|| Error::InvalidConfig("--config needs a file".into()))?;
            config = Some(PathBuf::from(path));
        } else if let Some(p) = a.to_str().and_then(|s| s.strip_prefix("--config=")) {
            config = Some(PathBuf::from(p));
        } else {
            rest.push(a);
        }
    }
    let Some(path) = config else {
        return Ok(rest);
    };
    let flags = config_to_flags(&fs::read_to_string(&path)?)?;
    let sub = rest
        .iter()
        .skip(1)
        .position(|a| !a.to_string_lossy().starts_with('-'))
        .map(|p| p + 2)
        .unwrap_or(rest.len());
    let tail = rest.split_off(sub.min(rest.len()));
    rest.extend(flags);
    rest.extend(tail);
    Ok(rest)
}

fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir)?;
            }
            fs::write(p, text)?;
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()?;
        }
    }
    Ok(())
}

fn to_json<T: Serialize>(v: &T) -> Result<String> {
    serde_json::to_string(v)
        .map(|mut s| {
            s.push('\n');
            s
        })
        .map_err(|e| Error::Io(e.to_string()))
}

#[derive(Serialize)]
struct AccountOutput<'a> {
    sigma: f64,
    privacy: &'a Option<PrivacyReport>,
}

fn account_cmd(a: &AccountArgs) -> Result<()> {
    let privacy = match (a.algo, a.sensitivity) {
        (Some(algo), None) => {
            let n = a.n.ok_or_else(|| Error::InvalidConfig("--algo needs --n".into()))?;
            a.hyper.hyper(false)?.config(algo, n, 0.0, a.sigma).account(n)?
        }
        (None, Some(sens)) => {
            let grid = a.hyper.alpha_grid();
            let spec = GaussianMechanism::new(sens, a.sigma)?;
            let (curve, _) = account_gaussian(&spec, a.hyper.iters, a.q, a.hyper.delta, &grid)?;
            Some(PrivacyReport::from_curve(curve, a.hyper.delta)?)
        }
        _ => {
            return Err(Error::InvalidConfig(
                "give exactly one of --algo (with --n) or --sensitivity".into(),
            ))
        }
    };
    let text = match a.format {
        Format::Json => to_json(&AccountOutput {
            sigma: a.sigma,
            privacy: &privacy,
        })?,
        Format::Csv => match &privacy {
            Some(p) => {
                log::info!("epsilon {} at delta {} (alpha {})", p.epsilon, p.delta, p.alpha);
                p.rdp_curve.to_csv()
            }
            None => return Err(Error::InvalidConfig("sigma = 0 gives no privacy guarantee".into())),
        },
    };
    emit(&text, a.out.as_deref())
}

fn calibrate_cmd(a: &CalibrateArgs) -> Result<()> {
    let target = DpBudget::new(a.target_eps, a.target_delta)?;
    let sigma = match (a.algo, a.sensitivity) {
        (Some(algo), None) => {
            let n = a.n.ok_or_else(|| Error::InvalidConfig("--algo needs --n".into()))?;
            let mut cfg = a.hyper.hyper(false)?.config(algo, n, 0.0, 0.0);
            calibrate_config(&mut cfg, n, &target)?
        }
        (None, Some(sens)) => {
            let grid = a.hyper.alpha_grid();
            calibrate_sigma(&target, a.hyper.iters, a.q, sens, &grid)?
        }
        _ => {
            return Err(Error::InvalidConfig(
                "give exactly one of --algo (with --n) or --sensitivity".into(),
            ))
        }
    };
    let text = match a.format {
        Format::Csv => format!("{sigma}\n"),
        Format::Json => to_json(&serde_json::json!({
            "sigma": sigma,
            "epsilon": target.epsilon,
            "delta": target.delta,
        }))?,
    };
    emit(&text, None)
}

fn generate_cmd(a: &GenerateArgs) -> Result<()> {
    let spec = SyntheticSpec {
        n: a.n,
        dim: a.dim,
        ar: a.ar,
        seed: a.seed,
    };
    let data = generate_synthetic(&spec)?;
    if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    data.write_csv(&a.out)?;
    let meta = DataMeta {
        relevant_features: spec.relevant_features(),
        true_model: spec.true_model(),
        spec,
    };
    fs::write(meta_path(&a.out), to_json(&meta)?)?;
    Ok(())
}

fn train_cmd(a: &TrainArgs) -> Result<()> {
    let start = Instant::now();
    let raw = a.data.load_raw()?;
    let data = preprocess(&raw, !a.data.no_intercept);
    let hyper = a.hyper.hyper(!a.no_trace)?;
    let mut config: TrainConfig = hyper.config(a.algo, data.len(), a.lambda, a.sigma);
    if let Some(eps) = a.target_eps {
        let delta = a.target_delta.unwrap_or(a.hyper.delta);
        calibrate_config(&mut config, data.len(), &DpBudget::new(eps, delta)?)?;
    }
    let mut report = train(&data, &hyper.loss, &config, NoiseSource::new(a.seed))?;
    if let Some(test_path) = &a.test {
        let test_raw = load_csv(test_path, &a.data.label_column, a.data.has_header)?;
        report.metrics = Some(score(&report, &test_raw, relevant_for(&a.data.data, None)?.as_deref())?);
    }
    if a.timing {
        report.wall_ms = Some(start.elapsed().as_millis() as u64);
    }
    emit(&to_json(&report)?, a.out.as_deref())
}

fn relevant_for(data: &Path, given: Option<Vec<usize>>) -> Result<Option<Vec<usize>>> {
    if given.is_some() {
        return Ok(given);
    }
    Ok(read_meta(data)?.map(|m| m.relevant_features))
}

fn score(report: &RunReport, test_raw: &Dataset, relevant: Option<&[usize]>) -> Result<crate::metrics::MetricSet> {
    let (test, ranked) = match &report.preprocessing {
        Some(p) => (p.apply(test_raw)?, p.raw_dim()),
        None => (test_raw.clone(), test_raw.dim()),
    };
    evaluate(
        &report.final_model,
        &test,
        &report.loss,
        report.config.lambda(),
        relevant,
        ranked,
        &XI_LEVELS,
    )
}

fn evaluate_cmd(a: &EvaluateArgs) -> Result<()> {
    let text = fs::read_to_string(&a.report)?;
    let report: RunReport =
        serde_json::from_str(&text).map_err(|e| Error::Io(format!("{}: {e}", a.report.display())))?;
    let raw = load_csv(&a.data, &a.label_column, a.has_header)?;
    let relevant = relevant_for(&a.data, a.relevant.clone().map(|i| i.0))?;
    let metrics = score(&report, &raw, relevant.as_deref())?;
    emit(&to_json(&metrics)?, a.out.as_deref())
}

/// Returns the number of failed runs.
fn sweep_cmd(a: &SweepArgs) -> Result<usize> {
    let (raw, relevant) = match (&a.data, a.synthetic_n) {
        (Some(path), None) => (
            load_csv(path, &a.label_column, a.has_header)?,
            read_meta(path)?.map(|m| m.relevant_features),
        ),
        (None, Some(n)) => {
            let spec = SyntheticSpec::new(n, a.seed);
            (generate_synthetic(&spec)?, Some(spec.relevant_features()))
        }
        _ => return Err(Error::InvalidConfig("give one of --data or --synthetic-n".into())),
    };
    let ranked_dims = raw.dim();
    let data = preprocess(&raw, !a.no_intercept);
    let levels: Vec<PrivacyLevel> = match (&a.epsilons, &a.sigmas) {
        (Some(e), None) => e.iter().map(|&v| PrivacyLevel::TargetEpsilon(v)).collect(),
        (None, Some(s)) => s.iter().map(|&v| PrivacyLevel::Sigma(v)).collect(),
        _ => return Err(Error::InvalidConfig("give one of --epsilons or --sigmas".into())),
    };
    let plan = SweepPlan {
        algorithms: a.algos.clone(),
        lambdas: a.lambdas.clone(),
        levels,
        folds: a.folds,
        reps: a.reps,
        seed: a.seed,
        hyper: a.hyper.hyper(false)?,
    };
    let input = ExperimentData {
        data,
        relevant,
        ranked_dims,
    };
    let outcome = run_experiment(&plan, &input, a.jobs.max(1), a.timing)?;
    let files = write_outputs(&outcome, &a.out_dir, a.emit_plot_data)?;
    fs::write(a.out_dir.join("plan.json"), to_json(&plan)?)?;
    log::info!(
        "{} runs, {} failed; wrote {} and {}",
        outcome.records.len(),
        outcome.failures(),
        files.runs.display(),
        files.summary.display()
    );
    Ok(outcome.failures())
}

/// Runs the command line in `args` (program name first) and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let args = match expand_config(args) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();

    let result = match &cli.command {
        Command::Account(a) => account_cmd(a).map(|_| 0),
        Command::Calibrate(a) => calibrate_cmd(a).map(|_| 0),
        Command::GenerateData(a) => generate_cmd(a).map(|_| 0),
        Command::Train(a) => train_cmd(a).map(|_| 0),
        Command::Evaluate(a) => evaluate_cmd(a).map(|_| 0),
        Command::Sweep(a) => sweep_cmd(a).map(|failed| i32::from(failed > 0)),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_lines_become_flags() {
        let flags = config_to_flags("# comment\niters = 20\nno_trace = true\ntiming = false\nloss=\"hsvm\"\n").unwrap();
        let flags: Vec<String> = flags.into_iter().map(|f| f.into_string().unwrap()).collect();
        assert_eq!(flags, ["--iters", "20", "--no-trace", "--loss", "hsvm"]);
        assert!(config_to_flags("oops").is_err());
    }

    #[test]
    fn config_is_spliced_after_subcommand() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("c.conf");
        fs::write(&cfg, "iters = 7\n").unwrap();
        let args: Vec<OsString> = ["prog", "--config", cfg.to_str().unwrap(), "train", "--iters", "9"]
            .iter()
            .map(OsString::from)
            .collect();
        let out: Vec<String> = expand_config(args)
            .unwrap()
            .into_iter()
            .map(|s| s.into_string().unwrap())
            .collect();
        assert_eq!(out, ["prog", "train", "--iters", "7", "--iters", "9"]);
    }

    #[test]
    fn later_flags_override_config() {
        let cli = Cli::try_parse_from([
            "prog", "train", "--algo", "ssadmm", "--data", "x.csv", "--iters", "7", "--iters", "9",
        ])
        .unwrap();
        match cli.command {
            Command::Train(t) => assert_eq!(t.hyper.iters, 9),
            other => panic!("{other:?}"),
        }
        let cli =
            Cli::try_parse_from(["prog", "sweep", "--lambdas", "1,2", "--lambdas", "3", "--sigmas", "0.5"]).unwrap();
        match cli.command {
            Command::Sweep(s) => {
                assert_eq!(s.lambdas, vec![3.0]);
                assert_eq!(s.sigmas, Some(vec![0.5]));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn alpha_and_index_lists() {
        assert_eq!(parse_alphas("2..4").unwrap().0, vec![2.0, 3.0, 4.0]);
        assert_eq!(parse_alphas("1.5,2,8").unwrap().0, vec![1.5, 2.0, 8.0]);
        assert!(parse_alphas("1,2").is_err());
        assert_eq!(parse_indices("0..3").unwrap().0, vec![0, 1, 2]);
        assert_eq!(parse_indices("4,1").unwrap().0, vec![4, 1]);
    }
}
