//! Cross-validated sweeps over algorithms, regularization and privacy level.
//!
//! Every run gets its own noise seed derived from the plan seed and its
//! `(cell, fold, rep)` position, so results do not depend on scheduling.
//! Records are collected in plan order before anything is written.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::accounting::{calibrate_sigma, default_alpha_grid, DpBudget};
use crate::admm::{AdmmParams, ScheduleKind, StepSchedule};
use crate::data::{kfold_split, Dataset};
use crate::dpsgd::DpSgdConfig;
use crate::error::{Error, Result};
use crate::losses::LossModel;
use crate::mechanisms::NoiseSource;
use crate::metrics::{evaluate, XI_LEVELS};
use crate::mpadmm::{epoch_sensitivities, MpAdmmConfig};
use crate::report::{train, Algorithm, TrainConfig};
use crate::ssadmm::{default_batch_size, gradient_sensitivity, SsAdmmConfig, DEFAULT_DELTA};

/// Either a privacy target to calibrate noise for, or a fixed noise level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "kebab-case")]
pub enum PrivacyLevel {
    TargetEpsilon(f64),
    Sigma(f64),
}

impl PrivacyLevel {
    pub fn kind(&self) -> &'static str {
        match self {
            PrivacyLevel::TargetEpsilon(_) => "epsilon",
            PrivacyLevel::Sigma(_) => "sigma",
        }
    }

    pub fn value(&self) -> f64 {
        match *self {
            PrivacyLevel::TargetEpsilon(v) | PrivacyLevel::Sigma(v) => v,
        }
    }
}

/// Shared hyperparameters used to build each algorithm's configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyper {
    pub loss: LossModel,
    /// Iterations for ssADMM and DP-SGD.
    pub iterations: usize,
    /// Epochs for mpADMM.
    pub epochs: usize,
    /// `None` means `ceil(sqrt(n))`.
    pub batch_size: Option<usize>,
    pub ss_rho: f64,
    pub mp_rho: f64,
    pub eta0: f64,
    /// Constant step of mpADMM.
    pub mp_eta: f64,
    pub schedule: ScheduleKind,
    pub clip: f64,
    pub delta: f64,
    pub alpha_grid: Vec<f64>,
    pub record_trace: bool,
}

impl Default for Hyper {
    fn default() -> Self {
        Self {
            loss: LossModel::Logistic,
            iterations: 1000,
            epochs: 50,
            batch_size: None,
            ss_rho: 0.25,
            mp_rho: 0.5,
            eta0: 1.0,
            mp_eta: 1.0,
            schedule: ScheduleKind::InverseEpoch,
            clip: 1.0,
            delta: DEFAULT_DELTA,
            alpha_grid: default_alpha_grid(),
            record_trace: false,
        }
    }
}

impl Hyper {
    /// Configuration for `algo` on `n` training records at noise `sigma`.
    pub fn config(&self, algo: Algorithm, n: usize, lambda: f64, sigma: f64) -> TrainConfig {
        let m = self.batch_size.unwrap_or_else(|| default_batch_size(n));
        let schedule = self.schedule.with_epoch_length(n.div_ceil(m.max(1)).max(1));
        match algo {
            Algorithm::SsAdmm => TrainConfig::SsAdmm(SsAdmmConfig {
                batch_size: m,
                iterations: self.iterations,
                sigma,
                clip: self.clip,
                admm: AdmmParams {
                    rho: self.ss_rho,
                    lambda,
                    eta0: self.eta0,
                    schedule,
                },
                alpha_grid: self.alpha_grid.clone(),
                delta: self.delta,
                record_trace: self.record_trace,
            }),
            Algorithm::MpAdmm => TrainConfig::MpAdmm(MpAdmmConfig {
                epochs: self.epochs,
                sigma,
                clip: self.clip,
                admm: AdmmParams {
                    rho: self.mp_rho,
                    lambda,
                    eta0: self.mp_eta,
                    schedule: StepSchedule::Constant,
                },
                alpha_grid: self.alpha_grid.clone(),
                delta: self.delta,
                record_trace: self.record_trace,
            }),
            Algorithm::DpSgd => TrainConfig::DpSgd(DpSgdConfig {
                batch_size: m,
                iterations: self.iterations,
                sigma,
                clip: self.clip,
                lambda,
                eta0: self.eta0,
                schedule,
                alpha_grid: self.alpha_grid.clone(),
                delta: self.delta,
                record_trace: self.record_trace,
            }),
        }
    }
}

fn set_sigma(config: &mut TrainConfig, sigma: f64) {
    match config {
        TrainConfig::SsAdmm(c) => c.sigma = sigma,
        TrainConfig::MpAdmm(c) => c.sigma = sigma,
        TrainConfig::DpSgd(c) => c.sigma = sigma,
    }
}

/// Sets the smallest noise level under which `config` on `n` records meets
/// `target`, and returns it.
pub fn calibrate_config(config: &mut TrainConfig, n: usize, target: &DpBudget) -> Result<f64> {
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    let sigma = match config {
        TrainConfig::SsAdmm(SsAdmmConfig {
            batch_size,
            iterations,
            clip,
            alpha_grid,
            ..
        })
        | TrainConfig::DpSgd(DpSgdConfig {
            batch_size,
            iterations,
            clip,
            alpha_grid,
            ..
        }) => {
            if *batch_size == 0 || *batch_size > n {
                return Err(Error::InvalidConfig(format!(
                    "batch size {batch_size} must be in 1..={n}"
                )));
            }
            let q = *batch_size as f64 / n as f64;
            calibrate_sigma(
                target,
                *iterations,
                q,
                gradient_sensitivity(*clip, *batch_size),
                alpha_grid,
            )?
        }
        TrainConfig::MpAdmm(c) => {
            // Three releases at one sigma compose to a single release with
            // the root-sum-square sensitivity.
            let s = epoch_sensitivities(c.clip, n, c.eta(), c.admm.rho);
            let joint = (s.dx * s.dx + s.dz * s.dz + s.dy * s.dy).sqrt();
            calibrate_sigma(target, c.epochs, 1.0, joint, &c.alpha_grid)?
        }
    };
    set_sigma(config, sigma);
    // Guard against rounding differences between the two accounting paths.
    let mut sigma = sigma;
    while let Some(p) = config.account(n)? {
        if p.epsilon <= target.epsilon {
            break;
        }
        sigma *= 1.0 + 1e-9;
        set_sigma(config, sigma);
    }
    Ok(sigma)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPlan {
    pub algorithms: Vec<Algorithm>,
    pub lambdas: Vec<f64>,
    pub levels: Vec<PrivacyLevel>,
    /// `1` trains and tests on the full dataset.
    pub folds: usize,
    pub reps: usize,
    pub seed: u64,
    pub hyper: Hyper,
}

impl SweepPlan {
    pub fn validate(&self) -> Result<()> {
        if self.algorithms.is_empty() || self.lambdas.is_empty() || self.levels.is_empty() {
            return Err(Error::InvalidConfig(
                "a sweep needs at least one algorithm, lambda and privacy level".into(),
            ));
        }
        if self.folds == 0 || self.reps == 0 {
            return Err(Error::InvalidConfig("folds and reps must be at least 1".into()));
        }
        Ok(())
    }

    pub fn cells(&self) -> Vec<Cell> {
        let mut out = Vec::new();
        for &algorithm in &self.algorithms {
            for &lambda in &self.lambdas {
                for &level in &self.levels {
                    out.push(Cell {
                        index: out.len(),
                        algorithm,
                        lambda,
                        level,
                    });
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub index: usize,
    pub algorithm: Algorithm,
    pub lambda: f64,
    pub level: PrivacyLevel,
}

/// Preprocessed data plus what is known about its true support.
#[derive(Debug, Clone)]
pub struct ExperimentData {
    pub data: Dataset,
    pub relevant: Option<Vec<usize>>,
    /// Leading coordinates that take part in the top-k ranking.
    pub ranked_dims: usize,
}

/// One line of `runs.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub cell: usize,
    pub algo: Algorithm,
    pub loss: String,
    pub lambda: f64,
    pub rho: f64,
    pub eta0: f64,
    pub sigma: Option<f64>,
    /// Iterations, or epochs for mpADMM.
    #[serde(rename = "T")]
    pub t: usize,
    pub m: usize,
    pub n: usize,
    pub clip: f64,
    pub seed: u64,
    pub fold: usize,
    pub rep: usize,
    pub target_epsilon: Option<f64>,
    pub epsilon: Option<f64>,
    pub delta: f64,
    pub alpha_star: Option<f64>,
    pub accuracy: Option<f64>,
    pub objective: Option<f64>,
    pub xi_20: Option<f64>,
    pub xi_25: Option<f64>,
    pub xi_30: Option<f64>,
    pub xi_40: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_ms: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl RunRecord {
    pub fn succeeded(&self) -> bool {
        self.error.is_none()
    }

    /// Rebuilds the accounted configuration from the record's own fields.
    pub fn config(&self, alpha_grid: &[f64]) -> Option<TrainConfig> {
        let sigma = self.sigma?;
        let hyper = Hyper {
            iterations: self.t,
            epochs: self.t,
            batch_size: Some(self.m),
            ss_rho: self.rho,
            mp_rho: self.rho,
            eta0: self.eta0,
            mp_eta: self.eta0,
            clip: self.clip,
            delta: self.delta,
            alpha_grid: alpha_grid.to_vec(),
            ..Hyper::default()
        };
        Some(hyper.config(self.algo, self.n, self.lambda, sigma))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

/// Mean and sample standard deviation (zero for a single value).
pub fn mean_std(values: &[f64]) -> Option<MeanStd> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    Some(MeanStd { mean, std })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub cell: usize,
    pub algo: Algorithm,
    pub lambda: f64,
    pub level: PrivacyLevel,
    pub runs: usize,
    pub failed: usize,
    pub sigma: Option<MeanStd>,
    pub epsilon: Option<MeanStd>,
    pub accuracy: Option<MeanStd>,
    pub objective: Option<MeanStd>,
    pub xi: BTreeMap<usize, MeanStd>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutcome {
    pub records: Vec<RunRecord>,
    pub summaries: Vec<CellSummary>,
}

impl SweepOutcome {
    pub fn failures(&self) -> usize {
        self.records.iter().filter(|r| !r.succeeded()).count()
    }
}

struct Job {
    cell: Cell,
    fold: usize,
    rep: usize,
}

/// Runs every `(cell, fold, rep)` of `plan`, at most `jobs` at a time.
pub fn run_experiment(plan: &SweepPlan, input: &ExperimentData, jobs: usize, timing: bool) -> Result<SweepOutcome> {
    plan.validate()?;
    let splits: Vec<(Dataset, Dataset)> = if plan.folds == 1 {
        vec![(input.data.clone(), input.data.clone())]
    } else {
        kfold_split(&input.data, plan.folds, plan.seed)?
            .into_iter()
            .map(|f| (f.train, f.test))
            .collect()
    };
    let cells = plan.cells();
    let mut work = Vec::new();
    for &cell in &cells {
        for fold in 0..plan.folds {
            for rep in 0..plan.reps {
                work.push(Job { cell, fold, rep });
            }
        }
    }
    let root = NoiseSource::new(plan.seed);
    let run_all = || -> Vec<RunRecord> {
        work.par_iter()
            .map(|job| {
                let (train_set, test_set) = &splits[job.fold];
                let seed = root
                    .derive(&[job.cell.index as u64, job.fold as u64, job.rep as u64])
                    .seed();
                run_one(plan, input, job, train_set, test_set, seed, timing)
            })
            .collect()
    };
    let records = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("cannot start worker pool: {e}")))?
        .install(run_all);
    let summaries = cells.iter().map(|c| summarize(c, &records)).collect();
    Ok(SweepOutcome { records, summaries })
}

fn run_one(
    plan: &SweepPlan,
    input: &ExperimentData,
    job: &Job,
    train_set: &Dataset,
    test_set: &Dataset,
    seed: u64,
    timing: bool,
) -> RunRecord {
    let cell = job.cell;
    let n = train_set.len();
    let initial_sigma = match cell.level {
        PrivacyLevel::Sigma(s) => s,
        PrivacyLevel::TargetEpsilon(_) => 0.0,
    };
    let mut config = plan.hyper.config(cell.algorithm, n, cell.lambda, initial_sigma);
    let (rho, eta0, m) = match &config {
        TrainConfig::SsAdmm(c) => (c.admm.rho, c.admm.eta0, c.batch_size),
        TrainConfig::MpAdmm(c) => (c.admm.rho, c.admm.eta0, n),
        TrainConfig::DpSgd(c) => (0.0, c.eta0, c.batch_size),
    };
    let mut record = RunRecord {
        cell: cell.index,
        algo: cell.algorithm,
        loss: plan.hyper.loss.name().to_string(),
        lambda: cell.lambda,
        rho,
        eta0,
        sigma: None,
        t: config.steps(),
        m,
        n,
        clip: plan.hyper.clip,
        seed,
        fold: job.fold,
        rep: job.rep,
        target_epsilon: match cell.level {
            PrivacyLevel::TargetEpsilon(e) => Some(e),
            PrivacyLevel::Sigma(_) => None,
        },
        epsilon: None,
        delta: plan.hyper.delta,
        alpha_star: None,
        accuracy: None,
        objective: None,
        xi_20: None,
        xi_25: None,
        xi_30: None,
        xi_40: None,
        wall_ms: None,
        error: None,
    };
    let start = Instant::now();
    let outcome = (|| -> Result<()> {
        if let PrivacyLevel::TargetEpsilon(eps) = cell.level {
            let target = DpBudget::new(eps, plan.hyper.delta)?;
            calibrate_config(&mut config, n, &target)?;
        }
        record.sigma = Some(config.sigma());
        let report = train(train_set, &plan.hyper.loss, &config, NoiseSource::new(seed))?;
        if let Some(p) = &report.privacy {
            record.epsilon = Some(p.epsilon);
            record.alpha_star = Some(p.alpha);
        }
        let metrics = evaluate(
            &report.final_model,
            test_set,
            &plan.hyper.loss,
            cell.lambda,
            input.relevant.as_deref(),
            input.ranked_dims,
            &XI_LEVELS,
        )?;
        record.accuracy = Some(metrics.accuracy);
        record.objective = Some(metrics.objective);
        record.xi_20 = metrics.xi.get(&20).copied();
        record.xi_25 = metrics.xi.get(&25).copied();
        record.xi_30 = metrics.xi.get(&30).copied();
        record.xi_40 = metrics.xi.get(&40).copied();
        Ok(())
    })();
    if let Err(e) = outcome {
        log::warn!("cell {} fold {} rep {} failed: {e}", cell.index, job.fold, job.rep);
        record.error = Some(e.to_string());
    }
    if timing {
        record.wall_ms = Some(start.elapsed().as_millis() as u64);
    }
    record
}

fn summarize(cell: &Cell, records: &[RunRecord]) -> CellSummary {
    let mine: Vec<&RunRecord> = records.iter().filter(|r| r.cell == cell.index).collect();
    let ok: Vec<&RunRecord> = mine.iter().copied().filter(|r| r.succeeded()).collect();
    let collect = |f: &dyn Fn(&RunRecord) -> Option<f64>| -> Option<MeanStd> {
        let v: Vec<f64> = ok.iter().filter_map(|r| f(r)).collect();
        if v.len() == ok.len() {
            mean_std(&v)
        } else {
            None
        }
    };
    let mut xi = BTreeMap::new();
    for (k, get) in [
        (20, (|r: &RunRecord| r.xi_20) as fn(&RunRecord) -> Option<f64>),
        (25, |r: &RunRecord| r.xi_25),
        (30, |r: &RunRecord| r.xi_30),
        (40, |r: &RunRecord| r.xi_40),
    ] {
        if let Some(s) = collect(&get) {
            xi.insert(k, s);
        }
    }
    CellSummary {
        cell: cell.index,
        algo: cell.algorithm,
        lambda: cell.lambda,
        level: cell.level,
        runs: mine.len(),
        failed: mine.len() - ok.len(),
        sigma: collect(&|r| r.sigma),
        epsilon: collect(&|r| r.epsilon),
        accuracy: collect(&|r| r.accuracy),
        objective: collect(&|r| r.objective),
        xi,
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x}")).unwrap_or_default()
}

/// `summary.csv`: one row per cell with mean and standard deviation columns.
pub fn summary_csv(summaries: &[CellSummary]) -> String {
    let mut out = String::from("cell,algo,lambda,level_kind,level,runs,failed,sigma_mean,epsilon_mean,epsilon_std");
    for m in ["accuracy", "objective"] {
        let _ = write!(out, ",{m}_mean,{m}_std");
    }
    for k in XI_LEVELS {
        let _ = write!(out, ",xi_{k}_mean,xi_{k}_std");
    }
    out.push('\n');
    for s in summaries {
        let _ = write!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            s.cell,
            s.algo,
            s.lambda,
            s.level.kind(),
            s.level.value(),
            s.runs,
            s.failed,
            fmt_opt(s.sigma.map(|v| v.mean)),
            fmt_opt(s.epsilon.map(|v| v.mean)),
            fmt_opt(s.epsilon.map(|v| v.std)),
        );
        for v in [s.accuracy, s.objective] {
            let _ = write!(out, ",{},{}", fmt_opt(v.map(|v| v.mean)), fmt_opt(v.map(|v| v.std)));
        }
        for k in XI_LEVELS {
            let v = s.xi.get(&k);
            let _ = write!(out, ",{},{}", fmt_opt(v.map(|v| v.mean)), fmt_opt(v.map(|v| v.std)));
        }
        out.push('\n');
    }
    out
}

/// Tidy long-format rows `series,lambda,x,metric,y,sd` with `x` the mean
/// accounted epsilon (`inf` for noiseless cells).
pub fn plot_csv(summaries: &[CellSummary]) -> String {
    let mut out = String::from("series,lambda,x,metric,y,sd\n");
    for s in summaries {
        let x = s.epsilon.map(|e| e.mean).unwrap_or(f64::INFINITY);
        let mut metrics: Vec<(String, MeanStd)> = Vec::new();
        if let Some(a) = s.accuracy {
            metrics.push(("accuracy".into(), a));
        }
        if let Some(o) = s.objective {
            metrics.push(("objective".into(), o));
        }
        for (k, v) in &s.xi {
            metrics.push((format!("xi_{k}"), *v));
        }
        for (name, v) in metrics {
            let _ = writeln!(out, "{},{},{},{},{},{}", s.algo, s.lambda, x, name, v.mean, v.std);
        }
    }
    out
}

/// Paths written by [`write_outputs`].
#[derive(Debug, Clone)]
pub struct OutputFiles {
    pub runs: PathBuf,
    pub summary: PathBuf,
    pub plot: Option<PathBuf>,
}

pub fn write_outputs(outcome: &SweepOutcome, dir: &Path, emit_plot_data: bool) -> Result<OutputFiles> {
    fs::create_dir_all(dir)?;
    let runs = dir.join("runs.jsonl");
    let mut f = std::io::BufWriter::new(fs::File::create(&runs)?);
    for r in &outcome.records {
        let line = serde_json::to_string(r).map_err(|e| Error::Io(e.to_string()))?;
        writeln!(f, "{line}")?;
    }
    f.flush()?;
    let summary = dir.join("summary.csv");
    fs::write(&summary, summary_csv(&outcome.summaries))?;
    let plot = if emit_plot_data {
        let p = dir.join("plot_data.csv");
        fs::write(&p, plot_csv(&outcome.summaries))?;
        Some(p)
    } else {
        None
    };
    Ok(OutputFiles { runs, summary, plot })
}
