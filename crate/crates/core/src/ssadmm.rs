//! Subsampled stochastic ADMM with gradient perturbation.
//!
//! Each iteration draws `m` records without replacement, averages their
//! clipped gradients, adds `N(0, sigma^2 I)` and takes one linearized ADMM
//! step. Only the noisy gradient touches the data; the z- and y-steps are
//! post-processing. Every iteration is a subsampled Gaussian release with
//! sensitivity `2C/m` at ratio `m/n`, and the run composes `T` of them.

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::accounting::{default_alpha_grid, subsampled_gaussian_rdp, GaussianMechanism, RenyiCurve};
use crate::admm::{self, AdmmParams, AdmmState, StepSchedule};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::losses::{Example, LossModel};
use crate::mechanisms::{clip_l2_in_place, NoiseSource, StreamTag};
use crate::report::{default_true, trace_point, PrivacyReport, RunReport, TrainConfig};
use crate::vector::{all_finite, dot, norm2};

/// Default `delta` used when converting to approximate DP.
pub const DEFAULT_DELTA: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SsAdmmConfig {
    /// Mini-batch size `m`.
    pub batch_size: usize,
    /// Total iterations `T`.
    pub iterations: usize,
    /// Standard deviation of the noise added to the averaged gradient.
    pub sigma: f64,
    /// Per-example gradient clipping norm `C`.
    pub clip: f64,
    pub admm: AdmmParams,
    pub alpha_grid: Vec<f64>,
    pub delta: f64,
    /// Record the per-iteration diagnostic trace.
    #[serde(default = "default_true")]
    pub record_trace: bool,
}

impl SsAdmmConfig {
    /// `m = ceil(sqrt(n))`, `rho = 0.25`, step `eta0` divided by the current
    /// expected epoch of `ceil(n/m)` iterations, `C = 1`.
    pub fn defaults_for(n: usize, iterations: usize, sigma: f64, lambda: f64) -> Self {
        let m = default_batch_size(n);
        Self {
            batch_size: m,
            iterations,
            sigma,
            clip: 1.0,
            admm: AdmmParams {
                rho: 0.25,
                lambda,
                eta0: 1.0,
                schedule: StepSchedule::InverseEpoch {
                    epoch_length: n.div_ceil(m).max(1),
                },
            },
            alpha_grid: default_alpha_grid(),
            delta: DEFAULT_DELTA,
            record_trace: true,
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        validate_subsampling(n, self.batch_size, self.sigma, self.clip, self.delta)?;
        self.admm.validate()
    }

    pub fn sampling_ratio(&self, n: usize) -> f64 {
        self.batch_size as f64 / n as f64
    }

    pub fn account(&self, n: usize) -> Result<Option<PrivacyReport>> {
        account_subsampled(
            n,
            self.batch_size,
            self.iterations,
            self.sigma,
            self.clip,
            &self.alpha_grid,
            self.delta,
        )
    }
}

/// `ceil(sqrt(n))`, at least one.
pub fn default_batch_size(n: usize) -> usize {
    ((n as f64).sqrt().ceil() as usize).max(1)
}

pub(crate) fn validate_subsampling(n: usize, m: usize, sigma: f64, clip: f64, delta: f64) -> Result<()> {
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    if m == 0 || m > n {
        return Err(Error::InvalidConfig(format!("batch size {m} must be in 1..={n}")));
    }
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "sigma must be finite and >= 0, got {sigma}"
        )));
    }
    if !(clip > 0.0) || !clip.is_finite() {
        return Err(Error::InvalidConfig(format!("clip must be positive, got {clip}")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidConfig(format!("delta {delta} is not in (0, 1)")));
    }
    Ok(())
}

/// L2 sensitivity of a mean of `m` gradients clipped at `clip`, under
/// replacement of one record.
pub fn gradient_sensitivity(clip: f64, m: usize) -> f64 {
    2.0 * clip / m as f64
}

/// RDP of `iterations` subsampled Gaussian gradient releases.
pub fn account_subsampled(
    n: usize,
    m: usize,
    iterations: usize,
    sigma: f64,
    clip: f64,
    alpha_grid: &[f64],
    delta: f64,
) -> Result<Option<PrivacyReport>> {
    if iterations == 0 {
        return PrivacyReport::from_curve(RenyiCurve::zero(alpha_grid.to_vec())?, delta).map(Some);
    }
    if sigma == 0.0 {
        return Ok(None);
    }
    if m == 0 || m > n {
        return Err(Error::InvalidConfig(format!("batch size {m} must be in 1..={n}")));
    }
    let mechanism = GaussianMechanism::new(gradient_sensitivity(clip, m), sigma)?;
    let step = subsampled_gaussian_rdp(&mechanism, m as f64 / n as f64, alpha_grid)?;
    PrivacyReport::from_curve(step.repeated(iterations), delta).map(Some)
}

/// Mean of the per-example gradients, each clipped to norm `clip` first.
pub fn batch_gradient(model: &LossModel, x: &[f64], batch: &[Example<'_>], clip: f64) -> Result<Vec<f64>> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let mut sum = vec![0.0; x.len()];
    let mut g = vec![0.0; x.len()];
    for d in batch {
        if d.features.len() != x.len() {
            return Err(Error::DimensionMismatch {
                expected: x.len(),
                found: d.features.len(),
            });
        }
        g.fill(0.0);
        model.add_example_grad(x, *d, 1.0, &mut g);
        clip_l2_in_place(&mut g, clip);
        for (s, v) in sum.iter_mut().zip(&g) {
            *s += v;
        }
    }
    let inv = 1.0 / batch.len() as f64;
    sum.iter_mut().for_each(|v| *v *= inv);
    Ok(sum)
}

/// [`batch_gradient`] over rows of `data`, without per-example allocation.
pub(crate) fn clipped_mean_gradient(
    model: &LossModel,
    x: &[f64],
    data: &Dataset,
    rows: impl ExactSizeIterator<Item = usize>,
    clip: f64,
) -> Vec<f64> {
    let count = rows.len();
    let mut sum = vec![0.0; x.len()];
    for i in rows {
        let d = data.example(i);
        // Per-example gradient is `coef * s`, so clipping is a scalar factor.
        let mut coef = d.label * model.margin_derivative(d.label * dot(x, d.features));
        if coef == 0.0 {
            continue;
        }
        let norm = coef.abs() * norm2(d.features);
        if norm > clip {
            coef *= clip / norm;
        }
        crate::vector::axpy(coef, d.features, &mut sum);
    }
    let inv = 1.0 / count as f64;
    sum.iter_mut().for_each(|v| *v *= inv);
    sum
}

/// What one iteration consumed, enough to replay it.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub batch: Vec<usize>,
    pub noise: Vec<f64>,
}

/// Iteration-by-iteration driver for ssADMM.
pub struct SsAdmm<'a> {
    data: &'a Dataset,
    loss: LossModel,
    config: SsAdmmConfig,
    noise: NoiseSource,
    state: AdmmState,
}

impl<'a> SsAdmm<'a> {
    pub fn new(data: &'a Dataset, loss: LossModel, config: SsAdmmConfig, noise: NoiseSource) -> Result<Self> {
        config.validate(data.len())?;
        Ok(Self {
            data,
            loss,
            state: AdmmState::zeros(data.dim()),
            config,
            noise,
        })
    }

    pub fn state(&self) -> &AdmmState {
        &self.state
    }

    pub fn step(&mut self) -> Result<StepRecord> {
        let k = self.state.k;
        let mut rng = self.noise.stream(StreamTag::BatchSample, k as u64);
        let batch = index::sample(&mut rng, self.data.len(), self.config.batch_size).into_vec();
        let mut grad = clipped_mean_gradient(
            &self.loss,
            &self.state.x,
            self.data,
            batch.iter().copied(),
            self.config.clip,
        );
        let noise = self
            .noise
            .gaussian_vector(StreamTag::GradientNoise, k as u64, grad.len(), self.config.sigma)?;
        for (g, e) in grad.iter_mut().zip(&noise) {
            *g += e;
        }
        admm::step(&mut self.state, &grad, &self.config.admm);
        check_state(&self.state, k)?;
        Ok(StepRecord { batch, noise })
    }
}

pub(crate) fn check_state(state: &AdmmState, step: usize) -> Result<()> {
    for (name, v) in [("x", &state.x), ("z", &state.z), ("y", &state.y)] {
        if !all_finite(v) {
            return Err(Error::NonFinite { step, variable: name });
        }
    }
    Ok(())
}

pub fn train_ssadmm(data: &Dataset, loss: &LossModel, config: &SsAdmmConfig, noise: NoiseSource) -> Result<RunReport> {
    let mut runner = SsAdmm::new(data, *loss, config.clone(), noise)?;
    let privacy = config.account(data.len())?;
    let mut trace = Vec::with_capacity(if config.record_trace { config.iterations } else { 0 });
    for _ in 0..config.iterations {
        runner.step()?;
        if config.record_trace {
            let s = runner.state();
            trace.push(trace_point(data, loss, &s.x, &s.z, config.admm.lambda)?);
        }
    }
    Ok(RunReport {
        config: TrainConfig::SsAdmm(config.clone()),
        loss: *loss,
        seed: noise.seed(),
        n: data.len(),
        final_model: runner.state.x,
        privacy,
        diagnostic_trace: trace,
        metrics: None,
        preprocessing: data.preprocessing().cloned(),
        wall_ms: None,
    })
}
