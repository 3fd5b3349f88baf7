//! Differentially private proximal SGD, the baseline.
//!
//! `x <- S_{lambda eta_k}(x - eta_k (g + noise))`, with the same sampling,
//! clipping and accounting as ssADMM.

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::accounting::default_alpha_grid;
use crate::admm::{soft_threshold, AdmmParams, StepSchedule};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::losses::LossModel;
use crate::mechanisms::{NoiseSource, StreamTag};
use crate::report::{default_true, trace_point, PrivacyReport, RunReport, TrainConfig};
use crate::ssadmm::{
    account_subsampled, clipped_mean_gradient, default_batch_size, validate_subsampling, DEFAULT_DELTA,
};
use crate::vector::all_finite;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DpSgdConfig {
    pub batch_size: usize,
    pub iterations: usize,
    pub sigma: f64,
    pub clip: f64,
    pub lambda: f64,
    pub eta0: f64,
    pub schedule: StepSchedule,
    pub alpha_grid: Vec<f64>,
    pub delta: f64,
    #[serde(default = "default_true")]
    pub record_trace: bool,
}

impl DpSgdConfig {
    /// Same batch size and schedule defaults as ssADMM.
    pub fn defaults_for(n: usize, iterations: usize, sigma: f64, lambda: f64) -> Self {
        let m = default_batch_size(n);
        Self {
            batch_size: m,
            iterations,
            sigma,
            clip: 1.0,
            lambda,
            eta0: 1.0,
            schedule: StepSchedule::InverseEpoch {
                epoch_length: n.div_ceil(m).max(1),
            },
            alpha_grid: default_alpha_grid(),
            delta: DEFAULT_DELTA,
            record_trace: true,
        }
    }

    fn params(&self) -> AdmmParams {
        // rho is unused by the step-size schedule
        AdmmParams {
            rho: 1.0,
            lambda: self.lambda,
            eta0: self.eta0,
            schedule: self.schedule,
        }
    }

    pub fn step_size(&self, k: usize) -> f64 {
        self.params().step_size(k)
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        validate_subsampling(n, self.batch_size, self.sigma, self.clip, self.delta)?;
        self.params().validate()
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

pub fn train_dpsgd(data: &Dataset, loss: &LossModel, config: &DpSgdConfig, noise: NoiseSource) -> Result<RunReport> {
    config.validate(data.len())?;
    let privacy = config.account(data.len())?;
    let mut x = vec![0.0; data.dim()];
    let mut trace = Vec::with_capacity(if config.record_trace { config.iterations } else { 0 });
    for k in 0..config.iterations {
        let mut rng = noise.stream(StreamTag::BatchSample, k as u64);
        let batch = index::sample(&mut rng, data.len(), config.batch_size);
        let grad = clipped_mean_gradient(loss, &x, data, batch.iter(), config.clip);
        let e = noise.gaussian_vector(StreamTag::GradientNoise, k as u64, x.len(), config.sigma)?;
        let eta = config.step_size(k);
        let w: Vec<f64> = x
            .iter()
            .zip(&grad)
            .zip(&e)
            .map(|((xi, g), n)| xi - eta * (g + n))
            .collect();
        x = soft_threshold(&w, config.lambda * eta);
        if !all_finite(&x) {
            return Err(Error::NonFinite { step: k, variable: "x" });
        }
        if config.record_trace {
            trace.push(trace_point(data, loss, &x, &x, config.lambda)?);
        }
    }
    Ok(RunReport {
        config: TrainConfig::DpSgd(config.clone()),
        loss: *loss,
        seed: noise.seed(),
        n: data.len(),
        final_model: x,
        privacy,
        diagnostic_trace: trace,
        metrics: None,
        preprocessing: data.preprocessing().cloned(),
        wall_ms: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic, preprocess, SyntheticSpec};
    use crate::ssadmm::{batch_gradient, SsAdmmConfig};

    fn small(n: usize, seed: u64) -> Dataset {
        preprocess(
            &generate_synthetic(&SyntheticSpec {
                n,
                dim: 6,
                ar: 0.5,
                seed,
            })
            .unwrap(),
            true,
        )
    }

    #[test]
    fn accounting_matches_ssadmm() {
        for (n, t, sigma) in [(100, 10, 0.5), (1000, 300, 1.3)] {
            let a = DpSgdConfig::defaults_for(n, t, sigma, 0.0).account(n).unwrap();
            let b = SsAdmmConfig::defaults_for(n, t, sigma, 0.0).account(n).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn noiseless_unregularized_is_plain_sgd() {
        let data = small(50, 1);
        let cfg = DpSgdConfig::defaults_for(50, 30, 0.0, 0.0);
        let r = train_dpsgd(&data, &LossModel::Logistic, &cfg, NoiseSource::new(4)).unwrap();
        let noise = NoiseSource::new(4);
        let mut x = vec![0.0; data.dim()];
        for k in 0..30 {
            let mut rng = noise.stream(StreamTag::BatchSample, k as u64);
            let batch: Vec<_> = index::sample(&mut rng, 50, cfg.batch_size)
                .iter()
                .map(|i| data.example(i))
                .collect();
            let g = batch_gradient(&LossModel::Logistic, &x, &batch, cfg.clip).unwrap();
            let eta = cfg.step_size(k);
            for (xi, gi) in x.iter_mut().zip(&g) {
                *xi -= eta * gi;
            }
        }
        for (a, b) in x.iter().zip(&r.final_model) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let data = small(40, 2);
        let cfg = DpSgdConfig::defaults_for(40, 20, 0.4, 1e-2);
        let a = train_dpsgd(&data, &LossModel::Logistic, &cfg, NoiseSource::new(7)).unwrap();
        let b = train_dpsgd(&data, &LossModel::Logistic, &cfg, NoiseSource::new(7)).unwrap();
        assert_eq!(a, b);
    }
}
