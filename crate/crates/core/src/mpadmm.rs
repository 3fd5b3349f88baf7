//! Full-gradient ADMM with output perturbation of every released iterate.
//!
//! Each epoch computes the clipped mean gradient over all `n` records,
//! takes one linearized ADMM step and then releases `x`, `z` and `y` with
//! independent Gaussian noise. The next epoch starts from the released
//! state, so each epoch is three Gaussian releases from a public starting
//! point.

use serde::{Deserialize, Serialize};

use crate::accounting::{compose, default_alpha_grid, gaussian_rdp, GaussianMechanism, RenyiCurve};
use crate::admm::{self, AdmmParams, AdmmState, StepSchedule};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::losses::LossModel;
use crate::mechanisms::{NoiseSource, StreamTag};
use crate::report::{default_true, trace_point, PrivacyReport, RunReport, TrainConfig};
use crate::ssadmm::{check_state, clipped_mean_gradient, DEFAULT_DELTA};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MpAdmmConfig {
    pub epochs: usize,
    pub sigma: f64,
    pub clip: f64,
    /// `admm.eta0` is the constant step `eta`; the schedule must be constant.
    pub admm: AdmmParams,
    pub alpha_grid: Vec<f64>,
    pub delta: f64,
    #[serde(default = "default_true")]
    pub record_trace: bool,
}

impl MpAdmmConfig {
    /// `rho = 0.5`, `eta = 1`, `C = 1`.
    pub fn defaults(epochs: usize, sigma: f64, lambda: f64) -> Self {
        Self {
            epochs,
            sigma,
            clip: 1.0,
            admm: AdmmParams {
                rho: 0.5,
                lambda,
                eta0: 1.0,
                schedule: StepSchedule::Constant,
            },
            alpha_grid: default_alpha_grid(),
            delta: DEFAULT_DELTA,
            record_trace: true,
        }
    }

    pub fn eta(&self) -> f64 {
        self.admm.eta0
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if n == 0 {
            return Err(Error::EmptyDataset);
        }
        self.admm.validate()?;
        if self.admm.schedule != StepSchedule::Constant {
            return Err(Error::InvalidConfig("mpadmm requires a constant step size".into()));
        }
        if !(self.sigma >= 0.0) || !self.sigma.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "sigma must be finite and >= 0, got {}",
                self.sigma
            )));
        }
        if !(self.clip > 0.0) || !self.clip.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "clip must be positive, got {}",
                self.clip
            )));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::InvalidConfig(format!("delta {} is not in (0, 1)", self.delta)));
        }
        Ok(())
    }

    /// RDP of a single epoch: three Gaussian releases composed.
    pub fn epoch_curve(&self, n: usize) -> Result<RenyiCurve> {
        let s = epoch_sensitivities(self.clip, n, self.eta(), self.admm.rho);
        let curves = [s.dx, s.dz, s.dy]
            .iter()
            .map(|&d| gaussian_rdp(&GaussianMechanism::new(d, self.sigma)?, &self.alpha_grid))
            .collect::<Result<Vec<_>>>()?;
        compose(&curves)
    }

    pub fn account(&self, n: usize) -> Result<Option<PrivacyReport>> {
        if self.epochs == 0 {
            return PrivacyReport::from_curve(RenyiCurve::zero(self.alpha_grid.clone())?, self.delta).map(Some);
        }
        if self.sigma == 0.0 {
            return Ok(None);
        }
        if n == 0 {
            return Err(Error::EmptyDataset);
        }
        PrivacyReport::from_curve(self.epoch_curve(n)?.repeated(self.epochs), self.delta).map(Some)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochSensitivities {
    pub dx: f64,
    pub dz: f64,
    pub dy: f64,
}

/// L2 sensitivities of one epoch's `(x, z, y)` under replacement of one
/// record: `dx = dz = 2 C eta / (n (1 + eta rho))`, `dy = rho dx`.
pub fn epoch_sensitivities(clip: f64, n: usize, eta: f64, rho: f64) -> EpochSensitivities {
    let dx = 2.0 * clip * eta / (n as f64 * (1.0 + eta * rho));
    EpochSensitivities {
        dx,
        dz: dx,
        dy: rho * dx,
    }
}

/// One noiseless epoch from `state`: full clipped mean gradient, then the
/// x, z, y updates.
pub fn epoch(state: &AdmmState, data: &Dataset, loss: &LossModel, params: &AdmmParams, clip: f64) -> AdmmState {
    let grad = clipped_mean_gradient(loss, &state.x, data, 0..data.len(), clip);
    let mut next = state.clone();
    admm::step(&mut next, &grad, params);
    next
}

pub fn train_mpadmm(data: &Dataset, loss: &LossModel, config: &MpAdmmConfig, noise: NoiseSource) -> Result<RunReport> {
    config.validate(data.len())?;
    let privacy = config.account(data.len())?;
    let mut state = AdmmState::zeros(data.dim());
    let mut trace = Vec::with_capacity(if config.record_trace { config.epochs } else { 0 });
    for t in 0..config.epochs {
        state = epoch(&state, data, loss, &config.admm, config.clip);
        if config.sigma > 0.0 {
            let dim = data.dim();
            for (tag, v) in [
                (StreamTag::PerturbX, &mut state.x),
                (StreamTag::PerturbZ, &mut state.z),
                (StreamTag::PerturbY, &mut state.y),
            ] {
                let e = noise.gaussian_vector(tag, t as u64, dim, config.sigma)?;
                v.iter_mut().zip(&e).for_each(|(a, b)| *a += b);
            }
        }
        check_state(&state, t)?;
        if config.record_trace {
            trace.push(trace_point(data, loss, &state.x, &state.z, config.admm.lambda)?);
        }
    }
    Ok(RunReport {
        config: TrainConfig::MpAdmm(config.clone()),
        loss: *loss,
        seed: noise.seed(),
        n: data.len(),
        final_model: state.x,
        privacy,
        diagnostic_trace: trace,
        metrics: None,
        preprocessing: data.preprocessing().cloned(),
        wall_ms: None,
    })
}
