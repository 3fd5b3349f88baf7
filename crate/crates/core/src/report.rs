//! Run reports shared by all trainers, and a dispatcher over algorithms.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::accounting::{to_approx_dp, RenyiCurve};
use crate::data::{Dataset, Preprocessing};
use crate::dpsgd::{train_dpsgd, DpSgdConfig};
use crate::error::{Error, Result};
use crate::losses::LossModel;
use crate::mechanisms::NoiseSource;
use crate::metrics::MetricSet;
use crate::mpadmm::{train_mpadmm, MpAdmmConfig};
use crate::ssadmm::{train_ssadmm, SsAdmmConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    SsAdmm,
    MpAdmm,
    DpSgd,
}

impl Algorithm {
    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::SsAdmm => "ssadmm",
            Algorithm::MpAdmm => "mpadmm",
            Algorithm::DpSgd => "dpsgd",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ssadmm" => Ok(Algorithm::SsAdmm),
            "mpadmm" => Ok(Algorithm::MpAdmm),
            "dpsgd" => Ok(Algorithm::DpSgd),
            other => Err(Error::InvalidConfig(format!("unknown algorithm '{other}'"))),
        }
    }
}

/// Hyperparameters of one run, tagged by algorithm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "algo", rename_all = "lowercase")]
pub enum TrainConfig {
    SsAdmm(SsAdmmConfig),
    MpAdmm(MpAdmmConfig),
    DpSgd(DpSgdConfig),
}

impl TrainConfig {
    pub fn algorithm(&self) -> Algorithm {
        match self {
            TrainConfig::SsAdmm(_) => Algorithm::SsAdmm,
            TrainConfig::MpAdmm(_) => Algorithm::MpAdmm,
            TrainConfig::DpSgd(_) => Algorithm::DpSgd,
        }
    }

    pub fn sigma(&self) -> f64 {
        match self {
            TrainConfig::SsAdmm(c) => c.sigma,
            TrainConfig::MpAdmm(c) => c.sigma,
            TrainConfig::DpSgd(c) => c.sigma,
        }
    }

    pub fn lambda(&self) -> f64 {
        match self {
            TrainConfig::SsAdmm(c) => c.admm.lambda,
            TrainConfig::MpAdmm(c) => c.admm.lambda,
            TrainConfig::DpSgd(c) => c.lambda,
        }
    }

    /// Iterations for the stochastic methods, epochs for mpADMM.
    pub fn steps(&self) -> usize {
        match self {
            TrainConfig::SsAdmm(c) => c.iterations,
            TrainConfig::MpAdmm(c) => c.epochs,
            TrainConfig::DpSgd(c) => c.iterations,
        }
    }

    /// Privacy spent on a dataset of `n` records; `None` for a non-private run.
    /// Depends only on the configuration and `n`, never on data values.
    pub fn account(&self, n: usize) -> Result<Option<PrivacyReport>> {
        match self {
            TrainConfig::SsAdmm(c) => c.account(n),
            TrainConfig::MpAdmm(c) => c.account(n),
            TrainConfig::DpSgd(c) => c.account(n),
        }
    }
}

/// The accounted guarantee: the composed RDP curve and its cheapest
/// `(epsilon, delta)` conversion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrivacyReport {
    pub rdp_curve: RenyiCurve,
    pub epsilon: f64,
    pub delta: f64,
    /// Order at which the conversion is attained.
    pub alpha: f64,
}

impl PrivacyReport {
    pub fn from_curve(rdp_curve: RenyiCurve, delta: f64) -> Result<Self> {
        let conv = to_approx_dp(&rdp_curve, delta)?;
        Ok(Self {
            rdp_curve,
            epsilon: conv.budget.epsilon,
            delta,
            alpha: conv.alpha,
        })
    }
}

/// Training-set objective and primal residual after one step. Computed
/// from raw data and not covered by the privacy guarantee.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub objective: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: TrainConfig,
    pub loss: LossModel,
    pub seed: u64,
    /// Training records.
    pub n: usize,
    pub final_model: Vec<f64>,
    /// `None` when noise was disabled.
    pub privacy: Option<PrivacyReport>,
    /// Non-private diagnostics, one point per iteration (or epoch).
    pub diagnostic_trace: Vec<TracePoint>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metrics: Option<MetricSet>,
    /// Scaling learned on the training data, for applying to test data.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preprocessing: Option<Preprocessing>,
    /// Set only when timing was requested, so that reports stay reproducible.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_ms: Option<u64>,
}

/// Runs whichever algorithm `config` names.
pub fn train(data: &Dataset, loss: &LossModel, config: &TrainConfig, noise: NoiseSource) -> Result<RunReport> {
    match config {
        TrainConfig::SsAdmm(c) => train_ssadmm(data, loss, c, noise),
        TrainConfig::MpAdmm(c) => train_mpadmm(data, loss, c, noise),
        TrainConfig::DpSgd(c) => train_dpsgd(data, loss, c, noise),
    }
}

pub(crate) fn default_true() -> bool {
    true
}

pub(crate) fn trace_point(data: &Dataset, loss: &LossModel, x: &[f64], z: &[f64], lambda: f64) -> Result<TracePoint> {
    Ok(TracePoint {
        objective: crate::losses::objective(loss, x, data, lambda)?,
        residual: crate::vector::norm2(&crate::vector::sub(x, z)),
    })
}
