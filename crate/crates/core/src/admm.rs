//! Linearized stochastic ADMM for `f(x) + lambda ||z||_1` subject to `x = z`.
//!
//! The data term enters only through a gradient, so the x-step is the
//! closed form minimizer of the linearized augmented Lagrangian and the
//! z-step is soft-thresholding.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Step-size schedule `eta(k)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StepSchedule {
    Constant,
    /// `eta0 / ceil((k + 1) / epoch_length)`: divided by the current expected epoch.
    InverseEpoch {
        epoch_length: usize,
    },
    /// `eta0 / sqrt(k + 1)`
    InverseSqrt,
}

impl StepSchedule {
    pub fn name(&self) -> &'static str {
        match self {
            StepSchedule::Constant => "constant",
            StepSchedule::InverseEpoch { .. } => "inverse-epoch",
            StepSchedule::InverseSqrt => "inverse-sqrt",
        }
    }
}

/// Schedule name as given on the command line. `inverse-epoch` gets its
/// epoch length filled in later, once the dataset size is known.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScheduleKind {
    Constant,
    InverseEpoch,
    InverseSqrt,
}

impl ScheduleKind {
    pub fn with_epoch_length(self, epoch_length: usize) -> StepSchedule {
        match self {
            ScheduleKind::Constant => StepSchedule::Constant,
            ScheduleKind::InverseEpoch => StepSchedule::InverseEpoch {
                epoch_length: epoch_length.max(1),
            },
            ScheduleKind::InverseSqrt => StepSchedule::InverseSqrt,
        }
    }
}

impl FromStr for ScheduleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "constant" => Ok(ScheduleKind::Constant),
            "inverse-epoch" | "epoch" => Ok(ScheduleKind::InverseEpoch),
            "inverse-sqrt" | "sqrt" => Ok(ScheduleKind::InverseSqrt),
            other => Err(Error::InvalidConfig(format!("unknown schedule '{other}'"))),
        }
    }
}

impl fmt::Display for ScheduleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScheduleKind::Constant => "constant",
            ScheduleKind::InverseEpoch => "inverse-epoch",
            ScheduleKind::InverseSqrt => "inverse-sqrt",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdmmParams {
    /// Augmented Lagrangian penalty.
    pub rho: f64,
    /// L1 coefficient.
    pub lambda: f64,
    /// Base step size.
    pub eta0: f64,
    pub schedule: StepSchedule,
}

impl AdmmParams {
    pub fn new(rho: f64, lambda: f64, eta0: f64, schedule: StepSchedule) -> Result<Self> {
        let p = Self {
            rho,
            lambda,
            eta0,
            schedule,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0) || !self.rho.is_finite() {
            return Err(Error::InvalidConfig(format!("rho must be positive, got {}", self.rho)));
        }
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "lambda must be non-negative, got {}",
                self.lambda
            )));
        }
        if !(self.eta0 > 0.0) || !self.eta0.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "eta0 must be positive, got {}",
                self.eta0
            )));
        }
        if let StepSchedule::InverseEpoch { epoch_length: 0 } = self.schedule {
            return Err(Error::InvalidConfig("epoch length must be at least 1".into()));
        }
        Ok(())
    }

    pub fn step_size(&self, k: usize) -> f64 {
        match self.schedule {
            StepSchedule::Constant => self.eta0,
            StepSchedule::InverseEpoch { epoch_length } => {
                let epoch = (k + 1).div_ceil(epoch_length);
                self.eta0 / epoch as f64
            }
            StepSchedule::InverseSqrt => self.eta0 / ((k + 1) as f64).sqrt(),
        }
    }
}

/// Primal `x`, `z`, dual `y`, and the iteration counter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmmState {
    pub x: Vec<f64>,
    pub z: Vec<f64>,
    pub y: Vec<f64>,
    pub k: usize,
}

impl AdmmState {
    pub fn zeros(dim: usize) -> Self {
        Self {
            x: vec![0.0; dim],
            z: vec![0.0; dim],
            y: vec![0.0; dim],
            k: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }

    pub fn residual(&self) -> f64 {
        crate::vector::norm2(&crate::vector::sub(&self.x, &self.z))
    }
}

/// `(-grad - y + rho z + x / eta) / (rho + 1 / eta)` with `eta = eta(k)`.
pub fn x_update(state: &AdmmState, grad: &[f64], params: &AdmmParams, k: usize) -> Vec<f64> {
    let inv_eta = 1.0 / params.step_size(k);
    let denom = params.rho + inv_eta;
    grad.iter()
        .zip(&state.y)
        .zip(&state.z)
        .zip(&state.x)
        .map(|(((g, y), z), x)| (-g - y + params.rho * z + x * inv_eta) / denom)
        .collect()
}

/// Elementwise shrinkage toward zero by `t`.
pub fn soft_threshold(w: &[f64], t: f64) -> Vec<f64> {
    w.iter().map(|&v| shrink(v, t)).collect()
}

#[inline]
fn shrink(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// `S_{lambda/rho}(x_next + y / rho)`
pub fn z_update(x_next: &[f64], y: &[f64], params: &AdmmParams) -> Vec<f64> {
    let t = params.lambda / params.rho;
    x_next
        .iter()
        .zip(y)
        .map(|(x, y)| shrink(x + y / params.rho, t))
        .collect()
}

/// `y + rho (x_next - z_next)`
pub fn y_update(state: &AdmmState, x_next: &[f64], z_next: &[f64], params: &AdmmParams) -> Vec<f64> {
    state
        .y
        .iter()
        .zip(x_next)
        .zip(z_next)
        .map(|((y, x), z)| y + params.rho * (x - z))
        .collect()
}

/// One full x, z, y step driven by `grad`; advances `state.k`.
pub fn step(state: &mut AdmmState, grad: &[f64], params: &AdmmParams) {
    let x = x_update(state, grad, params, state.k);
    let z = z_update(&x, &state.y, params);
    let y = y_update(state, &x, &z, params);
    state.x = x;
    state.z = z;
    state.y = y;
    state.k += 1;
}
