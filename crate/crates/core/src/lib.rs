//! Rényi-differentially-private stochastic ADMM for L1-regularized
//! empirical risk minimization.
//!
//! Two private solvers are provided, [`ssadmm`] (subsampled, gradient
//! perturbation) and [`mpadmm`] (full gradient, output perturbation), plus a
//! private proximal SGD baseline in [`dpsgd`]. [`accounting`] tracks the
//! privacy loss of every run as an RDP curve and converts it to
//! `(epsilon, delta)`.

// Negated comparisons below reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod accounting;
pub mod admm;
pub mod cli;
pub mod data;
pub mod dpsgd;
pub mod error;
pub mod harness;
pub mod losses;
pub mod mechanisms;
pub mod metrics;
pub mod mpadmm;
pub mod report;
pub mod ssadmm;
pub mod vector;

pub use accounting::{
    calibrate_sigma, compose, gaussian_rdp, subsampled_gaussian_rdp, subsampled_rdp, to_approx_dp, DpBudget,
    GaussianMechanism, RenyiCurve,
};
pub use admm::{AdmmParams, AdmmState, StepSchedule};
pub use data::{generate_synthetic, preprocess, Dataset, SyntheticSpec};
pub use dpsgd::{train_dpsgd, DpSgdConfig};
pub use error::{Error, Result};
pub use losses::LossModel;
pub use mechanisms::NoiseSource;
pub use mpadmm::{train_mpadmm, MpAdmmConfig};
pub use report::{train, Algorithm, PrivacyReport, RunReport, TrainConfig};
pub use ssadmm::{train_ssadmm, SsAdmmConfig};
