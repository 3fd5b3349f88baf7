//! Per-example losses and gradients for linear binary classifiers, and the
//! L1-regularized empirical objective.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::vector::{dot, norm1};

/// Width parameter used by the huberized hinge unless told otherwise.
pub const DEFAULT_HUBER_H: f64 = 0.5;

/// One labelled record: features `s` and a label in `{-1, +1}`.
#[derive(Debug, Clone, Copy)]
pub struct Example<'a> {
    pub features: &'a [f64],
    pub label: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LossModel {
    /// `log(1 + exp(-l x's))`
    #[default]
    Logistic,
    /// Huberized hinge with quadratic zone `|1 - z| <= h`.
    HuberHinge { h: f64 },
}

impl LossModel {
    pub fn huber(h: f64) -> Result<Self> {
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::InvalidConfig(format!("huber width must be positive, got {h}")));
        }
        Ok(LossModel::HuberHinge { h })
    }

    pub fn name(&self) -> &'static str {
        match self {
            LossModel::Logistic => "logistic",
            LossModel::HuberHinge { .. } => "hsvm",
        }
    }

    /// Loss as a function of the margin `z = l x's`.
    pub fn margin_loss(&self, z: f64) -> f64 {
        match *self {
            LossModel::Logistic => softplus(-z),
            LossModel::HuberHinge { h } => {
                if z > 1.0 + h {
                    0.0
                } else if (1.0 - z).abs() <= h {
                    (1.0 + h - z).powi(2) / (4.0 * h)
                } else {
                    1.0 - z
                }
            }
        }
    }

    /// Derivative of [`LossModel::margin_loss`] in `z`.
    pub fn margin_derivative(&self, z: f64) -> f64 {
        match *self {
            LossModel::Logistic => -sigmoid(-z),
            LossModel::HuberHinge { h } => {
                if z > 1.0 + h {
                    0.0
                } else if (1.0 - z).abs() <= h {
                    -(1.0 + h - z) / (2.0 * h)
                } else {
                    -1.0
                }
            }
        }
    }

    pub fn example_loss(&self, x: &[f64], d: Example<'_>) -> Result<f64> {
        check_dim(x, d.features)?;
        Ok(self.margin_loss(d.label * dot(x, d.features)))
    }

    pub fn example_grad(&self, x: &[f64], d: Example<'_>) -> Result<Vec<f64>> {
        check_dim(x, d.features)?;
        let mut g = vec![0.0; x.len()];
        self.add_example_grad(x, d, 1.0, &mut g);
        Ok(g)
    }

    /// `out += weight * grad`, without allocation. Dimensions are the caller's job.
    pub(crate) fn add_example_grad(&self, x: &[f64], d: Example<'_>, weight: f64, out: &mut [f64]) {
        let coef = weight * d.label * self.margin_derivative(d.label * dot(x, d.features));
        if coef != 0.0 {
            crate::vector::axpy(coef, d.features, out);
        }
    }
}

impl fmt::Display for LossModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LossModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "logistic" | "lr" => Ok(LossModel::Logistic),
            "hsvm" | "huber" | "huberized-hinge" => Ok(LossModel::HuberHinge { h: DEFAULT_HUBER_H }),
            other => Err(Error::InvalidConfig(format!("unknown loss '{other}'"))),
        }
    }
}

fn check_dim(x: &[f64], s: &[f64]) -> Result<()> {
    if x.len() != s.len() {
        return Err(Error::DimensionMismatch {
            expected: s.len(),
            found: x.len(),
        });
    }
    Ok(())
}

/// `log(1 + e^t)`
pub fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

pub fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// Mean example loss over `data` plus `lambda * ||x||_1`.
pub fn objective(model: &LossModel, x: &[f64], data: &Dataset, lambda: f64) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if lambda < 0.0 {
        return Err(Error::InvalidConfig(format!(
            "lambda must be non-negative, got {lambda}"
        )));
    }
    check_dim(x, data.row(0))?;
    let risk = data
        .examples()
        .map(|d| model.margin_loss(d.label * dot(x, d.features)))
        .sum::<f64>()
        / data.len() as f64;
    Ok(risk + lambda * norm1(x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mechanisms::{NoiseSource, StreamTag};
    use crate::vector::norm2;
    use std::f64::consts::LN_2;

    const HUBER: LossModel = LossModel::HuberHinge { h: 0.5 };

    fn ex(features: &[f64], label: f64) -> Example<'_> {
        Example { features, label }
    }

    #[test]
    fn logistic_at_origin() {
        let s = [1.0, 0.0];
        let l = LossModel::Logistic.example_loss(&[0.0, 0.0], ex(&s, 1.0)).unwrap();
        assert!((l - LN_2).abs() < 1e-15);
        let g = LossModel::Logistic.example_grad(&[0.0, 0.0], ex(&s, 1.0)).unwrap();
        assert_eq!(g, vec![-0.5, 0.0]);
    }

    #[test]
    fn logistic_is_stable_for_large_margins() {
        assert_eq!(LossModel::Logistic.margin_loss(800.0), 0.0);
        assert_eq!(LossModel::Logistic.margin_loss(-800.0), 800.0);
        assert_eq!(LossModel::Logistic.margin_derivative(-800.0), -1.0);
        assert_eq!(LossModel::Logistic.margin_derivative(800.0), 0.0);
    }

    #[test]
    fn huber_branches() {
        assert_eq!(HUBER.margin_loss(2.0), 0.0);
        assert!((HUBER.margin_loss(1.0) - 0.125).abs() < 1e-15);
        assert_eq!(HUBER.margin_loss(0.0), 1.0);
        let s = [1.0, 2.0];
        // z = 2 > 1 + h: flat branch
        let g = HUBER.example_grad(&[0.0, 1.0], ex(&s, 1.0)).unwrap();
        assert_eq!(g, vec![0.0, 0.0]);
        // continuity at the kinks
        for z in [0.5, 1.5] {
            let below = HUBER.margin_loss(z - 1e-12);
            let above = HUBER.margin_loss(z + 1e-12);
            assert!((below - above).abs() < 1e-10);
        }
    }

    #[test]
    fn dimension_mismatch() {
        let s = [1.0, 2.0];
        assert!(matches!(
            LossModel::Logistic.example_loss(&[0.0], ex(&s, 1.0)),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(HUBER.example_grad(&[0.0; 3], ex(&s, 1.0)).is_err());
    }

    #[test]
    fn parse_names() {
        assert_eq!("logistic".parse::<LossModel>().unwrap(), LossModel::Logistic);
        assert_eq!("hsvm".parse::<LossModel>().unwrap(), HUBER);
        assert!("svm".parse::<LossModel>().is_err());
        assert!(LossModel::huber(0.0).is_err());
    }

    #[test]
    fn gradient_norm_bounded_on_unit_ball() {
        let src = NoiseSource::new(5);
        for i in 0..2000u64 {
            let mut s = src.gaussian_vector(StreamTag::Synthetic, 2 * i, 6, 1.0).unwrap();
            let n = norm2(&s);
            if n > 1.0 {
                s.iter_mut().for_each(|v| *v /= n);
            }
            let x = src.gaussian_vector(StreamTag::Synthetic, 2 * i + 1, 6, 5.0).unwrap();
            let label = if i % 2 == 0 { 1.0 } else { -1.0 };
            for m in [LossModel::Logistic, HUBER] {
                let g = m.example_grad(&x, ex(&s, label)).unwrap();
                assert!(norm2(&g) <= 1.0 + 1e-12);
            }
        }
    }

    #[test]
    fn convexity_along_segments() {
        let src = NoiseSource::new(11);
        for i in 0..1000u64 {
            let s = src.gaussian_vector(StreamTag::Synthetic, 3 * i, 4, 0.5).unwrap();
            let x1 = src.gaussian_vector(StreamTag::Synthetic, 3 * i + 1, 4, 3.0).unwrap();
            let x2 = src.gaussian_vector(StreamTag::Synthetic, 3 * i + 2, 4, 3.0).unwrap();
            let t = (i as f64 % 97.0) / 96.0;
            let mid: Vec<f64> = x1.iter().zip(&x2).map(|(a, b)| t * a + (1.0 - t) * b).collect();
            for m in [LossModel::Logistic, HUBER] {
                let d = ex(&s, if i % 3 == 0 { -1.0 } else { 1.0 });
                let lhs = m.example_loss(&mid, d).unwrap();
                let rhs = t * m.example_loss(&x1, d).unwrap() + (1.0 - t) * m.example_loss(&x2, d).unwrap();
                assert!(lhs <= rhs + 1e-12, "{lhs} > {rhs}");
            }
        }
    }

    #[test]
    fn objective_examples() {
        let data = Dataset::new(vec![1.0, 0.0, 0.0, 1.0], vec![1.0, -1.0], 2).unwrap();
        let o = objective(&LossModel::Logistic, &[0.0, 0.0], &data, 0.3).unwrap();
        assert!((o - LN_2).abs() < 1e-15);

        let x = [0.5, -2.0];
        let single = Dataset::new(vec![1.0, 0.0], vec![1.0], 2).unwrap();
        let o = objective(&HUBER, &x, &single, 0.1).unwrap();
        let expect = HUBER.example_loss(&x, ex(&[1.0, 0.0], 1.0)).unwrap() + 0.1 * 2.5;
        assert!((o - expect).abs() < 1e-15);

        let risk = objective(&HUBER, &x, &data, 0.0).unwrap();
        let by_hand = (HUBER.margin_loss(0.5) + HUBER.margin_loss(2.0)) / 2.0;
        assert!((risk - by_hand).abs() < 1e-15);

        let empty = Dataset::new(vec![], vec![], 2).unwrap();
        assert_eq!(objective(&HUBER, &x, &empty, 0.0), Err(Error::EmptyDataset));
    }
}
