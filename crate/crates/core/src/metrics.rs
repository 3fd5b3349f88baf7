//! Test-set metrics: accuracy, regularized objective and top-k coverage of
//! known relevant features.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::losses::{objective, LossModel};
use crate::vector::dot;

/// Coverage levels reported by default.
pub const XI_LEVELS: [usize; 4] = [20, 25, 30, 40];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSet {
    pub accuracy: f64,
    pub objective: f64,
    /// `k -> xi_k`; empty when the relevant features are unknown.
    pub xi: BTreeMap<usize, f64>,
}

/// Fraction of rows with `sign(x's) == label`, where `sign(0) = +1`.
pub fn accuracy(model: &[f64], test: &Dataset) -> Result<f64> {
    if test.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if model.len() != test.dim() {
        return Err(Error::DimensionMismatch {
            expected: test.dim(),
            found: model.len(),
        });
    }
    let correct = test
        .examples()
        .filter(|d| {
            let predicted = if dot(model, d.features) >= 0.0 { 1.0 } else { -1.0 };
            predicted == d.label
        })
        .count();
    Ok(correct as f64 / test.len() as f64)
}

/// Share of `relevant` found among the `k` largest `|model_i|`
/// (ties go to the lower index).
pub fn xi_coverage(model: &[f64], relevant: &[usize], k: usize) -> Result<f64> {
    if relevant.is_empty() {
        return Err(Error::InvalidConfig("relevant feature set is empty".into()));
    }
    if k > model.len() {
        return Err(Error::InvalidConfig(format!(
            "k = {k} exceeds the {} model coordinates",
            model.len()
        )));
    }
    let mut order: Vec<usize> = (0..model.len()).collect();
    order.sort_by(|&a, &b| model[b].abs().total_cmp(&model[a].abs()).then(a.cmp(&b)));
    let mut top = vec![false; model.len()];
    for &i in &order[..k] {
        top[i] = true;
    }
    let hits = relevant.iter().filter(|&&i| i < top.len() && top[i]).count();
    Ok(hits as f64 / relevant.len() as f64)
}

/// Accuracy, objective and (when `relevant` is given) `xi_k` for each
/// `k` in `levels` not exceeding `ranked_dims`.
///
/// Only the first `ranked_dims` coordinates enter the ranking, which lets
/// callers leave an appended intercept out of it.
pub fn evaluate(
    model: &[f64],
    test: &Dataset,
    loss: &LossModel,
    lambda: f64,
    relevant: Option<&[usize]>,
    ranked_dims: usize,
    levels: &[usize],
) -> Result<MetricSet> {
    let accuracy = accuracy(model, test)?;
    let objective = objective(loss, model, test, lambda)?;
    let mut xi = BTreeMap::new();
    if let Some(rel) = relevant {
        let ranked = &model[..ranked_dims.min(model.len())];
        for &k in levels.iter().filter(|&&k| k <= ranked.len()) {
            xi.insert(k, xi_coverage(ranked, rel, k)?);
        }
    }
    Ok(MetricSet {
        accuracy,
        objective,
        xi,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> Dataset {
        Dataset::new(
            vec![1.0, 0.0, -1.0, 0.0, 0.0, 1.0, 0.0, -1.0],
            vec![1.0, -1.0, 1.0, 1.0],
            2,
        )
        .unwrap()
    }

    #[test]
    fn accuracy_examples() {
        let d = toy();
        // perfect separator for the first two rows only
        assert_eq!(accuracy(&[1.0, 0.0], &d).unwrap(), 1.0);
        // x = 0 predicts +1 everywhere
        assert_eq!(accuracy(&[0.0, 0.0], &d).unwrap(), 0.75);
        let flipped = Dataset::new(d.features().to_vec(), d.labels().iter().map(|l| -l).collect(), 2).unwrap();
        let x = [0.3, -2.0];
        let a = accuracy(&x, &d).unwrap();
        let b = accuracy(&x, &flipped).unwrap();
        assert!((a + b - 1.0).abs() < 1e-15);
        assert!(accuracy(&[1.0], &d).is_err());
        assert_eq!(
            accuracy(&[1.0], &Dataset::new(vec![], vec![], 1).unwrap()),
            Err(Error::EmptyDataset)
        );
    }

    #[test]
    fn coverage_worked_example() {
        // 16 of the 20 relevant coordinates land in the top 30.
        let mut model = vec![0.0; 100];
        for (i, m) in model.iter_mut().enumerate().take(16) {
            *m = 10.0 + i as f64;
        }
        for m in model.iter_mut().skip(16).take(4) {
            *m = 0.001;
        }
        for m in model.iter_mut().skip(20).take(14) {
            *m = -5.0;
        }
        let relevant: Vec<usize> = (0..20).collect();
        assert_eq!(xi_coverage(&model, &relevant, 30).unwrap(), 0.8);
    }

    #[test]
    fn coverage_edge_cases() {
        let truth = crate::data::SyntheticSpec::new(1, 0).true_model();
        let relevant: Vec<usize> = (0..20).collect();
        assert_eq!(xi_coverage(&truth, &relevant, 20).unwrap(), 1.0);
        let noise: Vec<f64> = (0..100).map(|i| ((i * 37) % 11) as f64).collect();
        assert_eq!(xi_coverage(&noise, &relevant, 100).unwrap(), 1.0);
        assert!(xi_coverage(&noise, &relevant, 101).is_err());
        assert!(xi_coverage(&noise, &[], 5).is_err());
        // ties: lower index wins
        assert_eq!(xi_coverage(&[1.0, 1.0, 1.0], &[0], 1).unwrap(), 1.0);
        assert_eq!(xi_coverage(&[1.0, 1.0, 1.0], &[2], 1).unwrap(), 0.0);
    }

    #[test]
    fn coverage_is_monotone_in_k() {
        let model: Vec<f64> = (0..50).map(|i| ((i * 7919) % 101) as f64 - 50.0).collect();
        let relevant = [1, 4, 9, 16, 25, 36, 49];
        let mut last = 0.0;
        for k in 1..=50 {
            let xi = xi_coverage(&model, &relevant, k).unwrap();
            assert!(xi >= last);
            last = xi;
        }
    }
}
