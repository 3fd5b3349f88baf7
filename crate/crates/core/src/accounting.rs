//! Renyi-DP accounting: Gaussian mechanism curves, amplification by
//! subsampling without replacement, composition, conversion to
//! approximate DP, and noise calibration against a target budget.
//!
//! Every function here is a pure function of its arguments.

use std::f64::consts::LN_2;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const LN_4: f64 = 2.0 * LN_2;

/// Integer orders `2..=64`.
pub fn default_alpha_grid() -> Vec<f64> {
    (2..=64).map(f64::from).collect()
}

/// Checks that a grid of Renyi orders is non-empty, finite, strictly
/// increasing and strictly above one.
pub fn validate_grid(alphas: &[f64]) -> Result<()> {
    if alphas.is_empty() {
        return Err(Error::InvalidAlphaGrid("grid is empty".into()));
    }
    for (i, &a) in alphas.iter().enumerate() {
        if !a.is_finite() || a <= 1.0 {
            return Err(Error::InvalidAlphaGrid(format!(
                "order {a} at position {i} is not a finite value > 1"
            )));
        }
        if i > 0 && alphas[i - 1] >= a {
            return Err(Error::InvalidAlphaGrid(format!(
                "orders must be strictly increasing ({} then {a})",
                alphas[i - 1]
            )));
        }
    }
    Ok(())
}

/// RDP guarantee as a function of the order: `epsilon[i]` holds at `alphas[i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawCurve")]
pub struct RenyiCurve {
    alphas: Vec<f64>,
    epsilons: Vec<f64>,
}

#[derive(Deserialize)]
struct RawCurve {
    alphas: Vec<f64>,
    epsilons: Vec<f64>,
}

impl TryFrom<RawCurve> for RenyiCurve {
    type Error = Error;

    fn try_from(raw: RawCurve) -> Result<Self> {
        RenyiCurve::new(raw.alphas, raw.epsilons)
    }
}

impl RenyiCurve {
    pub fn new(alphas: Vec<f64>, epsilons: Vec<f64>) -> Result<Self> {
        validate_grid(&alphas)?;
        if alphas.len() != epsilons.len() {
            return Err(Error::DimensionMismatch {
                expected: alphas.len(),
                found: epsilons.len(),
            });
        }
        if let Some(bad) = epsilons.iter().find(|e| !e.is_finite() || **e < 0.0) {
            return Err(Error::InvalidMechanism(format!(
                "epsilon {bad} is not finite and non-negative"
            )));
        }
        Ok(Self { alphas, epsilons })
    }

    /// The curve of a mechanism that releases nothing.
    pub fn zero(alphas: Vec<f64>) -> Result<Self> {
        let epsilons = vec![0.0; alphas.len()];
        Self::new(alphas, epsilons)
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn epsilons(&self) -> &[f64] {
        &self.epsilons
    }

    pub fn len(&self) -> usize {
        self.alphas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alphas.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.alphas.iter().copied().zip(self.epsilons.iter().copied())
    }

    pub fn epsilon_at(&self, alpha: f64) -> Option<f64> {
        self.alphas.iter().position(|&a| a == alpha).map(|i| self.epsilons[i])
    }

    /// Composition of `times` copies of this curve.
    pub fn repeated(&self, times: usize) -> Self {
        let k = times as f64;
        Self {
            alphas: self.alphas.clone(),
            epsilons: self.epsilons.iter().map(|e| e * k).collect(),
        }
    }

    /// `alpha,epsilon` CSV with a header line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("alpha,epsilon\n");
        for (a, e) in self.iter() {
            let _ = writeln!(out, "{a},{e}");
        }
        out
    }

    /// Parses the format written by [`RenyiCurve::to_csv`]; the header line is optional.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut alphas = Vec::new();
        let mut epsilons = Vec::new();
        for (row, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || (row == 0 && line.starts_with("alpha")) {
                continue;
            }
            let mut fields = line.split(',');
            let mut next = |column: usize| -> Result<f64> {
                let cell = fields.next().ok_or(Error::RaggedRow {
                    row,
                    expected: 2,
                    found: column,
                })?;
                cell.trim().parse::<f64>().map_err(|e| Error::Parse {
                    row,
                    column,
                    message: e.to_string(),
                })
            };
            alphas.push(next(0)?);
            epsilons.push(next(1)?);
        }
        Self::new(alphas, epsilons)
    }
}

/// A Gaussian mechanism: a query with L2 sensitivity `sensitivity`
/// released with isotropic noise of standard deviation `sigma`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianMechanism {
    pub sensitivity: f64,
    pub sigma: f64,
}

impl GaussianMechanism {
    pub fn new(sensitivity: f64, sigma: f64) -> Result<Self> {
        let m = Self { sensitivity, sigma };
        m.validate()?;
        Ok(m)
    }

    fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0) || !self.sigma.is_finite() {
            return Err(Error::InvalidMechanism(format!(
                "sigma must be positive and finite, got {}",
                self.sigma
            )));
        }
        if !self.sensitivity.is_finite() || self.sensitivity < 0.0 {
            return Err(Error::InvalidMechanism(format!(
                "sensitivity must be finite and non-negative, got {}",
                self.sensitivity
            )));
        }
        Ok(())
    }

    /// `alpha * sensitivity^2 / (2 sigma^2)`
    pub fn epsilon(&self, alpha: f64) -> f64 {
        let ratio = self.sensitivity / self.sigma;
        alpha * ratio * ratio / 2.0
    }
}

/// RDP curve of the Gaussian mechanism on the given grid.
pub fn gaussian_rdp(spec: &GaussianMechanism, alpha_grid: &[f64]) -> Result<RenyiCurve> {
    spec.validate()?;
    validate_grid(alpha_grid)?;
    let epsilons = alpha_grid.iter().map(|&a| spec.epsilon(a)).collect();
    RenyiCurve::new(alpha_grid.to_vec(), epsilons)
}

/// Running `log(sum(exp(t_i)))` that never materializes `exp(t_i)`.
#[derive(Debug, Clone, Copy)]
struct LogSumExp {
    max: f64,
    scaled_sum: f64,
}

impl LogSumExp {
    fn new() -> Self {
        Self {
            max: f64::NEG_INFINITY,
            scaled_sum: 0.0,
        }
    }

    fn push(&mut self, t: f64) {
        if t == f64::NEG_INFINITY {
            return;
        }
        if t > self.max {
            self.scaled_sum = self.scaled_sum * (self.max - t).exp() + 1.0;
            self.max = t;
        } else {
            self.scaled_sum += (t - self.max).exp();
        }
    }

    fn value(&self) -> f64 {
        if self.scaled_sum == 0.0 {
            f64::NEG_INFINITY
        } else {
            self.max + self.scaled_sum.ln()
        }
    }
}

/// `log(1 + exp(x))` without overflow or loss of precision near zero.
fn log1p_exp(x: f64) -> f64 {
    if x == f64::NEG_INFINITY {
        0.0
    } else if x <= 0.0 {
        x.exp().ln_1p()
    } else {
        x + (-x).exp().ln_1p()
    }
}

fn ln_binomial(n: u32, k: u32) -> f64 {
    let n = f64::from(n);
    let k = f64::from(k);
    libm::lgamma(n + 1.0) - libm::lgamma(k + 1.0) - libm::lgamma(n - k + 1.0)
}

/// RDP at integer order `alpha >= 3` of a mechanism run on a subsample of
/// `q * n` records drawn without replacement, given the mechanism's RDP
/// `base(j)` with respect to the subsample for every integer `2 <= j <= alpha`.
///
/// Returns the amplification bound
///
/// ```text
/// 1/(alpha-1) * log(1 + q^2 C(alpha,2) min{4(e^eps(2) - 1), 2 e^eps(2)}
///                     + sum_{j=3}^{alpha} q^j C(alpha,j) 2 e^{(j-1) eps(j)})
/// ```
///
/// evaluated entirely in the log domain.
pub fn subsampled_rdp<F>(base: F, q: f64, alpha: u32) -> Result<f64>
where
    F: Fn(u32) -> f64,
{
    if alpha < 3 {
        return Err(Error::UnsupportedOrder(f64::from(alpha)));
    }
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::InvalidRatio(q));
    }
    if q == 0.0 {
        return Ok(0.0);
    }
    let log_q = q.ln();
    let base_checked = |j: u32| -> Result<f64> {
        let e = base(j);
        if e.is_nan() || e < 0.0 {
            Err(Error::InvalidMechanism(format!("base epsilon at order {j} is {e}")))
        } else {
            Ok(e)
        }
    };

    let mut acc = LogSumExp::new();

    let eps2 = base_checked(2)?;
    if eps2 > 0.0 {
        let log_min = (LN_4 + eps2.exp_m1().ln()).min(LN_2 + eps2);
        acc.push(2.0 * log_q + ln_binomial(alpha, 2) + log_min);
    }
    for j in 3..=alpha {
        let eps_j = base_checked(j)?;
        let jf = f64::from(j);
        acc.push(jf * log_q + ln_binomial(alpha, j) + LN_2 + (jf - 1.0) * eps_j);
    }

    Ok(log1p_exp(acc.value()) / f64::from(alpha - 1))
}

fn integer_order(alpha: f64) -> Result<u32> {
    if alpha.fract() != 0.0 || alpha > f64::from(u32::MAX) {
        return Err(Error::UnsupportedOrder(alpha));
    }
    Ok(alpha as u32)
}

/// Per-step RDP curve of a Gaussian mechanism run on a without-replacement
/// subsample with ratio `q`.
///
/// For `q == 1` this is the plain Gaussian curve. Otherwise every order
/// must be an integer; order 2 carries the unamplified Gaussian value and
/// orders >= 3 the amplification bound of [`subsampled_rdp`].
pub fn subsampled_gaussian_rdp(spec: &GaussianMechanism, q: f64, alpha_grid: &[f64]) -> Result<RenyiCurve> {
    spec.validate()?;
    validate_grid(alpha_grid)?;
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::InvalidRatio(q));
    }
    if q == 1.0 {
        return gaussian_rdp(spec, alpha_grid);
    }
    let base = |j: u32| spec.epsilon(f64::from(j));
    let epsilons = alpha_grid
        .iter()
        .map(|&a| {
            let order = integer_order(a)?;
            if order < 3 {
                Ok(if q == 0.0 { 0.0 } else { spec.epsilon(a) })
            } else {
                subsampled_rdp(base, q, order)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    RenyiCurve::new(alpha_grid.to_vec(), epsilons)
}

/// Pointwise sum of curves sharing one grid. An empty list composes to
/// the zero curve on [`default_alpha_grid`].
pub fn compose(curves: &[RenyiCurve]) -> Result<RenyiCurve> {
    let Some(first) = curves.first() else {
        return RenyiCurve::zero(default_alpha_grid());
    };
    let mut epsilons = first.epsilons.clone();
    for c in &curves[1..] {
        if c.alphas != first.alphas {
            return Err(Error::GridMismatch);
        }
        for (acc, e) in epsilons.iter_mut().zip(&c.epsilons) {
            *acc += e;
        }
    }
    RenyiCurve::new(first.alphas.clone(), epsilons)
}

/// An `(epsilon, delta)`-DP guarantee.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DpBudget {
    pub epsilon: f64,
    pub delta: f64,
}

impl DpBudget {
    pub fn new(epsilon: f64, delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::InvalidBudget(format!("delta {delta} is not in (0, 1)")));
        }
        if epsilon.is_nan() || epsilon < 0.0 {
            return Err(Error::InvalidBudget(format!("epsilon {epsilon} is negative")));
        }
        Ok(Self { epsilon, delta })
    }
}

/// Result of converting an RDP curve: the budget and the order attaining it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Conversion {
    pub budget: DpBudget,
    pub alpha: f64,
}

/// Smallest `eps(alpha) + log(1/delta)/(alpha - 1)` over the curve's grid.
pub fn to_approx_dp(curve: &RenyiCurve, delta: f64) -> Result<Conversion> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidBudget(format!("delta {delta} is not in (0, 1)")));
    }
    if curve.is_empty() {
        return Err(Error::InvalidAlphaGrid("curve is empty".into()));
    }
    let log_inv_delta = -delta.ln();
    let (alpha, epsilon) =
        curve
            .iter()
            .map(|(a, e)| (a, e + log_inv_delta / (a - 1.0)))
            .fold(
                (f64::NAN, f64::INFINITY),
                |best, cur| {
                    if cur.1 < best.1 {
                        cur
                    } else {
                        best
                    }
                },
            );
    Ok(Conversion {
        budget: DpBudget::new(epsilon, delta)?,
        alpha,
    })
}

/// Relative width at which the sigma bisection stops.
pub const CALIBRATION_TOLERANCE: f64 = 1e-3;
/// Sigma search range, in units of the sensitivity.
pub const SIGMA_LOWER_CAP: f64 = 1e-6;
pub const SIGMA_UPPER_CAP: f64 = 1e6;

/// Accounted `(epsilon, delta)` after `iterations` releases of a Gaussian
/// mechanism (subsampled with ratio `q` when `q < 1`).
pub fn account_gaussian(
    spec: &GaussianMechanism,
    iterations: usize,
    q: f64,
    delta: f64,
    alpha_grid: &[f64],
) -> Result<(RenyiCurve, Conversion)> {
    let step = subsampled_gaussian_rdp(spec, q, alpha_grid)?;
    let total = step.repeated(iterations);
    let conversion = to_approx_dp(&total, delta)?;
    Ok((total, conversion))
}

/// Smallest sigma (to [`CALIBRATION_TOLERANCE`] relative) such that
/// `iterations` subsampled Gaussian releases stay within `target`.
///
/// The accounted epsilon at the returned sigma never exceeds the target.
pub fn calibrate_sigma(
    target: &DpBudget,
    iterations: usize,
    q: f64,
    sensitivity: f64,
    alpha_grid: &[f64],
) -> Result<f64> {
    if !(target.epsilon > 0.0) {
        return Err(Error::InvalidBudget("target epsilon must be positive".into()));
    }
    if iterations == 0 {
        return Err(Error::InvalidConfig("iterations must be at least 1".into()));
    }
    if !(sensitivity > 0.0 && sensitivity.is_finite()) {
        return Err(Error::InvalidMechanism(format!(
            "sensitivity must be positive, got {sensitivity}"
        )));
    }
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::InvalidRatio(q));
    }
    validate_grid(alpha_grid)?;

    let accounted = |sigma: f64| -> Result<f64> {
        let spec = GaussianMechanism::new(sensitivity, sigma)?;
        let (_, conv) = account_gaussian(&spec, iterations, q, target.delta, alpha_grid)?;
        Ok(conv.budget.epsilon)
    };
    let fits = |sigma: f64| -> Result<bool> { Ok(accounted(sigma)? <= target.epsilon) };

    let mut lo = SIGMA_LOWER_CAP * sensitivity;
    let mut hi = SIGMA_UPPER_CAP * sensitivity;
    if !fits(hi)? {
        return Err(Error::InfeasibleBudget {
            epsilon: target.epsilon,
            delta: target.delta,
            cap: hi,
        });
    }
    if fits(lo)? {
        return Ok(lo);
    }
    // Invariant: `lo` misses the target, `hi` meets it.
    while hi / lo > 1.0 + CALIBRATION_TOLERANCE {
        let mid = (lo * hi).sqrt();
        if fits(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}
