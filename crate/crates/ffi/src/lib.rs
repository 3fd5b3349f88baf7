//! C interface to `rdp_admm`.
//!
//! Datasets and run reports are opaque handles owned by the caller and
//! released with their `_free` function. Every fallible call returns an
//! [`RdpStatus`]; on failure `rdp_last_error()` describes the cause for the
//! calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use rdp_admm::accounting::{self, DpBudget, GaussianMechanism, RenyiCurve};
use rdp_admm::admm::ScheduleKind;
use rdp_admm::data::{generate_synthetic, preprocess, Dataset, SyntheticSpec};
use rdp_admm::harness::{calibrate_config, Hyper};
use rdp_admm::metrics::accuracy;
use rdp_admm::{Algorithm, Error, LossModel, NoiseSource, RunReport};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RdpStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    /// No noise level within the search range meets the budget.
    Infeasible = 3,
    /// An iterate became NaN or infinite.
    NonFinite = 4,
    /// The run had no noise, so there is no privacy guarantee to report.
    NotPrivate = 5,
    BufferTooSmall = 6,
    Io = 7,
    Panic = 99,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RdpAlgorithm {
    SsAdmm = 0,
    MpAdmm = 1,
    DpSgd = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RdpLoss {
    Logistic = 0,
    HuberHinge = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RdpSchedule {
    Constant = 0,
    InverseEpoch = 1,
    InverseSqrt = 2,
}

/// Training options. Fill with `rdp_train_options_default` first.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct RdpTrainOptions {
    pub algorithm: RdpAlgorithm,
    pub loss: RdpLoss,
    pub huber_h: f64,
    pub lambda: f64,
    pub sigma: f64,
    /// When positive, sigma is calibrated to this epsilon at `delta`.
    pub target_epsilon: f64,
    pub delta: f64,
    pub clip: f64,
    pub rho: f64,
    /// Base step size (the constant step for mpADMM).
    pub eta0: f64,
    pub schedule: RdpSchedule,
    /// 0 selects ceil(sqrt(n)).
    pub batch_size: usize,
    /// Iterations, or epochs for mpADMM.
    pub steps: usize,
    pub seed: u64,
}

/// Opaque dataset handle.
pub struct RdpDataset {
    inner: Dataset,
}

/// Opaque run report handle.
pub struct RdpReport {
    inner: RunReport,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> RdpStatus {
    match err {
        Error::InfeasibleBudget { .. } => RdpStatus::Infeasible,
        Error::NonFinite { .. } => RdpStatus::NonFinite,
        Error::Io(_) => RdpStatus::Io,
        _ => RdpStatus::InvalidArgument,
    }
}

fn guard<F>(f: F) -> RdpStatus
where
    F: FnOnce() -> Result<(), (RdpStatus, String)>,
{
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            RdpStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_last_error(&msg);
            status
        }
        Err(_) => {
            set_last_error("internal panic");
            RdpStatus::Panic
        }
    }
}

fn lib(err: Error) -> (RdpStatus, String) {
    (status_of(&err), err.to_string())
}

fn null(name: &str) -> (RdpStatus, String) {
    (RdpStatus::NullPointer, format!("{name} is null"))
}

unsafe fn slice_in<'a, T>(p: *const T, len: usize, name: &str) -> Result<&'a [T], (RdpStatus, String)> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(name));
    }
    Ok(slice::from_raw_parts(p, len))
}

/// Message for the last failed call on this thread, or NULL. Valid until
/// the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn rdp_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn rdp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies `n` rows of `dim` features (row-major) and `n` labels in
/// `{-1, +1}` or `{0, 1}`. With `scale` nonzero the data is min-max scaled,
/// given an intercept when `intercept` is nonzero, and capped at unit norm.
///
/// # Safety
/// `features` must point to `n * dim` doubles and `labels` to `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn rdp_dataset_new(
    features: *const f64,
    labels: *const f64,
    n: usize,
    dim: usize,
    scale: i32,
    intercept: i32,
    out: *mut *mut RdpDataset,
) -> RdpStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let total = n
            .checked_mul(dim)
            .ok_or((RdpStatus::InvalidArgument, "n * dim overflows".to_string()))?;
        let f = slice_in(features, total, "features")?.to_vec();
        let l: Vec<f64> = slice_in(labels, n, "labels")?
            .iter()
            .map(|&v| if v == 0.0 { -1.0 } else { v })
            .collect();
        let raw = Dataset::new(f, l, dim).map_err(lib)?;
        let inner = if scale != 0 {
            preprocess(&raw, intercept != 0)
        } else {
            raw
        };
        *out = Box::into_raw(Box::new(RdpDataset { inner }));
        Ok(())
    })
}

/// Generates the correlated-Gaussian logistic dataset and preprocesses it
/// with an intercept.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rdp_dataset_synthetic(
    n: usize,
    dim: usize,
    ar: f64,
    seed: u64,
    out: *mut *mut RdpDataset,
) -> RdpStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let raw = generate_synthetic(&SyntheticSpec { n, dim, ar, seed }).map_err(lib)?;
        *out = Box::into_raw(Box::new(RdpDataset {
            inner: preprocess(&raw, true),
        }));
        Ok(())
    })
}

/// # Safety
/// `data` must be NULL or a handle from this library.
#[no_mangle]
pub unsafe extern "C" fn rdp_dataset_len(data: *const RdpDataset) -> usize {
    data.as_ref().map_or(0, |d| d.inner.len())
}

/// Number of features, including an appended intercept.
///
/// # Safety
/// `data` must be NULL or a handle from this library.
#[no_mangle]
pub unsafe extern "C" fn rdp_dataset_dim(data: *const RdpDataset) -> usize {
    data.as_ref().map_or(0, |d| d.inner.dim())
}

/// # Safety
/// `data` must be NULL or a handle from this library not freed before.
#[no_mangle]
pub unsafe extern "C" fn rdp_dataset_free(data: *mut RdpDataset) {
    if !data.is_null() {
        drop(Box::from_raw(data));
    }
}

/// Defaults for `algorithm`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rdp_train_options_default(algorithm: RdpAlgorithm, out: *mut RdpTrainOptions) -> RdpStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let h = Hyper::default();
        let (rho, eta0, schedule, steps) = match algorithm {
            RdpAlgorithm::SsAdmm => (h.ss_rho, h.eta0, RdpSchedule::InverseEpoch, h.iterations),
            RdpAlgorithm::MpAdmm => (h.mp_rho, h.mp_eta, RdpSchedule::Constant, h.epochs),
            RdpAlgorithm::DpSgd => (h.ss_rho, h.eta0, RdpSchedule::InverseEpoch, h.iterations),
        };
        *out = RdpTrainOptions {
            algorithm,
            loss: RdpLoss::Logistic,
            huber_h: rdp_admm::losses::DEFAULT_HUBER_H,
            lambda: 0.0,
            sigma: 0.0,
            target_epsilon: 0.0,
            delta: h.delta,
            clip: h.clip,
            rho,
            eta0,
            schedule,
            batch_size: 0,
            steps,
            seed: 0,
        };
        Ok(())
    })
}

fn hyper_of(o: &RdpTrainOptions) -> Result<Hyper, (RdpStatus, String)> {
    let loss = match o.loss {
        RdpLoss::Logistic => LossModel::Logistic,
        RdpLoss::HuberHinge => LossModel::huber(o.huber_h).map_err(lib)?,
    };
    Ok(Hyper {
        loss,
        iterations: o.steps,
        epochs: o.steps,
        batch_size: (o.batch_size > 0).then_some(o.batch_size),
        ss_rho: o.rho,
        mp_rho: o.rho,
        eta0: o.eta0,
        mp_eta: o.eta0,
        schedule: match o.schedule {
            RdpSchedule::Constant => ScheduleKind::Constant,
            RdpSchedule::InverseEpoch => ScheduleKind::InverseEpoch,
            RdpSchedule::InverseSqrt => ScheduleKind::InverseSqrt,
        },
        clip: o.clip,
        delta: o.delta,
        alpha_grid: accounting::default_alpha_grid(),
        record_trace: false,
    })
}

/// Trains on `data` and returns a report handle in `out`.
///
/// # Safety
/// `data` and `options` must be valid; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rdp_train(
    data: *const RdpDataset,
    options: *const RdpTrainOptions,
    out: *mut *mut RdpReport,
) -> RdpStatus {
    guard(|| {
        let data = &data.as_ref().ok_or_else(|| null("data"))?.inner;
        let o = options.as_ref().ok_or_else(|| null("options"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let hyper = hyper_of(o)?;
        let algo = match o.algorithm {
            RdpAlgorithm::SsAdmm => Algorithm::SsAdmm,
            RdpAlgorithm::MpAdmm => Algorithm::MpAdmm,
            RdpAlgorithm::DpSgd => Algorithm::DpSgd,
        };
        let mut config = hyper.config(algo, data.len(), o.lambda, o.sigma);
        if o.target_epsilon > 0.0 {
            let target = DpBudget::new(o.target_epsilon, o.delta).map_err(lib)?;
            calibrate_config(&mut config, data.len(), &target).map_err(lib)?;
        }
        let report = rdp_admm::train(data, &hyper.loss, &config, NoiseSource::new(o.seed)).map_err(lib)?;
        *out = Box::into_raw(Box::new(RdpReport { inner: report }));
        Ok(())
    })
}

/// Length of the trained model vector.
///
/// # Safety
/// `report` must be NULL or a handle from this library.
#[no_mangle]
pub unsafe extern "C" fn rdp_report_model_len(report: *const RdpReport) -> usize {
    report.as_ref().map_or(0, |r| r.inner.final_model.len())
}

/// Copies the model into `buf`, which holds `len` doubles.
///
/// # Safety
/// `buf` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn rdp_report_model(report: *const RdpReport, buf: *mut f64, len: usize) -> RdpStatus {
    guard(|| {
        let r = &report.as_ref().ok_or_else(|| null("report"))?.inner;
        if len < r.final_model.len() {
            return Err((
                RdpStatus::BufferTooSmall,
                format!("model has {} entries, buffer holds {len}", r.final_model.len()),
            ));
        }
        if buf.is_null() {
            return Err(null("buf"));
        }
        slice::from_raw_parts_mut(buf, r.final_model.len()).copy_from_slice(&r.final_model);
        Ok(())
    })
}

/// Accounted `(epsilon, delta)` and the order that attains it. Returns
/// `NotPrivate` for a noiseless run.
///
/// # Safety
/// Output pointers must be valid or NULL.
#[no_mangle]
pub unsafe extern "C" fn rdp_report_privacy(
    report: *const RdpReport,
    epsilon: *mut f64,
    delta: *mut f64,
    alpha: *mut f64,
) -> RdpStatus {
    guard(|| {
        let r = &report.as_ref().ok_or_else(|| null("report"))?.inner;
        let p = r
            .privacy
            .as_ref()
            .ok_or((RdpStatus::NotPrivate, "run was not private".to_string()))?;
        if let Some(e) = epsilon.as_mut() {
            *e = p.epsilon;
        }
        if let Some(d) = delta.as_mut() {
            *d = p.delta;
        }
        if let Some(a) = alpha.as_mut() {
            *a = p.alpha;
        }
        Ok(())
    })
}

/// Noise level the run used (after any calibration).
///
/// # Safety
/// `report` must be NULL or a handle from this library.
#[no_mangle]
pub unsafe extern "C" fn rdp_report_sigma(report: *const RdpReport) -> f64 {
    report.as_ref().map_or(f64::NAN, |r| r.inner.config.sigma())
}

/// Classification accuracy of the report's model on `data`.
///
/// # Safety
/// Handles must be valid; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rdp_report_accuracy(
    report: *const RdpReport,
    data: *const RdpDataset,
    out: *mut f64,
) -> RdpStatus {
    guard(|| {
        let r = &report.as_ref().ok_or_else(|| null("report"))?.inner;
        let d = &data.as_ref().ok_or_else(|| null("data"))?.inner;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = accuracy(&r.final_model, d).map_err(lib)?;
        Ok(())
    })
}

/// The report as a JSON string; free it with `rdp_string_free`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rdp_report_to_json(report: *const RdpReport, out: *mut *mut c_char) -> RdpStatus {
    guard(|| {
        let r = &report.as_ref().ok_or_else(|| null("report"))?.inner;
        if out.is_null() {
            return Err(null("out"));
        }
        let s = serde_json_string(r)?;
        *out = CString::new(s).map_err(|e| (RdpStatus::Io, e.to_string()))?.into_raw();
        Ok(())
    })
}

fn serde_json_string(r: &RunReport) -> Result<String, (RdpStatus, String)> {
    serde_json::to_string(r).map_err(|e| (RdpStatus::Io, e.to_string()))
}

/// # Safety
/// `s` must be NULL or a string returned by this library.
#[no_mangle]
pub unsafe extern "C" fn rdp_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// # Safety
/// `report` must be NULL or a handle from this library not freed before.
#[no_mangle]
pub unsafe extern "C" fn rdp_report_free(report: *mut RdpReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// RDP of one Gaussian release at each of the `len` orders in `alphas`.
///
/// # Safety
/// `alphas` and `out` must each hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn rdp_gaussian_rdp(
    sensitivity: f64,
    sigma: f64,
    alphas: *const f64,
    len: usize,
    out: *mut f64,
) -> RdpStatus {
    guard(|| {
        let grid = slice_in(alphas, len, "alphas")?;
        let spec = GaussianMechanism::new(sensitivity, sigma).map_err(lib)?;
        let curve = accounting::gaussian_rdp(&spec, grid).map_err(lib)?;
        write_curve(&curve, out)
    })
}

/// RDP of one Gaussian release on a subsample drawn without replacement at
/// ratio `q`. Orders must be integers when `q < 1`.
///
/// # Safety
/// `alphas` and `out` must each hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn rdp_subsampled_gaussian_rdp(
    sensitivity: f64,
    sigma: f64,
    q: f64,
    alphas: *const f64,
    len: usize,
    out: *mut f64,
) -> RdpStatus {
    guard(|| {
        let grid = slice_in(alphas, len, "alphas")?;
        let spec = GaussianMechanism::new(sensitivity, sigma).map_err(lib)?;
        let curve = accounting::subsampled_gaussian_rdp(&spec, q, grid).map_err(lib)?;
        write_curve(&curve, out)
    })
}

unsafe fn write_curve(curve: &RenyiCurve, out: *mut f64) -> Result<(), (RdpStatus, String)> {
    if curve.is_empty() {
        return Ok(());
    }
    if out.is_null() {
        return Err(null("out"));
    }
    slice::from_raw_parts_mut(out, curve.len()).copy_from_slice(curve.epsilons());
    Ok(())
}

/// Cheapest `(epsilon, delta)` for the curve given by `len` pairs.
///
/// # Safety
/// `alphas` and `epsilons` must hold `len` doubles; outputs valid or NULL.
#[no_mangle]
pub unsafe extern "C" fn rdp_to_approx_dp(
    alphas: *const f64,
    epsilons: *const f64,
    len: usize,
    delta: f64,
    epsilon_out: *mut f64,
    alpha_out: *mut f64,
) -> RdpStatus {
    guard(|| {
        let a = slice_in(alphas, len, "alphas")?.to_vec();
        let e = slice_in(epsilons, len, "epsilons")?.to_vec();
        let curve = RenyiCurve::new(a, e).map_err(lib)?;
        let conv = accounting::to_approx_dp(&curve, delta).map_err(lib)?;
        if let Some(o) = epsilon_out.as_mut() {
            *o = conv.budget.epsilon;
        }
        if let Some(o) = alpha_out.as_mut() {
            *o = conv.alpha;
        }
        Ok(())
    })
}

/// Smallest sigma for which `iterations` subsampled Gaussian releases
/// meet `(epsilon, delta)` on the default order grid.
///
/// # Safety
/// `sigma_out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rdp_calibrate_sigma(
    epsilon: f64,
    delta: f64,
    iterations: usize,
    q: f64,
    sensitivity: f64,
    sigma_out: *mut f64,
) -> RdpStatus {
    guard(|| {
        let out = sigma_out.as_mut().ok_or_else(|| null("sigma_out"))?;
        let target = DpBudget::new(epsilon, delta).map_err(lib)?;
        *out = accounting::calibrate_sigma(&target, iterations, q, sensitivity, &accounting::default_alpha_grid())
            .map_err(lib)?;
        Ok(())
    })
}
