use std::ffi::CStr;
use std::ptr;

use rdp_admm_ffi::*;

fn last_error() -> String {
    let p = rdp_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn synthetic(n: usize, seed: u64) -> *mut RdpDataset {
    let mut d = ptr::null_mut();
    assert_eq!(unsafe { rdp_dataset_synthetic(n, 8, 0.5, seed, &mut d) }, RdpStatus::Ok);
    d
}

#[test]
fn train_and_inspect_report() {
    let data = synthetic(300, 1);
    assert_eq!(unsafe { rdp_dataset_len(data) }, 300);
    assert_eq!(unsafe { rdp_dataset_dim(data) }, 9);

    let mut opts = std::mem::MaybeUninit::<RdpTrainOptions>::uninit();
    assert_eq!(
        unsafe { rdp_train_options_default(RdpAlgorithm::SsAdmm, opts.as_mut_ptr()) },
        RdpStatus::Ok
    );
    let mut opts = unsafe { opts.assume_init() };
    opts.steps = 30;
    opts.lambda = 1e-3;
    opts.target_epsilon = 3.0;
    opts.seed = 4;

    let mut report = ptr::null_mut();
    assert_eq!(unsafe { rdp_train(data, &opts, &mut report) }, RdpStatus::Ok);
    let len = unsafe { rdp_report_model_len(report) };
    assert_eq!(len, 9);
    let mut model = vec![0.0; len];
    assert_eq!(
        unsafe { rdp_report_model(report, model.as_mut_ptr(), len) },
        RdpStatus::Ok
    );
    assert!(model.iter().all(|v| v.is_finite()));

    let mut small = vec![0.0; 3];
    assert_eq!(
        unsafe { rdp_report_model(report, small.as_mut_ptr(), 3) },
        RdpStatus::BufferTooSmall
    );

    let (mut eps, mut delta, mut alpha) = (0.0, 0.0, 0.0);
    assert_eq!(
        unsafe { rdp_report_privacy(report, &mut eps, &mut delta, &mut alpha) },
        RdpStatus::Ok
    );
    assert!(eps > 0.0 && eps <= 3.0, "{eps}");
    assert_eq!(delta, 1e-8);
    assert!(unsafe { rdp_report_sigma(report) } > 0.0);

    let mut acc = 0.0;
    assert_eq!(unsafe { rdp_report_accuracy(report, data, &mut acc) }, RdpStatus::Ok);
    assert!((0.0..=1.0).contains(&acc));

    let mut json = ptr::null_mut();
    assert_eq!(unsafe { rdp_report_to_json(report, &mut json) }, RdpStatus::Ok);
    let text = unsafe { CStr::from_ptr(json) }.to_str().unwrap().to_owned();
    unsafe { rdp_string_free(json) };
    let parsed: rdp_admm::RunReport = serde_json::from_str(&text).unwrap();
    assert_eq!(parsed.final_model, model);

    unsafe {
        rdp_report_free(report);
        rdp_dataset_free(data);
    }
}

#[test]
fn same_seed_same_model_across_calls() {
    let data = synthetic(120, 2);
    let mut opts = std::mem::MaybeUninit::<RdpTrainOptions>::uninit();
    unsafe { rdp_train_options_default(RdpAlgorithm::MpAdmm, opts.as_mut_ptr()) };
    let mut opts = unsafe { opts.assume_init() };
    opts.sigma = 0.05;
    opts.steps = 10;
    opts.seed = 9;
    let run = || {
        let mut r = ptr::null_mut();
        assert_eq!(unsafe { rdp_train(data, &opts, &mut r) }, RdpStatus::Ok);
        let mut m = vec![0.0; unsafe { rdp_report_model_len(r) }];
        unsafe { rdp_report_model(r, m.as_mut_ptr(), m.len()) };
        unsafe { rdp_report_free(r) };
        m
    };
    assert_eq!(run(), run());
    unsafe { rdp_dataset_free(data) };
}

#[test]
fn noiseless_run_is_not_private() {
    let data = synthetic(50, 3);
    let mut opts = std::mem::MaybeUninit::<RdpTrainOptions>::uninit();
    unsafe { rdp_train_options_default(RdpAlgorithm::DpSgd, opts.as_mut_ptr()) };
    let mut opts = unsafe { opts.assume_init() };
    opts.steps = 5;
    let mut r = ptr::null_mut();
    assert_eq!(unsafe { rdp_train(data, &opts, &mut r) }, RdpStatus::Ok);
    let mut eps = 0.0;
    assert_eq!(
        unsafe { rdp_report_privacy(r, &mut eps, ptr::null_mut(), ptr::null_mut()) },
        RdpStatus::NotPrivate
    );
    unsafe {
        rdp_report_free(r);
        rdp_dataset_free(data);
    }
}

#[test]
fn errors_set_status_and_message() {
    let mut d = ptr::null_mut();
    let status = unsafe { rdp_dataset_new(ptr::null(), ptr::null(), 2, 2, 1, 1, &mut d) };
    assert_eq!(status, RdpStatus::NullPointer);
    assert!(last_error().contains("features"));

    let f = [0.0, 1.0, 2.0, 3.0];
    let l = [1.0, 3.0];
    let status = unsafe { rdp_dataset_new(f.as_ptr(), l.as_ptr(), 2, 2, 1, 1, &mut d) };
    assert_eq!(status, RdpStatus::InvalidArgument);
    assert!(last_error().contains("label"));

    let mut sigma = 0.0;
    let status = unsafe { rdp_calibrate_sigma(0.01, 1e-8, 100_000, 0.5, 1.0, &mut sigma) };
    assert_eq!(status, RdpStatus::Infeasible);

    let mut r = ptr::null_mut();
    assert_eq!(
        unsafe { rdp_train(ptr::null(), ptr::null(), &mut r) },
        RdpStatus::NullPointer
    );

    // success clears the message
    let l = [1.0, 0.0];
    assert_eq!(
        unsafe { rdp_dataset_new(f.as_ptr(), l.as_ptr(), 2, 2, 1, 0, &mut d) },
        RdpStatus::Ok
    );
    assert!(rdp_last_error().is_null());
    assert_eq!(unsafe { rdp_dataset_dim(d) }, 2);
    unsafe { rdp_dataset_free(d) };
    unsafe { rdp_dataset_free(ptr::null_mut()) };
}

#[test]
fn accounting_entry_points() {
    let alphas = [2.0, 3.0, 10.0];
    let mut out = [0.0; 3];
    assert_eq!(
        unsafe { rdp_gaussian_rdp(1.0, 1.0, alphas.as_ptr(), 3, out.as_mut_ptr()) },
        RdpStatus::Ok
    );
    assert_eq!(out, [1.0, 1.5, 5.0]);

    let mut sub = [0.0; 3];
    assert_eq!(
        unsafe { rdp_subsampled_gaussian_rdp(1.0, 1.0, 0.01, alphas.as_ptr(), 3, sub.as_mut_ptr()) },
        RdpStatus::Ok
    );
    assert!(sub.iter().zip(&out).all(|(s, g)| s <= g));
    let frac = [2.5];
    assert_eq!(
        unsafe { rdp_subsampled_gaussian_rdp(1.0, 1.0, 0.01, frac.as_ptr(), 1, sub.as_mut_ptr()) },
        RdpStatus::InvalidArgument
    );

    let a = [101.0];
    let e = [1.0];
    let (mut eps, mut alpha) = (0.0, 0.0);
    assert_eq!(
        unsafe { rdp_to_approx_dp(a.as_ptr(), e.as_ptr(), 1, (-100.0f64).exp(), &mut eps, &mut alpha) },
        RdpStatus::Ok
    );
    assert_eq!((eps, alpha), (2.0, 101.0));

    let mut sigma = 0.0;
    assert_eq!(
        unsafe { rdp_calibrate_sigma(1.0, 1e-5, 10, 1.0, 1.0, &mut sigma) },
        RdpStatus::Ok
    );
    assert!(sigma > 1.0 && sigma < 100.0);

    let v = unsafe { CStr::from_ptr(rdp_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}
