use proptest::collection::vec;
use proptest::prelude::*;

use rdp_admm::accounting::{
    calibrate_sigma, compose, default_alpha_grid, gaussian_rdp, subsampled_gaussian_rdp, to_approx_dp, DpBudget,
    GaussianMechanism, RenyiCurve,
};
use rdp_admm::data::{kfold_indices, preprocess, Dataset};
use rdp_admm::dpsgd::DpSgdConfig;
use rdp_admm::error::Error;
use rdp_admm::mechanisms::clip_l2;
use rdp_admm::metrics::{accuracy, xi_coverage};
use rdp_admm::ssadmm::SsAdmmConfig;

fn curve_strategy() -> impl Strategy<Value = RenyiCurve> {
    vec(0.0..10.0f64, 63).prop_map(|eps| RenyiCurve::new(default_alpha_grid(), eps).unwrap())
}

fn dataset_strategy() -> impl Strategy<Value = Dataset> {
    (1usize..30, 1usize..6).prop_flat_map(|(n, p)| {
        (vec(-50.0..50.0f64, n * p), vec(any::<bool>(), n)).prop_map(move |(f, l)| {
            Dataset::new(f, l.into_iter().map(|b| if b { 1.0 } else { -1.0 }).collect(), p).unwrap()
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn composition_is_pointwise_and_order_free(a in curve_strategy(), b in curve_strategy()) {
        let ab = compose(&[a.clone(), b.clone()]).unwrap();
        let ba = compose(&[b.clone(), a.clone()]).unwrap();
        prop_assert_eq!(&ab, &ba);
        for (i, (_, e)) in ab.iter().enumerate() {
            prop_assert_eq!(e, a.epsilons()[i] + b.epsilons()[i]);
        }
    }

    #[test]
    fn conversion_never_beats_the_curve(c in curve_strategy(), log_delta in -20.0..-1.0f64) {
        let delta = 10f64.powf(log_delta);
        let conv = to_approx_dp(&c, delta).unwrap();
        let expected = c
            .iter()
            .map(|(a, e)| e + (1.0 / delta).ln() / (a - 1.0))
            .fold(f64::INFINITY, f64::min);
        prop_assert!((conv.budget.epsilon - expected).abs() <= 1e-12 * expected);
        prop_assert!(c.epsilon_at(conv.alpha).is_some());
    }

    #[test]
    fn subsampling_is_monotone_in_ratio(ratio in 0.01..2.0f64, q in 0.001..0.5f64, bump in 1.01..2.0f64) {
        let mech = GaussianMechanism::new(ratio, 1.0).unwrap();
        let grid = default_alpha_grid();
        let lo = subsampled_gaussian_rdp(&mech, q, &grid).unwrap();
        let hi = subsampled_gaussian_rdp(&mech, (q * bump).min(1.0), &grid).unwrap();
        for ((_, a), (_, b)) in lo.iter().zip(hi.iter()) {
            prop_assert!(a <= b * (1.0 + 1e-12));
        }
    }

    #[test]
    fn calibration_never_exceeds_target(eps in 0.5..8.0f64, iterations in 1usize..200, q in 0.01..1.0f64) {
        let grid = default_alpha_grid();
        let target = DpBudget::new(eps, 1e-6).unwrap();
        let sens = 0.1;
        let accounted = |sigma: f64| {
            let curve = subsampled_gaussian_rdp(&GaussianMechanism::new(sens, sigma).unwrap(), q, &grid)
                .unwrap()
                .repeated(iterations);
            to_approx_dp(&curve, 1e-6).unwrap().budget.epsilon
        };
        match calibrate_sigma(&target, iterations, q, sens, &grid) {
            Ok(sigma) => prop_assert!(accounted(sigma) <= eps),
            // Subsampled curves have a noise-independent floor.
            Err(Error::InfeasibleBudget { cap, .. }) => prop_assert!(accounted(cap) > eps),
            Err(e) => prop_assert!(false, "unexpected error {e}"),
        }
    }

    #[test]
    fn gaussian_curve_is_linear_in_order(sens in 1e-3..10.0f64, sigma in 1e-2..10.0f64) {
        let curve = gaussian_rdp(&GaussianMechanism::new(sens, sigma).unwrap(), &default_alpha_grid()).unwrap();
        let slope = curve.epsilons()[0] / curve.alphas()[0];
        for (a, e) in curve.iter() {
            prop_assert!((e - a * slope).abs() <= 1e-12 * e);
        }
    }

    #[test]
    fn accounting_ignores_data_and_matches_dpsgd(n in 10usize..5000, t in 1usize..300, sigma in 0.01..2.0f64) {
        let ss = SsAdmmConfig::defaults_for(n, t, sigma, 0.001);
        let sgd = DpSgdConfig::defaults_for(n, t, sigma, 0.001);
        let a = ss.account(n).unwrap().unwrap();
        let b = sgd.account(n).unwrap().unwrap();
        prop_assert_eq!(a.epsilon, b.epsilon);
        prop_assert_eq!(a.rdp_curve, b.rdp_curve);
    }

    #[test]
    fn preprocessing_bounds_rows_and_is_idempotent(raw in dataset_strategy(), intercept in any::<bool>()) {
        let pre = preprocess(&raw, intercept);
        prop_assert_eq!(pre.dim(), raw.dim() + usize::from(intercept));
        for i in 0..pre.len() {
            let row = pre.row(i);
            prop_assert!(row.iter().map(|v| v * v).sum::<f64>().sqrt() <= 1.0 + 1e-12);
            prop_assert!(row.iter().all(|&v| (0.0..=1.0).contains(&v)));
        }
        prop_assert_eq!(preprocess(&pre, intercept), pre);
    }

    #[test]
    fn clipping_bounds_norm(v in vec(-1e3..1e3f64, 1..20), c in 1e-3..10.0f64) {
        let clipped = clip_l2(&v, c);
        let norm = clipped.iter().map(|x| x * x).sum::<f64>().sqrt();
        prop_assert!(norm <= c * (1.0 + 1e-12));
        let orig = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if orig <= c {
            prop_assert_eq!(clipped, v);
        }
    }

    #[test]
    fn folds_partition_the_index_set(n in 2usize..200, k in 2usize..12, seed in any::<u64>()) {
        prop_assume!(k <= n);
        let folds = kfold_indices(n, k, seed).unwrap();
        prop_assert_eq!(folds.len(), k);
        let mut all: Vec<usize> = folds.iter().flatten().copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
        let sizes: Vec<usize> = folds.iter().map(Vec::len).collect();
        prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
    }

    #[test]
    fn flipped_labels_flip_accuracy(data in dataset_strategy(), model in vec(0.1..1.0f64, 6)) {
        let model = &model[..data.dim()];
        prop_assume!(data.examples().all(|d| d.features.iter().zip(model).map(|(a, b)| a * b).sum::<f64>() != 0.0));
        let flipped = Dataset::new(
            data.features().to_vec(),
            data.labels().iter().map(|l| -l).collect(),
            data.dim(),
        )
        .unwrap();
        let a = accuracy(model, &data).unwrap();
        let b = accuracy(model, &flipped).unwrap();
        prop_assert!((a + b - 1.0).abs() < 1e-12);
    }

    #[test]
    fn coverage_grows_with_k(model in vec(-5.0..5.0f64, 40), relevant in proptest::sample::subsequence((0..40).collect::<Vec<usize>>(), 1..20)) {
        let mut last = 0.0;
        for k in [1, 5, 10, 20, 30, 40] {
            let xi = xi_coverage(&model, &relevant, k).unwrap();
            prop_assert!(xi >= last);
            last = xi;
        }
        prop_assert_eq!(last, 1.0);
    }
}
