use nalgebra::{Cholesky, DMatrix};

use rdp_admm::data::{generate_synthetic, SyntheticSpec};

#[test]
fn sample_covariance_matches_ar_structure() {
    let spec = SyntheticSpec::new(100_000, 21);
    let data = generate_synthetic(&spec).unwrap();
    let (n, p) = (data.len(), data.dim());
    let x = DMatrix::from_row_slice(n, p, data.features());
    let means: Vec<f64> = (0..p).map(|j| x.column(j).mean()).collect();
    let mut worst = 0.0f64;
    for i in 0..p {
        for j in i..p {
            let c = x
                .column(i)
                .iter()
                .zip(x.column(j).iter())
                .map(|(a, b)| (a - means[i]) * (b - means[j]))
                .sum::<f64>()
                / (n - 1) as f64;
            let target = 0.5f64.powi((j - i) as i32);
            worst = worst.max((c - target).abs());
        }
    }
    assert!(worst <= 0.02, "max covariance error {worst}");
}

#[test]
fn labels_are_balanced_at_forty_thousand_rows() {
    let data = generate_synthetic(&SyntheticSpec::new(40_000, 8)).unwrap();
    let positive = data.labels().iter().filter(|&&l| l == 1.0).count() as f64 / data.len() as f64;
    assert!((positive - 0.5).abs() <= 0.02, "positive share {positive}");
    assert!(data.labels().iter().all(|&l| l == 1.0 || l == -1.0));
}

#[test]
fn truth_has_twenty_nonzeros_and_covariance_factors() {
    let spec = SyntheticSpec::new(10, 0);
    let truth = spec.true_model();
    assert_eq!(truth.iter().filter(|v| **v != 0.0).count(), 20);
    assert_eq!(&truth[..3], &[0.5, 1.0, 1.5]);
    assert_eq!(truth[10], -0.5);
    let cov = spec.covariance();
    assert_eq!(cov, cov.transpose());
    assert!(Cholesky::new(cov).is_some());
}

#[test]
fn seeds_reproduce_and_differ() {
    let a = generate_synthetic(&SyntheticSpec::new(500, 1)).unwrap();
    let b = generate_synthetic(&SyntheticSpec::new(500, 1)).unwrap();
    let c = generate_synthetic(&SyntheticSpec::new(500, 2)).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.features(), c.features());
}
