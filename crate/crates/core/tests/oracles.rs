mod common;

use common::{
    bisection_eigenvalues, ks_statistic, pair_distance_cdf, reference_matrix, rk4_survival,
};
use erm_core::cloud::{distance, sample_cloud, CloudConfig};
use erm_core::matrix::build_matrix;
use erm_core::spectrum::{decay_curve, eigenvalues, uniform_state};
use proptest::prelude::*;

#[test]
fn pair_distances_follow_chi3() {
    let cloud = sample_cloud(&CloudConfig::new(200_000, 1.0, 17, 0).unwrap()).unwrap();
    let p = cloud.positions();
    let mut d: Vec<f64> = (0..100_000).map(|k| distance(&p[2 * k], &p[2 * k + 1])).collect();
    let ks = ks_statistic(&mut d, pair_distance_cdf);
    assert!(ks < 0.01, "KS = {ks}");
}

#[test]
fn mean_log_distance() {
    // |x - y| = sqrt(2) chi_3, so E ln|x - y| = ln 2 + psi(3/2) / 2.
    let expected = 2f64.ln() + statrs::function::gamma::digamma(1.5) / 2.0;
    assert!((expected - 0.711_392).abs() < 1e-6);
    let a = sample_cloud(&CloudConfig::new(1_000_000, 1.0, 5, 0).unwrap()).unwrap();
    let b = sample_cloud(&CloudConfig::new(1_000_000, 1.0, 5, 1).unwrap()).unwrap();
    let mean = a
        .positions()
        .iter()
        .zip(b.positions())
        .map(|(x, y)| distance(x, y).ln())
        .sum::<f64>()
        / 1e6;
    assert!((mean - expected).abs() < 0.005, "{mean} vs {expected}");
}

#[test]
fn small_spectra_match_bisection() {
    for (k, &b) in [0.3, 1.0, 4.7, 12.0, 30.0].iter().enumerate() {
        let config = CloudConfig::new(5, b, 99, k as u64).unwrap();
        let cloud = sample_cloud(&config).unwrap();
        let got = eigenvalues(&build_matrix(&cloud).unwrap()).unwrap();
        let want = bisection_eigenvalues(&reference_matrix(cloud.positions(), b), 1e-13);
        for (g, w) in got.eigenvalues().iter().zip(&want) {
            assert!((g - w).abs() < 1e-10, "b={b}: {g} vs {w}");
        }
    }
}

#[test]
fn decay_matches_rk4() {
    let times: Vec<f64> = (0..=20).map(|k| 0.25 * k as f64).collect();
    for &b in &[0.5, 3.0, 10.0] {
        let cloud = sample_cloud(&CloudConfig::new(5, b, 7, 0).unwrap()).unwrap();
        let m = build_matrix(&cloud).unwrap();
        let start = uniform_state(5);
        let curve = decay_curve(&m, &start, &times).unwrap();
        let ode = rk4_survival(&reference_matrix(cloud.positions(), b), &start, &times, 1e-3);
        for ((t, p), q) in times.iter().zip(&curve.survival).zip(&ode) {
            assert!((p - q).abs() < 1e-6, "b={b} t={t}: {p} vs {q}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn survival_is_monotone(seed in 0u64..1000, b in 0.1f64..30.0, n in 1usize..40) {
        let cloud = sample_cloud(&CloudConfig::new(n, b, seed, 0).unwrap()).unwrap();
        let m = build_matrix(&cloud).unwrap();
        let times: Vec<f64> = (0..50).map(|k| 0.2 * k as f64).collect();
        let curve = decay_curve(&m, &uniform_state(n), &times).unwrap();
        prop_assert!((curve.survival[0] - 1.0).abs() < 1e-12);
        for w in curve.survival.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-12);
        }
    }

    #[test]
    fn matrix_is_symmetric_with_unit_diagonal(seed in 0u64..1000, b in 0.1f64..30.0, n in 1usize..60) {
        let cloud = sample_cloud(&CloudConfig::new(n, b, seed, 1).unwrap()).unwrap();
        let m = build_matrix(&cloud).unwrap();
        for i in 0..n {
            prop_assert_eq!(m.get(i, i), 1.0);
            for j in 0..n {
                prop_assert_eq!(m.get(i, j), m.get(j, i));
                prop_assert!(m.get(i, j).abs() <= 1.0);
            }
        }
    }

    #[test]
    fn spectrum_respects_bounds(seed in 0u64..1000, b in 0.1f64..30.0, n in 2usize..120) {
        let cloud = sample_cloud(&CloudConfig::new(n, b, seed, 2).unwrap()).unwrap();
        let s = eigenvalues(&build_matrix(&cloud).unwrap()).unwrap();
        let eps = 1e-10 * n as f64;
        let trace: f64 = s.eigenvalues().iter().sum();
        prop_assert!((trace - n as f64).abs() <= 1e-10 * n as f64);
        prop_assert!(s.min_eigenvalue() >= -eps);
        prop_assert!(s.max_eigenvalue() <= n as f64 + eps);
    }
}
