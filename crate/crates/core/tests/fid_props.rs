use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::Rng;

use uisim_core::fid::{fit_stats, frechet_distance_with, trace_sqrt_product, FeatureStats, SqrtMethod};
use uisim_testkit::matrices::random_spd;
use uisim_testkit::rng;

const METHODS: [SqrtMethod; 2] = [SqrtMethod::SymmetricEigen, SqrtMethod::NewtonSchulz];

fn samples(r: &mut impl Rng, n: usize, d: usize, scale: f64) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..d).map(|_| scale * r.random_range(-1.0..1.0)).collect()).collect()
}

fn shifted(set: &[Vec<f64>], by: &[f64]) -> Vec<Vec<f64>> {
    set.iter().map(|f| f.iter().zip(by).map(|(a, b)| a + b).collect()).collect()
}

/// `(n − 1)`-normalized covariance with plain loops, as an oracle.
fn naive_stats(set: &[Vec<f64>]) -> (Vec<f64>, DMatrix<f64>) {
    let (n, d) = (set.len(), set[0].len());
    let mean: Vec<f64> = (0..d).map(|j| set.iter().map(|f| f[j]).sum::<f64>() / n as f64).collect();
    let cov = DMatrix::from_fn(d, d, |i, j| {
        set.iter().map(|f| (f[i] - mean[i]) * (f[j] - mean[j])).sum::<f64>() / (n - 1) as f64
    });
    (mean, cov)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn stats_match_naive_oracle(seed in any::<u64>(), d in 1usize..8) {
        let mut r = rng(seed);
        let set = samples(&mut r, 40, d, 3.0);
        let fit = fit_stats(&set).unwrap();
        let (mean, cov) = naive_stats(&set);
        for (got, want) in fit.mean().iter().zip(&mean) {
            prop_assert!((got - want).abs() < 1e-12);
        }
        prop_assert!((fit.cov() - cov).amax() < 1e-12);
    }

    #[test]
    fn distance_is_symmetric_nonnegative_and_zero_on_self(seed in any::<u64>(), d in 1usize..8) {
        let mut r = rng(seed);
        let a = fit_stats(&samples(&mut r, 40, d, 1.0)).unwrap();
        let b = fit_stats(&samples(&mut r, 30, d, 2.0)).unwrap();
        for method in METHODS {
            let ab = frechet_distance_with(&a, &b, method).unwrap();
            let ba = frechet_distance_with(&b, &a, method).unwrap();
            prop_assert!(ab >= 0.0);
            prop_assert!((ab - ba).abs() <= 1e-9 * (1.0 + ab), "{method:?}: {ab} vs {ba}");
            prop_assert!(frechet_distance_with(&a, &a, method).unwrap() <= 1e-9);
        }
    }

    #[test]
    fn common_translation_leaves_distance_unchanged(seed in any::<u64>(), d in 1usize..8) {
        let mut r = rng(seed);
        let x = samples(&mut r, 40, d, 1.0);
        let y = samples(&mut r, 40, d, 1.5);
        let shift: Vec<f64> = (0..d).map(|_| r.random_range(-50.0..50.0)).collect();
        let base = frechet_distance_with(&fit_stats(&x).unwrap(), &fit_stats(&y).unwrap(), SqrtMethod::SymmetricEigen).unwrap();
        let moved = frechet_distance_with(
            &fit_stats(&shifted(&x, &shift)).unwrap(),
            &fit_stats(&shifted(&y, &shift)).unwrap(),
            SqrtMethod::SymmetricEigen,
        ).unwrap();
        prop_assert!((base - moved).abs() <= 1e-6 * (1.0 + base), "{base} vs {moved}");
    }

    #[test]
    fn equal_covariance_reduces_to_mean_gap(seed in any::<u64>(), d in 1usize..10) {
        let mut r = rng(seed);
        let cov = random_spd(&mut r, d, 1e3);
        let mu: Vec<f64> = (0..d).map(|_| r.random_range(-5.0..5.0)).collect();
        let nu: Vec<f64> = (0..d).map(|_| r.random_range(-5.0..5.0)).collect();
        let gap: f64 = mu.iter().zip(&nu).map(|(a, b)| (a - b) * (a - b)).sum();
        let a = FeatureStats::new(mu, cov.clone(), 10).unwrap();
        let b = FeatureStats::new(nu, cov, 10).unwrap();
        for method in METHODS {
            let fd = frechet_distance_with(&a, &b, method).unwrap();
            prop_assert!((fd - gap).abs() <= 1e-9 * (1.0 + gap), "{method:?}: {fd} vs {gap}");
        }
    }

    #[test]
    fn one_dimensional_closed_form(m1 in -10.0f64..10.0, m2 in -10.0f64..10.0, s1 in 0.01f64..10.0, s2 in 0.01f64..10.0) {
        let a = FeatureStats::new(vec![m1], DMatrix::from_element(1, 1, s1 * s1), 2).unwrap();
        let b = FeatureStats::new(vec![m2], DMatrix::from_element(1, 1, s2 * s2), 2).unwrap();
        let expected = (m1 - m2).powi(2) + (s1 - s2).powi(2);
        for method in METHODS {
            let fd = frechet_distance_with(&a, &b, method).unwrap();
            prop_assert!((fd - expected).abs() <= 1e-9 * (1.0 + expected), "{method:?}: {fd} vs {expected}");
        }
    }

    #[test]
    fn sqrt_methods_agree(seed in any::<u64>(), d in 1usize..=16) {
        let mut r = rng(seed);
        let a = random_spd(&mut r, d, 1e6);
        let b = random_spd(&mut r, d, 1e6);
        let eig = trace_sqrt_product(&a, &b, SqrtMethod::SymmetricEigen).unwrap();
        let ns = trace_sqrt_product(&a, &b, SqrtMethod::NewtonSchulz).unwrap();
        prop_assert!((eig - ns).abs() <= 1e-5 * eig.abs(), "{eig} vs {ns}");
    }
}
