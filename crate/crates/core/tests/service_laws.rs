use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sqdfluid_core::special::adaptive_simpson;
use sqdfluid_core::stats::{ks_distance, Accumulator};
use sqdfluid_core::{Family, ServiceDistribution};

const R0: f64 = 20.0;

fn families() -> Vec<ServiceDistribution> {
    [
        Family::Exponential,
        Family::Lomax { shape: 2.25 },
        Family::Lomax { shape: 1.25 },
        Family::LogNormal { sigma: 0.33 },
        Family::LogNormal { sigma: 1.5 },
        Family::Gamma { shape: 2.0 },
        Family::Gamma { shape: 0.5 },
        Family::HyperExponential { rate1: 0.5, rate2: 2.0 },
        Family::Weibull { shape: 0.7 },
        Family::Weibull { shape: 2.0 },
    ]
    .into_iter()
    .map(|f| ServiceDistribution::new(f).unwrap())
    .collect()
}

#[test]
fn head_area_plus_stationary_tail_is_one() {
    for d in families() {
        let head = adaptive_simpson(&|x| d.ccdf(x).unwrap(), 0.0, R0, 1e-10);
        let tail = d.stationary_age_ccdf(R0).unwrap();
        assert!((head + tail - 1.0).abs() <= 1e-6, "{:?}: {}", d.family(), head + tail);
    }
}

#[test]
fn survival_ratio_matches_integrated_hazard() {
    for d in families() {
        for &(a, b) in &[(0.0, 0.5), (0.3, 2.0), (1.0, 7.5), (5.0, R0)] {
            // the lognormal and weibull hazards are steep near zero; start a hair above it
            let a: f64 = if a == 0.0 { 1e-9 } else { a };
            let h = adaptive_simpson(&|x| d.hazard(x).unwrap(), a, b, 1e-10);
            let lhs = d.log_ccdf(b).unwrap() - d.log_ccdf(a).unwrap();
            assert!((lhs + h).abs() <= 1e-6, "{:?} on [{a}, {b}]: {lhs} vs {}", d.family(), -h);
        }
    }
}

#[test]
fn empirical_cdf_is_close() {
    for d in families() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let xs: Vec<f64> = (0..100_000).map(|_| d.sample(&mut rng)).collect();
        let ks = ks_distance(&xs, |x| 1.0 - d.ccdf(x).unwrap());
        assert!(ks <= 0.01, "{:?}: KS {ks}", d.family());
    }
}

#[test]
fn stationary_ages_follow_the_integrated_tail() {
    for d in families() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let ages: Vec<f64> = (0..20_000).map(|_| d.sample_stationary_age(&mut rng).0).collect();
        let ks = ks_distance(&ages, |r| 1.0 - d.stationary_age_ccdf(r).unwrap());
        assert!(ks <= 0.02, "{:?}: KS {ks}", d.family());
    }
}

#[test]
fn sample_means_are_one() {
    for d in families() {
        // infinite-variance laws have no standard error to test against
        if let Family::Lomax { shape } = d.family() {
            if shape <= 2.0 {
                continue;
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut acc = Accumulator::new();
        for _ in 0..1_000_000 {
            acc.push(d.sample(&mut rng));
        }
        let e = acc.estimate();
        assert!((e.mean - 1.0).abs() <= 4.0 * e.std_error, "{:?}: {} ± {}", d.family(), e.mean, e.std_error);
    }
}

fn any_family() -> impl Strategy<Value = ServiceDistribution> {
    prop_oneof![
        Just(Family::Exponential),
        (1.05f64..6.0).prop_map(|shape| Family::Lomax { shape }),
        (0.1f64..2.0).prop_map(|sigma| Family::LogNormal { sigma }),
        (0.3f64..8.0).prop_map(|shape| Family::Gamma { shape }),
        (0.3f64..0.95).prop_map(|rate1| Family::HyperExponential { rate1, rate2: 3.0 }),
        (0.4f64..4.0).prop_map(|shape| Family::Weibull { shape }),
    ]
    .prop_map(|f| ServiceDistribution::new(f).unwrap())
}

proptest! {
    #[test]
    fn ccdf_is_monotone(d in any_family(), x1 in 0.0f64..30.0, gap in 0.0f64..30.0) {
        let (a, b) = (d.ccdf(x1).unwrap(), d.ccdf(x1 + gap).unwrap());
        prop_assert!(b <= a);
        prop_assert!((0.0..=1.0).contains(&a));
        prop_assert_eq!(d.ccdf(0.0).unwrap(), 1.0);
    }

    #[test]
    fn hazard_is_finite_on_the_window(d in any_family(), x in 0.0f64..R0) {
        let h = d.hazard(x).unwrap();
        prop_assert!(h.is_finite() && h >= 0.0);
    }

    #[test]
    fn stationary_tail_is_monotone(d in any_family(), r in 0.0f64..20.0, gap in 0.0f64..5.0) {
        let (a, b) = (d.stationary_age_ccdf(r).unwrap(), d.stationary_age_ccdf(r + gap).unwrap());
        prop_assert!(b <= a + 1e-12);
        prop_assert!((d.stationary_age_ccdf(0.0).unwrap() - 1.0).abs() < 1e-9);
    }
}
