use permuton_core::stats::{
    ks_distance, mann_kendall_increasing, two_sample_joint_test, wasserstein1, wasserstein1_to_cdf, PermutationPlan,
};
use permuton_core::{PointMeasure, StreamKey};
use proptest::prelude::*;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

fn key(name: &str) -> StreamKey {
    StreamKey::new(31, name)
}

#[test]
fn grid_atoms_against_uniform() {
    for n in [1usize, 4, 10, 33] {
        let mu = PointMeasure::uniform_grid(n);
        assert!((ks_distance(&mu, |x| x).unwrap() - 1.0 / n as f64).abs() < 1e-12);
        assert!((wasserstein1_to_cdf(&mu, |x| x, 4097) - 0.5 / n as f64).abs() < 1e-9);
    }
    let half = PointMeasure::new(vec![(0.5, 1.0)]).unwrap();
    assert!((wasserstein1_to_cdf(&half, |x| x, 4097) - 0.25).abs() < 1e-9);
}

#[test]
fn mann_kendall_three_points() {
    // 3! orderings, exactly one is fully increasing
    let mk = mann_kendall_increasing(&[1.0, 2.0, 3.0]);
    assert!((mk.p_value - 1.0 / 6.0).abs() < 1e-12);
    assert_eq!(mann_kendall_increasing(&[3.0, 2.0, 1.0]).p_value, 1.0);
}

fn bivariate(rng: &mut impl Rng, rho: f64) -> Vec<f64> {
    let a: f64 = StandardNormal.sample(rng);
    let b: f64 = StandardNormal.sample(rng);
    vec![a, rho * a + (1.0 - rho * rho).sqrt() * b]
}

#[test]
fn energy_test_null_calibration() {
    let plan = PermutationPlan {
        max_permutations: 99,
        stop_after_exceedances: 10,
    };
    let mut rng = key("null-data").rng();
    let mut rejections = 0;
    for rep in 0..100u64 {
        let xy: Vec<Vec<f64>> = (0..60).map(|_| bivariate(&mut rng, 0.3)).collect();
        let xz: Vec<Vec<f64>> = (0..60).map(|_| bivariate(&mut rng, 0.3)).collect();
        let result = two_sample_joint_test(&xy, &xz, plan, &key("null").with_replicate(rep)).unwrap();
        rejections += usize::from(result.p_value <= 0.05);
    }
    // Binomial(100, 0.05): P(X >= 13) < 0.001
    assert!(rejections <= 12, "{rejections} rejections");
}

#[test]
fn energy_test_detects_dependence() {
    let mut rng = key("power-data").rng();
    let xx: Vec<Vec<f64>> = (0..1_000)
        .map(|_| {
            let a: f64 = StandardNormal.sample(&mut rng);
            vec![a, a]
        })
        .collect();
    let xc: Vec<Vec<f64>> = (0..1_000).map(|_| bivariate(&mut rng, 0.0)).collect();
    let result = two_sample_joint_test(&xx, &xc, PermutationPlan::default(), &key("power")).unwrap();
    assert!(result.p_value < 0.01, "{result:?}");
}

fn arb_measure() -> impl Strategy<Value = PointMeasure> {
    prop::collection::vec((0.0f64..=1.0, 0.01f64..1.0), 1..12).prop_map(|atoms| PointMeasure::new(atoms).unwrap())
}

fn numeric_w1(a: &PointMeasure, b: &PointMeasure) -> f64 {
    let steps = 20_000;
    (0..steps)
        .map(|k| {
            let x = (k as f64 + 0.5) / steps as f64;
            (a.cdf(x) - b.cdf(x)).abs()
        })
        .sum::<f64>()
        / steps as f64
}

proptest! {
    #[test]
    fn wasserstein_is_the_cdf_area(a in arb_measure(), b in arb_measure()) {
        let w = wasserstein1(&a, &b);
        prop_assert!((w - numeric_w1(&a, &b)).abs() < 2e-3);
        prop_assert!((w - wasserstein1(&b, &a)).abs() < 1e-12);
        prop_assert!(wasserstein1(&a, &a).abs() < 1e-12);
    }

    #[test]
    fn ks_bounds_the_cdf_gap(a in arb_measure(), x in 0.0f64..=1.0) {
        let d = ks_distance(&a, |y| y).unwrap();
        prop_assert!((a.cdf(x) - x).abs() <= d + 1e-12);
    }
}
