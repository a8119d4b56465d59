use std::collections::BTreeSet;

use permuton_core::interchange::{empirical_marginal, simulate_interchange, tracked_lattice_interchange};
use permuton_core::stats::{chi_square_gof, chi_square_two_sample};
use permuton_core::{fold_lattice, fold_real, PathGraphConfig, PointMeasure, StreamKey};
use proptest::prelude::*;

fn key(name: &str) -> StreamKey {
    StreamKey::new(13, name)
}

fn bessel_pmf(x: f64, d: i64) -> f64 {
    let d = d.unsigned_abs() as i32;
    let mut term = (x / 2.0).powi(d) / (1..=d).map(f64::from).product::<f64>();
    let mut sum = 0.0;
    for m in 0..200 {
        sum += term;
        term *= (x / 2.0).powi(2) / ((m + 1) as f64 * (m + 1 + d) as f64);
    }
    (-x).exp() * sum
}

#[test]
fn two_site_flip_probability() {
    let t = std::f64::consts::LN_2;
    // a single edge flipping at rate 1/2: P(no net flip) = (1 + e^{-t}) / 2
    let exact = (1.0 + (-t).exp()) / 2.0;
    assert!((exact - 0.75).abs() < 1e-15);
    let config = PathGraphConfig::new(2, 0.5, t).unwrap();
    let reps = 100_000u64;
    let stayed = (0..reps)
        .filter(|&r| {
            let traj = simulate_interchange(&config, &key("two-site").with_replicate(r)).unwrap();
            traj.positions_at(t).unwrap()[0] == 1
        })
        .count();
    let p = stayed as f64 / reps as f64;
    let sd = (exact * (1.0 - exact) / reps as f64).sqrt();
    assert!((p - exact).abs() <= 3.0 * sd, "{p}");
}

#[test]
fn bijective_with_uniform_marginals() {
    for n in [1usize, 2, 3, 7, 20] {
        let config = PathGraphConfig::for_macro_horizon(n, 0.3).unwrap();
        let traj = simulate_interchange(&config, &key("bijective").with_replicate(n as u64)).unwrap();
        traj.check_bijective().unwrap();
        let paths = traj.rescaled_trajectories(0.3).unwrap();
        for t in [0.0, 0.1, 0.3] {
            assert_eq!(empirical_marginal(&paths, t).unwrap(), PointMeasure::uniform_grid(n));
        }
        let at_end = traj.positions_at(traj.horizon()).unwrap();
        let mut sorted = at_end.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (1..=n).collect::<Vec<_>>());
    }
}

#[test]
fn insufficient_horizon_is_rejected() {
    let config = PathGraphConfig::for_macro_horizon(10, 0.5).unwrap();
    let traj = simulate_interchange(&config, &key("short")).unwrap();
    assert!(traj.rescaled_trajectories(1.0).is_err());
}

#[test]
fn tracked_particle_is_a_unit_rate_walk() {
    let reps = 100_000u64;
    let cells: Vec<i64> = (-4..=4).collect();
    let mut observed = vec![0u64; cells.len() + 1];
    let starts = BTreeSet::from([0i64]);
    for r in 0..reps {
        let paths = tracked_lattice_interchange(&starts, 1.0, &key("tracked").with_replicate(r)).unwrap();
        let d = paths[&0].final_value() as i64;
        observed[cells.iter().position(|&c| c == d).unwrap_or(cells.len())] += 1;
    }
    let mut expected: Vec<f64> = cells.iter().map(|&d| bessel_pmf(1.0, d)).collect();
    expected.push(1.0 - expected.iter().sum::<f64>());
    let chi = chi_square_gof(&observed, &expected).unwrap();
    assert!(chi.p_value > 0.001, "{chi:?}");
}

#[test]
fn folded_lattice_particle_matches_path_graph() {
    let n = 3;
    let reps = 50_000u64;
    let config = PathGraphConfig::new(n, 0.5, 1.0).unwrap();
    for i in 1..=n {
        let mut direct = vec![0u64; n];
        let mut folded = vec![0u64; n];
        let starts = BTreeSet::from([i as i64]);
        for r in 0..reps {
            let traj = simulate_interchange(&config, &key("direct").with_replicate(r)).unwrap();
            direct[traj.positions_at(1.0).unwrap()[i - 1] - 1] += 1;
            let paths = tracked_lattice_interchange(&starts, 1.0, &key("folded").with_replicate(r)).unwrap();
            folded[fold_lattice(paths[&(i as i64)].final_value() as i64, n) - 1] += 1;
        }
        let chi = chi_square_two_sample(&direct, &folded).unwrap();
        assert!(chi.p_value > 0.001, "particle {i}: {direct:?} vs {folded:?}");
    }
}

#[test]
fn adjacent_tracked_particles_share_firings() {
    let starts = BTreeSet::from([0i64, 1]);
    for r in 0..200u64 {
        let paths = tracked_lattice_interchange(&starts, 2.0, &key("adjacent").with_replicate(r)).unwrap();
        let (a, b) = (&paths[&0], &paths[&1]);
        for &(t, x) in a.jumps() {
            let before = a.left_limit(t).unwrap();
            let other_before = b.left_limit(t).unwrap();
            if (other_before - before).abs() == 1.0 && other_before == x {
                assert_eq!(b.value_at(t).unwrap(), before, "swap at {t} moved only one particle");
            }
        }
    }
}

proptest! {
    #[test]
    fn fold_lattice_is_one_lipschitz(a in -100i64..=100, b in -100i64..=100, k in 0usize..5) {
        let n = [1usize, 2, 3, 5, 8][k];
        let (fa, fb) = (fold_lattice(a, n) as i64, fold_lattice(b, n) as i64);
        prop_assert!((fa - fb).abs() <= (a - b).abs());
        let (f0, f1) = (fold_lattice(a, n), fold_lattice(a + 1, n));
        prop_assert!(f0.abs_diff(f1) <= 1);
        prop_assert!(f0 != f1 || f0 == 1 || f0 == n);
    }

    #[test]
    fn lattice_fold_tracks_real_fold(k in 0usize..3, x in -40i64..=40) {
        let n = [2usize, 5, 10][k];
        let x = x.clamp(-4 * n as i64, 4 * n as i64);
        let gap = (fold_lattice(x, n) as f64 / n as f64 - fold_real(x as f64 / n as f64)).abs();
        prop_assert!(gap <= 1.0 / n as f64 + 1e-12);
    }

    #[test]
    fn fold_real_is_one_lipschitz(a in -5.0f64..5.0, b in -5.0f64..5.0) {
        prop_assert!((fold_real(a) - fold_real(b)).abs() <= (a - b).abs() + 1e-12);
        prop_assert!((0.0..=1.0).contains(&fold_real(a)));
    }
}
