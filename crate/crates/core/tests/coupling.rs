use std::collections::BTreeSet;

use permuton_core::coupling::{excursion_stats, returns_experiment, simulate_coupled_triple, verify_triple};
use permuton_core::interchange::tracked_lattice_interchange;
use permuton_core::stats::{chi_square_gof, chi_square_two_sample, pearson};
use permuton_core::StreamKey;
use proptest::prelude::*;

fn key(name: &str) -> StreamKey {
    StreamKey::new(17, name)
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
fn decoupled_walk_is_a_unit_rate_walk() {
    let reps = 100_000u64;
    let cells: Vec<i64> = (-4..=4).collect();
    let mut observed = vec![0u64; cells.len() + 1];
    for r in 0..reps {
        let gap = 1 + (r % 2) as i64;
        let triple = simulate_coupled_triple(0, gap, 1.0, &key("s3").with_replicate(r)).unwrap();
        let d = triple.s3.final_value() as i64 - gap;
        observed[cells.iter().position(|&c| c == d).unwrap_or(cells.len())] += 1;
    }
    let mut expected: Vec<f64> = cells.iter().map(|&d| bessel_pmf(1.0, d)).collect();
    expected.push(1.0 - expected.iter().sum::<f64>());
    let chi = chi_square_gof(&observed, &expected).unwrap();
    assert!(chi.p_value > 0.001, "{chi:?}");
}

#[test]
fn coupled_pair_has_the_interchange_joint_law() {
    let reps = 50_000u64;
    let cell = |a: f64, b: f64| -> usize {
        let a = (a as i64).clamp(-2, 3) + 2;
        let b = (b as i64).clamp(-2, 3) + 2;
        (a * 6 + b) as usize
    };
    let mut coupled = vec![0u64; 36];
    let mut tracked = vec![0u64; 36];
    let starts = BTreeSet::from([0i64, 1]);
    for r in 0..reps {
        let triple = simulate_coupled_triple(0, 1, 1.5, &key("pair").with_replicate(r)).unwrap();
        coupled[cell(triple.s1.final_value(), triple.s2.final_value())] += 1;
        let paths = tracked_lattice_interchange(&starts, 1.5, &key("reference").with_replicate(r)).unwrap();
        tracked[cell(paths[&0].final_value(), paths[&1].final_value())] += 1;
    }
    let (a, b): (Vec<u64>, Vec<u64>) = coupled
        .iter()
        .zip(&tracked)
        .filter(|(a, b)| **a + **b > 0)
        .map(|(a, b)| (*a, *b))
        .unzip();
    let chi = chi_square_two_sample(&a, &b).unwrap();
    assert!(chi.p_value > 0.001, "{chi:?}");
}

#[test]
fn first_and_decoupled_walks_are_uncorrelated() {
    let reps = 40_000u64;
    let (mut d1, mut d3) = (Vec::new(), Vec::new());
    for r in 0..reps {
        let triple = simulate_coupled_triple(0, 1, 4.0, &key("independence").with_replicate(r)).unwrap();
        d1.push(triple.s1.final_value());
        d3.push(triple.s3.final_value() - 1.0);
    }
    let band = 4.0 / (reps as f64).sqrt();
    assert!(pearson(&d1, &d3).abs() < band, "{}", pearson(&d1, &d3));
    let sq = |v: &[f64]| v.iter().map(|x| x * x).collect::<Vec<_>>();
    assert!(pearson(&sq(&d1), &sq(&d3)).abs() < band);
}

#[test]
fn excursion_count_at_gap_two() {
    let row = returns_experiment(2, 4.0, 20_000, &key("returns"), 0).unwrap();
    assert!(row.mean_j - 3.0 * row.se_j <= 20.0, "{row:?}");
    assert!(row.mean_j >= 1.0);
}

#[test]
fn distant_pair_over_a_tiny_horizon() {
    let triple = simulate_coupled_triple(0, 5, 1e-9, &key("tiny")).unwrap();
    let stats = excursion_stats(&triple, 1e-9).unwrap();
    assert_eq!(stats.j, 1);
    assert_eq!(stats.occupied_time, 0.0);
    for p in [&triple.s1, &triple.s2, &triple.s3] {
        assert!(p.jumps().is_empty());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn construction_invariants(i in -20i64..20, offset in 1i64..6, seed in 0u64..1_000_000, horizon in 0.5f64..30.0) {
        let j = if seed % 2 == 0 { i + offset } else { i - offset };
        let triple = simulate_coupled_triple(i, j, horizon, &StreamKey::new(seed, "prop")).unwrap();
        prop_assert!(verify_triple(&triple).is_ok());
        let stats = excursion_stats(&triple, horizon).unwrap();
        prop_assert!(stats.displacements.iter().all(|&d| d <= 2));
        prop_assert!(stats.occupied_time <= horizon + 1e-12);
    }
}
