use permuton_core::rng::{exponential_sample, poisson_events, superpose, thin_stream};
use permuton_core::stats::{chi_square_gof, ks_test, pearson, MeanEstimate};
use permuton_core::{StreamFamily, StreamKey};
use statrs::distribution::{Discrete, Poisson};

fn key(name: &str) -> StreamKey {
    StreamKey::new(99, name)
}

fn within(est: &MeanEstimate, target: f64, half_width: f64) -> bool {
    (est.mean - target).abs() <= half_width
}

#[test]
fn exponential_means() {
    for (rate, target, tol) in [(1.0, 1.0, 0.01), (2.0, 0.5, 0.005)] {
        let samples: Vec<f64> = (0..1_000_000u64)
            .map(|r| exponential_sample(rate, &key("exp").with_replicate(r)).unwrap())
            .collect();
        let est = MeanEstimate::from_samples(&samples);
        assert!(within(&est, target, tol), "rate {rate}: {est:?}");
        // CLT band: sd of the mean is target / 1000
        assert!((est.mean - target).abs() <= 4.0 * target / 1000.0);
    }
}

#[test]
fn poisson_counts_have_poisson_mean() {
    let counts: Vec<f64> = (0..100_000u64)
        .map(|r| {
            poisson_events(1.0, 0.0, 10.0, &key("counts").with_replicate(r))
                .unwrap()
                .len() as f64
        })
        .collect();
    let est = MeanEstimate::from_samples(&counts);
    assert!(within(&est, 10.0, 0.1), "{est:?}");
    let var = counts.iter().map(|c| (c - est.mean).powi(2)).sum::<f64>() / (counts.len() - 1) as f64;
    assert!((var - 10.0).abs() < 0.3, "variance {var}");
}

#[test]
fn poisson_counts_fit_the_pmf() {
    let reps = 50_000u64;
    let cells = 9;
    let mut observed = vec![0u64; cells];
    for r in 0..reps {
        let k = poisson_events(0.5, 0.0, 4.0, &key("pmf").with_replicate(r))
            .unwrap()
            .len();
        observed[k.min(cells - 1)] += 1;
    }
    let law = Poisson::new(2.0).unwrap();
    let mut expected: Vec<f64> = (0..cells as u64 - 1).map(|k| law.pmf(k)).collect();
    expected.push(1.0 - expected.iter().sum::<f64>());
    let chi = chi_square_gof(&observed, &expected).unwrap();
    assert!(chi.p_value > 0.01, "{chi:?}");
}

#[test]
fn thinning_halves_the_rate() {
    let counts: Vec<f64> = (0..10_000u64)
        .map(|r| {
            let k = key("thin").with_replicate(r);
            let stream = poisson_events(1.0, 0.0, 100.0, &k).unwrap();
            thin_stream(&stream, 0.5, &k.with_family(StreamFamily::Auxiliary))
                .unwrap()
                .len() as f64
        })
        .collect();
    let est = MeanEstimate::from_samples(&counts);
    assert!(within(&est, 50.0, 1.5), "{est:?}");
    assert!((est.mean - 50.0).abs() <= 4.0 * est.std_error);
}

#[test]
fn superposition_is_a_poisson_clock_of_summed_rate() {
    let mut gaps = Vec::new();
    let mut counts = Vec::new();
    for r in 0..5_000u64 {
        let a = poisson_events(1.0, 0.0, 5.0, &key("sup-a").with_replicate(r)).unwrap();
        let b = poisson_events(2.0, 0.0, 5.0, &key("sup-b").with_replicate(r)).unwrap();
        let merged = superpose(&a, &b).unwrap();
        assert!(merged.is_valid());
        counts.push(merged.len() as f64);
        let times = merged.events();
        if let Some(&first) = times.first() {
            gaps.push(1.0 - (-3.0 * first).exp());
        }
    }
    let est = MeanEstimate::from_samples(&counts);
    assert!((est.mean - 15.0).abs() <= 4.0 * est.std_error, "{est:?}");
    // first arrival of a rate-3 clock pushed through its own cdf is uniform
    // (up to the e^-15 chance of no arrival before 5)
    let (_, p) = ks_test(&gaps, |u| u).unwrap();
    assert!(p > 0.001, "ks p {p}");
}

#[test]
fn streams_of_different_edges_are_uncorrelated() {
    let n = 20_000u64;
    let count = |edge: i64, r: u64| {
        poisson_events(1.0, 0.0, 3.0, &key("edges").with_replicate(r).with_edge(edge))
            .unwrap()
            .len() as f64
    };
    let a: Vec<f64> = (0..n).map(|r| count(0, r)).collect();
    let b: Vec<f64> = (0..n).map(|r| count(1, r)).collect();
    let c: Vec<f64> = (0..n).map(|r| count(0, r + n)).collect();
    let band = 4.0 / (n as f64).sqrt();
    assert!(pearson(&a, &b).abs() < band);
    assert!(pearson(&a, &c).abs() < band);
}

#[test]
fn keys_reproduce_streams() {
    let k = key("replay").with_replicate(5).with_edge(-3);
    let first = poisson_events(4.0, 0.0, 10.0, &k).unwrap();
    assert_eq!(first, poisson_events(4.0, 0.0, 10.0, &k).unwrap());
    assert_ne!(first, poisson_events(4.0, 0.0, 10.0, &k.with_edge(-2)).unwrap());
    assert_ne!(
        first,
        poisson_events(
            4.0,
            0.0,
            10.0,
            &StreamKey::new(100, "replay").with_replicate(5).with_edge(-3)
        )
        .unwrap()
    );
}
