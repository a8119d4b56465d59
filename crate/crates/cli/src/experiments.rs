//! One function per subcommand. Each returns the files to write and the
//! verdicts that decide the exit status.

use permuton_core::coupling::{
    concentration_experiment, independence_experiment, returns_experiment, second_moment_experiment,
};
use permuton_core::interchange::simulate_interchange;
use permuton_core::rbm::{
    density_table_csv, reflected_values, simpson, transition_cdf, transition_density, HeatKernelParams, InitialLaw,
};
use permuton_core::ssep::{hydrodynamic_check, HydroEstimator, Profile};
use permuton_core::stats::{
    chi_square_gof, ks_test, mann_kendall_increasing, marginal_pair_experiment, tightness_experiment, PermutationPlan,
};
use permuton_core::verdict::{csv_table, render_csv};
use permuton_core::walks::{
    fourth_moment_experiment, return_scaling_experiment, scaling_exponent, visits_experiment, VisitsRow,
};
use permuton_core::{PathGraphConfig, StreamKey, Verdict};

use crate::config::{EventCounts, Experiment, ExperimentManifest, RunConfig};
use crate::CliError;

#[derive(Debug, Default)]
pub struct RunOutput {
    pub files: Vec<(String, String)>,
    pub verdicts: Vec<Verdict>,
    pub events: Option<EventCounts>,
}

impl RunOutput {
    fn file(&mut self, name: &str, contents: String) {
        self.files.push((name.to_string(), contents));
    }
}

pub fn execute(manifest: &ExperimentManifest, workers: usize) -> Result<RunOutput, CliError> {
    let cfg = &manifest.config;
    let key = StreamKey::new(manifest.seed, manifest.subcommand.slug());
    let claim = manifest.subcommand.claim();
    let mut out = RunOutput::default();
    match manifest.subcommand {
        Experiment::Simulate => simulate(cfg, &key, &mut out)?,
        Experiment::Tightness => {
            let deltas = cfg.deltas.as_deref().unwrap_or(&[]);
            let mut rows = Vec::new();
            for &n in cfg.ns() {
                for &t in cfg.ts() {
                    rows.extend(tightness_experiment(n, t, deltas, reps(cfg), &key, workers)?);
                }
            }
            for r in &rows {
                let label = format!("tightness/n={}/T={}/delta={}", r.n, r.horizon, r.delta);
                out.verdicts
                    .push(Verdict::upper(label, claim, r.frequency, r.std_error, r.bound));
            }
            out.file("tightness.csv", render_csv(&rows));
        }
        Experiment::Concentration => concentration(cfg, &key, workers, claim, &mut out)?,
        Experiment::Visits => {
            let rate = cfg.edge_rate.unwrap_or(2.0);
            let mut rows = Vec::new();
            for &t in cfg.ts() {
                rows.push(VisitsRow::new(
                    rate,
                    t,
                    visits_experiment(rate, t, reps(cfg), &key, workers)?,
                ));
            }
            for r in &rows {
                let label = format!("visits/T={}", r.horizon);
                out.verdicts
                    .push(Verdict::upper(label, claim, r.mean_visits, r.std_error, r.bound));
            }
            let ratios: Vec<f64> = rows
                .iter()
                .filter(|r| r.horizon > 0.0)
                .map(|r| r.mean_visits / r.horizon.sqrt())
                .collect();
            if ratios.len() > 1 {
                let centre = ratios.iter().sum::<f64>() / ratios.len() as f64;
                let spread = ratios.iter().map(|r| (r / centre - 1.0).abs()).fold(0.0, f64::max);
                out.verdicts.push(Verdict::decided(
                    "visits/sqrt-scaling",
                    claim,
                    spread,
                    0.0,
                    0.2,
                    spread <= 0.2,
                ));
            }
            out.file("visits.csv", render_csv(&rows));
        }
        Experiment::ReturnsScaling => {
            let t = cfg.ts()[0];
            let mut rows = Vec::new();
            for &eps in cfg.epsilons.as_deref().unwrap_or(&[]) {
                rows.push(return_scaling_experiment(eps, t, reps(cfg), &key, workers)?);
            }
            let slope = scaling_exponent(&rows)?;
            out.verdicts.push(Verdict::decided(
                "returns-scaling/slope",
                claim,
                slope,
                0.0,
                1.0,
                (0.8..=1.2).contains(&slope),
            ));
            out.file("returns_scaling.csv", render_csv(&rows));
        }
        Experiment::Hydrodynamic => hydrodynamic(cfg, &key, workers, claim, &mut out)?,
        Experiment::Independence => {
            let report = independence_experiment(
                cfg.ns()[0],
                cfg.ts(),
                reps(cfg),
                cfg.power_reps.unwrap_or(2_000),
                PermutationPlan::default(),
                &key,
                workers,
            )?;
            let (null, power) = (&report.null, &report.power);
            out.verdicts.push(Verdict::decided(
                "independence/null",
                claim,
                null.p_value,
                0.0,
                0.01,
                null.p_value > 0.01,
            ));
            out.verdicts.push(Verdict::decided(
                "independence/power",
                claim,
                power.p_value,
                0.0,
                0.01,
                power.p_value < 0.01,
            ));
            let rows = [
                ("null", null, report.null_samples),
                ("power", power, report.power_samples),
            ]
            .into_iter()
            .map(|(name, r, samples)| {
                vec![
                    name.to_string(),
                    report.n.to_string(),
                    samples.to_string(),
                    r.statistic.to_string(),
                    r.p_value.to_string(),
                    r.permutations.to_string(),
                ]
            });
            out.file(
                "independence.csv",
                csv_table(&["test", "n", "samples", "statistic", "p_value", "permutations"], rows),
            );
        }
        Experiment::Returns => {
            let gap = cfg.gap.unwrap_or(2);
            let mut rows = Vec::new();
            for &t in cfg.ts() {
                rows.push(returns_experiment(gap, t, reps(cfg), &key, workers)?);
            }
            for r in &rows {
                let t = r.horizon;
                out.verdicts.push(Verdict::upper(
                    format!("returns/J/T={t}"),
                    claim,
                    r.mean_j,
                    r.se_j,
                    r.bound,
                ));
                out.verdicts.push(Verdict::upper(
                    format!("returns/occupied/T={t}"),
                    claim,
                    r.mean_occupied,
                    r.se_occupied,
                    r.bound,
                ));
            }
            out.file("returns.csv", render_csv(&rows));
        }
        Experiment::Moments => moments(cfg, &key, workers, claim, &mut out)?,
        Experiment::Marginals => {
            let t = cfg.ts()[0];
            let mut rows = Vec::new();
            for &n in cfg.ns() {
                rows.push(marginal_pair_experiment(n, t, reps(cfg), 4, &key)?);
            }
            let d: Vec<f64> = rows.iter().map(|r| r.distance).collect();
            let last = rows.last().expect("n is nonempty");
            out.verdicts.push(Verdict::decided(
                "marginals/decreasing",
                claim,
                d.windows(2).filter(|w| w[1] >= w[0]).count() as f64,
                0.0,
                0.0,
                d.windows(2).all(|w| w[1] < w[0]),
            ));
            out.verdicts.push(Verdict::upper(
                format!("marginals/n={}", last.n),
                claim,
                last.distance,
                0.0,
                0.05,
            ));
            out.file("marginals.csv", render_csv(&rows));
        }
        Experiment::Kernel => kernel(cfg, &key, claim, &mut out)?,
    }
    Ok(out)
}

fn reps(cfg: &RunConfig) -> usize {
    cfg.reps.unwrap_or(1)
}

fn simulate(cfg: &RunConfig, key: &StreamKey, out: &mut RunOutput) -> Result<(), CliError> {
    let n = cfg.ns()[0];
    let t = cfg.ts()[0];
    let config = PathGraphConfig::new(n, cfg.edge_rate.unwrap_or(0.5), (n * n) as f64 * t)?;
    let traj = simulate_interchange(&config, key)?;
    let bijective = traj.check_bijective();
    out.verdicts.push(Verdict::decided(
        "simulate/bijective",
        Experiment::Simulate.claim(),
        traj.event_count() as f64,
        0.0,
        0.0,
        bijective.is_ok(),
    ));
    let mut rows = Vec::new();
    for &i in cfg.particles.as_deref().unwrap_or(&[]) {
        let path = traj.particle_path(i)?;
        rows.push(vec![i.to_string(), "0".into(), path.initial_value().to_string()]);
        for &(s, x) in path.jumps() {
            rows.push(vec![i.to_string(), s.to_string(), x.to_string()]);
        }
    }
    out.file("trajectory.csv", csv_table(&["particle", "time", "position"], rows));
    let firings = traj.event_count();
    let self_loops = traj.self_loop_count();
    out.events = Some(EventCounts {
        firings,
        self_loops,
        swaps: firings - self_loops,
    });
    Ok(())
}

fn concentration(
    cfg: &RunConfig,
    key: &StreamKey,
    workers: usize,
    claim: &str,
    out: &mut RunOutput,
) -> Result<(), CliError> {
    let mut rows = Vec::new();
    for &t in cfg.ts() {
        let mut series: Vec<(String, Vec<f64>)> = Vec::new();
        for &n in cfg.ns() {
            let pairs = cfg.pairs_for(n);
            let batch = concentration_experiment(n, t, reps(cfg), &pairs, key, workers)?;
            for (k, row) in batch.iter().enumerate() {
                let label = match &cfg.pairs {
                    Some(_) => row.pair.clone(),
                    None => format!("default-{}", k + 1),
                };
                match series.iter_mut().find(|(l, _)| *l == label) {
                    Some((_, v)) => v.push(row.scaled),
                    None => series.push((label, vec![row.scaled])),
                }
            }
            rows.extend(batch);
        }
        for (label, values) in &series {
            let mk = mann_kendall_increasing(values);
            out.verdicts.push(Verdict::decided(
                format!("concentration/T={t}/pair={label}/trend"),
                claim,
                mk.p_value,
                0.0,
                0.05,
                mk.p_value > 0.05,
            ));
        }
    }
    out.file("concentration.csv", render_csv(&rows));
    Ok(())
}

fn hydrodynamic(
    cfg: &RunConfig,
    key: &StreamKey,
    workers: usize,
    claim: &str,
    out: &mut RunOutput,
) -> Result<(), CliError> {
    let profile = cfg.profile.clone().unwrap_or_else(Profile::left_half);
    let estimator = cfg.estimator.unwrap_or(HydroEstimator::Tagged);
    let mut rows = Vec::new();
    for &t in cfg.ts() {
        let mut d = Vec::new();
        for &n in cfg.ns() {
            let row = hydrodynamic_check(&profile, n, t, reps(cfg), estimator, key, workers)?;
            d.push(row.wasserstein);
            rows.push(row);
        }
        let last = rows.last().expect("n is nonempty");
        out.verdicts.push(Verdict::decided(
            format!("hydrodynamic/t={t}/decreasing"),
            claim,
            d.windows(2).filter(|w| w[1] >= w[0]).count() as f64,
            0.0,
            0.0,
            d.windows(2).all(|w| w[1] < w[0]),
        ));
        out.verdicts.push(Verdict::upper(
            format!("hydrodynamic/t={t}/n={}", last.n),
            claim,
            last.wasserstein,
            0.0,
            0.05,
        ));
    }
    out.file("hydrodynamic.csv", render_csv(&rows));
    Ok(())
}

fn moments(cfg: &RunConfig, key: &StreamKey, workers: usize, claim: &str, out: &mut RunOutput) -> Result<(), CliError> {
    let mut fourth = Vec::new();
    for &t in cfg.deltas.as_deref().unwrap_or(&[]) {
        let est = fourth_moment_experiment(t, reps(cfg), key, workers)?;
        let target = 3.0 * t * t + t;
        let z = (est.mean - target) / est.std_error;
        out.verdicts.push(Verdict::decided(
            format!("moments/fourth/t={t}"),
            claim,
            est.mean,
            est.std_error,
            target,
            z.abs() <= 4.0,
        ));
        fourth.push(vec![
            t.to_string(),
            reps(cfg).to_string(),
            est.mean.to_string(),
            est.std_error.to_string(),
            target.to_string(),
        ]);
    }
    out.file(
        "fourth_moment.csv",
        csv_table(&["t", "reps", "mean", "std_error", "exact"], fourth),
    );
    let gap = cfg.gap.unwrap_or(1);
    let mut rows = Vec::new();
    for &t in cfg.ts() {
        let row = second_moment_experiment(gap, t, reps(cfg), key, workers)?;
        out.verdicts.push(Verdict::upper(
            format!("moments/second/T={t}"),
            claim,
            row.scaled,
            row.se_sq / t.sqrt(),
            110.0,
        ));
        rows.push(row);
    }
    out.file("second_moment.csv", render_csv(&rows));
    Ok(())
}

fn kernel(cfg: &RunConfig, key: &StreamKey, claim: &str, out: &mut RunOutput) -> Result<(), CliError> {
    let ts: Vec<f64> = cfg.ts().iter().copied().filter(|&t| t > 0.0).collect();
    if ts.is_empty() {
        return Err(CliError::Config("verify kernel needs a positive time".into()));
    }
    let grid: Vec<f64> = (0..=4).map(|k| k as f64 / 4.0).collect();
    let density = |x: f64, y: f64, t: f64| transition_density(x, y, t);
    let mut norm: f64 = 0.0;
    let mut sym: f64 = 0.0;
    let mut stationary: f64 = 0.0;
    for &t in &ts {
        for &x in &grid {
            norm = norm.max((simpson(|y| density(x, y, t).unwrap_or(f64::NAN), 0.0, 1.0, 4000) - 1.0).abs());
            stationary =
                stationary.max((simpson(|z| density(z, x, t).unwrap_or(f64::NAN), 0.0, 1.0, 4000) - 1.0).abs());
            for &y in &grid {
                sym = sym.max((density(x, y, t)? - density(y, x, t)?).abs());
            }
        }
    }
    let mut ck: f64 = 0.0;
    for &x in &grid {
        for &y in &grid {
            let split = simpson(
                |z| density(x, z, 0.05).unwrap_or(f64::NAN) * density(z, y, 0.05).unwrap_or(f64::NAN),
                0.0,
                1.0,
                4000,
            );
            ck = ck.max((split - density(x, y, 0.1)?).abs());
        }
    }
    let params = HeatKernelParams::default();
    let (image_tail, spectral_tail) = params.tail_bounds();
    out.verdicts.push(Verdict::decided(
        "kernel/truncation-certified",
        claim,
        image_tail.max(spectral_tail),
        0.0,
        1e-10,
        params.certify().is_ok(),
    ));
    out.verdicts
        .push(Verdict::upper("kernel/normalization", claim, norm, 0.0, 1e-8));
    out.verdicts
        .push(Verdict::upper("kernel/symmetry", claim, sym, 0.0, 1e-10));
    out.verdicts
        .push(Verdict::upper("kernel/chapman-kolmogorov", claim, ck, 0.0, 1e-6));
    out.verdicts
        .push(Verdict::upper("kernel/stationarity", claim, stationary, 0.0, 1e-8));

    let t0 = ts[0];
    let bins = 50;
    let mut counts = vec![0u64; bins];
    let mut rng = key.derive("sampler").rng();
    for _ in 0..reps(cfg) {
        let v = reflected_values(0.5, &[t0], &mut rng)?[0];
        counts[((v * bins as f64) as usize).min(bins - 1)] += 1;
    }
    let mut probs = Vec::with_capacity(bins);
    for b in 0..bins {
        let (lo, hi) = (b as f64 / bins as f64, (b + 1) as f64 / bins as f64);
        probs.push(transition_cdf(0.5, hi, t0)? - transition_cdf(0.5, lo, t0)?);
    }
    let chi = chi_square_gof(&counts, &probs)?;
    out.verdicts.push(Verdict::decided(
        format!("kernel/sampler-chi-square/t={t0}"),
        claim,
        chi.p_value,
        0.0,
        0.001,
        chi.p_value > 0.001,
    ));
    let mut uniform_start = Vec::with_capacity(reps(cfg));
    for _ in 0..reps(cfg) {
        let x0 = InitialLaw::uniform().sample(&mut rng);
        uniform_start.push(reflected_values(x0, &[ts[ts.len() - 1]], &mut rng)?[0]);
    }
    let (_, p) = ks_test(&uniform_start, |x| x)?;
    out.verdicts.push(Verdict::decided(
        "kernel/sampler-stationary-ks",
        claim,
        p,
        0.0,
        0.001,
        p > 0.001,
    ));

    let xs: Vec<f64> = (0..=10).map(|k| k as f64 / 10.0).collect();
    out.file("density.csv", density_table_csv(&xs, &xs, &ts)?);
    Ok(())
}
