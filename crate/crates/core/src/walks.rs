//! Continuous-time simple random walks on `Z` and `Z>=0`, visit counting and
//! exact oracles.
//!
//! Two speeds appear throughout and are kept apart by `jump_rate`: the
//! interchange particles jump at total rate 1 (each incident edge at rate
//! 1/2), while the visit bound is stated for walks whose edges fire at rate 1,
//! i.e. total rate 2.

use std::collections::BTreeSet;

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{invalid, Error, Result};
use crate::parallel::map_replicates;
use crate::path::CadlagPath;
use crate::rng::{exp_gap, poisson_count, symmetric_steps, StreamKey};
use crate::stats::MeanEstimate;
use crate::verdict::TableRow;

/// Poisson tail mass left out by [`walk_pmf_oracle`].
/// Hard cap on the number of Poisson terms the oracle will sum.
const MAX_ORACLE_TERMS: u64 = 50_000_000;

pub const ORACLE_TAIL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WalkSpec {
    pub start: i64,
    /// Total rate of leaving the current site, split evenly between ±1.
    pub jump_rate: f64,
    pub horizon: f64,
}

impl WalkSpec {
    pub fn new(start: i64, jump_rate: f64, horizon: f64) -> Result<Self> {
        let spec = WalkSpec {
            start,
            jump_rate,
            horizon,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.jump_rate.is_finite() && self.jump_rate > 0.0) {
            return Err(invalid(format!("jump rate must be positive, got {}", self.jump_rate)));
        }
        if !(self.horizon.is_finite() && self.horizon >= 0.0) {
            return Err(invalid(format!("horizon must be nonnegative, got {}", self.horizon)));
        }
        Ok(())
    }
}

/// Walk on `Z>=0`: edges `{x, x+1}` fire at `edge_rate`, and a self-loop at 0
/// fires at `loop_rate_at_zero` without moving the walker.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HalfLineSpec {
    pub start: i64,
    pub edge_rate: f64,
    pub loop_rate_at_zero: f64,
}

impl HalfLineSpec {
    pub fn validate(&self) -> Result<()> {
        if self.start < 0 {
            return Err(invalid("half-line walk must start at a nonnegative site"));
        }
        if !(self.edge_rate.is_finite() && self.edge_rate > 0.0) {
            return Err(invalid("edge rate must be positive"));
        }
        if !(self.loop_rate_at_zero.is_finite() && self.loop_rate_at_zero >= 0.0) {
            return Err(invalid("self-loop rate must be nonnegative"));
        }
        Ok(())
    }
}

pub(crate) fn srw_path<R: Rng + ?Sized>(rng: &mut R, start: i64, rate: f64, horizon: f64) -> CadlagPath {
    let mut path = CadlagPath::constant(start as f64, horizon);
    let mut x = start;
    let mut t = exp_gap(rng, rate);
    while t <= horizon {
        x += if rng.random::<bool>() { 1 } else { -1 };
        path.push_jump(t, x as f64);
        t += exp_gap(rng, rate);
    }
    path
}

/// Event-by-event simulation of a continuous-time SRW.
pub fn simulate_srw(spec: &WalkSpec, key: &StreamKey) -> Result<CadlagPath> {
    spec.validate()?;
    Ok(srw_path(&mut key.rng(), spec.start, spec.jump_rate, spec.horizon))
}

/// Exact displacement of a rate-`rate` walk over a window of length `time`:
/// a Poisson number of fair ±1 steps.
pub fn sample_displacement<R: Rng + ?Sized>(rng: &mut R, rate: f64, time: f64) -> i64 {
    let steps = poisson_count(rng, rate * time);
    symmetric_steps(rng, steps)
}

fn ln_choose(n: u64, k: u64) -> f64 {
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}

/// `P(Z_k = d)` for a discrete fair walk started at 0.
pub fn discrete_walk_pmf(steps: u64, displacement: i64) -> f64 {
    let d = displacement.unsigned_abs();
    if d > steps || !(steps - d).is_multiple_of(2) {
        return 0.0;
    }
    if d == steps {
        return 0.5f64.powi(steps.min(2000) as i32);
    }
    let up = (steps + d) / 2;
    (ln_choose(steps, up) - steps as f64 * std::f64::consts::LN_2).exp()
}

/// `P(S(t) - S(0) = displacement)` by Poissonisation,
/// `sum_k e^{-rt} (rt)^k / k! * P(Z_k = displacement)`, truncated once the
/// Poisson tail is certified below [`ORACLE_TAIL`].
pub fn walk_pmf_oracle(spec: &WalkSpec, t: f64, displacement: i64) -> Result<f64> {
    spec.validate()?;
    if !(t.is_finite() && t >= 0.0) {
        return Err(invalid(format!("time must be nonnegative, got {t}")));
    }
    let mean = spec.jump_rate * t;
    if mean == 0.0 {
        return Ok(if displacement == 0 { 1.0 } else { 0.0 });
    }
    let max_terms = (mean + 40.0 * mean.sqrt() + 200.0).min(MAX_ORACLE_TERMS as f64) as u64;
    let ln_mean = mean.ln();
    let ln_pois = |k: u64| -mean + k as f64 * ln_mean - ln_gamma(k as f64 + 1.0);
    let mut total = 0.0;
    let mut k = displacement.unsigned_abs();
    loop {
        total += (ln_pois(k)).exp() * discrete_walk_pmf(k, displacement);
        // P(N > k) <= p(k+1) / (1 - mean / (k + 2)) once k + 2 > mean
        if (k + 2) as f64 > mean {
            let bound = ln_pois(k + 1).exp() / (1.0 - mean / (k + 2) as f64);
            if bound < ORACLE_TAIL {
                return Ok(total);
            }
        }
        k += 1;
        if k > max_terms {
            let bound = ln_pois(k).exp() / (1.0 - mean / (k + 1) as f64).max(f64::MIN_POSITIVE);
            return Err(Error::Truncation {
                terms: k as usize,
                bound,
                tolerance: ORACLE_TAIL,
            });
        }
    }
}

/// Embedded-chain visit count: 1 if the path starts in `targets`, plus the
/// number of jumps in `(0, horizon]` that land in `targets`.
pub fn count_visits(path: &CadlagPath, targets: &BTreeSet<i64>, horizon: f64) -> usize {
    let hit = |v: f64| targets.contains(&(v.round() as i64));
    usize::from(hit(path.initial_value()))
        + path
            .jumps()
            .iter()
            .take_while(|j| j.0 <= horizon)
            .filter(|j| hit(j.1))
            .count()
}

/// `E[V_n] = sum_{k=0}^{n} P(start + Z_k = 0)` for a discrete fair walk.
pub fn expected_visits_oracle(start: i64, n_steps: u64) -> f64 {
    (0..=n_steps).map(|k| discrete_walk_pmf(k, -start)).sum()
}

/// Walk on `Z>=0`. Self-loop firings are events but leave the path unchanged.
pub fn simulate_halfline(spec: &HalfLineSpec, horizon: f64, key: &StreamKey) -> Result<CadlagPath> {
    spec.validate()?;
    if !(horizon.is_finite() && horizon >= 0.0) {
        return Err(invalid("horizon must be nonnegative"));
    }
    let mut rng = key.rng();
    let mut path = CadlagPath::constant(spec.start as f64, horizon);
    let mut x = spec.start;
    let mut t = 0.0;
    loop {
        let rate = if x == 0 {
            spec.edge_rate + spec.loop_rate_at_zero
        } else {
            2.0 * spec.edge_rate
        };
        t += exp_gap(&mut rng, rate);
        if t > horizon {
            break;
        }
        let u: f64 = rng.random::<f64>() * rate;
        if x == 0 {
            if u < spec.edge_rate {
                x = 1;
                path.push_jump(t, 1.0);
            }
        } else {
            x += if u < spec.edge_rate { 1 } else { -1 };
            path.push_jump(t, x as f64);
        }
    }
    Ok(path)
}

/// One row of the return-scaling experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReturnScalingRow {
    pub epsilon: f64,
    pub t: f64,
    pub reps: usize,
    pub mean_visits: f64,
    pub std_error: f64,
}

/// Mean number of visits to the origin on `[0, t]` of a rate `epsilon^-2`
/// walk started at 0.
pub fn return_scaling_experiment(
    epsilon: f64,
    t: f64,
    reps: usize,
    key: &StreamKey,
    workers: usize,
) -> Result<ReturnScalingRow> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(invalid(format!("epsilon must lie in (0, 1], got {epsilon}")));
    }
    if reps == 0 {
        return Err(invalid("reps must be positive"));
    }
    let spec = WalkSpec::new(0, epsilon.powi(-2), t)?;
    let origin = BTreeSet::from([0]);
    let key = key.derive(&format!("returns-scaling/{epsilon}"));
    let counts = map_replicates(reps, workers, |r| {
        let path = srw_path(&mut key.with_replicate(r as u64).rng(), 0, spec.jump_rate, t);
        count_visits(&path, &origin, t) as f64
    });
    let est = MeanEstimate::from_samples(&counts);
    Ok(ReturnScalingRow {
        epsilon,
        t,
        reps,
        mean_visits: est.mean,
        std_error: est.std_error,
    })
}

/// Least-squares slope of `ln(mean_visits)` against `ln(1 / epsilon)`.
pub fn scaling_exponent(rows: &[ReturnScalingRow]) -> Result<f64> {
    if rows.len() < 2 {
        return Err(invalid("need at least two epsilons to fit a slope"));
    }
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .map(|r| ((1.0 / r.epsilon).ln(), r.mean_visits.ln()))
        .collect();
    Ok(crate::stats::ols_slope(&pts))
}

/// Mean of `count_visits` to `{0}` for a walk with the given rate from 0.
pub fn visits_experiment(
    jump_rate: f64,
    horizon: f64,
    reps: usize,
    key: &StreamKey,
    workers: usize,
) -> Result<MeanEstimate> {
    WalkSpec::new(0, jump_rate, horizon)?;
    if reps == 0 {
        return Err(invalid("reps must be positive"));
    }
    let origin = BTreeSet::from([0]);
    let key = key.derive(&format!("visits/{jump_rate}/{horizon}"));
    let counts = map_replicates(reps, workers, |r| {
        let path = srw_path(&mut key.with_replicate(r as u64).rng(), 0, jump_rate, horizon);
        count_visits(&path, &origin, horizon) as f64
    });
    Ok(MeanEstimate::from_samples(&counts))
}

/// Monte Carlo estimate of `E[(S(t) - S(0))^4]` for a rate-1 walk.
pub fn fourth_moment_experiment(t: f64, reps: usize, key: &StreamKey, workers: usize) -> Result<MeanEstimate> {
    let spec = WalkSpec::new(0, 1.0, t)?;
    if reps == 0 {
        return Err(invalid("reps must be positive"));
    }
    let key = key.derive(&format!("fourth-moment/{t}"));
    let vals = map_replicates(reps, workers, |r| {
        let path = srw_path(&mut key.with_replicate(r as u64).rng(), 0, spec.jump_rate, t);
        path.final_value().powi(4)
    });
    Ok(MeanEstimate::from_samples(&vals))
}

impl TableRow for ReturnScalingRow {
    fn header() -> &'static [&'static str] {
        &["epsilon", "t", "reps", "mean_visits", "std_error"]
    }
    fn fields(&self) -> Vec<String> {
        vec![
            self.epsilon.to_string(),
            self.t.to_string(),
            self.reps.to_string(),
            self.mean_visits.to_string(),
            self.std_error.to_string(),
        ]
    }
}

/// One row of the visit-count experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisitsRow {
    pub horizon: f64,
    pub jump_rate: f64,
    pub reps: usize,
    pub mean_visits: f64,
    pub std_error: f64,
    /// `3 sqrt(T)`
    pub bound: f64,
}

impl VisitsRow {
    pub fn new(jump_rate: f64, horizon: f64, est: MeanEstimate) -> Self {
        VisitsRow {
            horizon,
            jump_rate,
            reps: est.n,
            mean_visits: est.mean,
            std_error: est.std_error,
            bound: 3.0 * horizon.sqrt(),
        }
    }
}

impl TableRow for VisitsRow {
    fn header() -> &'static [&'static str] {
        &["T", "jump_rate", "reps", "mean_visits", "std_error", "bound"]
    }
    fn fields(&self) -> Vec<String> {
        vec![
            self.horizon.to_string(),
            self.jump_rate.to_string(),
            self.reps.to_string(),
            self.mean_visits.to_string(),
            self.std_error.to_string(),
            self.bound.to_string(),
        ]
    }
}
