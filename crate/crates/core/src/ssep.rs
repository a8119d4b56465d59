//! Symmetric simple exclusion driven by the interchange log: colour some
//! particles black at time 0 and follow the colours.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::interchange::{fold_lattice, simulate_interchange, PathGraphConfig, PermutationTrajectory};
use crate::parallel::map_replicates;
use crate::rbm::InitialLaw;
use crate::rng::StreamKey;
use crate::stats::{integrated_cdf_std_error, wasserstein1_to_cdf, PointMeasure};
use crate::verdict::TableRow;
use crate::walks::sample_displacement;

const W1_NODES: usize = 4097;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OccupancyConfig {
    eta0: Vec<bool>,
}

impl OccupancyConfig {
    pub fn new(eta0: Vec<bool>) -> Result<Self> {
        if !eta0.iter().any(|&b| b) {
            return Err(Error::EmptyOccupancy);
        }
        Ok(OccupancyConfig { eta0 })
    }

    pub fn n(&self) -> usize {
        self.eta0.len()
    }

    pub fn eta0(&self) -> &[bool] {
        &self.eta0
    }

    pub fn black_count(&self) -> usize {
        self.eta0.iter().filter(|&&b| b).count()
    }

    /// Sites (1-based) that start black.
    pub fn black_sites(&self) -> Vec<usize> {
        (1..=self.n()).filter(|&i| self.eta0[i - 1]).collect()
    }
}

/// Macroscopic initial profile, as accepted in run configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Profile {
    /// Sites `i` with `i/n` in `[a, b]` start occupied.
    Indicator { support: [f64; 2] },
    /// Site `ceil(x n)` (clamped to `1..=n`) starts occupied for each `x`.
    Atoms { positions: Vec<f64> },
}

impl Profile {
    pub fn left_half() -> Self {
        Profile::Indicator { support: [0.0, 0.5] }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Profile::Indicator { support: [a, b] } => {
                if !(0.0 <= *a && a < b && *b <= 1.0) {
                    return Err(invalid(format!(
                        "indicator support [{a}, {b}] must satisfy 0 <= a < b <= 1"
                    )));
                }
            }
            Profile::Atoms { positions } => {
                if positions.is_empty() || positions.iter().any(|x| !(0.0..=1.0).contains(x)) {
                    return Err(invalid("atom positions must be a nonempty list in [0, 1]"));
                }
            }
        }
        Ok(())
    }

    pub fn discretize(&self, n: usize) -> Result<OccupancyConfig> {
        self.validate()?;
        if n == 0 {
            return Err(invalid("n must be positive"));
        }
        let mut eta = vec![false; n];
        match self {
            Profile::Indicator { support: [a, b] } => {
                for (k, slot) in eta.iter_mut().enumerate() {
                    let x = (k + 1) as f64 / n as f64;
                    *slot = *a <= x && x <= *b;
                }
            }
            Profile::Atoms { positions } => {
                for &x in positions {
                    let site = ((x * n as f64).ceil() as usize).clamp(1, n);
                    eta[site - 1] = true;
                }
            }
        }
        OccupancyConfig::new(eta)
    }

    /// Continuum law of a uniformly chosen black particle at time 0.
    pub fn initial_law(&self) -> Result<InitialLaw> {
        self.validate()?;
        Ok(match self {
            Profile::Indicator { support: [a, b] } => InitialLaw::UniformOn(*a, *b),
            Profile::Atoms { positions } => InitialLaw::Atoms(positions.clone()),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SsepTrajectory {
    eta0: OccupancyConfig,
    horizon: f64,
    traj: PermutationTrajectory,
}

/// SSEP on `P_n` up to macroscopic time `horizon`.
pub fn simulate_ssep(eta0: &OccupancyConfig, horizon: f64, key: &StreamKey) -> Result<SsepTrajectory> {
    let config = PathGraphConfig::for_macro_horizon(eta0.n(), horizon)?;
    Ok(SsepTrajectory {
        eta0: eta0.clone(),
        horizon,
        traj: simulate_interchange(&config, key)?,
    })
}

impl SsepTrajectory {
    pub fn interchange(&self) -> &PermutationTrajectory {
        &self.traj
    }

    pub fn initial(&self) -> &OccupancyConfig {
        &self.eta0
    }

    /// Calls `visit(micro_time, eta)` at time 0 and after every firing.
    pub fn replay(&self, mut visit: impl FnMut(f64, &[bool])) {
        let n = self.eta0.n();
        let mut eta = vec![false; n];
        self.traj.replay(|t, positions| {
            eta.iter_mut().for_each(|e| *e = false);
            for (i, &p) in positions.iter().enumerate() {
                if self.eta0.eta0[i] {
                    eta[p - 1] = true;
                }
            }
            visit(t, &eta);
        });
    }

    /// Occupancy at macroscopic time `t`.
    pub fn occupancy_at(&self, t: f64) -> Result<Vec<bool>> {
        if !(0.0..=self.horizon).contains(&t) {
            return Err(Error::OutOfRange {
                t,
                horizon: self.horizon,
            });
        }
        let n = self.eta0.n();
        let positions = self.traj.positions_at((n * n) as f64 * t)?;
        let mut eta = vec![false; n];
        for (i, &p) in positions.iter().enumerate() {
            eta[p - 1] = self.eta0.eta0[i];
        }
        Ok(eta)
    }

    /// Verifies that the number of black particles never changes.
    pub fn check_conservation(&self) -> Result<()> {
        let expected = self.eta0.black_count();
        let mut bad = None;
        self.replay(|t, eta| {
            if bad.is_none() && eta.iter().filter(|&&b| b).count() != expected {
                bad = Some(t);
            }
        });
        match bad {
            Some(t) => Err(Error::Mismatch(format!("black count changed at time {t}"))),
            None => Ok(()),
        }
    }
}

/// `(1/|eta|) sum_i eta(i) delta_{i/n}`.
pub fn empirical_density(eta: &[bool]) -> Result<PointMeasure> {
    let n = eta.len();
    let atoms: Vec<(f64, f64)> = (1..=n)
        .filter(|&i| eta[i - 1])
        .map(|i| (i as f64 / n as f64, 1.0))
        .collect();
    if atoms.is_empty() {
        return Err(Error::EmptyOccupancy);
    }
    PointMeasure::new(atoms)
}

/// How the expected density is estimated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HydroEstimator {
    /// Average `rho_n(t)` over full SSEP replicates.
    Ssep,
    /// Average over independent draws of a uniformly chosen black particle;
    /// conditionally on the interchange run `rho_n(t)` is exactly the law of
    /// that particle, so both estimators target the same mean.
    Tagged,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HydroRow {
    pub n: usize,
    pub t: f64,
    pub reps: usize,
    pub wasserstein: f64,
    pub std_error: f64,
}

/// W1 distance between the Monte Carlo mean of `rho_n(t)` and the law of
/// `fold_real(X0 + B(t))`, `X0` drawn from the profile.
pub fn hydrodynamic_check(
    profile: &Profile,
    n: usize,
    t: f64,
    reps: usize,
    estimator: HydroEstimator,
    key: &StreamKey,
    workers: usize,
) -> Result<HydroRow> {
    if reps == 0 {
        return Err(invalid("reps must be positive"));
    }
    if !(t > 0.0 && t.is_finite()) {
        return Err(invalid("t must be positive"));
    }
    let eta0 = profile.discretize(n)?;
    let law = profile.initial_law()?;
    let key = key.derive(&format!("hydro/{n}/{t}"));
    let (mean, std_error) = match estimator {
        HydroEstimator::Tagged => tagged_density(&eta0, t, reps, &key, workers)?,
        HydroEstimator::Ssep => ssep_density(&eta0, t, reps, &key, workers)?,
    };
    Ok(HydroRow {
        n,
        t,
        reps,
        wasserstein: wasserstein1_to_cdf(&mean, |y| law.cdf_at(y, t), W1_NODES),
        std_error,
    })
}

const TAGGED_BATCH: usize = 10_000;

fn tagged_density(
    eta0: &OccupancyConfig,
    t: f64,
    samples: usize,
    key: &StreamKey,
    workers: usize,
) -> Result<(PointMeasure, f64)> {
    let n = eta0.n();
    let sites = eta0.black_sites();
    let micro = (n * n) as f64 * t;
    let batches = samples.div_ceil(TAGGED_BATCH);
    let partial = map_replicates(batches, workers, |b| {
        let mut rng = key.with_replicate(b as u64).rng();
        let mut counts = vec![0u64; n + 1];
        let size = TAGGED_BATCH.min(samples - b * TAGGED_BATCH);
        for _ in 0..size {
            let start = sites[rng.random_range(0..sites.len())] as i64;
            counts[fold_lattice(start + sample_displacement(&mut rng, 1.0, micro), n)] += 1;
        }
        counts
    });
    let mut counts = vec![0u64; n + 1];
    for c in partial {
        counts.iter_mut().zip(c).for_each(|(a, b)| *a += b);
    }
    let mean = PointMeasure::from_grid_counts(n, &counts)?;
    let se = integrated_cdf_std_error(&mean, samples);
    Ok((mean, se))
}

fn ssep_density(
    eta0: &OccupancyConfig,
    t: f64,
    reps: usize,
    key: &StreamKey,
    workers: usize,
) -> Result<(PointMeasure, f64)> {
    let n = eta0.n();
    let per_rep = map_replicates(reps, workers, |r| -> Result<Vec<bool>> {
        simulate_ssep(eta0, t, &key.with_replicate(r as u64))?.occupancy_at(t)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let black = eta0.black_count() as f64;
    // pointwise CDF variance across replicates gives the error of the mean
    let mut cdf_sum = vec![0.0; n];
    let mut cdf_sq = vec![0.0; n];
    let mut counts = vec![0u64; n + 1];
    for eta in &per_rep {
        let mut acc = 0.0;
        for i in 0..n {
            if eta[i] {
                counts[i + 1] += 1;
                acc += 1.0 / black;
            }
            cdf_sum[i] += acc;
            cdf_sq[i] += acc * acc;
        }
    }
    let r = reps as f64;
    let se = if reps > 1 {
        (0..n)
            .map(|i| {
                let m = cdf_sum[i] / r;
                let var = ((cdf_sq[i] - r * m * m) / (r - 1.0)).max(0.0);
                (var / r).sqrt() / n as f64
            })
            .sum()
    } else {
        f64::NAN
    };
    Ok((PointMeasure::from_grid_counts(n, &counts)?, se))
}

impl TableRow for HydroRow {
    fn header() -> &'static [&'static str] {
        &["n", "t", "reps", "wasserstein", "std_error"]
    }
    fn fields(&self) -> Vec<String> {
        vec![
            self.n.to_string(),
            self.t.to_string(),
            self.reps.to_string(),
            self.wasserstein.to_string(),
            self.std_error.to_string(),
        ]
    }
}
