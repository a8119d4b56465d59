//! Run configuration, defaults and the manifest written next to every run.

use std::fmt;

use permuton_core::coupling::default_pairs;
use permuton_core::ssep::{HydroEstimator, Profile};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Experiment {
    #[serde(rename = "simulate")]
    Simulate,
    #[serde(rename = "verify tightness")]
    Tightness,
    #[serde(rename = "verify concentration")]
    Concentration,
    #[serde(rename = "verify visits")]
    Visits,
    #[serde(rename = "verify returns-scaling")]
    ReturnsScaling,
    #[serde(rename = "verify hydrodynamic")]
    Hydrodynamic,
    #[serde(rename = "verify independence")]
    Independence,
    #[serde(rename = "verify returns")]
    Returns,
    #[serde(rename = "verify moments")]
    Moments,
    #[serde(rename = "verify marginals")]
    Marginals,
    #[serde(rename = "verify kernel")]
    Kernel,
}

impl Experiment {
    pub const ALL: [Experiment; 11] = [
        Experiment::Simulate,
        Experiment::Tightness,
        Experiment::Concentration,
        Experiment::Visits,
        Experiment::ReturnsScaling,
        Experiment::Hydrodynamic,
        Experiment::Independence,
        Experiment::Returns,
        Experiment::Moments,
        Experiment::Marginals,
        Experiment::Kernel,
    ];

    /// Directory name under the output root.
    pub fn slug(self) -> &'static str {
        match self {
            Experiment::Simulate => "simulate",
            Experiment::Tightness => "verify-tightness",
            Experiment::Concentration => "verify-concentration",
            Experiment::Visits => "verify-visits",
            Experiment::ReturnsScaling => "verify-returns-scaling",
            Experiment::Hydrodynamic => "verify-hydrodynamic",
            Experiment::Independence => "verify-independence",
            Experiment::Returns => "verify-returns",
            Experiment::Moments => "verify-moments",
            Experiment::Marginals => "verify-marginals",
            Experiment::Kernel => "verify-kernel",
        }
    }

    /// The statement the experiment checks; `report` groups verdicts by it.
    pub fn claim(self) -> &'static str {
        match self {
            Experiment::Simulate => "interchange is a bijection with uniform one-time marginals",
            Experiment::Tightness => "tightness: oscillation exceedances <= 1e3 T (delta^1/2 + delta^-1/2 / n^2)",
            Experiment::Concentration => "concentration: P(coupled walks separate) = O(1/sqrt n)",
            Experiment::Visits => "random walk visits: E V(T) <= 3 sqrt(T)",
            Experiment::ReturnsScaling => "origin returns of a rate eps^-2 walk grow like eps^-1 sqrt(t)",
            Experiment::Hydrodynamic => "exclusion density converges to the reflected heat flow",
            Experiment::Independence => "two particles become asymptotically independent",
            Experiment::Returns => "excursion count and occupied time <= 10 sqrt(T)",
            Experiment::Moments => "walk moment identities: E D^4 = 3t^2 + t, E (S3 - S2)^2 <= 100 sqrt(T)",
            Experiment::Marginals => "two-time marginals converge to stationary reflected BM",
            Experiment::Kernel => "reflected BM heat kernel and sampler",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.slug())
    }
}

/// Experiment parameters. Every field is optional in config files and on the
/// command line; `resolve` fills the defaults for one experiment.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<Vec<usize>>,
    #[serde(default, rename = "T", skip_serializing_if = "Option::is_none")]
    pub horizons: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deltas: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pairs: Option<Vec<(usize, usize)>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile: Option<Profile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edge_rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub particles: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilons: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gap: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub power_reps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub estimator: Option<HydroEstimator>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

pub const DEFAULT_SEED: u64 = 1;

macro_rules! overlay {
    ($hi:expr, $lo:expr, $($field:ident),*) => {
        RunConfig { $($field: $hi.$field.or($lo.$field)),* }
    };
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("config: {e}")))
    }

    /// Fields set in `self` win over those in `base`.
    pub fn over(self, base: RunConfig) -> RunConfig {
        overlay!(
            self, base, n, horizons, reps, deltas, pairs, profile, edge_rate, particles, epsilons, gap, power_reps,
            estimator, seed
        )
    }

    /// Fills unset fields with the defaults of `experiment` and checks them.
    pub fn resolve(mut self, experiment: Experiment) -> Result<RunConfig, CliError> {
        let fill = |slot: &mut Option<Vec<f64>>, v: &[f64]| {
            slot.get_or_insert_with(|| v.to_vec());
        };
        self.seed.get_or_insert(DEFAULT_SEED);
        match experiment {
            Experiment::Simulate => {
                self.n.get_or_insert_with(|| vec![8]);
                fill(&mut self.horizons, &[1.0]);
                self.edge_rate.get_or_insert(0.5);
                let n = self.single_n()?;
                let particles = self.particles.get_or_insert_with(|| (1..=n).collect());
                if let Some(p) = particles.iter().find(|&&p| p == 0 || p > n) {
                    return Err(CliError::Config(format!("particle {p} outside 1..={n}")));
                }
                single(self.horizons.as_ref().unwrap(), "T")?;
            }
            Experiment::Tightness => {
                self.n.get_or_insert_with(|| vec![32, 128]);
                fill(&mut self.horizons, &[1.0]);
                let deltas: Vec<f64> = (4..=8).map(|k| 2f64.powi(-k)).collect();
                fill(&mut self.deltas, &deltas);
                self.reps.get_or_insert(10_000);
            }
            Experiment::Concentration => {
                self.n.get_or_insert_with(|| vec![64, 256, 1024]);
                fill(&mut self.horizons, &[1.0]);
                self.reps.get_or_insert(10_000);
                for &n in self.n.as_ref().unwrap() {
                    for &(i, j) in self.pairs.as_deref().unwrap_or(&[]) {
                        if i == 0 || j == 0 || i > n || j > n || i == j {
                            return Err(CliError::Config(format!(
                                "pair {i}-{j} is not two distinct sites of 1..={n}"
                            )));
                        }
                    }
                }
            }
            Experiment::Visits => {
                fill(&mut self.horizons, &[1.0, 4.0, 16.0]);
                self.edge_rate.get_or_insert(2.0);
                self.reps.get_or_insert(100_000);
            }
            Experiment::ReturnsScaling => {
                fill(&mut self.horizons, &[1.0]);
                fill(&mut self.epsilons, &[1.0, 0.5, 0.25, 0.125]);
                self.reps.get_or_insert(20_000);
                single(self.horizons.as_ref().unwrap(), "T")?;
            }
            Experiment::Hydrodynamic => {
                self.n.get_or_insert_with(|| vec![64, 256, 512]);
                fill(&mut self.horizons, &[0.01, 0.1, 1.0]);
                self.profile.get_or_insert_with(Profile::left_half);
                let estimator = *self.estimator.get_or_insert(HydroEstimator::Tagged);
                self.reps.get_or_insert(match estimator {
                    HydroEstimator::Tagged => 1_000_000,
                    HydroEstimator::Ssep => 200,
                });
                self.profile.as_ref().unwrap().validate()?;
            }
            Experiment::Independence => {
                self.n.get_or_insert_with(|| vec![256]);
                fill(&mut self.horizons, &[0.0, 0.25, 0.5, 1.0]);
                self.reps.get_or_insert(5_000);
                self.power_reps.get_or_insert(2_000);
                self.single_n()?;
            }
            Experiment::Returns => {
                fill(&mut self.horizons, &[1.0, 4.0, 16.0]);
                self.gap.get_or_insert(2);
                self.reps.get_or_insert(20_000);
            }
            Experiment::Moments => {
                fill(&mut self.horizons, &[1.0, 4.0, 16.0]);
                fill(&mut self.deltas, &[0.5, 1.0, 2.0, 4.0]);
                self.gap.get_or_insert(1);
                self.reps.get_or_insert(20_000);
            }
            Experiment::Marginals => {
                self.n.get_or_insert_with(|| vec![64, 256, 1024]);
                fill(&mut self.horizons, &[0.1]);
                self.reps.get_or_insert(1_000_000);
                single(self.horizons.as_ref().unwrap(), "T")?;
            }
            Experiment::Kernel => {
                fill(&mut self.horizons, &[0.01, 0.1, 1.0]);
                self.reps.get_or_insert(100_000);
            }
        }
        self.check_common()?;
        Ok(self)
    }

    fn single_n(&self) -> Result<usize, CliError> {
        let n = self.n.as_deref().unwrap_or(&[]);
        match n {
            [n] => Ok(*n),
            _ => Err(CliError::Config(format!("expected exactly one value of n, got {n:?}"))),
        }
    }

    fn check_common(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::Config(msg));
        if let Some(n) = &self.n {
            if n.is_empty() || n.contains(&0) {
                return bad(format!("n must be a nonempty list of positive sizes, got {n:?}"));
            }
        }
        if let Some(ts) = &self.horizons {
            if ts.is_empty() || ts.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
                return bad(format!("T must be a nonempty list of nonnegative times, got {ts:?}"));
            }
        }
        if self.reps == Some(0) || self.power_reps == Some(0) {
            return bad("reps must be positive".into());
        }
        if let Some(d) = &self.deltas {
            if d.is_empty() || d.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
                return bad(format!("deltas must be positive, got {d:?}"));
            }
        }
        if let Some(e) = &self.epsilons {
            if e.len() < 2 || e.iter().any(|x| !(*x > 0.0 && *x <= 1.0)) {
                return bad(format!("need at least two epsilons in (0, 1], got {e:?}"));
            }
        }
        if let Some(r) = self.edge_rate {
            if !(r.is_finite() && r > 0.0) {
                return bad(format!("edge rate must be positive, got {r}"));
            }
        }
        Ok(())
    }

    pub fn ns(&self) -> &[usize] {
        self.n.as_deref().unwrap_or(&[])
    }

    pub fn ts(&self) -> &[f64] {
        self.horizons.as_deref().unwrap_or(&[])
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(DEFAULT_SEED)
    }

    /// Pairs for size `n`: the configured ones, or the default scheme.
    pub fn pairs_for(&self, n: usize) -> Vec<(usize, usize)> {
        self.pairs.clone().unwrap_or_else(|| default_pairs(n))
    }
}

fn single(values: &[f64], name: &str) -> Result<f64, CliError> {
    match values {
        [v] => Ok(*v),
        _ => Err(CliError::Config(format!(
            "expected exactly one value of {name}, got {values:?}"
        ))),
    }
}

/// Everything needed to reproduce a run. Contains no timestamps, so two runs
/// of one manifest write identical bytes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentManifest {
    pub subcommand: Experiment,
    pub config: RunConfig,
    pub seed: u64,
    pub version: String,
    /// Files written by the run, relative to the run directory.
    #[serde(default)]
    pub outputs: Vec<String>,
    /// Event counts reported by `simulate`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub events: Option<EventCounts>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventCounts {
    pub firings: usize,
    pub self_loops: usize,
    pub swaps: usize,
}

impl ExperimentManifest {
    pub fn new(subcommand: Experiment, config: RunConfig) -> Result<Self, CliError> {
        let config = config.resolve(subcommand)?;
        Ok(ExperimentManifest {
            subcommand,
            seed: config.seed(),
            config,
            version: permuton_core::ARTIFACT_VERSION.to_string(),
            outputs: Vec::new(),
            events: None,
        })
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let mut manifest: ExperimentManifest =
            serde_json::from_str(text).map_err(|e| CliError::Config(format!("manifest: {e}")))?;
        if manifest.version != permuton_core::ARTIFACT_VERSION {
            return Err(CliError::Config(format!(
                "manifest version {} does not match this build ({})",
                manifest.version,
                permuton_core::ARTIFACT_VERSION
            )));
        }
        if manifest.config.seed.is_some_and(|s| s != manifest.seed) {
            return Err(CliError::Config("manifest seed disagrees with config seed".into()));
        }
        manifest.config.seed = Some(manifest.seed);
        manifest.config = manifest.config.resolve(manifest.subcommand)?;
        Ok(manifest)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_config_file() {
        let file = RunConfig::from_json(r#"{"n": [16], "reps": 5, "T": [2.0]}"#).unwrap();
        let flags = RunConfig {
            reps: Some(9),
            ..Default::default()
        };
        let merged = flags.over(file);
        assert_eq!(merged.reps, Some(9));
        assert_eq!(merged.n, Some(vec![16]));
        assert_eq!(merged.horizons, Some(vec![2.0]));
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(RunConfig::from_json(r#"{"n": [16], "repz": 5}"#).is_err());
    }

    #[test]
    fn profile_dsl_parses() {
        let c = RunConfig::from_json(r#"{"profile": {"type": "atoms", "positions": [0.25, 0.75]}}"#).unwrap();
        assert_eq!(
            c.profile,
            Some(Profile::Atoms {
                positions: vec![0.25, 0.75]
            })
        );
        let bad = RunConfig::from_json(r#"{"profile": {"type": "indicator", "support": [0.6, 0.2]}}"#).unwrap();
        assert!(bad.resolve(Experiment::Hydrodynamic).is_err());
    }

    #[test]
    fn manifest_round_trips() {
        let m = ExperimentManifest::new(Experiment::Visits, RunConfig::default()).unwrap();
        let text = serde_json::to_string_pretty(&m).unwrap();
        assert_eq!(ExperimentManifest::from_json(&text).unwrap(), m);
        assert!(text.contains("\"verify visits\""));
    }
}
