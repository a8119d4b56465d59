//! Keyed random streams.
//!
//! Every stream is a ChaCha8 generator whose 256-bit key is
//!
//! ```text
//! SHA-256( "permuton/stream/v1" || master_seed || experiment || replicate || edge || family )
//! ```
//!
//! with integers encoded little-endian (`u64`, `u64`, `u64`, `i64`, one byte
//! for the family). Streams are therefore derivable from their label alone:
//! no generator is ever shared between replicates or edges, and the output
//! of a replicate does not depend on which worker thread runs it.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Exp1, Poisson};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{invalid, Error, Result};

const DOMAIN_TAG: &[u8] = b"permuton/stream/v1";

/// Generator type handed out by [`StreamKey::rng`].
pub type StreamRng = ChaCha8Rng;

/// The two Poisson families of the coupling construction: the clocks that
/// drive the interchange process and the independent clocks that drive the
/// decoupled walk.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StreamFamily {
    Primary,
    Auxiliary,
}

impl StreamFamily {
    fn tag(self) -> u8 {
        match self {
            StreamFamily::Primary => 0,
            StreamFamily::Auxiliary => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StreamKey {
    pub master_seed: u64,
    pub experiment: u64,
    pub replicate: u64,
    pub edge: i64,
    pub family: StreamFamily,
}

/// Stable 64-bit id for a named experiment.
pub fn experiment_id(name: &str) -> u64 {
    let digest = Sha256::digest(name.as_bytes());
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

impl StreamKey {
    pub fn new(master_seed: u64, experiment: &str) -> Self {
        StreamKey {
            master_seed,
            experiment: experiment_id(experiment),
            replicate: 0,
            edge: 0,
            family: StreamFamily::Primary,
        }
    }

    pub fn with_replicate(self, replicate: u64) -> Self {
        StreamKey { replicate, ..self }
    }

    pub fn with_edge(self, edge: i64) -> Self {
        StreamKey { edge, ..self }
    }

    pub fn with_family(self, family: StreamFamily) -> Self {
        StreamKey { family, ..self }
    }

    /// Re-labels the key for a sub-experiment, keeping the master seed.
    pub fn derive(self, experiment: &str) -> Self {
        let mut hasher = Sha256::new();
        hasher.update(self.experiment.to_le_bytes());
        hasher.update(experiment.as_bytes());
        let digest = hasher.finalize();
        let mut bytes = [0u8; 8];
        bytes.copy_from_slice(&digest[..8]);
        StreamKey {
            experiment: u64::from_le_bytes(bytes),
            ..self
        }
    }

    pub fn seed_bytes(&self) -> [u8; 32] {
        let mut hasher = Sha256::new();
        hasher.update(DOMAIN_TAG);
        hasher.update(self.master_seed.to_le_bytes());
        hasher.update(self.experiment.to_le_bytes());
        hasher.update(self.replicate.to_le_bytes());
        hasher.update(self.edge.to_le_bytes());
        hasher.update([self.family.tag()]);
        hasher.finalize().into()
    }

    pub fn rng(&self) -> StreamRng {
        ChaCha8Rng::from_seed(self.seed_bytes())
    }
}

/// Firing times of one Poisson clock on a window `[start, end)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventStream {
    pub rate: f64,
    pub start: f64,
    pub end: f64,
    events: Vec<f64>,
}

impl EventStream {
    pub fn events(&self) -> &[f64] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn into_events(self) -> Vec<f64> {
        self.events
    }

    /// Checks the stream invariants: strictly increasing and inside the window.
    pub fn is_valid(&self) -> bool {
        self.events.windows(2).all(|w| w[0] < w[1]) && self.events.iter().all(|&t| t >= self.start && t < self.end)
    }
}

fn check_rate(rate: f64) -> Result<()> {
    if rate.is_finite() && rate > 0.0 {
        Ok(())
    } else {
        Err(invalid(format!("rate must be positive and finite, got {rate}")))
    }
}

/// Exp(rate) waiting time drawn from an existing generator.
#[inline]
pub fn exp_gap<R: Rng + ?Sized>(rng: &mut R, rate: f64) -> f64 {
    let e: f64 = Exp1.sample(rng);
    e / rate
}

/// Poisson(mean) count drawn from an existing generator; `mean == 0` gives 0.
pub fn poisson_count<R: Rng + ?Sized>(rng: &mut R, mean: f64) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    let dist = Poisson::new(mean).expect("finite positive Poisson mean");
    dist.sample(rng) as u64
}

/// Sum of `steps` independent fair ±1 increments.
pub fn symmetric_steps<R: Rng + ?Sized>(rng: &mut R, steps: u64) -> i64 {
    if steps == 0 {
        return 0;
    }
    let heads = Binomial::new(steps, 0.5).expect("valid binomial").sample(rng);
    2 * heads as i64 - steps as i64
}

/// One Exp(rate) waiting time from the stream named by `key`.
pub fn exponential_sample(rate: f64, key: &StreamKey) -> Result<f64> {
    check_rate(rate)?;
    Ok(exp_gap(&mut key.rng(), rate))
}

/// Poisson clock on `[t0, t1)` built from cumulative exponential gaps.
pub fn poisson_events(rate: f64, t0: f64, t1: f64, key: &StreamKey) -> Result<EventStream> {
    if !(t0.is_finite() && t1.is_finite()) || t0 > t1 {
        return Err(Error::InvalidWindow { t0, t1 });
    }
    if !(rate.is_finite() && rate >= 0.0) {
        return Err(invalid(format!("rate must be nonnegative and finite, got {rate}")));
    }
    let mut events = Vec::new();
    if rate > 0.0 {
        let mut rng = key.rng();
        let mut t = t0;
        loop {
            let next = t + exp_gap(&mut rng, rate);
            if next >= t1 {
                break;
            }
            // gaps below float resolution would break strict ordering
            if next > t {
                events.push(next);
            }
            t = next;
        }
    }
    Ok(EventStream {
        rate,
        start: t0,
        end: t1,
        events,
    })
}

/// Keeps each event independently with probability `keep_probability`.
pub fn thin_stream(stream: &EventStream, keep_probability: f64, key: &StreamKey) -> Result<EventStream> {
    if !(0.0..=1.0).contains(&keep_probability) {
        return Err(invalid(format!(
            "keep probability must lie in [0, 1], got {keep_probability}"
        )));
    }
    let events = if keep_probability == 1.0 {
        stream.events.clone()
    } else if keep_probability == 0.0 {
        Vec::new()
    } else {
        let mut rng = key.rng();
        stream
            .events
            .iter()
            .copied()
            .filter(|_| rng.random::<f64>() < keep_probability)
            .collect()
    };
    Ok(EventStream {
        rate: stream.rate * keep_probability,
        start: stream.start,
        end: stream.end,
        events,
    })
}

/// Merges two streams on the same window. Equal times keep `a` first and
/// collapse to one event so the result stays strictly increasing.
pub fn superpose(a: &EventStream, b: &EventStream) -> Result<EventStream> {
    if a.start != b.start || a.end != b.end {
        return Err(Error::Mismatch("superposed streams need equal windows".into()));
    }
    let mut events = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        let take_a = j >= b.len() || (i < a.len() && a.events[i] <= b.events[j]);
        let t = if take_a {
            i += 1;
            a.events[i - 1]
        } else {
            j += 1;
            b.events[j - 1]
        };
        if events.last().is_none_or(|&last| t > last) {
            events.push(t);
        }
    }
    Ok(EventStream {
        rate: a.rate + b.rate,
        start: a.start,
        end: a.end,
        events,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn key() -> StreamKey {
        StreamKey::new(11, "rng-tests")
    }

    #[test]
    fn same_label_same_stream() {
        let a = poisson_events(1.0, 0.0, 50.0, &key().with_edge(3)).unwrap();
        let b = poisson_events(1.0, 0.0, 50.0, &key().with_edge(3)).unwrap();
        assert_eq!(a, b);
        let c = poisson_events(1.0, 0.0, 50.0, &key().with_edge(4)).unwrap();
        assert_ne!(a.events(), c.events());
    }

    #[test]
    fn family_changes_stream() {
        let k = key();
        assert_ne!(k.seed_bytes(), k.with_family(StreamFamily::Auxiliary).seed_bytes());
    }

    #[test]
    fn exponential_rejects_bad_rates() {
        assert!(exponential_sample(0.0, &key()).is_err());
        assert!(exponential_sample(-1.0, &key()).is_err());
        assert!(exponential_sample(f64::NAN, &key()).is_err());
        assert!(exponential_sample(2.0, &key()).unwrap() > 0.0);
    }

    #[test]
    fn zero_rate_gives_empty_stream() {
        let s = poisson_events(0.0, 0.0, 1e6, &key()).unwrap();
        assert!(s.is_empty());
        assert!(s.is_valid());
    }

    #[test]
    fn reversed_window_is_an_error() {
        assert_eq!(
            poisson_events(1.0, 2.0, 1.0, &key()),
            Err(Error::InvalidWindow { t0: 2.0, t1: 1.0 })
        );
    }

    #[test]
    fn thinning_extremes() {
        let s = poisson_events(1.0, 0.0, 100.0, &key()).unwrap();
        assert_eq!(thin_stream(&s, 1.0, &key()).unwrap().events(), s.events());
        assert!(thin_stream(&s, 0.0, &key()).unwrap().is_empty());
        assert!(thin_stream(&s, 1.5, &key()).is_err());
        assert!(thin_stream(&s, -0.1, &key()).is_err());
        let half = thin_stream(&s, 0.5, &key()).unwrap();
        assert!(half.events().iter().all(|t| s.events().contains(t)));
        assert!(half.is_valid());
    }

    #[test]
    fn superposition_is_sorted_union() {
        let a = poisson_events(1.0, 0.0, 30.0, &key().with_edge(1)).unwrap();
        let b = poisson_events(2.0, 0.0, 30.0, &key().with_edge(2)).unwrap();
        let m = superpose(&a, &b).unwrap();
        assert!(m.is_valid());
        assert_eq!(m.len(), a.len() + b.len());
        assert_eq!(m.rate, 3.0);
    }

    #[test]
    fn symmetric_steps_parity() {
        let mut rng = key().rng();
        for steps in 0..40u64 {
            let d = symmetric_steps(&mut rng, steps);
            assert!(d.unsigned_abs() <= steps);
            assert_eq!((d - steps as i64).rem_euclid(2), 0);
        }
    }
}
