//! Piecewise-constant, right-continuous trajectories.

use std::collections::VecDeque;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// A càdlàg step function on `[0, horizon]`.
///
/// `jumps` holds `(time, new_value)` pairs with strictly increasing times in
/// `(0, horizon]`. A jump may repeat the previous value; such entries record
/// events that did not move the particle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CadlagPath {
    initial: f64,
    jumps: Vec<(f64, f64)>,
    horizon: f64,
}

impl CadlagPath {
    pub fn constant(value: f64, horizon: f64) -> Self {
        CadlagPath {
            initial: value,
            jumps: Vec::new(),
            horizon: horizon.max(0.0),
        }
    }

    pub fn from_jumps(initial: f64, jumps: Vec<(f64, f64)>, horizon: f64) -> Result<Self> {
        if !(horizon.is_finite() && horizon >= 0.0) {
            return Err(invalid(format!(
                "horizon must be finite and nonnegative, got {horizon}"
            )));
        }
        let mut prev = 0.0;
        for &(t, _) in &jumps {
            if !(t > prev) || t > horizon {
                return Err(invalid(format!(
                    "jump times must be strictly increasing in (0, {horizon}], saw {t} after {prev}"
                )));
            }
            prev = t;
        }
        Ok(CadlagPath {
            initial,
            jumps,
            horizon,
        })
    }

    /// Appends a jump; used by simulators that emit times in order.
    pub(crate) fn push_jump(&mut self, t: f64, value: f64) {
        debug_assert!(t > self.jumps.last().map_or(0.0, |j| j.0) && t <= self.horizon);
        self.jumps.push((t, value));
    }

    pub fn initial_value(&self) -> f64 {
        self.initial
    }

    pub fn jumps(&self) -> &[(f64, f64)] {
        &self.jumps
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn final_value(&self) -> f64 {
        self.jumps.last().map_or(self.initial, |j| j.1)
    }

    /// Number of jumps at times `<= t`.
    fn jumps_up_to(&self, t: f64) -> usize {
        self.jumps.partition_point(|j| j.0 <= t)
    }

    fn value_after(&self, count: usize) -> f64 {
        if count == 0 {
            self.initial
        } else {
            self.jumps[count - 1].1
        }
    }

    /// Right-continuous evaluation.
    pub fn value_at(&self, t: f64) -> Result<f64> {
        self.check_time(t)?;
        Ok(self.value_after(self.jumps_up_to(t)))
    }

    /// Left limit `f(t-)`; equals `f(0)` at `t = 0`.
    pub fn left_limit(&self, t: f64) -> Result<f64> {
        self.check_time(t)?;
        Ok(self.value_after(self.jumps.partition_point(|j| j.0 < t)))
    }

    fn check_time(&self, t: f64) -> Result<()> {
        if t >= 0.0 && t <= self.horizon {
            Ok(())
        } else {
            Err(Error::OutOfRange {
                t,
                horizon: self.horizon,
            })
        }
    }

    /// Time change `t -> t / factor` and value map `v -> scale * v`, keeping
    /// only jumps at rescaled times `<= new_horizon`.
    pub fn rescale(&self, time_factor: f64, value_scale: f64, new_horizon: f64) -> Result<CadlagPath> {
        if new_horizon * time_factor > self.horizon * (1.0 + 1e-12) {
            return Err(Error::InsufficientHorizon {
                needed: new_horizon * time_factor,
                available: self.horizon,
            });
        }
        let jumps = self
            .jumps
            .iter()
            .map(|&(t, v)| (t / time_factor, v * value_scale))
            .take_while(|&(t, _)| t <= new_horizon)
            .collect();
        CadlagPath::from_jumps(self.initial * value_scale, jumps, new_horizon)
    }

    /// Applies `f` to every value, keeping the time skeleton.
    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> CadlagPath {
        CadlagPath {
            initial: f(self.initial),
            jumps: self.jumps.iter().map(|&(t, v)| (t, f(v))).collect(),
            horizon: self.horizon,
        }
    }

    /// Values taken on `[0, horizon]`, in time order.
    fn values_until(&self, horizon: f64) -> impl Iterator<Item = f64> + '_ {
        std::iter::once(self.initial).chain(self.jumps.iter().take_while(move |j| j.0 <= horizon).map(|j| j.1))
    }

    /// `(min, max)` of the path over `[0, horizon]`.
    pub fn range(&self, horizon: f64) -> Result<(f64, f64)> {
        self.check_time(horizon)?;
        Ok(self
            .values_until(horizon)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v))))
    }

    /// CSV with header `time,value`; the first row is `(0, initial_value)`.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(24 * (self.jumps.len() + 2));
        out.push_str("time,value\n");
        let _ = writeln!(out, "0,{}", self.initial);
        for &(t, v) in &self.jumps {
            let _ = writeln!(out, "{t},{v}");
        }
        out
    }
}

/// Exact `sup_{0 <= t <= horizon} |a(t) - b(t)|`.
///
/// Both paths are constant between consecutive points of the merged jump
/// skeleton, so the supremum is a maximum over that skeleton.
pub fn sup_distance(a: &CadlagPath, b: &CadlagPath, horizon: f64) -> Result<f64> {
    if a.horizon != b.horizon {
        return Err(Error::HorizonMismatch {
            left: a.horizon,
            right: b.horizon,
        });
    }
    a.check_time(horizon)?;
    let (ja, jb) = (a.jumps(), b.jumps());
    let (mut i, mut k) = (0, 0);
    let (mut va, mut vb) = (a.initial, b.initial);
    let mut best = (va - vb).abs();
    loop {
        let ta = ja.get(i).map_or(f64::INFINITY, |j| j.0);
        let tb = jb.get(k).map_or(f64::INFINITY, |j| j.0);
        let t = ta.min(tb);
        if t > horizon {
            break;
        }
        if ta == t {
            va = ja[i].1;
            i += 1;
        }
        if tb == t {
            vb = jb[k].1;
            k += 1;
        }
        best = best.max((va - vb).abs());
    }
    Ok(best)
}

/// `sup { |f(t) - f(s)| : s, t in [0, horizon], |t - s| <= delta }`.
///
/// Pieces `k..=m` of the path (piece `p` starts at the `p`-th jump) are seen
/// together by some admissible window iff `m == k` or
/// `tau_m - tau_{k+1} < delta`. A two-pointer sweep over the jump times with
/// monotone deques for the running max and min gives the supremum in linear
/// time.
pub fn oscillation_modulus(path: &CadlagPath, horizon: f64, delta: f64) -> Result<f64> {
    if !(delta > 0.0) {
        return Err(invalid(format!("delta must be positive, got {delta}")));
    }
    path.check_time(horizon)?;
    let jumps = &path.jumps[..path.jumps_up_to(horizon)];
    let value = |p: usize| path.value_after(p);
    let mut max_q: VecDeque<usize> = VecDeque::new();
    let mut min_q: VecDeque<usize> = VecDeque::new();
    max_q.push_back(0);
    min_q.push_back(0);
    // `left` is the first piece of the current window
    let mut left = 0usize;
    let mut best: f64 = 0.0;
    for m in 1..=jumps.len() {
        let v = value(m);
        while max_q.back().is_some_and(|&p| value(p) <= v) {
            max_q.pop_back();
        }
        max_q.push_back(m);
        while min_q.back().is_some_and(|&p| value(p) >= v) {
            min_q.pop_back();
        }
        min_q.push_back(m);
        // piece `left` may stay only if tau_m - tau_{left+1} < delta
        while left + 1 < m && jumps[m - 1].0 - jumps[left].0 >= delta {
            left += 1;
        }
        while max_q.front().is_some_and(|&p| p < left) {
            max_q.pop_front();
        }
        while min_q.front().is_some_and(|&p| p < left) {
            min_q.pop_front();
        }
        let spread = value(*max_q.front().unwrap()) - value(*min_q.front().unwrap());
        best = best.max(spread);
    }
    Ok(best)
}
