//! The coupled triple `(S1, S2, S3)` on `Z`.
//!
//! `(S1, S2)` are two tracked particles of the interchange process on `Z`
//! (edge rate 1/2). `S3` starts with `S2` and copies each of its increments
//! while the pair is apart; while the pair is adjacent `S3` is instead driven
//! by an independent auxiliary clock of rate 1 (half per neighbouring edge).
//! Which rule applies is decided by the state just before an event, so the
//! move that ends an adjacency excursion is not copied. This keeps `S3` a
//! rate-1 walk independent of `S1`; as a consequence `S3 - S2` can change at
//! the exit time `tau+` itself, i.e. its jumps lie in `(tau, tau+]`.
//!
//! Pair events are generated by uniformisation: four slots (particle x side)
//! of rate 1/2 each. When the particles are adjacent the shared edge would be
//! clocked twice; the slot belonging to the right-hand particle is a no-op.
//!
//! Far from adjacency the experiments advance in exact leaps: with
//! `|S2 - S1| = d` no `d - 2` moves can make the pair adjacent, so a
//! Poisson number `K <= d - 2` of moves is applied through binomial
//! displacements. Leaps are never used when full paths are recorded.

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::interchange::fold_lattice;
use crate::parallel::map_replicates;
use crate::path::CadlagPath;
use crate::rng::{exp_gap, poisson_count, symmetric_steps, StreamFamily, StreamKey, StreamRng};
use crate::stats::{two_sample_joint_test, JointTestResult, MeanEstimate, PermutationPlan};
use crate::verdict::TableRow;
use crate::walks::sample_displacement;

const LEAP_MIN_GAP: i64 = 6;

/// Entry and exit times of the adjacency excursions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExcursionLedger {
    tau: Vec<f64>,
    tau_plus: Vec<f64>,
    horizon: f64,
}

impl ExcursionLedger {
    pub fn tau(&self) -> &[f64] {
        &self.tau
    }

    /// Exit times of completed excursions; one shorter than `tau` when an
    /// excursion is still running at the horizon.
    pub fn tau_plus(&self) -> &[f64] {
        &self.tau_plus
    }

    /// Index of the first excursion whose exit lies beyond the horizon.
    pub fn j(&self) -> usize {
        self.tau_plus.len() + 1
    }

    /// Whether `t` lies in the critical set, the union of `[tau_j, tau_j+)`.
    pub fn contains(&self, t: f64) -> bool {
        let k = self.tau.partition_point(|&s| s <= t);
        k > 0 && self.tau_plus.get(k - 1).is_none_or(|&e| t < e)
    }

    /// Whether the pair was adjacent just before `t`, i.e. `t` lies in some
    /// `(tau_j, tau_j+]`.
    pub fn contains_left(&self, t: f64) -> bool {
        let k = self.tau.partition_point(|&s| s < t);
        k > 0 && self.tau_plus.get(k - 1).is_none_or(|&e| t <= e)
    }

    pub fn is_interleaved(&self) -> bool {
        let n = self.tau.len();
        if !(self.tau_plus.len() == n || self.tau_plus.len() + 1 == n) {
            return false;
        }
        let mut last = f64::NEG_INFINITY;
        for k in 0..n {
            let start_ok = if k == 0 { self.tau[0] >= 0.0 } else { self.tau[k] > last };
            if !start_ok {
                return false;
            }
            last = self.tau[k];
            if let Some(&e) = self.tau_plus.get(k) {
                if e <= last {
                    return false;
                }
                last = e;
            }
        }
        true
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoupledTriple {
    pub s1: CadlagPath,
    pub s2: CadlagPath,
    pub s3: CadlagPath,
    pub ledger: ExcursionLedger,
    /// Displacement `|S2(tau+) - S2(tau)|` of each completed excursion.
    pub displacements: Vec<u32>,
    pub starts: (i64, i64),
    pub horizon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExcursionStats {
    pub j: usize,
    pub occupied_time: f64,
    pub displacements: Vec<u32>,
}

struct Recording {
    s1: CadlagPath,
    s2: CadlagPath,
    s3: CadlagPath,
    tau: Vec<f64>,
    tau_plus: Vec<f64>,
    displacements: Vec<u32>,
}

struct Watch {
    n: usize,
    /// Lattice distance that must be exceeded.
    threshold: f64,
    exceeded: bool,
}

struct Engine {
    s1: i64,
    s2: i64,
    s3: i64,
    t: f64,
    adjacent: bool,
    aux_next: f64,
    entry_time: f64,
    entry_s2: i64,
    completed: usize,
    occupied: f64,
    pair_rng: StreamRng,
    aux_rng: StreamRng,
    record: Option<Recording>,
    watch: Option<Watch>,
}

impl Engine {
    fn new(i: i64, j: i64, key: &StreamKey, record_horizon: Option<f64>) -> Self {
        let record = record_horizon.map(|h| Recording {
            s1: CadlagPath::constant(i as f64, h),
            s2: CadlagPath::constant(j as f64, h),
            s3: CadlagPath::constant(j as f64, h),
            tau: Vec::new(),
            tau_plus: Vec::new(),
            displacements: Vec::new(),
        });
        let mut engine = Engine {
            s1: i,
            s2: j,
            s3: j,
            t: 0.0,
            adjacent: false,
            aux_next: f64::INFINITY,
            entry_time: 0.0,
            entry_s2: j,
            completed: 0,
            occupied: 0.0,
            pair_rng: key.with_family(StreamFamily::Primary).rng(),
            aux_rng: key.with_family(StreamFamily::Auxiliary).rng(),
            record,
            watch: None,
        };
        if (i - j).abs() == 1 {
            engine.enter(0.0);
        }
        engine
    }

    fn enter(&mut self, t: f64) {
        self.adjacent = true;
        self.entry_time = t;
        self.entry_s2 = self.s2;
        self.aux_next = t + exp_gap(&mut self.aux_rng, 1.0);
        if let Some(rec) = &mut self.record {
            rec.tau.push(t);
        }
    }

    fn exit(&mut self, t: f64) {
        self.adjacent = false;
        self.aux_next = f64::INFINITY;
        self.completed += 1;
        self.occupied += t - self.entry_time;
        if let Some(rec) = &mut self.record {
            rec.tau_plus.push(t);
            rec.displacements.push((self.s2 - self.entry_s2).unsigned_abs() as u32);
        }
    }

    fn check_watch(&mut self) {
        if let Some(w) = &mut self.watch {
            if !w.exceeded {
                let gap = fold_lattice(self.s2, w.n).abs_diff(fold_lattice(self.s3, w.n));
                w.exceeded = gap as f64 > w.threshold;
            }
        }
    }

    fn fire_pair(&mut self, t: f64) {
        let slot: u8 = self.pair_rng.random_range(0..4);
        let dir = if slot.is_multiple_of(2) { 1 } else { -1 };
        let (old1, old2, old3) = (self.s1, self.s2, self.s3);
        let (x, other) = if slot < 2 {
            (self.s1, self.s2)
        } else {
            (self.s2, self.s1)
        };
        if x + dir == other {
            if dir == -1 {
                // the shared edge's clock belongs to the left-hand particle
                return;
            }
            std::mem::swap(&mut self.s1, &mut self.s2);
        } else if slot < 2 {
            self.s1 += dir;
        } else {
            self.s2 += dir;
        }
        let was = self.adjacent;
        if !was {
            self.s3 += self.s2 - old2;
        }
        if let Some(rec) = &mut self.record {
            for (path, old, new) in [
                (&mut rec.s1, old1, self.s1),
                (&mut rec.s2, old2, self.s2),
                (&mut rec.s3, old3, self.s3),
            ] {
                if old != new {
                    path.push_jump(t, new as f64);
                }
            }
        }
        let now = (self.s1 - self.s2).abs() == 1;
        match (was, now) {
            (false, true) => self.enter(t),
            (true, false) => self.exit(t),
            _ => {}
        }
        self.check_watch();
    }

    fn fire_aux(&mut self, t: f64) {
        self.s3 += if self.aux_rng.random::<bool>() { 1 } else { -1 };
        if let Some(rec) = &mut self.record {
            rec.s3.push_jump(t, self.s3 as f64);
        }
        self.aux_next = t + exp_gap(&mut self.aux_rng, 1.0);
        self.check_watch();
    }

    fn flush_aux(&mut self, until: f64) {
        while self.adjacent && self.aux_next <= until {
            let t = self.aux_next;
            self.fire_aux(t);
        }
    }

    fn can_leap(&self) -> bool {
        self.record.is_none()
            && !self.adjacent
            && (self.s2 - self.s1).abs() >= LEAP_MIN_GAP
            && self
                .watch
                .as_ref()
                .is_none_or(|w| w.exceeded || (self.s3 - self.s2).abs() as f64 <= w.threshold)
    }

    fn leap(&mut self, t_stop: f64) {
        let room = (self.s2 - self.s1).abs() - 2;
        let dt = (t_stop - self.t).min(room as f64 / 4.0);
        let k = poisson_count(&mut self.pair_rng, 2.0 * dt);
        if k <= room as u64 {
            let k1 = if k == 0 {
                0
            } else {
                Binomial::new(k, 0.5)
                    .expect("valid binomial")
                    .sample(&mut self.pair_rng)
            };
            let d1 = symmetric_steps(&mut self.pair_rng, k1);
            let d2 = symmetric_steps(&mut self.pair_rng, k - k1);
            self.s1 += d1;
            self.s2 += d2;
            self.s3 += d2;
        } else {
            // too many moves to rule out adjacency: replay them one by one
            let start = self.t;
            let mut times: Vec<f64> = (0..k).map(|_| start + dt * self.pair_rng.random::<f64>()).collect();
            times.sort_by(f64::total_cmp);
            for te in times {
                self.flush_aux(te);
                self.fire_pair(te);
            }
            self.flush_aux(start + dt);
        }
        self.t += dt;
    }

    /// Advances to `t_stop`; the state then reflects all events up to and
    /// including `t_stop`.
    fn run_until(&mut self, t_stop: f64) {
        while self.t < t_stop {
            if self.can_leap() {
                self.leap(t_stop);
                continue;
            }
            let te = self.t + exp_gap(&mut self.pair_rng, 2.0);
            self.flush_aux(te.min(t_stop));
            if te > t_stop {
                self.t = t_stop;
                break;
            }
            self.fire_pair(te);
            self.t = te;
        }
    }

    /// Completed excursion count plus one, and time spent adjacent.
    fn excursion_summary(&self) -> (usize, f64) {
        let running = if self.adjacent { self.t - self.entry_time } else { 0.0 };
        (self.completed + 1, self.occupied + running)
    }
}

fn check_starts(i: i64, j: i64, horizon: f64) -> Result<()> {
    if i == j {
        return Err(invalid("the two tracked particles need distinct starts"));
    }
    if !(horizon.is_finite() && horizon >= 0.0) {
        return Err(invalid("horizon must be finite and nonnegative"));
    }
    Ok(())
}

/// Event-by-event simulation of the triple with full paths and ledger.
pub fn simulate_coupled_triple(i: i64, j: i64, horizon: f64, key: &StreamKey) -> Result<CoupledTriple> {
    check_starts(i, j, horizon)?;
    let mut engine = Engine::new(i, j, key, Some(horizon));
    engine.run_until(horizon);
    let rec = engine.record.expect("recording engine");
    Ok(CoupledTriple {
        s1: rec.s1,
        s2: rec.s2,
        s3: rec.s3,
        ledger: ExcursionLedger {
            tau: rec.tau,
            tau_plus: rec.tau_plus,
            horizon,
        },
        displacements: rec.displacements,
        starts: (i, j),
        horizon,
    })
}

/// `J`, the time spent adjacent before `horizon`, and the S2 displacement of
/// each excursion completed by then.
pub fn excursion_stats(triple: &CoupledTriple, horizon: f64) -> Result<ExcursionStats> {
    if !(0.0..=triple.horizon).contains(&horizon) {
        return Err(Error::OutOfRange {
            t: horizon,
            horizon: triple.horizon,
        });
    }
    let ledger = &triple.ledger;
    let completed = ledger.tau_plus.iter().take_while(|&&e| e <= horizon).count();
    let mut occupied: f64 = (0..completed).map(|k| ledger.tau_plus[k] - ledger.tau[k]).sum();
    if let Some(&start) = ledger.tau.get(completed) {
        if horizon > start {
            occupied += horizon - start;
        }
    }
    Ok(ExcursionStats {
        j: completed + 1,
        occupied_time: occupied,
        displacements: triple.displacements[..completed].to_vec(),
    })
}

/// Checks the pathwise properties of the construction:
///
/// * the ledger interleaves strictly,
/// * `|S1 - S2| = 1` exactly on the critical set,
/// * `S3 - S2` is constant on every interval `[tau_j+, tau_{j+1})`,
/// * every excursion moves `S2` by at most 2.
pub fn verify_triple(triple: &CoupledTriple) -> Result<()> {
    let ledger = &triple.ledger;
    if !ledger.is_interleaved() {
        return Err(Error::Mismatch("excursion times do not interleave".into()));
    }
    let mut times: Vec<f64> = std::iter::once(0.0)
        .chain(triple.s1.jumps().iter().map(|j| j.0))
        .chain(triple.s2.jumps().iter().map(|j| j.0))
        .chain(triple.s3.jumps().iter().map(|j| j.0))
        .chain(ledger.tau.iter().copied())
        .chain(ledger.tau_plus.iter().copied())
        .collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    let gap = |p: &CadlagPath, q: &CadlagPath, t: f64| -> Result<f64> { Ok(p.value_at(t)? - q.value_at(t)?) };
    for &t in &times {
        let adjacent = gap(&triple.s1, &triple.s2, t)?.abs() == 1.0;
        if adjacent != ledger.contains(t) {
            return Err(Error::Mismatch(format!(
                "adjacency at time {t} disagrees with the critical set"
            )));
        }
        let before = triple.s3.left_limit(t)? - triple.s2.left_limit(t)?;
        let after = gap(&triple.s3, &triple.s2, t)?;
        if t > 0.0 && before != after && !ledger.contains_left(t) {
            return Err(Error::Mismatch(format!("S3 - S2 jumps at {t} outside an excursion")));
        }
    }
    if let Some(d) = triple.displacements.iter().find(|&&d| d > 2) {
        return Err(Error::Mismatch(format!("excursion displaced S2 by {d}")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReturnsRow {
    pub horizon: f64,
    pub gap: i64,
    pub reps: usize,
    pub mean_j: f64,
    pub se_j: f64,
    pub mean_occupied: f64,
    pub se_occupied: f64,
    /// `10 sqrt(T)`
    pub bound: f64,
}

/// Monte Carlo means of `J` and of the time spent adjacent, starting the
/// pair at `0` and `gap`.
pub fn returns_experiment(gap: i64, horizon: f64, reps: usize, key: &StreamKey, workers: usize) -> Result<ReturnsRow> {
    check_starts(0, gap, horizon)?;
    if reps == 0 {
        return Err(invalid("reps must be positive"));
    }
    let key = key.derive(&format!("returns/{gap}/{horizon}"));
    let out = map_replicates(reps, workers, |r| {
        let mut engine = Engine::new(0, gap, &key.with_replicate(r as u64), None);
        engine.run_until(horizon);
        let (j, occ) = engine.excursion_summary();
        (j as f64, occ)
    });
    let js: Vec<f64> = out.iter().map(|o| o.0).collect();
    let occ: Vec<f64> = out.iter().map(|o| o.1).collect();
    let (ej, eo) = (MeanEstimate::from_samples(&js), MeanEstimate::from_samples(&occ));
    Ok(ReturnsRow {
        horizon,
        gap,
        reps,
        mean_j: ej.mean,
        se_j: ej.std_error,
        mean_occupied: eo.mean,
        se_occupied: eo.std_error,
        bound: 10.0 * horizon.sqrt(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SecondMomentRow {
    pub horizon: f64,
    pub gap: i64,
    pub reps: usize,
    pub mean_diff: f64,
    pub se_diff: f64,
    pub mean_sq: f64,
    pub se_sq: f64,
    /// `mean_sq / sqrt(T)`
    pub scaled: f64,
}

/// Moments of `S3(T) - S2(T)` for the pair started at `0` and `gap`.
pub fn second_moment_experiment(
    gap: i64,
    horizon: f64,
    reps: usize,
    key: &StreamKey,
    workers: usize,
) -> Result<SecondMomentRow> {
    check_starts(0, gap, horizon)?;
    if reps == 0 || !(horizon > 0.0) {
        return Err(invalid("reps and horizon must be positive"));
    }
    let key = key.derive(&format!("second-moment/{gap}/{horizon}"));
    let diffs = map_replicates(reps, workers, |r| {
        let mut engine = Engine::new(0, gap, &key.with_replicate(r as u64), None);
        engine.run_until(horizon);
        (engine.s3 - engine.s2) as f64
    });
    let sq: Vec<f64> = diffs.iter().map(|d| d * d).collect();
    let (ed, es) = (MeanEstimate::from_samples(&diffs), MeanEstimate::from_samples(&sq));
    Ok(SecondMomentRow {
        horizon,
        gap,
        reps,
        mean_diff: ed.mean,
        se_diff: ed.std_error,
        mean_sq: es.mean,
        se_sq: es.std_error,
        scaled: es.mean / horizon.sqrt(),
    })
}

/// Default particle pairs: a pair a third of the graph apart and an
/// adjacent pair in the middle.
pub fn default_pairs(n: usize) -> Vec<(usize, usize)> {
    let mid = n.div_ceil(2);
    vec![(n.div_ceil(3), (2 * n).div_ceil(3)), (mid, mid + 1)]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationRow {
    pub n: usize,
    pub horizon: f64,
    pub reps: usize,
    pub pair: String,
    pub p_hat: f64,
    pub std_error: f64,
    /// `p_hat * sqrt(n) / sqrt(T)`
    pub scaled: f64,
}

/// Estimates `P(sup_{t<=T} |T2(t) - T3(t)| > n^{-1/4})` with
/// `T_k(t) = fold_lattice(S_k(n^2 t), n) / n`, for every pair.
pub fn concentration_experiment(
    n: usize,
    horizon: f64,
    reps: usize,
    pairs: &[(usize, usize)],
    key: &StreamKey,
    workers: usize,
) -> Result<Vec<ConcentrationRow>> {
    if n < 2 {
        return Err(invalid("n must be at least 2"));
    }
    if reps == 0 {
        return Err(invalid("reps must be positive"));
    }
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(invalid("horizon must be positive"));
    }
    let micro = (n * n) as f64 * horizon;
    let threshold = (n as f64).powf(0.75);
    let mut rows = Vec::with_capacity(pairs.len());
    for &(i, j) in pairs {
        if i == j || i == 0 || j == 0 || i > n || j > n {
            return Err(invalid(format!("pair ({i}, {j}) must be distinct vertices of 1..={n}")));
        }
        let key = key.derive(&format!("concentration/{n}/{horizon}/{i}-{j}"));
        let hits = map_replicates(reps, workers, |r| {
            let mut engine = Engine::new(i as i64, j as i64, &key.with_replicate(r as u64), None);
            engine.watch = Some(Watch {
                n,
                threshold,
                exceeded: false,
            });
            engine.run_until(micro);
            engine.watch.as_ref().is_some_and(|w| w.exceeded)
        });
        let est = MeanEstimate::from_indicators(hits.iter().filter(|&&h| h).count(), reps);
        let factor = (n as f64).sqrt() / horizon.sqrt();
        rows.push(ConcentrationRow {
            n,
            horizon,
            reps,
            pair: format!("{i}-{j}"),
            p_hat: est.mean,
            std_error: est.std_error,
            scaled: est.mean * factor,
        });
    }
    Ok(rows)
}

/// Folded, rescaled positions of the interchange pair started at `(i, j)` on
/// `P_n` at each macroscopic grid time.
pub fn pair_on_grid(n: usize, i: usize, j: usize, grid: &[f64], key: &StreamKey) -> (Vec<f64>, Vec<f64>) {
    let mut engine = Engine::new(i as i64, j as i64, key, None);
    let scale = (n * n) as f64;
    let mut a = Vec::with_capacity(grid.len());
    let mut b = Vec::with_capacity(grid.len());
    for &g in grid {
        engine.run_until(g * scale);
        a.push(fold_lattice(engine.s1, n) as f64 / n as f64);
        b.push(fold_lattice(engine.s2, n) as f64 / n as f64);
    }
    (a, b)
}

/// Folded, rescaled positions of a single particle started at `i`.
pub fn single_on_grid<R: Rng + ?Sized>(rng: &mut R, n: usize, i: usize, grid: &[f64]) -> Vec<f64> {
    let scale = (n * n) as f64;
    let mut x = i as i64;
    let mut last = 0.0;
    grid.iter()
        .map(|&g| {
            x += sample_displacement(rng, 1.0, (g - last) * scale);
            last = g;
            fold_lattice(x, n) as f64 / n as f64
        })
        .collect()
}

fn distinct_pair<R: Rng + ?Sized>(rng: &mut R, n: usize) -> (usize, usize) {
    let i = rng.random_range(1..=n);
    let mut j = rng.random_range(1..n);
    if j >= i {
        j += 1;
    }
    (i, j)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndependenceReport {
    pub n: usize,
    pub grid: Vec<f64>,
    /// Interchange pairs `(T_I, T_J)` against independent `(T_I, T'_J)`.
    pub null: JointTestResult,
    pub null_samples: usize,
    /// `(T_I, T_I)` against `(T_I, T'_I)`: a dependent alternative.
    pub power: JointTestResult,
    pub power_samples: usize,
}

fn validate_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() || grid.iter().any(|g| !(g.is_finite() && *g >= 0.0)) || grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("grid must be a nonempty increasing list of nonnegative times"));
    }
    Ok(())
}

/// Two-sample joint-law test of asymptotic independence of two particles,
/// with a synthetic power check. Particles are a uniformly random distinct
/// pair `(I, J)`.
pub fn independence_experiment(
    n: usize,
    grid: &[f64],
    samples: usize,
    power_samples: usize,
    plan: PermutationPlan,
    key: &StreamKey,
    workers: usize,
) -> Result<IndependenceReport> {
    if n < 2 || samples == 0 || power_samples == 0 {
        return Err(invalid("need n >= 2 and positive sample sizes"));
    }
    validate_grid(grid)?;
    let key = key.derive(&format!("independence/{n}"));
    let joined = |a: Vec<f64>, mut b: Vec<f64>| {
        let mut row = a;
        row.append(&mut b);
        row
    };
    let coupled_key = key.derive("coupled");
    let xy = map_replicates(samples, workers, |r| {
        let k = coupled_key.with_replicate(r as u64);
        let (i, j) = distinct_pair(&mut k.derive("labels").rng(), n);
        let (a, b) = pair_on_grid(n, i, j, grid, &k);
        joined(a, b)
    });
    let product_key = key.derive("product");
    let xz = map_replicates(samples, workers, |r| {
        let mut rng = product_key.with_replicate(r as u64).rng();
        let (i, j) = distinct_pair(&mut rng, n);
        let a = single_on_grid(&mut rng, n, i, grid);
        let b = single_on_grid(&mut rng, n, j, grid);
        joined(a, b)
    });
    let null = two_sample_joint_test(&xy, &xz, plan, &key.derive("null-test"))?;

    let same_key = key.derive("power-same");
    let copy_key = key.derive("power-copy");
    let xx = map_replicates(power_samples, workers, |r| {
        let mut rng = same_key.with_replicate(r as u64).rng();
        let i = rng.random_range(1..=n);
        let a = single_on_grid(&mut rng, n, i, grid);
        joined(a.clone(), a)
    });
    let xc = map_replicates(power_samples, workers, |r| {
        let mut rng = copy_key.with_replicate(r as u64).rng();
        let i = rng.random_range(1..=n);
        let a = single_on_grid(&mut rng, n, i, grid);
        let b = single_on_grid(&mut rng, n, i, grid);
        joined(a, b)
    });
    let power = two_sample_joint_test(&xx, &xc, plan, &key.derive("power-test"))?;
    Ok(IndependenceReport {
        n,
        grid: grid.to_vec(),
        null,
        null_samples: samples,
        power,
        power_samples,
    })
}

impl TableRow for ReturnsRow {
    fn header() -> &'static [&'static str] {
        &[
            "T",
            "gap",
            "reps",
            "mean_j",
            "se_j",
            "mean_occupied",
            "se_occupied",
            "bound",
        ]
    }
    fn fields(&self) -> Vec<String> {
        vec![
            self.horizon.to_string(),
            self.gap.to_string(),
            self.reps.to_string(),
            self.mean_j.to_string(),
            self.se_j.to_string(),
            self.mean_occupied.to_string(),
            self.se_occupied.to_string(),
            self.bound.to_string(),
        ]
    }
}

impl TableRow for SecondMomentRow {
    fn header() -> &'static [&'static str] {
        &["T", "gap", "reps", "mean_diff", "se_diff", "mean_sq", "se_sq", "scaled"]
    }
    fn fields(&self) -> Vec<String> {
        vec![
            self.horizon.to_string(),
            self.gap.to_string(),
            self.reps.to_string(),
            self.mean_diff.to_string(),
            self.se_diff.to_string(),
            self.mean_sq.to_string(),
            self.se_sq.to_string(),
            self.scaled.to_string(),
        ]
    }
}

impl TableRow for ConcentrationRow {
    fn header() -> &'static [&'static str] {
        &[
            "n",
            "T",
            "reps",
            "pair",
            "p_hat",
            "std_error",
            "p_hat_sqrt_n_over_sqrt_T",
        ]
    }
    fn fields(&self) -> Vec<String> {
        vec![
            self.n.to_string(),
            self.horizon.to_string(),
            self.reps.to_string(),
            self.pair.clone(),
            self.p_hat.to_string(),
            self.std_error.to_string(),
            self.scaled.to_string(),
        ]
    }
}
