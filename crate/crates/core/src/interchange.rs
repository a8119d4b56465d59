//! The interchange process on the path graph `P_n`.
//!
//! Edges are indexed `0..=n`: edge `0` is the self-loop at vertex 1, edge
//! `k` for `1 <= k < n` joins `k` and `k + 1`, and edge `n` is the self-loop
//! at vertex `n`. Every edge carries its own keyed Poisson clock.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::path::CadlagPath;
use crate::rng::{exp_gap, poisson_events, StreamKey};
use crate::stats::PointMeasure;

/// Folds `Z` onto `{1, ..., n}` by reflection with period `2n`.
pub fn fold_lattice(x: i64, n: usize) -> usize {
    let period = 2 * n as i64;
    let mut y = x.rem_euclid(period);
    if y == 0 {
        y = period;
    }
    if y <= n as i64 {
        y as usize
    } else {
        (period + 1 - y) as usize
    }
}

/// Folds `R` onto `[0, 1]` by reflection with period 2.
pub fn fold_real(x: f64) -> f64 {
    let mut y = x.rem_euclid(2.0);
    if y == 0.0 {
        y = 2.0;
    }
    if y <= 1.0 {
        y
    } else {
        2.0 - y
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathGraphConfig {
    pub n: usize,
    pub edge_rate: f64,
    /// Unrescaled (microscopic) time horizon.
    pub horizon_micro: f64,
}

impl PathGraphConfig {
    pub fn new(n: usize, edge_rate: f64, horizon_micro: f64) -> Result<Self> {
        let config = PathGraphConfig {
            n,
            edge_rate,
            horizon_micro,
        };
        config.validate()?;
        Ok(config)
    }

    /// Standard clocks (rate 1/2 per edge) run long enough to cover the
    /// macroscopic horizon `horizon` after diffusive rescaling.
    pub fn for_macro_horizon(n: usize, horizon: f64) -> Result<Self> {
        PathGraphConfig::new(n, 0.5, (n * n) as f64 * horizon)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(invalid("the path graph needs at least one vertex"));
        }
        if !(self.edge_rate.is_finite() && self.edge_rate > 0.0) {
            return Err(invalid("edge rate must be positive"));
        }
        if !(self.horizon_micro.is_finite() && self.horizon_micro >= 0.0) {
            return Err(invalid("horizon must be finite and nonnegative"));
        }
        Ok(())
    }

    pub fn edge_count(&self) -> usize {
        self.n + 1
    }

    /// Whether `edge` is one of the two endpoint self-loops.
    pub fn is_self_loop(&self, edge: usize) -> bool {
        edge == 0 || edge >= self.n
    }
}

/// Firing log of one interchange run. Particle `i` starts at vertex `i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PermutationTrajectory {
    config: PathGraphConfig,
    log: Vec<(f64, usize)>,
}

pub fn simulate_interchange(config: &PathGraphConfig, key: &StreamKey) -> Result<PermutationTrajectory> {
    config.validate()?;
    let mut log = Vec::new();
    for edge in 0..config.edge_count() {
        let stream = poisson_events(config.edge_rate, 0.0, config.horizon_micro, &key.with_edge(edge as i64))?;
        log.extend(stream.events().iter().map(|&t| (t, edge)));
    }
    log.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    Ok(PermutationTrajectory { config: *config, log })
}

impl PermutationTrajectory {
    pub fn config(&self) -> &PathGraphConfig {
        &self.config
    }

    pub fn n(&self) -> usize {
        self.config.n
    }

    pub fn horizon(&self) -> f64 {
        self.config.horizon_micro
    }

    /// Every firing `(time, edge)` in time order, self-loops included.
    pub fn swap_log(&self) -> &[(f64, usize)] {
        &self.log
    }

    pub fn event_count(&self) -> usize {
        self.log.len()
    }

    pub fn self_loop_count(&self) -> usize {
        self.log.iter().filter(|e| self.config.is_self_loop(e.1)).count()
    }

    /// Replays the log, calling `visit(time, positions)` at time 0 and after
    /// every firing. `positions[i - 1]` is the vertex of particle `i`.
    pub fn replay(&self, mut visit: impl FnMut(f64, &[usize])) {
        let n = self.n();
        let mut positions: Vec<usize> = (1..=n).collect();
        let mut occupants: Vec<usize> = (1..=n).collect();
        visit(0.0, &positions);
        for &(t, edge) in &self.log {
            if !self.config.is_self_loop(edge) {
                let (a, b) = (occupants[edge - 1], occupants[edge]);
                occupants.swap(edge - 1, edge);
                positions[a - 1] = edge + 1;
                positions[b - 1] = edge;
            }
            visit(t, &positions);
        }
    }

    /// Positions of all particles at micro time `t` (right-continuous).
    pub fn positions_at(&self, t: f64) -> Result<Vec<usize>> {
        if !(0.0..=self.horizon()).contains(&t) {
            return Err(Error::OutOfRange {
                t,
                horizon: self.horizon(),
            });
        }
        let mut out = Vec::new();
        let mut done = false;
        self.replay(|s, pos| {
            if !done && s <= t {
                out.clear();
                out.extend_from_slice(pos);
            } else {
                done = true;
            }
        });
        Ok(out)
    }

    /// Asserts that the positions form a permutation of `{1..n}` at time 0
    /// and after every firing.
    pub fn check_bijective(&self) -> Result<()> {
        let n = self.n();
        let mut failure = None;
        let mut seen = vec![false; n + 1];
        self.replay(|t, pos| {
            if failure.is_some() {
                return;
            }
            seen.iter_mut().for_each(|s| *s = false);
            for &p in pos {
                if p == 0 || p > n || seen[p] {
                    failure = Some(t);
                    return;
                }
                seen[p] = true;
            }
        });
        match failure {
            Some(t) => Err(Error::Mismatch(format!("positions are not a permutation at time {t}"))),
            None => Ok(()),
        }
    }

    /// Micro-time trajectory of particle `i` with integer vertex values.
    pub fn particle_path(&self, i: usize) -> Result<CadlagPath> {
        let n = self.n();
        if i == 0 || i > n {
            return Err(invalid(format!("particle {i} outside 1..={n}")));
        }
        let mut path = CadlagPath::constant(i as f64, self.horizon());
        let mut x = i;
        for &(t, edge) in &self.log {
            if self.config.is_self_loop(edge) {
                continue;
            }
            if x == edge {
                x += 1;
            } else if x == edge + 1 {
                x -= 1;
            } else {
                continue;
            }
            path.push_jump(t, x as f64);
        }
        Ok(path)
    }

    fn check_macro_horizon(&self, horizon: f64) -> Result<f64> {
        let needed = (self.n() * self.n()) as f64 * horizon;
        if needed > self.horizon() * (1.0 + 1e-12) {
            return Err(Error::InsufficientHorizon {
                needed,
                available: self.horizon(),
            });
        }
        Ok(needed)
    }

    /// Rescaled trajectories `T_i(t) = Int_{n^2 t}(i) / n` of all particles on
    /// `[0, horizon]`, computed in one pass over the log.
    pub fn rescaled_trajectories(&self, horizon: f64) -> Result<Vec<CadlagPath>> {
        let micro = self.check_macro_horizon(horizon)?;
        let n = self.n();
        let scale = (n * n) as f64;
        let mut paths: Vec<CadlagPath> = (1..=n)
            .map(|i| CadlagPath::constant(i as f64 / n as f64, horizon))
            .collect();
        let mut occupants: Vec<usize> = (1..=n).collect();
        for &(t, edge) in &self.log {
            if t > micro {
                break;
            }
            if self.config.is_self_loop(edge) {
                continue;
            }
            let macro_t = t / scale;
            let (a, b) = (occupants[edge - 1], occupants[edge]);
            occupants.swap(edge - 1, edge);
            paths[a - 1].push_jump(macro_t, (edge + 1) as f64 / n as f64);
            paths[b - 1].push_jump(macro_t, edge as f64 / n as f64);
        }
        Ok(paths)
    }
}

/// Rescaled trajectory of particle `i` on the macroscopic window `[0, horizon]`.
pub fn rescaled_trajectory(traj: &PermutationTrajectory, i: usize, horizon: f64) -> Result<CadlagPath> {
    traj.check_macro_horizon(horizon)?;
    let n = traj.n();
    Ok(traj
        .particle_path(i)?
        .rescale((n * n) as f64, 1.0, horizon)?
        .map_values(|v| v / n as f64))
}

/// `(1/n) sum_i delta_{T_i(t)}` over the given trajectories.
pub fn empirical_marginal(trajs: &[CadlagPath], t: f64) -> Result<PointMeasure> {
    if trajs.is_empty() {
        return Err(invalid("no trajectories"));
    }
    let atoms = trajs
        .iter()
        .map(|p| Ok((p.value_at(t)?, 1.0)))
        .collect::<Result<Vec<_>>>()?;
    PointMeasure::new(atoms)
}

/// Rescaled trajectory of particle `i` on `P_n`, produced by folding a rate-1
/// walk on `Z` started at `i`. Equal in law to the interchange trajectory.
pub fn cover_trajectory<R: Rng + ?Sized>(rng: &mut R, n: usize, i: usize, horizon: f64) -> CadlagPath {
    let scale = (n * n) as f64;
    let micro = scale * horizon;
    let mut path = CadlagPath::constant(i as f64 / n as f64, horizon);
    let mut x = i as i64;
    let mut site = i;
    let mut t = exp_gap(rng, 1.0);
    while t <= micro {
        x += if rng.random::<bool>() { 1 } else { -1 };
        let next = fold_lattice(x, n);
        if next != site {
            site = next;
            path.push_jump(t / scale, site as f64 / n as f64);
        }
        t += exp_gap(rng, 1.0);
    }
    path
}

/// Interchange process on `Z` (edge rate 1/2) restricted to the particles
/// started at `starts`. Only edges touching a tracked particle are clocked;
/// by memorylessness the next firing among them is redrawn after every event.
pub fn tracked_lattice_interchange(
    starts: &BTreeSet<i64>,
    horizon_micro: f64,
    key: &StreamKey,
) -> Result<BTreeMap<i64, CadlagPath>> {
    if !(horizon_micro.is_finite() && horizon_micro >= 0.0) {
        return Err(invalid("horizon must be finite and nonnegative"));
    }
    let mut rng = key.rng();
    let mut positions: Vec<i64> = starts.iter().copied().collect();
    let mut paths: Vec<CadlagPath> = positions
        .iter()
        .map(|&x| CadlagPath::constant(x as f64, horizon_micro))
        .collect();
    if positions.is_empty() {
        return Ok(BTreeMap::new());
    }
    let mut edges: Vec<i64> = Vec::with_capacity(2 * positions.len());
    let mut t = 0.0;
    loop {
        // edge e joins e and e + 1
        edges.clear();
        for &x in &positions {
            edges.push(x - 1);
            edges.push(x);
        }
        edges.sort_unstable();
        edges.dedup();
        t += exp_gap(&mut rng, 0.5 * edges.len() as f64);
        if t > horizon_micro {
            break;
        }
        let e = edges[rng.random_range(0..edges.len())];
        for (x, path) in positions.iter_mut().zip(paths.iter_mut()) {
            if *x == e {
                *x = e + 1;
            } else if *x == e + 1 {
                *x = e;
            } else {
                continue;
            }
            path.push_jump(t, *x as f64);
        }
    }
    Ok(starts.iter().copied().zip(paths).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn fold_examples() {
        assert_eq!(fold_lattice(4, 3), 3);
        assert_eq!(fold_lattice(0, 3), 1);
        assert_eq!(fold_lattice(-1, 3), 2);
        assert_eq!(fold_lattice(6, 3), 1);
        assert_eq!(fold_lattice(5, 1), 1);
        assert_eq!(fold_real(1.5), 0.5);
        assert!((fold_real(-0.3) - 0.3).abs() < 1e-15);
        assert_eq!(fold_real(2.0), 0.0);
        assert_eq!(fold_real(0.0), 0.0);
        assert_eq!(fold_real(1.0), 1.0);
    }

    #[test]
    fn fold_lattice_preserves_adjacency() {
        for n in 1..=8usize {
            for x in -50i64..50 {
                let (a, b) = (fold_lattice(x, n), fold_lattice(x + 1, n));
                let loop_at_end = a == b && (a == 1 || a == n);
                assert!(a.abs_diff(b) == 1 || loop_at_end, "n={n} x={x}: {a} {b}");
            }
        }
    }

    #[test]
    fn fold_lattice_tracks_fold_real() {
        for n in [2usize, 5, 10] {
            for k in -4 * n as i64..=4 * n as i64 {
                let lattice = fold_lattice(k, n) as f64 / n as f64;
                assert!((lattice - fold_real(k as f64 / n as f64)).abs() <= 1.0 / n as f64 + 1e-12);
            }
        }
    }

    #[test]
    fn single_vertex_never_moves() {
        let config = PathGraphConfig::new(1, 0.5, 100.0).unwrap();
        let traj = simulate_interchange(&config, &StreamKey::new(1, "n1")).unwrap();
        assert!(traj.event_count() > 0);
        assert_eq!(traj.self_loop_count(), traj.event_count());
        let p = rescaled_trajectory(&traj, 1, 100.0).unwrap();
        assert!(p.jumps().is_empty());
        assert_eq!(p.initial_value(), 1.0);
    }

    #[test]
    fn rescaling_moves_jump_times() {
        let config = PathGraphConfig::new(20, 0.5, 400.0).unwrap();
        let traj = PermutationTrajectory {
            config,
            log: vec![(400.0, 3)],
        };
        let p = rescaled_trajectory(&traj, 3, 1.0).unwrap();
        assert_eq!(p.jumps(), &[(1.0, 0.2)]);
        assert!(matches!(
            rescaled_trajectory(&traj, 3, 2.0),
            Err(Error::InsufficientHorizon { .. })
        ));
        let all = traj.rescaled_trajectories(1.0).unwrap();
        assert_eq!(all[2], p);
        assert_eq!(all[3].jumps(), &[(1.0, 0.15)]);
    }

    #[test]
    fn marginal_is_uniform_grid() {
        let config = PathGraphConfig::for_macro_horizon(4, 0.5).unwrap();
        let traj = simulate_interchange(&config, &StreamKey::new(2, "marginal")).unwrap();
        let paths = traj.rescaled_trajectories(0.5).unwrap();
        for t in [0.0, 0.1, 0.5] {
            assert_eq!(empirical_marginal(&paths, t).unwrap(), PointMeasure::uniform_grid(4));
        }
    }

    #[test]
    fn adjacent_tracked_particles_swap_together() {
        let starts: BTreeSet<i64> = [0, 1].into_iter().collect();
        let paths = tracked_lattice_interchange(&starts, 50.0, &StreamKey::new(4, "swap")).unwrap();
        let (a, b) = (&paths[&0], &paths[&1]);
        for &(t, _) in a.jumps() {
            let (a0, b0) = (a.left_limit(t).unwrap(), b.left_limit(t).unwrap());
            let (a1, b1) = (a.value_at(t).unwrap(), b.value_at(t).unwrap());
            assert_ne!(a1, b1);
            if (a0 - b0).abs() == 1.0 && a1 == b0 {
                assert_eq!(b1, a0, "shared edge must swap both particles at {t}");
            }
        }
    }

    proptest! {
        #[test]
        fn fold_lattice_is_lipschitz(a in -100i64..100, b in -100i64..100, n in prop::sample::select(vec![1usize, 2, 3, 5, 8])) {
            prop_assert!(fold_lattice(a, n).abs_diff(fold_lattice(b, n)) as i64 <= (a - b).abs());
        }

        #[test]
        fn fold_real_is_lipschitz(a in -10.0f64..10.0, b in -10.0f64..10.0) {
            let fa = fold_real(a);
            prop_assert!((0.0..=1.0).contains(&fa));
            prop_assert!((fa - fold_real(b)).abs() <= (a - b).abs() + 1e-12);
        }

        #[test]
        fn every_state_is_a_permutation(n in 1usize..12, seed in any::<u64>()) {
            let config = PathGraphConfig::new(n, 0.5, 20.0).unwrap();
            let traj = simulate_interchange(&config, &StreamKey::new(seed, "perm")).unwrap();
            prop_assert!(traj.check_bijective().is_ok());
        }
    }
}
