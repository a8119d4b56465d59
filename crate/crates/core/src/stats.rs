//! Distances between measures on `[0, 1]`, hypothesis tests, and the
//! statistics-heavy experiments (tightness, two-time marginals).

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use crate::error::{invalid, Error, Result};
use crate::interchange::{cover_trajectory, fold_lattice};
use crate::parallel::map_replicates;
use crate::path::oscillation_modulus;
use crate::rbm::InitialLaw;
use crate::rng::StreamKey;
use crate::verdict::TableRow;
use crate::walks::sample_displacement;

const LOCATION_SLACK: f64 = 1e-12;

/// Sample mean with its Monte Carlo standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n: usize,
}

impl MeanEstimate {
    pub fn from_samples(samples: &[f64]) -> Self {
        let n = samples.len();
        if n == 0 {
            return MeanEstimate {
                mean: f64::NAN,
                std_error: f64::NAN,
                n,
            };
        }
        let mean = samples.iter().sum::<f64>() / n as f64;
        let var = if n > 1 {
            samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        MeanEstimate {
            mean,
            std_error: (var / n as f64).sqrt(),
            n,
        }
    }

    pub fn from_indicators(hits: usize, n: usize) -> Self {
        let p = hits as f64 / n as f64;
        MeanEstimate {
            mean: p,
            std_error: (p * (1.0 - p) / n as f64).sqrt(),
            n,
        }
    }

    /// `mean - k * std_error`
    pub fn lower(&self, k: f64) -> f64 {
        self.mean - k * self.std_error
    }
}

/// Ordinary least-squares slope through `(x, y)` points.
pub fn ols_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma).powi(2);
        sbb += (y - mb).powi(2);
    }
    sab / (saa * sbb).sqrt()
}

/// Weighted atoms on `[0, 1]`, sorted by location, weights summing to 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointMeasure {
    atoms: Vec<(f64, f64)>,
}

impl PointMeasure {
    /// Sorts, merges equal locations and normalises the total mass to 1.
    pub fn new(mut atoms: Vec<(f64, f64)>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(invalid("a point measure needs at least one atom"));
        }
        for &(x, w) in &atoms {
            if !(-LOCATION_SLACK..=1.0 + LOCATION_SLACK).contains(&x) {
                return Err(invalid(format!("atom location {x} outside [0, 1]")));
            }
            if !(w > 0.0 && w.is_finite()) {
                return Err(invalid(format!("atom weight must be positive, got {w}")));
            }
        }
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(atoms.len());
        for (x, w) in atoms {
            match merged.last_mut() {
                Some(last) if last.0 == x => last.1 += w,
                _ => merged.push((x.clamp(0.0, 1.0), w)),
            }
        }
        let total: f64 = merged.iter().map(|a| a.1).sum();
        for a in &mut merged {
            a.1 /= total;
        }
        Ok(PointMeasure { atoms: merged })
    }

    /// Equal-weight empirical measure of `samples`.
    pub fn from_samples(samples: &[f64]) -> Result<Self> {
        PointMeasure::new(samples.iter().map(|&x| (x, 1.0)).collect())
    }

    /// Measure on the grid `{k/n}` with the given counts (zero counts skipped).
    pub fn from_grid_counts(n: usize, counts: &[u64]) -> Result<Self> {
        PointMeasure::new(
            counts
                .iter()
                .enumerate()
                .filter(|(_, &c)| c > 0)
                .map(|(k, &c)| (k as f64 / n as f64, c as f64))
                .collect(),
        )
    }

    /// Uniform atoms of mass `1/n` at `{1/n, ..., 1}`.
    pub fn uniform_grid(n: usize) -> Self {
        PointMeasure {
            atoms: (1..=n).map(|i| (i as f64 / n as f64, 1.0 / n as f64)).collect(),
        }
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.1).sum()
    }

    /// `mu([0, x])`
    pub fn cdf(&self, x: f64) -> f64 {
        let k = self.atoms.partition_point(|a| a.0 <= x);
        self.atoms[..k].iter().map(|a| a.1).sum::<f64>().min(1.0)
    }

    /// Cumulative masses after each atom.
    fn cumulative(&self) -> Vec<f64> {
        let mut acc = 0.0;
        self.atoms
            .iter()
            .map(|a| {
                acc += a.1;
                acc.min(1.0)
            })
            .collect()
    }
}

/// Sup-norm distance between the empirical CDF and a continuous reference
/// CDF, evaluated at every atom and its left limit.
pub fn ks_distance(empirical: &PointMeasure, reference_cdf: impl Fn(f64) -> f64) -> Result<f64> {
    let (g0, g1) = (reference_cdf(0.0), reference_cdf(1.0));
    if g0.abs() > 1e-9 || (g1 - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidCdf(format!(
            "reference must map 0 -> 0 and 1 -> 1, got {g0} and {g1}"
        )));
    }
    let mut prev_cum = 0.0;
    let mut prev_g = g0;
    let mut best: f64 = 0.0;
    for (&(x, _), cum) in empirical.atoms().iter().zip(empirical.cumulative()) {
        let g = reference_cdf(x);
        if !(g >= prev_g - 1e-12) || !(0.0..=1.0 + 1e-12).contains(&g) {
            return Err(Error::InvalidCdf(format!("reference is not a cdf at {x}")));
        }
        best = best.max((prev_cum - g).abs()).max((cum - g).abs());
        prev_cum = cum;
        prev_g = g;
    }
    Ok(best)
}

/// Exact `int_0^1 |F_a - F_b| dx` over the merged breakpoints.
pub fn wasserstein1(a: &PointMeasure, b: &PointMeasure) -> f64 {
    let (aa, bb) = (a.atoms(), b.atoms());
    let (mut i, mut j) = (0, 0);
    let (mut fa, mut fb) = (0.0f64, 0.0f64);
    let mut last = 0.0;
    let mut total = 0.0;
    while i < aa.len() || j < bb.len() {
        let xa = aa.get(i).map_or(f64::INFINITY, |p| p.0);
        let xb = bb.get(j).map_or(f64::INFINITY, |p| p.0);
        let x = xa.min(xb);
        total += (fa - fb).abs() * (x - last);
        last = x;
        if xa == x {
            fa += aa[i].1;
            i += 1;
        }
        if xb == x {
            fb += bb[j].1;
            j += 1;
        }
    }
    total + (fa - fb).abs() * (1.0 - last).max(0.0)
}

/// `int_0^1 |F_mu - G| dy` for a continuous CDF `G`.
///
/// `G` is sampled on a uniform grid of `nodes` points plus every atom and
/// treated as linear between samples; against the step function `F_mu` each
/// piece then integrates in closed form.
pub fn wasserstein1_to_cdf(mu: &PointMeasure, cdf: impl Fn(f64) -> f64, nodes: usize) -> f64 {
    let nodes = nodes.max(2);
    let mut xs: Vec<f64> = (0..nodes).map(|k| k as f64 / (nodes - 1) as f64).collect();
    xs.extend(mu.atoms().iter().map(|a| a.0));
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    let gs: Vec<f64> = xs.iter().map(|&x| cdf(x)).collect();
    let atoms = mu.atoms();
    let mut next_atom = 0;
    let mut f = 0.0;
    let mut total = 0.0;
    for k in 0..xs.len() - 1 {
        while next_atom < atoms.len() && atoms[next_atom].0 <= xs[k] {
            f += atoms[next_atom].1;
            next_atom += 1;
        }
        total += abs_linear_integral(f, gs[k], gs[k + 1], xs[k + 1] - xs[k]);
    }
    total
}

/// `int_0^h |c - (g0 + (g1 - g0) s / h)| ds`
fn abs_linear_integral(c: f64, g0: f64, g1: f64, h: f64) -> f64 {
    let (d0, d1) = (c - g0, c - g1);
    if d0 * d1 >= 0.0 {
        0.5 * (d0.abs() + d1.abs()) * h
    } else {
        let cross = d0.abs() / (d0.abs() + d1.abs());
        0.5 * h * (d0.abs() * cross + d1.abs() * (1.0 - cross))
    }
}

/// Integrated pointwise standard error `int sqrt(F(1-F)/n) dy` of an
/// empirical CDF built from `n` samples; a noise scale for W1 estimates.
pub fn integrated_cdf_std_error(mu: &PointMeasure, n: usize) -> f64 {
    let atoms = mu.atoms();
    let mut total = 0.0;
    let mut f = 0.0;
    for (k, a) in atoms.iter().enumerate() {
        f += a.1;
        let next = atoms.get(k + 1).map_or(1.0, |b| b.0);
        total += (f * (1.0 - f)).max(0.0).sqrt() * (next - a.0);
    }
    total / (n as f64).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChiSquareResult {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

fn chi_square_p(statistic: f64, dof: usize) -> f64 {
    if dof == 0 {
        return 1.0;
    }
    let dist = ChiSquared::new(dof as f64).expect("positive dof");
    dist.sf(statistic)
}

/// Pearson goodness-of-fit. Adjacent cells are pooled until each expected
/// count is at least 5; `expected` are probabilities and any missing mass
/// forms one extra tail cell.
pub fn chi_square_gof(observed: &[u64], expected: &[f64]) -> Result<ChiSquareResult> {
    if observed.len() != expected.len() {
        return Err(Error::Mismatch("observed and expected lengths differ".into()));
    }
    let total: u64 = observed.iter().sum();
    if total == 0 {
        return Err(invalid("no observations"));
    }
    let n = total as f64;
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let (mut o_acc, mut e_acc) = (0.0, 0.0);
    for (&o, &p) in observed.iter().zip(expected) {
        o_acc += o as f64;
        e_acc += p * n;
        if e_acc >= 5.0 {
            cells.push((o_acc, e_acc));
            o_acc = 0.0;
            e_acc = 0.0;
        }
    }
    let tail = (1.0 - expected.iter().sum::<f64>()).max(0.0) * n;
    e_acc += tail;
    if e_acc > 0.0 || o_acc > 0.0 {
        match cells.last_mut() {
            Some(last) if e_acc < 5.0 => {
                last.0 += o_acc;
                last.1 += e_acc;
            }
            _ => cells.push((o_acc, e_acc)),
        }
    }
    let statistic: f64 = cells
        .iter()
        .filter(|c| c.1 > 0.0)
        .map(|(o, e)| (o - e).powi(2) / e)
        .sum();
    let dof = cells.len().saturating_sub(1);
    Ok(ChiSquareResult {
        statistic,
        dof,
        p_value: chi_square_p(statistic, dof),
    })
}

/// Two-sample chi-square homogeneity test on paired histograms; cells are
/// pooled until the combined count reaches 10.
pub fn chi_square_two_sample(a: &[u64], b: &[u64]) -> Result<ChiSquareResult> {
    if a.len() != b.len() {
        return Err(Error::Mismatch("histograms differ in length".into()));
    }
    let (na, nb) = (a.iter().sum::<u64>() as f64, b.iter().sum::<u64>() as f64);
    if na == 0.0 || nb == 0.0 {
        return Err(invalid("empty histogram"));
    }
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let (mut ca, mut cb) = (0.0, 0.0);
    for (&x, &y) in a.iter().zip(b) {
        ca += x as f64;
        cb += y as f64;
        if ca + cb >= 10.0 {
            cells.push((ca, cb));
            ca = 0.0;
            cb = 0.0;
        }
    }
    if ca + cb > 0.0 {
        match cells.last_mut() {
            Some(last) => {
                last.0 += ca;
                last.1 += cb;
            }
            None => cells.push((ca, cb)),
        }
    }
    let n = na + nb;
    let mut statistic = 0.0;
    for &(x, y) in &cells {
        let col = x + y;
        let (ea, eb) = (col * na / n, col * nb / n);
        statistic += (x - ea).powi(2) / ea + (y - eb).powi(2) / eb;
    }
    let dof = cells.len().saturating_sub(1);
    Ok(ChiSquareResult {
        statistic,
        dof,
        p_value: chi_square_p(statistic, dof),
    })
}

/// Asymptotic Kolmogorov p-value with Stephens' small-sample correction.
pub fn ks_p_value(distance: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    let lambda = (sn + 0.12 + 0.11 / sn) * distance;
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=200 {
        let k = k as f64;
        let term = 2.0 * (-1.0f64).powf(k - 1.0) * (-2.0 * k * k * lambda * lambda).exp();
        sum += term;
        if term.abs() < 1e-16 {
            break;
        }
    }
    sum.clamp(0.0, 1.0)
}

/// One-sample KS test of `samples` against a continuous `cdf`.
pub fn ks_test(samples: &[f64], cdf: impl Fn(f64) -> f64) -> Result<(f64, f64)> {
    let mu = PointMeasure::from_samples(samples)?;
    let d = ks_distance(&mu, cdf)?;
    Ok((d, ks_p_value(d, samples.len())))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MannKendall {
    pub statistic: i64,
    /// One-sided p-value against an increasing trend.
    pub p_value: f64,
}

/// Mann–Kendall test for an increasing trend. Exact permutation distribution
/// for up to 8 values, normal approximation with continuity correction above.
pub fn mann_kendall_increasing(values: &[f64]) -> MannKendall {
    let s = mk_statistic(values);
    let n = values.len();
    if n < 2 {
        return MannKendall {
            statistic: 0,
            p_value: 1.0,
        };
    }
    let p_value = if n <= 8 {
        let mut perm: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let (mut hits, mut total) = (0u64, 0u64);
        permute_all(&mut perm, 0, &mut |p| {
            total += 1;
            if mk_statistic(p) >= s {
                hits += 1;
            }
        });
        hits as f64 / total as f64
    } else {
        let nf = n as f64;
        let var = nf * (nf - 1.0) * (2.0 * nf + 5.0) / 18.0;
        let z = (s as f64 - 1.0) / var.sqrt();
        Normal::standard().sf(z)
    };
    MannKendall { statistic: s, p_value }
}

fn mk_statistic(values: &[f64]) -> i64 {
    let mut s = 0i64;
    for i in 0..values.len() {
        for j in i + 1..values.len() {
            s += match values[j].partial_cmp(&values[i]) {
                Some(std::cmp::Ordering::Greater) => 1,
                Some(std::cmp::Ordering::Less) => -1,
                _ => 0,
            };
        }
    }
    s
}

fn permute_all(v: &mut Vec<f64>, k: usize, visit: &mut impl FnMut(&[f64])) {
    if k == v.len() {
        visit(v);
        return;
    }
    for i in k..v.len() {
        v.swap(k, i);
        permute_all(v, k + 1, visit);
        v.swap(k, i);
    }
}

/// Permutation settings for [`two_sample_joint_test`]. Sampling stops early
/// once `stop_after_exceedances` permuted statistics reach the observed one
/// (Besag–Clifford sequential p-value).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PermutationPlan {
    pub max_permutations: usize,
    pub stop_after_exceedances: usize,
}

impl Default for PermutationPlan {
    fn default() -> Self {
        PermutationPlan {
            max_permutations: 199,
            stop_after_exceedances: 10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointTestResult {
    /// Energy distance between the two empirical laws.
    pub statistic: f64,
    pub p_value: f64,
    pub permutations: usize,
}

/// Energy-distance two-sample test between samples of `(X(grid), Y(grid))`
/// and `(X(grid), Z(grid))`, each row being the concatenated coordinates.
/// The p-value comes from label permutations of the pooled sample.
pub fn two_sample_joint_test(
    pairs_xy: &[Vec<f64>],
    pairs_xz: &[Vec<f64>],
    plan: PermutationPlan,
    key: &StreamKey,
) -> Result<JointTestResult> {
    let n = pairs_xy.len();
    if n == 0 || n != pairs_xz.len() {
        return Err(Error::Mismatch(format!(
            "need equal nonzero sample sizes, got {} and {}",
            n,
            pairs_xz.len()
        )));
    }
    let dim = pairs_xy[0].len();
    if dim == 0 || pairs_xy.iter().chain(pairs_xz).any(|r| r.len() != dim) {
        return Err(Error::Mismatch("all rows must share one time grid".into()));
    }
    let pooled: Vec<f64> = pairs_xy.iter().chain(pairs_xz).flatten().copied().collect();
    let m = 2 * n;
    let dist = |i: usize, j: usize| -> f64 {
        let (a, b) = (&pooled[i * dim..(i + 1) * dim], &pooled[j * dim..(j + 1) * dim]);
        a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
    };
    // condensed upper triangle, row-major
    let mut tri: Vec<f32> = Vec::with_capacity(m * (m - 1) / 2);
    let mut total = 0.0f64;
    for i in 0..m {
        for j in i + 1..m {
            let d = dist(i, j);
            total += d;
            tri.push(d as f32);
        }
    }
    let within = |labels: &[bool]| -> f64 {
        let mut acc = 0.0f64;
        let mut offset = 0;
        for i in 0..m {
            let li = labels[i];
            let row = &tri[offset..offset + (m - i - 1)];
            let mut r = 0.0f32;
            for (d, &lj) in row.iter().zip(&labels[i + 1..]) {
                r += if lj == li { *d } else { 0.0 };
            }
            acc += r as f64;
            offset += m - i - 1;
        }
        acc
    };
    let scale = 2.0 / (n as f64 * n as f64);
    let energy = |w: f64| scale * (total - 2.0 * w);
    let mut labels: Vec<bool> = (0..m).map(|i| i < n).collect();
    let observed = energy(within(&labels));
    let mut rng = key.derive("energy-permutations").rng();
    let mut exceed = 0usize;
    let mut run = 0usize;
    while run < plan.max_permutations {
        labels.shuffle(&mut rng);
        run += 1;
        // relative slack absorbs f32 rounding of the identity permutation
        if energy(within(&labels)) >= observed * (1.0 - 1e-6) {
            exceed += 1;
            if exceed >= plan.stop_after_exceedances {
                return Ok(JointTestResult {
                    statistic: observed,
                    p_value: exceed as f64 / run as f64,
                    permutations: run,
                });
            }
        }
    }
    Ok(JointTestResult {
        statistic: observed,
        p_value: (exceed + 1) as f64 / (run + 1) as f64,
        permutations: run,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TightnessRow {
    pub n: usize,
    pub horizon: f64,
    pub delta: f64,
    pub reps: usize,
    pub frequency: f64,
    pub std_error: f64,
    pub bound: f64,
    pub pass: bool,
}

/// Right-hand side of the tightness estimate, `10^3 T (delta^{1/2} + delta^{-1/2} / n^2)`.
pub fn tightness_bound(n: usize, horizon: f64, delta: f64) -> f64 {
    1e3 * horizon * (delta.sqrt() + 1.0 / (delta.sqrt() * (n * n) as f64))
}

/// Monte Carlo frequency of `{oscillation over some delta-window > delta^{1/8}}`
/// for the rescaled trajectory of particle `ceil(n/2)`, one trajectory per
/// replicate, for every delta in `deltas`.
pub fn tightness_experiment(
    n: usize,
    horizon: f64,
    deltas: &[f64],
    reps: usize,
    key: &StreamKey,
    workers: usize,
) -> Result<Vec<TightnessRow>> {
    if n == 0 || reps == 0 {
        return Err(invalid("n and reps must be positive"));
    }
    if let Some(&d) = deltas.iter().find(|&&d| !(d > 0.0 && d <= 1.0)) {
        return Err(invalid(format!("deltas must lie in (0, 1], got {d}")));
    }
    let particle = n.div_ceil(2);
    let key = key.derive(&format!("tightness/{n}/{horizon}"));
    let hits_per_rep = map_replicates(reps, workers, |r| {
        let mut rng = key.with_replicate(r as u64).rng();
        let path = cover_trajectory(&mut rng, n, particle, horizon);
        deltas
            .iter()
            .map(|&d| {
                let m = oscillation_modulus(&path, horizon, d).expect("valid delta and horizon");
                m > d.powf(0.125)
            })
            .collect::<Vec<bool>>()
    });
    Ok(deltas
        .iter()
        .enumerate()
        .map(|(k, &delta)| {
            let hits = hits_per_rep.iter().filter(|h| h[k]).count();
            let est = MeanEstimate::from_indicators(hits, reps);
            let bound = tightness_bound(n, horizon, delta);
            TightnessRow {
                n,
                horizon,
                delta,
                reps,
                frequency: est.mean,
                std_error: est.std_error,
                bound,
                pass: est.lower(3.0) <= bound,
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairLawRow {
    pub n: usize,
    pub t: f64,
    pub samples: usize,
    pub bins: usize,
    pub distance: f64,
    pub std_error: f64,
}

/// Discrepancy between the law of `(T_I(0), T_I(t))` for a uniformly chosen
/// particle and the stationary reflected-BM pair law.
///
/// The start coordinate is split into `bins` equal cells; the distance is the
/// W1 distance of the start marginals plus the bin-weighted W1 distances of
/// the conditional end laws, each compared with the reflected-BM law started
/// uniformly on the same cell. With the L1 ground metric this bounds the
/// joint W1 distance up to the within-cell spread of the start coordinate.
pub fn marginal_pair_experiment(n: usize, t: f64, samples: usize, bins: usize, key: &StreamKey) -> Result<PairLawRow> {
    if n == 0 || samples == 0 || bins == 0 {
        return Err(invalid("n, samples and bins must be positive"));
    }
    if !(t > 0.0) {
        return Err(invalid("t must be positive"));
    }
    let micro = (n * n) as f64 * t;
    let mut rng = key.derive(&format!("pair-law/{n}/{t}")).rng();
    let mut start_counts = vec![0u64; n + 1];
    let mut end_counts = vec![vec![0u64; n + 1]; bins];
    for _ in 0..samples {
        let i = rand::Rng::random_range(&mut rng, 1..=n);
        let end = fold_lattice(i as i64 + sample_displacement(&mut rng, 1.0, micro), n);
        start_counts[i] += 1;
        let b = ((i as f64 / n as f64) * bins as f64).floor().min(bins as f64 - 1.0) as usize;
        end_counts[b][end] += 1;
    }
    let start = PointMeasure::from_grid_counts(n, &start_counts)?;
    let mut distance = wasserstein1_to_cdf(&start, |x| x, 4097);
    let mut var = integrated_cdf_std_error(&start, samples).powi(2);
    for (b, counts) in end_counts.iter().enumerate() {
        let in_bin: u64 = counts.iter().sum();
        if in_bin == 0 {
            continue;
        }
        let w = in_bin as f64 / samples as f64;
        let cond = PointMeasure::from_grid_counts(n, counts)?;
        let law = InitialLaw::UniformOn(b as f64 / bins as f64, (b + 1) as f64 / bins as f64);
        distance += w * wasserstein1_to_cdf(&cond, |y| law.cdf_at(y, t), 4097);
        var += (w * integrated_cdf_std_error(&cond, in_bin as usize)).powi(2);
    }
    Ok(PairLawRow {
        n,
        t,
        samples,
        bins,
        distance,
        std_error: var.sqrt(),
    })
}

impl TableRow for TightnessRow {
    fn header() -> &'static [&'static str] {
        &["n", "T", "delta", "reps", "frequency", "std_error", "bound", "pass"]
    }
    fn fields(&self) -> Vec<String> {
        vec![
            self.n.to_string(),
            self.horizon.to_string(),
            self.delta.to_string(),
            self.reps.to_string(),
            self.frequency.to_string(),
            self.std_error.to_string(),
            self.bound.to_string(),
            self.pass.to_string(),
        ]
    }
}

impl TableRow for PairLawRow {
    fn header() -> &'static [&'static str] {
        &["n", "t", "samples", "bins", "distance", "std_error"]
    }
    fn fields(&self) -> Vec<String> {
        vec![
            self.n.to_string(),
            self.t.to_string(),
            self.samples.to_string(),
            self.bins.to_string(),
            self.distance.to_string(),
            self.std_error.to_string(),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn ks_examples() {
        let fine = PointMeasure::new((1..=1000).map(|i| (i as f64 / 1000.0, 1.0)).collect()).unwrap();
        assert!(ks_distance(&fine, |x| x).unwrap() <= 1e-3 + 1e-12);
        let dirac0 = PointMeasure::new(vec![(0.0, 1.0)]).unwrap();
        assert_eq!(ks_distance(&dirac0, |x| x).unwrap(), 1.0);
        for n in [1usize, 3, 10, 64] {
            let d = ks_distance(&PointMeasure::uniform_grid(n), |x| x).unwrap();
            assert!((d - 1.0 / n as f64).abs() < 1e-12, "n={n}: {d}");
        }
    }

    #[test]
    fn ks_rejects_non_cdfs() {
        let mu = PointMeasure::uniform_grid(4);
        assert!(matches!(ks_distance(&mu, |x| x * 0.5), Err(Error::InvalidCdf(_))));
        assert!(matches!(
            ks_distance(&mu, |x| if x < 0.6 { 0.9 * x.min(0.5) * 2.0 } else { x }),
            Err(Error::InvalidCdf(_))
        ));
    }

    #[test]
    fn w1_examples() {
        let a = PointMeasure::uniform_grid(5);
        assert_eq!(wasserstein1(&a, &a), 0.0);
        let d0 = PointMeasure::new(vec![(0.0, 1.0)]).unwrap();
        let d1 = PointMeasure::new(vec![(1.0, 1.0)]).unwrap();
        assert!((wasserstein1(&d0, &d1) - 1.0).abs() < 1e-15);
        let half = PointMeasure::new(vec![(0.5, 1.0)]).unwrap();
        assert!((wasserstein1_to_cdf(&half, |x| x, 101) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn w1_to_cdf_grid_gap() {
        // uniform grid {k/n} against Uniform[0,1]: n triangles of area 1/(2n^2)
        for n in [1usize, 4, 50] {
            let w = wasserstein1_to_cdf(&PointMeasure::uniform_grid(n), |x| x, 11);
            assert!((w - 0.5 / n as f64).abs() < 1e-12, "n={n}: {w}");
        }
    }

    #[test]
    fn point_measure_validation() {
        assert!(PointMeasure::new(vec![]).is_err());
        assert!(PointMeasure::new(vec![(1.5, 1.0)]).is_err());
        assert!(PointMeasure::new(vec![(0.5, 0.0)]).is_err());
        let m = PointMeasure::new(vec![(0.5, 2.0), (0.25, 1.0), (0.5, 1.0)]).unwrap();
        assert_eq!(m.atoms().len(), 2);
        assert!((m.total_mass() - 1.0).abs() < 1e-12);
        assert!((m.cdf(0.3) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn chi_square_detects_mismatch() {
        let obs = [250u64, 250, 250, 250];
        let fair = chi_square_gof(&obs, &[0.25; 4]).unwrap();
        assert!(fair.p_value > 0.99);
        let skew = chi_square_gof(&obs, &[0.4, 0.2, 0.2, 0.2]).unwrap();
        assert!(skew.p_value < 1e-6);
        let two = chi_square_two_sample(&[100, 200, 300], &[100, 200, 300]).unwrap();
        assert!(two.p_value > 0.99);
        assert!(chi_square_gof(&obs, &[0.5; 3]).is_err());
    }

    #[test]
    fn ks_p_value_sane() {
        assert!(ks_p_value(0.0, 100) == 1.0);
        assert!(ks_p_value(0.5, 100) < 1e-10);
        let p = ks_p_value(1.36 / 10_000f64.sqrt(), 10_000);
        assert!((p - 0.05).abs() < 0.01, "{p}");
    }

    #[test]
    fn mann_kendall_small_samples() {
        let up = mann_kendall_increasing(&[1.0, 2.0, 3.0]);
        assert_eq!(up.statistic, 3);
        assert!((up.p_value - 1.0 / 6.0).abs() < 1e-12);
        let down = mann_kendall_increasing(&[3.0, 2.0, 1.0]);
        assert_eq!(down.p_value, 1.0);
        let long: Vec<f64> = (0..20).map(|i| i as f64).collect();
        assert!(mann_kendall_increasing(&long).p_value < 1e-6);
    }

    #[test]
    fn energy_test_rejects_obvious_shift() {
        let mut rng = StreamKey::new(3, "energy-unit").rng();
        let a: Vec<Vec<f64>> = (0..60).map(|_| vec![rand::Rng::random::<f64>(&mut rng)]).collect();
        let b: Vec<Vec<f64>> = (0..60)
            .map(|_| vec![2.0 + rand::Rng::random::<f64>(&mut rng)])
            .collect();
        let plan = PermutationPlan {
            max_permutations: 199,
            stop_after_exceedances: 10,
        };
        let res = two_sample_joint_test(&a, &b, plan, &StreamKey::new(1, "e")).unwrap();
        assert!(res.p_value < 0.01);
        assert!(two_sample_joint_test(&a, &b[..10], plan, &StreamKey::new(1, "e")).is_err());
        let wide: Vec<Vec<f64>> = b.iter().map(|r| vec![r[0], 0.0]).collect();
        assert!(matches!(
            two_sample_joint_test(&a, &wide, plan, &StreamKey::new(1, "e")),
            Err(Error::Mismatch(_))
        ));
    }

    #[test]
    fn vacuous_tightness_bound() {
        assert!(tightness_bound(32, 1.0, 1.0) >= 1e3);
    }

    fn arb_measure() -> impl Strategy<Value = PointMeasure> {
        prop::collection::vec((0.0f64..=1.0, 0.01f64..5.0), 1..20).prop_map(|atoms| PointMeasure::new(atoms).unwrap())
    }

    proptest! {
        #[test]
        fn distances_are_bounded_and_vanish_on_equality(a in arb_measure(), b in arb_measure()) {
            let w = wasserstein1(&a, &b);
            prop_assert!((0.0..=1.0 + 1e-12).contains(&w));
            prop_assert!(wasserstein1(&a, &a) == 0.0);
            prop_assert!((w - wasserstein1(&b, &a)).abs() < 1e-12);
            let k = ks_distance(&a, |x| x).unwrap();
            prop_assert!((0.0..=1.0).contains(&k));
        }
    }
}
