//! Reflected Brownian motion on `[0, 1]`.
//!
//! Transition densities use the Gaussian image series for small times and
//! the cosine eigenfunction series otherwise:
//!
//! ```text
//! p_t(x, y) = sum_k [phi_t(y - x + 2k) + phi_t(y + x + 2k)]
//!           = 1 + 2 sum_{k>=1} cos(k pi x) cos(k pi y) exp(-k^2 pi^2 t / 2)
//! ```

use std::f64::consts::PI;
use std::fmt::Write as _;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{invalid, Error, Result};
use crate::interchange::fold_real;
use crate::path::CadlagPath;
use crate::rng::StreamKey;

const SERIES_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeatKernelParams {
    /// Image terms on each side of the origin.
    pub image_terms: usize,
    /// Cosine modes used at or above the switch time.
    pub spectral_terms: usize,
    /// Images below this time, cosine series at or above it.
    pub switch_time: f64,
}

impl Default for HeatKernelParams {
    fn default() -> Self {
        HeatKernelParams {
            image_terms: 4,
            spectral_terms: 40,
            switch_time: 0.1,
        }
    }
}

impl HeatKernelParams {
    /// Upper bounds on the truncation error of both series over the whole
    /// regime each is used in, for densities and for CDFs.
    pub fn tail_bounds(&self) -> (f64, f64) {
        let s = self.switch_time;
        let k = self.image_terms as f64;
        // dropped images sit at distance >= 2K from the window; the bound
        // t^{-1/2} exp(-2K^2/t) increases in t on (0, s] for s < 4K^2
        let images = 4.0 / (2.0 * PI * s).sqrt() * (-2.0 * k * k / s).exp() / (1.0 - (-4.0 * k / s).exp());
        let m = self.spectral_terms as f64;
        let q = (-PI * PI * s / 2.0).exp();
        let spectral = 2.0 * q.powf((m + 1.0) * (m + 1.0)) / (1.0 - q.powf(2.0 * m + 3.0));
        (images, spectral)
    }

    pub fn certify(&self) -> Result<()> {
        if self.image_terms < 1 || self.spectral_terms < 1 || !(self.switch_time > 0.0) {
            return Err(invalid(
                "need at least one term of each series and a positive switch time",
            ));
        }
        let (images, spectral) = self.tail_bounds();
        let worst = images.max(spectral);
        if worst > SERIES_TOLERANCE {
            let terms = if images >= spectral {
                self.image_terms
            } else {
                self.spectral_terms
            };
            return Err(Error::Truncation {
                terms,
                bound: worst,
                tolerance: SERIES_TOLERANCE,
            });
        }
        Ok(())
    }
}

fn gaussian(x: f64, t: f64) -> f64 {
    (-x * x / (2.0 * t)).exp() / (2.0 * PI * t).sqrt()
}

/// Standard normal CDF.
fn big_phi(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// Antiderivative of `big_phi`: `z Phi(z) + phi(z)`.
fn big_psi(z: f64) -> f64 {
    z * big_phi(z) + (-z * z / 2.0).exp() / (2.0 * PI).sqrt()
}

fn check_time(t: f64) -> Result<()> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(invalid(format!("time must be positive, got {t}")));
    }
    Ok(())
}

pub fn transition_density_with(x: f64, y: f64, t: f64, params: &HeatKernelParams) -> Result<f64> {
    check_time(t)?;
    if t < params.switch_time {
        let k = params.image_terms as i64;
        Ok((-k..=k)
            .map(|j| {
                let shift = 2.0 * j as f64;
                gaussian(y - x + shift, t) + gaussian(y + x + shift, t)
            })
            .sum())
    } else {
        let mut sum = 1.0;
        for k in 1..=params.spectral_terms {
            let kp = k as f64 * PI;
            sum += 2.0 * (kp * x).cos() * (kp * y).cos() * (-kp * kp * t / 2.0).exp();
        }
        Ok(sum)
    }
}

/// Density of `X_t` given `X_0 = x` for reflected BM on `[0, 1]`.
pub fn transition_density(x: f64, y: f64, t: f64) -> Result<f64> {
    transition_density_with(x, y, t, &HeatKernelParams::default())
}

/// `P(X_t <= y | X_0 = x)`.
pub fn transition_cdf(x: f64, y: f64, t: f64) -> Result<f64> {
    check_time(t)?;
    Ok(InitialLaw::Point(x).cdf_at(y.clamp(0.0, 1.0), t))
}

pub fn stationary_cdf(x: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(invalid(format!("{x} outside [0, 1]")));
    }
    Ok(x)
}

/// Law of the starting point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum InitialLaw {
    Point(f64),
    /// Uniform on `[a, b]` with `0 <= a < b <= 1`.
    UniformOn(f64, f64),
    /// Equal-weight mixture of point starts.
    Atoms(Vec<f64>),
}

impl InitialLaw {
    pub fn uniform() -> Self {
        InitialLaw::UniformOn(0.0, 1.0)
    }

    pub fn validate(&self) -> Result<()> {
        let inside = |x: f64| (0.0..=1.0).contains(&x);
        let ok = match self {
            InitialLaw::Point(x) => inside(*x),
            InitialLaw::UniformOn(a, b) => inside(*a) && inside(*b) && a < b,
            InitialLaw::Atoms(xs) => !xs.is_empty() && xs.iter().all(|&x| inside(x)),
        };
        if ok {
            Ok(())
        } else {
            Err(invalid(format!("initial law {self:?} is not supported on [0, 1]")))
        }
    }

    pub fn sample<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            InitialLaw::Point(x) => *x,
            InitialLaw::UniformOn(a, b) => a + (b - a) * rng.random::<f64>(),
            InitialLaw::Atoms(xs) => xs[rng.random_range(0..xs.len())],
        }
    }

    /// `P(X_t <= y)` when `X_0` has this law; `t > 0`, `y` in `[0, 1]`.
    pub fn cdf_at(&self, y: f64, t: f64) -> f64 {
        let params = HeatKernelParams::default();
        let value = match self {
            InitialLaw::Point(x) => point_cdf(*x, y, t, &params),
            InitialLaw::UniformOn(a, b) => uniform_start_cdf(*a, *b, y, t, &params),
            InitialLaw::Atoms(xs) => xs.iter().map(|&x| point_cdf(x, y, t, &params)).sum::<f64>() / xs.len() as f64,
        };
        value.clamp(0.0, 1.0)
    }
}

fn point_cdf(x: f64, y: f64, t: f64, params: &HeatKernelParams) -> f64 {
    if t < params.switch_time {
        let s = t.sqrt();
        let k = params.image_terms as i64;
        (-k..=k)
            .map(|j| {
                let c = 2.0 * j as f64;
                big_phi((y - x + c) / s) - big_phi((c - x) / s) + big_phi((y + x + c) / s) - big_phi((x + c) / s)
            })
            .sum()
    } else {
        let mut sum = y;
        for k in 1..=params.spectral_terms {
            let kp = k as f64 * PI;
            sum += 2.0 * (kp * x).cos() * (kp * y).sin() / kp * (-kp * kp * t / 2.0).exp();
        }
        sum
    }
}

/// Point CDF averaged over a uniform start on `[a, b]`, in closed form.
fn uniform_start_cdf(a: f64, b: f64, y: f64, t: f64, params: &HeatKernelParams) -> f64 {
    let w = b - a;
    if t < params.switch_time {
        let s = t.sqrt();
        // int_a^b Phi((c - x)/s) dx and int_a^b Phi((c + x)/s) dx
        let minus = |c: f64| s * (big_psi((c - a) / s) - big_psi((c - b) / s));
        let plus = |c: f64| s * (big_psi((c + b) / s) - big_psi((c + a) / s));
        let k = params.image_terms as i64;
        (-k..=k)
            .map(|j| {
                let c = 2.0 * j as f64;
                minus(y + c) - minus(c) + plus(y + c) - plus(c)
            })
            .sum::<f64>()
            / w
    } else {
        let mut sum = y;
        for k in 1..=params.spectral_terms {
            let kp = k as f64 * PI;
            let mean_cos = ((kp * b).sin() - (kp * a).sin()) / (kp * w);
            sum += 2.0 * mean_cos * (kp * y).sin() / kp * (-kp * kp * t / 2.0).exp();
        }
        sum
    }
}

/// Reflected BM observed on `grid`: `X_0` from `law`, exact Gaussian
/// increments, folded into `[0, 1]`. The path jumps at grid times and is
/// constant in between; its horizon is the last grid time (0 if empty).
pub fn sample_reflected_path(law: &InitialLaw, grid: &[f64], key: &StreamKey) -> Result<CadlagPath> {
    law.validate()?;
    let mut rng = key.rng();
    let x0 = law.sample(&mut rng);
    let values = reflected_values(x0, grid, &mut rng)?;
    let horizon = grid.last().copied().unwrap_or(0.0);
    let mut path = CadlagPath::constant(x0, horizon);
    for (&t, &v) in grid.iter().zip(&values) {
        if t > 0.0 {
            path.push_jump(t, v);
        }
    }
    Ok(path)
}

/// Values of `fold_real(x0 + B(t))` at each grid time.
pub fn reflected_values<R: rand::Rng + ?Sized>(x0: f64, grid: &[f64], rng: &mut R) -> Result<Vec<f64>> {
    if grid.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
        return Err(invalid("grid times must be finite and nonnegative"));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("grid must be strictly increasing"));
    }
    let mut b = x0;
    let mut last = 0.0;
    Ok(grid
        .iter()
        .map(|&t| {
            let z: f64 = StandardNormal.sample(rng);
            b += z * (t - last).sqrt();
            last = t;
            fold_real(b)
        })
        .collect())
}

/// Composite Simpson rule on `[a, b]` with an even number of panels.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let panels = panels.max(2) + panels % 2;
    let h = (b - a) / panels as f64;
    let mut sum = f(a) + f(b);
    for k in 1..panels {
        sum += f(a + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    sum * h / 3.0
}

/// Density table with header `x,y,t,density`.
pub fn density_table_csv(xs: &[f64], ys: &[f64], ts: &[f64]) -> Result<String> {
    let mut out = String::from("x,y,t,density\n");
    for &t in ts {
        for &x in xs {
            for &y in ys {
                let d = transition_density(x, y, t)?;
                writeln!(out, "{x},{y},{t},{d}").expect("writing to a String");
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_params_are_certified() {
        HeatKernelParams::default().certify().unwrap();
        let weak = HeatKernelParams {
            image_terms: 1,
            spectral_terms: 2,
            switch_time: 0.1,
        };
        assert!(matches!(weak.certify(), Err(Error::Truncation { .. })));
    }

    #[test]
    fn series_agree_across_switch() {
        let images = HeatKernelParams {
            switch_time: 10.0,
            image_terms: 60,
            ..Default::default()
        };
        let cosines = HeatKernelParams {
            switch_time: 1e-9,
            spectral_terms: 400,
            ..Default::default()
        };
        for t in [0.05, 0.1, 0.3] {
            for (x, y) in [(0.0, 0.0), (0.2, 0.9), (0.5, 0.5), (1.0, 0.3)] {
                let a = transition_density_with(x, y, t, &images).unwrap();
                let b = transition_density_with(x, y, t, &cosines).unwrap();
                assert!((a - b).abs() < 1e-9, "t={t} x={x} y={y}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn sharp_peak_at_small_time() {
        let p = transition_density(0.5, 0.5, 0.01).unwrap();
        assert!((p - 1.0 / (2.0 * PI * 0.01).sqrt()).abs() < 1e-3);
        assert!(transition_density(0.5, 0.5, 0.0).is_err());
        assert!(transition_density(0.5, 0.5, -1.0).is_err());
    }

    #[test]
    fn cdf_matches_integrated_density() {
        for t in [0.01, 0.1, 1.0] {
            for x in [0.0, 0.3, 1.0] {
                for y in [0.1, 0.5, 0.95] {
                    let q = simpson(|z| transition_density(x, z, t).unwrap(), 0.0, y, 4000);
                    let c = transition_cdf(x, y, t).unwrap();
                    assert!((q - c).abs() < 1e-8, "t={t} x={x} y={y}: {q} vs {c}");
                }
                assert!((transition_cdf(x, 1.0, t).unwrap() - 1.0).abs() < 1e-10);
                assert!(transition_cdf(x, 0.0, t).unwrap().abs() < 1e-10);
            }
        }
    }

    #[test]
    fn uniform_start_cdf_matches_quadrature() {
        for t in [0.01, 0.1, 1.0] {
            for (a, b) in [(0.0, 0.5), (0.25, 0.5), (0.0, 1.0)] {
                for y in [0.0, 0.2, 0.7, 1.0] {
                    let law = InitialLaw::UniformOn(a, b);
                    let q = simpson(|x| transition_cdf(x, y, t).unwrap(), a, b, 2000) / (b - a);
                    assert!((law.cdf_at(y, t) - q).abs() < 1e-8, "t={t} [{a},{b}] y={y}");
                }
            }
        }
        assert!((InitialLaw::uniform().cdf_at(0.3, 0.05) - 0.3).abs() < 1e-10);
    }

    #[test]
    fn stationary_cdf_is_identity() {
        assert_eq!(stationary_cdf(0.0).unwrap(), 0.0);
        assert_eq!(stationary_cdf(1.0).unwrap(), 1.0);
        assert_eq!(stationary_cdf(0.25).unwrap(), 0.25);
        assert!(stationary_cdf(1.5).is_err());
    }

    #[test]
    fn grid_validation() {
        let key = StreamKey::new(1, "rbm-grid");
        let p = sample_reflected_path(&InitialLaw::Point(0.4), &[], &key).unwrap();
        assert_eq!(p.initial_value(), 0.4);
        assert!(p.jumps().is_empty());
        assert!(sample_reflected_path(&InitialLaw::Point(0.4), &[0.2, 0.1], &key).is_err());
        assert!(sample_reflected_path(&InitialLaw::UniformOn(0.5, 0.2), &[0.1], &key).is_err());
    }

    #[test]
    fn density_csv_shape() {
        let csv = density_table_csv(&[0.5], &[0.0, 1.0], &[0.1]).unwrap();
        assert_eq!(csv.lines().count(), 3);
        assert!(csv.starts_with("x,y,t,density\n0.5,0,0.1,"));
    }
}
