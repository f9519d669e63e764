//! Privacy-loss-distribution arithmetic.
//!
//! A [`DiscretePld`] holds finite loss mass on the grid `x_k = k * grid_step`
//! plus a mass `delta_inf` at `+inf`. Every constructor here rounds losses
//! up or interpolates the privacy profile from above, so derived `(eps, delta)`
//! guarantees never understate the true loss.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

pub const DEFAULT_GRID_STEP: f64 = 1e-3;
/// Tail mass below this is folded away by [`DiscretePld::truncate`].
pub const TAIL_MASS: f64 = 1e-12;
/// Losses beyond this magnitude are not represented on the grid.
const LOSS_CAP: f64 = 500.0;
const MASS_TOL: f64 = 1e-9;
const DIRECT_CONVOLUTION_LIMIT: usize = 1 << 22;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AccountantError {
    #[error("grid steps differ: {0} vs {1}")]
    MixedGrid(f64, f64),
    #[error("delta {delta} does not exceed the distinguishing mass {delta_inf}; no finite epsilon")]
    NoFiniteEpsilon { delta: f64, delta_inf: f64 },
    #[error("invalid privacy loss distribution: {0}")]
    InvalidPld(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("profile is not convex near eps = {eps}; convexify the trade-off curve first")]
    NotConvex { eps: f64 },
    #[error("nothing to compose")]
    Empty,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscretePld {
    pub grid_step: f64,
    pub k_min: i64,
    pub masses: Vec<f64>,
    pub delta_inf: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Convolution {
    #[default]
    Auto,
    Direct,
    Fft,
}

fn check_step(step: f64) -> Result<(), AccountantError> {
    if step > 0.0 && step.is_finite() {
        Ok(())
    } else {
        Err(AccountantError::InvalidArgument(format!("grid_step = {step}")))
    }
}

fn same_step(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs())
}

/// Grid index of the smallest grid point at or above `x`.
fn ceil_index(x: f64, step: f64) -> i64 {
    let r = x / step;
    let k = r.round();
    if (r - k).abs() <= 1e-9 {
        k as i64
    } else {
        r.ceil() as i64
    }
}

fn floor_index(x: f64, step: f64) -> i64 {
    let r = x / step;
    let k = r.round();
    if (r - k).abs() <= 1e-9 {
        k as i64
    } else {
        r.floor() as i64
    }
}

impl DiscretePld {
    pub fn new(grid_step: f64, k_min: i64, masses: Vec<f64>, delta_inf: f64) -> Result<Self, AccountantError> {
        let pld = Self { grid_step, k_min, masses, delta_inf };
        pld.validate()?;
        Ok(pld)
    }

    pub fn validate(&self) -> Result<(), AccountantError> {
        check_step(self.grid_step)?;
        if let Some(p) = self.masses.iter().find(|p| !(p.is_finite() && **p >= 0.0)) {
            return Err(AccountantError::InvalidPld(format!("mass {p}")));
        }
        if !(0.0..=1.0).contains(&self.delta_inf) {
            return Err(AccountantError::InvalidPld(format!("delta_inf {}", self.delta_inf)));
        }
        let total = self.total_mass();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(AccountantError::InvalidPld(format!("total mass {total}")));
        }
        Ok(())
    }

    /// All mass at loss zero: the two distributions are identical.
    pub fn identity(grid_step: f64) -> Self {
        Self { grid_step, k_min: 0, masses: vec![1.0], delta_inf: 0.0 }
    }

    /// All mass at `+inf`: the two distributions are perfectly distinguishable.
    pub fn distinguishing(grid_step: f64) -> Self {
        Self { grid_step, k_min: 0, masses: Vec::new(), delta_inf: 1.0 }
    }

    /// Builds a PLD from `(loss, mass)` atoms, rounding each loss up to the grid.
    /// Infinite losses go to `delta_inf`.
    pub fn from_losses(atoms: &[(f64, f64)], extra_delta_inf: f64, grid_step: f64) -> Result<Self, AccountantError> {
        check_step(grid_step)?;
        let mut delta_inf = extra_delta_inf;
        let mut finite: Vec<(i64, f64)> = Vec::new();
        for &(x, p) in atoms {
            if x.is_nan() || !(p >= 0.0) {
                return Err(AccountantError::InvalidArgument(format!("atom ({x}, {p})")));
            }
            if p == 0.0 || x == f64::NEG_INFINITY {
                continue;
            }
            if x > LOSS_CAP {
                delta_inf += p;
            } else {
                finite.push((ceil_index(x.max(-LOSS_CAP), grid_step), p));
            }
        }
        if finite.is_empty() {
            return Self::new(grid_step, 0, Vec::new(), delta_inf.min(1.0));
        }
        let k_min = finite.iter().map(|a| a.0).min().expect("non-empty");
        let k_max = finite.iter().map(|a| a.0).max().expect("non-empty");
        let mut masses = vec![0.0; (k_max - k_min + 1) as usize];
        for (k, p) in finite {
            masses[(k - k_min) as usize] += p;
        }
        let mut pld = Self { grid_step, k_min, masses, delta_inf };
        pld.renormalize_into_top();
        pld.validate()?;
        Ok(pld)
    }

    pub fn loss(&self, i: usize) -> f64 {
        (self.k_min + i as i64) as f64 * self.grid_step
    }

    pub fn k_max(&self) -> i64 {
        self.k_min + self.masses.len() as i64 - 1
    }

    /// Largest finite loss carrying mass, or 0 when there is none.
    pub fn x_max(&self) -> f64 {
        match self.masses.iter().rposition(|p| *p > 0.0) {
            Some(i) => self.loss(i),
            None => 0.0,
        }
    }

    pub fn total_mass(&self) -> f64 {
        self.masses.iter().sum::<f64>() + self.delta_inf
    }

    /// Hockey-stick divergence `delta_inf + sum_k max(0, 1 - e^(eps - x_k)) p_k`.
    pub fn delta_at(&self, eps: f64) -> f64 {
        let first = (floor_index(eps, self.grid_step) - self.k_min + 1).max(0) as usize;
        let tail: f64 = self
            .masses
            .iter()
            .enumerate()
            .skip(first)
            .map(|(i, p)| p * (-(eps - self.loss(i)).exp_m1()).max(0.0))
            .sum();
        (self.delta_inf + tail).clamp(0.0, 1.0)
    }

    /// Smallest grid epsilon with `delta_at(eps) <= delta`.
    pub fn epsilon_at(&self, delta: f64) -> Result<f64, AccountantError> {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(AccountantError::InvalidArgument(format!("delta = {delta}")));
        }
        if delta <= self.delta_inf {
            return Err(AccountantError::NoFiniteEpsilon { delta, delta_inf: self.delta_inf });
        }
        if self.delta_at(0.0) <= delta {
            return Ok(0.0);
        }
        let mut lo: i64 = 0;
        let mut hi: i64 = ((self.x_max() + 5.0) / self.grid_step).ceil() as i64;
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if self.delta_at(mid as f64 * self.grid_step) <= delta {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(hi as f64 * self.grid_step)
    }

    pub fn profile(&self, eps_grid: &[f64]) -> PrivacyProfile {
        PrivacyProfile { points: eps_grid.iter().map(|&e| (e, self.delta_at(e))).collect() }
    }

    /// Folds tails lighter than `tail` mass: the lower tail into the smallest
    /// retained point, the upper tail into `delta_inf`.
    pub fn truncate(&self, tail: f64) -> Self {
        let n = self.masses.len();
        if n == 0 {
            return self.clone();
        }
        let mut lo = 0;
        let mut low_mass = 0.0;
        while lo + 1 < n && low_mass + self.masses[lo] < tail {
            low_mass += self.masses[lo];
            lo += 1;
        }
        let mut hi = n - 1;
        let mut high_mass = 0.0;
        while hi > lo && high_mass + self.masses[hi] < tail {
            high_mass += self.masses[hi];
            hi -= 1;
        }
        let mut masses = self.masses[lo..=hi].to_vec();
        masses[0] += low_mass;
        Self {
            grid_step: self.grid_step,
            k_min: self.k_min + lo as i64,
            masses,
            delta_inf: (self.delta_inf + high_mass).min(1.0),
        }
    }

    /// Pushes rounding drift in total mass into `delta_inf` (never below zero).
    /// Raises the profile to at least `deltas` (indexed from `k_min`) by moving
    /// the worst shortfall from the lowest losses to `delta_inf`.
    fn cover(&mut self, deltas: &[f64]) {
        let n = self.masses.len().min(deltas.len());
        let decay = (-self.grid_step).exp();
        // Suffix sums: above[j] = sum_{i>j} p_i, tilted[j] = sum_{i>j} p_i e^{eps_j - loss_i}.
        let (mut above, mut tilted, mut shortfall) = (0.0, 0.0, 0.0f64);
        for j in (0..n).rev() {
            shortfall = shortfall.max(deltas[j] - (self.delta_inf + above - tilted));
            above += self.masses[j];
            tilted = decay * (tilted + self.masses[j]);
        }
        // Below this the shortfall is rounding in the check itself.
        if shortfall <= 1e-14 {
            return;
        }
        let lift = shortfall * (1.0 + 1e-6);
        let mut owed = lift;
        for p in self.masses.iter_mut() {
            let take = owed.min(*p);
            *p -= take;
            owed -= take;
            if owed <= 0.0 {
                break;
            }
        }
        self.delta_inf = (self.delta_inf + lift - owed).min(1.0);
    }

    fn renormalize_into_top(&mut self) {
        let finite: f64 = self.masses.iter().sum();
        self.delta_inf = (1.0 - finite).clamp(0.0, 1.0).max(self.delta_inf.min(1.0));
        let total = finite + self.delta_inf;
        if total > 1.0 {
            let scale = (1.0 - self.delta_inf) / finite;
            self.masses.iter_mut().for_each(|p| *p *= scale);
        }
    }
}

fn convolve_direct(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        if *x == 0.0 {
            continue;
        }
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

fn convolve_fft(a: &[f64], b: &[f64]) -> Vec<f64> {
    let len = a.len() + b.len() - 1;
    let n = len.next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let forward = planner.plan_fft_forward(n);
    let inverse = planner.plan_fft_inverse(n);
    let pad = |xs: &[f64]| {
        let mut v: Vec<Complex<f64>> = xs.iter().map(|&x| Complex::new(x, 0.0)).collect();
        v.resize(n, Complex::new(0.0, 0.0));
        v
    };
    let mut fa = pad(a);
    let mut fb = pad(b);
    forward.process(&mut fa);
    forward.process(&mut fb);
    let mut prod: Vec<Complex<f64>> = fa.iter().zip(&fb).map(|(x, y)| x * y).collect();
    inverse.process(&mut prod);
    prod[..len].iter().map(|c| (c.re / n as f64).max(0.0)).collect()
}

pub fn compose_pair(a: &DiscretePld, b: &DiscretePld, method: Convolution) -> Result<DiscretePld, AccountantError> {
    if !same_step(a.grid_step, b.grid_step) {
        return Err(AccountantError::MixedGrid(a.grid_step, b.grid_step));
    }
    let delta_inf = 1.0 - (1.0 - a.delta_inf) * (1.0 - b.delta_inf);
    if a.masses.is_empty() || b.masses.is_empty() {
        return Ok(DiscretePld { grid_step: a.grid_step, k_min: 0, masses: Vec::new(), delta_inf: 1.0 });
    }
    let use_fft = match method {
        Convolution::Direct => false,
        Convolution::Fft => true,
        Convolution::Auto => a.masses.len().saturating_mul(b.masses.len()) > DIRECT_CONVOLUTION_LIMIT,
    };
    let masses = if use_fft { convolve_fft(&a.masses, &b.masses) } else { convolve_direct(&a.masses, &b.masses) };
    let mut out = DiscretePld { grid_step: a.grid_step, k_min: a.k_min + b.k_min, masses, delta_inf };
    out.renormalize_into_top();
    Ok(out.truncate(TAIL_MASS))
}

pub fn compose(plds: &[DiscretePld]) -> Result<DiscretePld, AccountantError> {
    compose_with(plds, Convolution::Auto)
}

pub fn compose_with(plds: &[DiscretePld], method: Convolution) -> Result<DiscretePld, AccountantError> {
    let (first, rest) = plds.split_first().ok_or(AccountantError::Empty)?;
    rest.iter().try_fold(first.clone(), |acc, p| compose_pair(&acc, p, method))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrivacyProfile {
    pub points: Vec<(f64, f64)>,
}

impl PrivacyProfile {
    /// Pointwise maximum of profiles evaluated on the same epsilon grid.
    pub fn pointwise_max(&self, other: &Self) -> Result<Self, AccountantError> {
        if self.points.len() != other.points.len() {
            return Err(AccountantError::InvalidArgument("profiles on different grids".into()));
        }
        let points = self
            .points
            .iter()
            .zip(&other.points)
            .map(|(&(e, a), &(e2, b))| {
                if (e - e2).abs() > 1e-12 {
                    Err(AccountantError::InvalidArgument(format!("eps {e} vs {e2}")))
                } else {
                    Ok((e, a.max(b)))
                }
            })
            .collect::<Result<_, _>>()?;
        Ok(Self { points })
    }
}

/// `k_lo..=k_hi` as epsilon values.
pub fn eps_grid(k_lo: i64, k_hi: i64, grid_step: f64) -> Vec<f64> {
    (k_lo..=k_hi).map(|k| k as f64 * grid_step).collect()
}

/// Reconstructs the PLD whose privacy profile linearly interpolates the
/// given points in `e^eps` and stays flat beyond the last one.
///
/// Points must lie on consecutive grid multiples. Mass not accounted for by
/// the profile's curvature is placed on the lowest grid point.
pub fn pld_from_profile(profile: &PrivacyProfile, grid_step: f64) -> Result<DiscretePld, AccountantError> {
    check_step(grid_step)?;
    let pts = &profile.points;
    if pts.is_empty() {
        return Err(AccountantError::InvalidArgument("empty profile".into()));
    }
    let k_min = (pts[0].0 / grid_step).round() as i64;
    for (i, &(e, d)) in pts.iter().enumerate() {
        let k = k_min + i as i64;
        if (e - k as f64 * grid_step).abs() > 1e-6 * grid_step {
            return Err(AccountantError::InvalidArgument(format!("eps {e} is not grid point {k}")));
        }
        if d.is_nan() {
            return Err(AccountantError::InvalidArgument(format!("delta at eps {e} is NaN")));
        }
    }
    let deltas: Vec<f64> = pts.iter().map(|p| p.1.clamp(0.0, 1.0)).collect();
    let ys: Vec<f64> = (0..pts.len()).map(|i| ((k_min + i as i64) as f64 * grid_step).exp()).collect();
    let n = pts.len();
    let mut slopes: Vec<f64> = (0..n - 1).map(|i| (deltas[i + 1] - deltas[i]) / (ys[i + 1] - ys[i])).collect();
    slopes.push(0.0);
    let mut masses = vec![0.0; n];
    for i in 1..n {
        let p = ys[i] * (slopes[i] - slopes[i - 1]);
        if p < -MASS_TOL {
            return Err(AccountantError::NotConvex { eps: pts[i].0 });
        }
        masses[i] = p.max(0.0);
    }
    let delta_inf = deltas[n - 1];
    let rest = 1.0 - delta_inf - masses[1..].iter().sum::<f64>();
    if rest < -MASS_TOL {
        return Err(AccountantError::NotConvex { eps: pts[0].0 });
    }
    masses[0] = rest.max(0.0);
    let mut pld = DiscretePld { grid_step, k_min, masses, delta_inf };
    pld.renormalize_into_top();
    pld.cover(&deltas);
    Ok(pld.truncate(TAIL_MASS))
}

/// PLD dominating every input: pointwise max of their profiles, re-discretised.
pub fn dominating_pld(plds: &[DiscretePld]) -> Result<DiscretePld, AccountantError> {
    match plds {
        [] => Err(AccountantError::Empty),
        [one] => Ok(one.clone()),
        _ => {
            let step = plds[0].grid_step;
            if let Some(p) = plds.iter().find(|p| !same_step(p.grid_step, step)) {
                return Err(AccountantError::MixedGrid(step, p.grid_step));
            }
            let with_mass: Vec<&DiscretePld> = plds.iter().filter(|p| !p.masses.is_empty()).collect();
            if with_mass.is_empty() {
                return Ok(DiscretePld::distinguishing(step));
            }
            let lo = with_mass.iter().map(|p| p.k_min).min().expect("non-empty");
            let hi = with_mass.iter().map(|p| p.k_max()).max().expect("non-empty");
            let grid = eps_grid(lo, hi, step);
            let profile = plds
                .iter()
                .map(|p| p.profile(&grid))
                .try_fold(None::<PrivacyProfile>, |acc, p| match acc {
                    None => Ok(Some(p)),
                    Some(a) => a.pointwise_max(&p).map(Some),
                })?
                .expect("non-empty");
            pld_from_profile(&profile, step)
        }
    }
}

/// Exact hockey-stick divergence between Laplace laws whose locations differ by `eps0 * b`.
pub fn laplace_delta(eps: f64, eps0: f64) -> f64 {
    if eps >= eps0 {
        0.0
    } else if eps > -eps0 {
        -((eps - eps0) / 2.0).exp_m1()
    } else {
        -eps.exp_m1()
    }
}

/// `ln P(Z > z)` for a standard normal `Z`, accurate far into the upper tail.
pub(crate) fn log_normal_sf(z: f64) -> f64 {
    if z < 30.0 {
        (0.5 * erfc(z / std::f64::consts::SQRT_2)).ln()
    } else {
        let z2 = z * z;
        let series = 1.0 - 1.0 / z2 + 3.0 / (z2 * z2) - 15.0 / (z2 * z2 * z2);
        -0.5 * z2 - (z * (2.0 * std::f64::consts::PI).sqrt()).ln() + series.ln()
    }
}

pub(crate) fn normal_sf(z: f64) -> f64 {
    0.5 * erfc(z / std::f64::consts::SQRT_2)
}

/// Exact hockey-stick divergence between `N(0, s^2)` and `N(delta2, s^2)`.
pub fn gaussian_delta(eps: f64, delta2: f64, sigma: f64) -> f64 {
    let s = delta2 / sigma;
    let mu = 0.5 * s * s;
    let first = normal_sf((eps - mu) / s);
    let second = (eps + log_normal_sf((eps + mu) / s)).exp();
    (first - second).clamp(0.0, 1.0)
}

fn check_positive(name: &str, v: f64) -> Result<(), AccountantError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(AccountantError::InvalidArgument(format!("{name} = {v}")))
    }
}

fn pld_from_exact_profile(k_lo: i64, k_hi: i64, grid_step: f64, delta: impl Fn(f64) -> f64) -> Result<DiscretePld, AccountantError> {
    let grid = eps_grid(k_lo, k_hi, grid_step);
    let profile = PrivacyProfile { points: grid.iter().map(|&e| (e, delta(e))).collect() };
    pld_from_profile(&profile, grid_step)
}

fn clamp_range(lo: f64, hi: f64, grid_step: f64) -> (i64, i64) {
    let lo = lo.clamp(-LOSS_CAP, LOSS_CAP);
    let hi = hi.clamp(-LOSS_CAP, LOSS_CAP);
    let k_lo = floor_index(lo, grid_step);
    let k_hi = ceil_index(hi, grid_step).max(k_lo);
    (k_lo, k_hi)
}

pub fn analytic_pld_laplace(delta1: f64, scale: f64, grid_step: f64) -> Result<DiscretePld, AccountantError> {
    check_positive("sensitivity", delta1)?;
    check_positive("scale", scale)?;
    check_step(grid_step)?;
    let eps0 = delta1 / scale;
    let (k_lo, k_hi) = clamp_range(-eps0, eps0, grid_step);
    pld_from_exact_profile(k_lo, k_hi, grid_step, |e| laplace_delta(e, eps0))
}

pub fn analytic_pld_gaussian(delta2: f64, sigma: f64, grid_step: f64) -> Result<DiscretePld, AccountantError> {
    check_positive("sensitivity", delta2)?;
    check_positive("sigma", sigma)?;
    check_step(grid_step)?;
    let s = delta2 / sigma;
    let mu = 0.5 * s * s;
    // Standard-normal tail beyond 7.5 is below 1e-13.
    let (k_lo, k_hi) = clamp_range(mu - 7.5 * s, mu + 7.5 * s, grid_step);
    pld_from_exact_profile(k_lo, k_hi, grid_step, |e| gaussian_delta(e, delta2, sigma))
}

/// Exact PLD between exponential-mechanism selections on two score vectors,
/// covering both orientations.
pub fn exponential_pld(
    scores: &[f64],
    scores_prime: &[f64],
    epsilon: f64,
    sensitivity: f64,
    grid_step: f64,
) -> Result<DiscretePld, AccountantError> {
    check_positive("epsilon", epsilon)?;
    check_positive("sensitivity", sensitivity)?;
    if scores.len() != scores_prime.len() || scores.is_empty() {
        return Err(AccountantError::InvalidArgument("score vectors differ in length".into()));
    }
    let p = crate::mechanisms::exponential_probabilities(scores, epsilon, sensitivity);
    let q = crate::mechanisms::exponential_probabilities(scores_prime, epsilon, sensitivity);
    let oriented = |a: &[f64], b: &[f64]| {
        let atoms: Vec<(f64, f64)> = a
            .iter()
            .zip(b)
            .map(|(&x, &y)| (if y == 0.0 { f64::INFINITY } else { (x / y).ln() }, x))
            .collect();
        DiscretePld::from_losses(&atoms, 0.0, grid_step)
    };
    dominating_pld(&[oriented(&p, &q)?, oriented(&q, &p)?])
}

/// Smallest sigma whose Gaussian profile satisfies `delta(epsilon) <= delta` at the given sensitivity.
pub fn calibrate_gaussian_sigma(epsilon: f64, delta: f64, sensitivity: f64) -> Result<f64, AccountantError> {
    check_positive("epsilon", epsilon)?;
    check_positive("sensitivity", sensitivity)?;
    if !(delta > 0.0 && delta < 1.0) {
        return Err(AccountantError::InvalidArgument(format!("delta = {delta}")));
    }
    let mut lo = 1e-6 * sensitivity;
    let mut hi = sensitivity;
    while gaussian_delta(epsilon, sensitivity, hi) > delta {
        hi *= 2.0;
    }
    while gaussian_delta(epsilon, sensitivity, lo) <= delta {
        lo /= 2.0;
    }
    while (hi - lo) > 1e-12 * hi {
        let mid = 0.5 * (lo + hi);
        if gaussian_delta(epsilon, sensitivity, mid) > delta {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}

fn check_advanced_args(eps: f64, delta_each: f64, k: u32, delta_slack: f64) -> Result<(), AccountantError> {
    if !(eps >= 0.0 && eps.is_finite()) || k == 0 || !(0.0..1.0).contains(&delta_each) || !(delta_slack > 0.0 && delta_slack < 1.0) {
        return Err(AccountantError::InvalidArgument(format!(
            "eps={eps}, delta_each={delta_each}, k={k}, delta_slack={delta_slack}"
        )));
    }
    Ok(())
}

/// Advanced composition: `eps * sqrt(2k ln(1/d')) + k eps (e^eps - 1)`, valid at `k * delta_each + d'`.
pub fn advanced_composition(eps: f64, delta_each: f64, k: u32, delta_slack: f64) -> Result<f64, AccountantError> {
    check_advanced_args(eps, delta_each, k, delta_slack)?;
    let k = f64::from(k);
    Ok(eps * (2.0 * k * (1.0 / delta_slack).ln()).sqrt() + k * eps * eps.exp_m1())
}

/// The same bound with `ln(1/d')` replaced by `1/d'`.
pub fn advanced_composition_without_log(eps: f64, delta_each: f64, k: u32, delta_slack: f64) -> Result<f64, AccountantError> {
    check_advanced_args(eps, delta_each, k, delta_slack)?;
    let k = f64::from(k);
    Ok(eps * (2.0 * k / delta_slack).sqrt() + k * eps * eps.exp_m1())
}
