//! Fixation probability and conditional fixation-time moments of the
//! Wright-Fisher diffusion
//!
//! ```text
//! T_M ∂q/∂t = s x(1-x) ∂q/∂x + x(1-x)/(2 Ne) ∂²q/∂x²
//! ```
//!
//! together with the effective population size of a speaker network.

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::numeric::quad::{integrate_with_breaks, QuadOptions};
use crate::numeric::rng::substream;
use crate::numeric::EULER_GAMMA;
use crate::{Error, Result};

use std::f64::consts::PI;

/// Below this `2 Ne |s|` the mean comes from its Taylor series.
pub const TAYLOR_MEAN_LIMIT: f64 = 1e-3;
/// Below this `2 Ne |s|` the second moment comes from its Taylor series.
pub const TAYLOR_SECOND_LIMIT: f64 = 1e-2;
/// Above this `2 Ne |s|` both moments come from their asymptotic expansions.
pub const ASYMPTOTIC_LIMIT: f64 = 500.0;

const OUTER_TOL: f64 = 1e-8;
const INNER_TOL: f64 = 1e-11;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiffusionParams {
    pub ne: f64,
    pub s: f64,
    /// Memory lifetime in years.
    pub t_m: f64,
}

impl DiffusionParams {
    pub fn new(ne: f64, s: f64, t_m: f64) -> Result<Self> {
        if !(ne > 0.0) || !(t_m > 0.0) || !s.is_finite() {
            return Err(Error::domain(format!(
                "diffusion parameters need Ne > 0, T_M > 0 and finite s (got Ne={ne}, s={s}, T_M={t_m})"
            )));
        }
        Ok(Self { ne, s, t_m })
    }

    /// Scaled selection strength `2 Ne s`.
    pub fn scaled(&self) -> f64 {
        2.0 * self.ne * self.s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Taylor,
    Quadrature,
    Asymptotic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixationMoments {
    pub mean: f64,
    pub variance: f64,
    /// Branch used for the mean.
    pub regime: Regime,
    pub second_moment: f64,
}

/// Kimura's fixation probability from initial frequency `x0`.
pub fn fixation_probability(x0: f64, p: &DiffusionParams) -> Result<f64> {
    if !(0.0..=1.0).contains(&x0) {
        return Err(Error::domain(format!("initial frequency {x0} is outside [0, 1]")));
    }
    Ok(q_scaled(x0, p.scaled()))
}

/// `Q(x)` in terms of `S = 2 Ne s`.
pub(crate) fn q_scaled(x: f64, big_s: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    if big_s == 0.0 {
        x
    } else if big_s > 0.0 {
        f64::exp_m1(-big_s * x) / f64::exp_m1(-big_s)
    } else {
        let a = -big_s;
        (-a * (1.0 - x)).exp() * f64::exp_m1(-a * x) / f64::exp_m1(-a)
    }
}

/// `ln Q(x0)`, finite even where `Q` itself underflows.
pub fn ln_fixation_probability(x0: f64, p: &DiffusionParams) -> Result<f64> {
    if !(0.0..=1.0).contains(&x0) {
        return Err(Error::domain(format!("initial frequency {x0} is outside [0, 1]")));
    }
    let big_s = p.scaled();
    Ok(if x0 == 0.0 {
        f64::NEG_INFINITY
    } else if x0 == 1.0 {
        0.0
    } else if big_s == 0.0 {
        x0.ln()
    } else if big_s > 0.0 {
        (-f64::exp_m1(-big_s * x0)).ln() - (-f64::exp_m1(-big_s)).ln()
    } else {
        let a = -big_s;
        -a * (1.0 - x0) + (-f64::exp_m1(-a * x0)).ln() - (-f64::exp_m1(-a)).ln()
    })
}

/// `(1 - e^{-S u}) / S`, equal to `u` at `S = 0`.
fn phi(u: f64, big_s: f64) -> f64 {
    if big_s == 0.0 {
        u
    } else {
        -f64::exp_m1(-big_s * u) / big_s
    }
}

/// Breakpoints resolving boundary layers of width `1/S` at both ends of [lo, hi].
fn breakpoints(lo: f64, hi: f64, big_s: f64) -> Vec<f64> {
    let mut pts = vec![lo, hi];
    if big_s > 1.0 {
        let mut w = 1.0 / big_s;
        while w < 0.5 * (hi - lo) {
            pts.push(lo + w);
            pts.push(hi - w);
            w *= 10.0;
        }
    }
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts
}

/// `Q(u) / u`, finite as `u → 0` (for `S ≥ 0`).
fn q_over_u(u: f64, big_s: f64) -> f64 {
    if u < 1e-8 {
        if big_s == 0.0 {
            1.0
        } else {
            big_s / -f64::exp_m1(-big_s)
        }
    } else {
        q_scaled(u, big_s) / u
    }
}

/// `Q(u) φ(1-u) / (u (1-u))`, the mean-time integrand (for `S ≥ 0`).
fn mean_kernel(u: f64, big_s: f64) -> f64 {
    let v = 1.0 - u;
    let phi_over_v = if v < 1e-8 { 1.0 } else { phi(v, big_s) / v };
    q_over_u(u, big_s) * phi_over_v
}

/// Mean conditional fixation time in units of `2 Ne T_M` (for `S ≥ 0`).
fn mean_integral(big_s: f64) -> Result<f64> {
    let r = integrate_with_breaks(
        |u| mean_kernel(u, big_s),
        &breakpoints(0.0, 1.0, big_s),
        QuadOptions::rel(INNER_TOL),
    )?;
    Ok(r.value)
}

/// `F_1(y) / (2 Ne T_M)`, the unconditioned first time moment from `y`.
fn f1_scaled(y: f64, big_s: f64) -> Result<f64> {
    let inner_opts = QuadOptions {
        rel_tol: INNER_TOL,
        abs_tol: 1e-300,
        max_intervals: 4000,
    };
    // ∫_0^y Q(u)² e^{-S(y-u)} / (u(1-u)) du
    let left = if y > 0.0 {
        let mut pts = breakpoints(0.0, y, big_s);
        pts.retain(|&p| p >= 0.0 && p <= y);
        integrate_with_breaks(
            |u| {
                let qu = q_over_u(u, big_s);
                qu * qu * u * (-big_s * (y - u)).exp() / (1.0 - u)
            },
            &pts,
            inner_opts,
        )?
        .value
    } else {
        0.0
    };
    // ∫_y^1 Q(u) φ(1-u) / (u(1-u)) du
    let right = if y < 1.0 {
        let mut pts = breakpoints(y, 1.0, big_s);
        pts.retain(|&p| p >= y && p <= 1.0);
        integrate_with_breaks(|u| mean_kernel(u, big_s), &pts, inner_opts)?.value
    } else {
        0.0
    };
    Ok(phi(1.0 - y, big_s) * left + q_scaled(y, big_s) * right)
}

/// Conditional second moment in units of `(2 Ne T_M)²` (for `S ≥ 0`).
fn second_integral(big_s: f64) -> Result<f64> {
    let mut err = None;
    let r = integrate_with_breaks(
        |y| match f1_scaled(y, big_s) {
            Ok(f1) => {
                let v = 1.0 - y;
                let phi_over_v = if v < 1e-12 { 1.0 } else { phi(v, big_s) / v };
                2.0 * f1 / y * phi_over_v
            }
            Err(e) => {
                err.get_or_insert(e);
                0.0
            }
        },
        &breakpoints(0.0, 1.0, big_s),
        QuadOptions::rel(OUTER_TOL),
    )?;
    if let Some(e) = err {
        return Err(e);
    }
    Ok(r.value)
}

fn taylor_mean(big_s: f64) -> f64 {
    1.0 - big_s * big_s / 72.0
}

fn taylor_second(big_s: f64) -> f64 {
    // in units of (2 Ne T_M)²
    2.0 * ((PI * PI / 6.0 - 1.0) + 0.5 * (PI * PI / 36.0 - 17.0 / 54.0) * big_s * big_s)
}

fn asymptotic_mean(big_s: f64) -> f64 {
    // (2 T_M/|s|)[ln S + γ - 1/S] divided by 2 Ne T_M
    2.0 / big_s * (big_s.ln() + EULER_GAMMA - 1.0 / big_s)
}

fn asymptotic_second(big_s: f64) -> f64 {
    // (T_M/s)²[4(ln S + γ)² + π²/3 - 12/S] divided by (2 Ne T_M)²
    let l = big_s.ln() + EULER_GAMMA;
    (4.0 * l * l + PI * PI / 3.0 - 12.0 / big_s) / (big_s * big_s)
}

/// Branch selection for a given `S = 2 Ne |s|`.
fn scaled_moments(big_s: f64) -> Result<(f64, f64, Regime)> {
    let big_s = big_s.abs();
    if big_s > ASYMPTOTIC_LIMIT {
        return Ok((asymptotic_mean(big_s), asymptotic_second(big_s), Regime::Asymptotic));
    }
    let (m1, regime) = if big_s < TAYLOR_MEAN_LIMIT {
        (taylor_mean(big_s), Regime::Taylor)
    } else {
        (mean_integral(big_s)?, Regime::Quadrature)
    };
    let m2 = if big_s < TAYLOR_SECOND_LIMIT {
        taylor_second(big_s)
    } else {
        second_integral(big_s)?
    };
    Ok((m1, m2, regime))
}

/// Moments evaluated by quadrature regardless of regime (for cross-checks).
pub fn quadrature_moments(p: &DiffusionParams) -> Result<FixationMoments> {
    let big_s = p.scaled().abs();
    let unit = 2.0 * p.ne * p.t_m;
    let m1 = mean_integral(big_s)? * unit;
    let m2 = second_integral(big_s)? * unit * unit;
    Ok(FixationMoments {
        mean: m1,
        variance: m2 - m1 * m1,
        regime: Regime::Quadrature,
        second_moment: m2,
    })
}

/// Series-or-asymptotic evaluation regardless of threshold (for cross-checks).
pub fn expansion_moments(p: &DiffusionParams, regime: Regime) -> FixationMoments {
    let big_s = p.scaled().abs();
    let unit = 2.0 * p.ne * p.t_m;
    let (m1, m2) = match regime {
        Regime::Taylor => (taylor_mean(big_s), taylor_second(big_s)),
        _ => (asymptotic_mean(big_s), asymptotic_second(big_s)),
    };
    FixationMoments {
        mean: m1 * unit,
        variance: (m2 - m1 * m1) * unit * unit,
        regime,
        second_moment: m2 * unit * unit,
    }
}

/// Mean and variance of the fixation time of a single mutant, conditioned on
/// fixation. Symmetric under `s → -s`.
pub fn fixation_time_moments(p: &DiffusionParams) -> Result<FixationMoments> {
    let (m1, m2, regime) = scaled_moments(p.scaled())?;
    let unit = 2.0 * p.ne * p.t_m;
    let mean = m1 * unit;
    let second_moment = m2 * unit * unit;
    let variance = second_moment - mean * mean;
    if !(mean > 0.0) || !(variance > 0.0) {
        return Err(Error::numerical(format!(
            "fixation moments not positive for Ne={}, s={}: mean {mean:e}, variance {variance:e}",
            p.ne, p.s
        )));
    }
    Ok(FixationMoments {
        mean,
        variance,
        regime,
        second_moment,
    })
}

/// Shape and rate of the Gamma distribution with the given mean and variance.
pub fn gamma_params(m: &FixationMoments) -> (f64, f64) {
    (m.mean * m.mean / m.variance, m.mean / m.variance)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub n: u64,
    /// Degree exponent: `p_z ∝ z^{-(1+ν)}`.
    pub nu: f64,
    pub z_min: u64,
    pub epsilon: f64,
}

pub const DEFAULT_Z_MIN: u64 = 2;

impl NetworkSpec {
    pub fn new(n: u64, nu: f64, z_min: u64, epsilon: f64) -> Result<Self> {
        if n < 2 || z_min < 1 || !(epsilon > 0.0 && epsilon <= 1.0) || !(nu > 0.0) {
            return Err(Error::domain(format!(
                "network needs N ≥ 2, z_min ≥ 1, ν > 0, ε in (0, 1] (got N={n}, z_min={z_min}, ν={nu}, ε={epsilon})"
            )));
        }
        if z_min > n - 1 {
            return Err(Error::domain(format!(
                "z_min={z_min} exceeds the largest degree N-1={}",
                n - 1
            )));
        }
        Ok(Self { n, nu, z_min, epsilon })
    }
}

/// `Ne = (N/ε) z̄² / mean(z²)`.
pub fn effective_population_size(spec: &NetworkSpec, degrees: &[u64]) -> f64 {
    let n = degrees.len() as f64;
    let mean = degrees.iter().map(|&z| z as f64).sum::<f64>() / n;
    let mean_sq = degrees.iter().map(|&z| (z as f64).powi(2)).sum::<f64>() / n;
    effective_size_from_moments(spec.n as f64, spec.epsilon, mean, mean_sq)
}

pub fn effective_size_from_moments(n: f64, epsilon: f64, mean: f64, mean_sq: f64) -> f64 {
    n / epsilon * mean * mean / mean_sq
}

/// Largest degree tabulated explicitly; beyond it the tail is summed by
/// Euler-Maclaurin.
const BULK: u64 = 100_000;

/// Truncated discrete power law on `[z_min, z_max]`.
#[derive(Debug, Clone)]
pub struct PowerLaw {
    nu: f64,
    z_min: u64,
    z_max: u64,
    bulk_end: u64,
    /// Cumulative weights for `z_min..=bulk_end`.
    cumulative: Vec<f64>,
    tail_mass: f64,
}

impl PowerLaw {
    pub fn new(nu: f64, z_min: u64, z_max: u64) -> Self {
        let bulk_end = z_max.min(z_min + BULK - 1);
        let mut cumulative = Vec::with_capacity((bulk_end - z_min + 1) as usize);
        let mut acc = 0.0;
        for z in z_min..=bulk_end {
            acc += Self::w(nu, z_min, z as f64);
            cumulative.push(acc);
        }
        let mut law = Self {
            nu,
            z_min,
            z_max,
            bulk_end,
            cumulative,
            tail_mass: 0.0,
        };
        law.tail_mass = law.tail_sum(bulk_end + 1);
        law
    }

    /// Unnormalised weight `(z/z_min)^{-(1+ν)}`.
    fn w(nu: f64, z_min: u64, z: f64) -> f64 {
        (z / z_min as f64).powf(-(1.0 + nu))
    }

    /// `Σ_{z=a}^{z_max} w(z)` by Euler-Maclaurin (exact to rounding for the
    /// slowly varying tail beyond the tabulated bulk).
    fn tail_sum(&self, a: u64) -> f64 {
        if a > self.z_max {
            return 0.0;
        }
        let (nu, zm) = (self.nu, self.z_min as f64);
        let (a_f, b_f) = (a as f64, self.z_max as f64);
        let w = |z: f64| Self::w(nu, self.z_min, z);
        // ∫_a^b (z/zm)^{-(1+ν)} dz
        let integral = zm / nu * ((a_f / zm).powf(-nu) - (b_f / zm).powf(-nu));
        let dw = |z: f64| -(1.0 + nu) / z * w(z);
        integral + 0.5 * (w(a_f) + w(b_f)) - (dw(b_f) - dw(a_f)) / 12.0
    }

    fn total(&self) -> f64 {
        self.cumulative.last().copied().unwrap_or(0.0) + self.tail_mass
    }

    /// Probability of exactly degree `z`.
    pub fn pmf(&self, z: u64) -> f64 {
        if z < self.z_min || z > self.z_max {
            0.0
        } else {
            Self::w(self.nu, self.z_min, z as f64) / self.total()
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        let bulk_mass = self.cumulative.last().copied().unwrap_or(0.0);
        let u = rng.random::<f64>() * self.total();
        if u < bulk_mass || self.tail_mass == 0.0 {
            let i = self.cumulative.partition_point(|&c| c <= u);
            return self.z_min + i.min(self.cumulative.len() - 1) as u64;
        }
        self.sample_tail((u - bulk_mass) / self.tail_mass)
    }

    /// Inverse CDF within the tail: smallest `z` with `P(Z ≥ z+1 | tail) < 1 - v`.
    fn sample_tail(&self, v: f64) -> u64 {
        let target = (1.0 - v) * self.tail_mass;
        let (mut lo, mut hi) = (self.bulk_end + 1, self.z_max);
        // tail_sum is decreasing in its argument; find the last z with tail_sum(z) > target
        while lo < hi {
            let mid = lo + (hi - lo).div_ceil(2);
            if self.tail_sum(mid) > target {
                lo = mid;
            } else {
                hi = mid - 1;
            }
        }
        lo
    }
}

/// Degrees for the speakers of `spec`, i.i.d. from the truncated law on
/// `[z_min, N-1]`.
pub fn sample_power_law_degrees(spec: &NetworkSpec, seed: u64) -> Vec<u64> {
    let law = PowerLaw::new(spec.nu, spec.z_min, spec.n - 1);
    let mut rng = substream(seed, 0);
    (0..spec.n).map(|_| law.sample(&mut rng)).collect()
}

/// Mean and mean square of an `N`-speaker degree sample drawn without
/// materialising it: tabulated degrees are drawn as multinomial counts and
/// only the rare tail degrees individually.
pub fn sample_degree_moments(spec: &NetworkSpec, seed: u64) -> (f64, f64) {
    let law = PowerLaw::new(spec.nu, spec.z_min, spec.n - 1);
    let mut rng = substream(seed, 1);
    let total = law.total();
    let mut remaining = spec.n;
    let mut mass_left = 1.0;
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    let mut prev = 0.0;
    for (i, &c) in law.cumulative.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        let p = (c - prev) / total;
        prev = c;
        let cond = (p / mass_left).clamp(0.0, 1.0);
        let k = if cond >= 1.0 {
            remaining
        } else {
            Binomial::new(remaining, cond).map(|b| b.sample(&mut rng)).unwrap_or(0)
        };
        mass_left -= p;
        remaining -= k;
        let z = (law.z_min + i as u64) as f64;
        sum += k as f64 * z;
        sum_sq += k as f64 * z * z;
    }
    for _ in 0..remaining {
        let z = law.sample_tail(rng.random::<f64>()) as f64;
        sum += z;
        sum_sq += z * z;
    }
    let n = spec.n as f64;
    (sum / n, sum_sq / n)
}

/// Rate at which innovations that will go on to fix are introduced:
/// `N R η Q(ε/N)`.
pub fn origination_rate(n: f64, r: f64, eta: f64, epsilon: f64, diffusion: &DiffusionParams) -> Result<f64> {
    if !(n > 0.0 && r > 0.0 && eta > 0.0 && epsilon > 0.0) || epsilon / n > 1.0 {
        return Err(Error::domain(format!(
            "origination rate needs positive N, R, η, ε with ε/N ≤ 1 (got N={n}, R={r}, η={eta}, ε={epsilon})"
        )));
    }
    Ok(n * r * eta * fixation_probability(epsilon / n, diffusion)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(ne: f64, s: f64) -> DiffusionParams {
        DiffusionParams::new(ne, s, 1.0).unwrap()
    }

    #[test]
    fn probability_limits() {
        assert_eq!(fixation_probability(0.25, &params(100.0, 0.0)).unwrap(), 0.25);
        assert_eq!(fixation_probability(1.0, &params(100.0, 0.3)).unwrap(), 1.0);
        assert_eq!(fixation_probability(1.0, &params(100.0, -0.3)).unwrap(), 1.0);
        assert!(fixation_probability(1.5, &params(100.0, 0.0)).is_err());
        let q = fixation_probability(0.01, &params(100.0, 0.01)).unwrap();
        assert!((q - 0.022_895).abs() < 1e-5, "{q}");
        for s in [1e-12, -1e-12] {
            let q = fixation_probability(0.3, &params(0.5, s)).unwrap();
            assert!((q - 0.3).abs() < 1e-9);
        }
    }

    #[test]
    fn strong_negative_selection_does_not_overflow() {
        let q = fixation_probability(0.5, &params(1e4, -1.0)).unwrap();
        assert!((0.0..1e-300).contains(&q));
        let q = fixation_probability(1e-4, &params(1e4, 1.0)).unwrap();
        assert!((q - (1.0 - (-2.0f64).exp())).abs() < 1e-12);
    }

    #[test]
    fn neutral_mean() {
        let m = fixation_time_moments(&params(1000.0, 0.0)).unwrap();
        assert_eq!(m.mean, 2000.0);
        assert_eq!(m.regime, Regime::Taylor);
    }

    #[test]
    fn asymptotic_example() {
        let m = fixation_time_moments(&params(1e4, 1.0)).unwrap();
        assert_eq!(m.regime, Regime::Asymptotic);
        assert!((m.mean - 20.96).abs() < 5e-3, "{}", m.mean);
    }

    #[test]
    fn gamma_identities() {
        let m = FixationMoments {
            mean: 100.0,
            variance: 400.0,
            regime: Regime::Quadrature,
            second_moment: 10400.0,
        };
        assert_eq!(gamma_params(&m), (25.0, 0.25));
    }

    #[test]
    fn constant_degree_network() {
        let spec = NetworkSpec::new(500, 2.0, 4, 1.0).unwrap();
        assert_eq!(effective_population_size(&spec, &[4; 500]), 500.0);
        let spec = NetworkSpec { epsilon: 0.5, ..spec };
        assert_eq!(effective_population_size(&spec, &[4; 500]), 1000.0);
    }

    #[test]
    fn power_law_tail_sum_matches_direct_sum() {
        let law = PowerLaw::new(1.3, 2, 10_000_000);
        let a = 200_000u64;
        let direct: f64 = (a..=10_000_000).map(|z| PowerLaw::w(1.3, 2, z as f64)).sum();
        assert!(((law.tail_sum(a) - direct) / direct).abs() < 1e-9);
    }

    #[test]
    fn neutral_origination_rate() {
        let w = origination_rate(1000.0, 0.04, 1e-5, 1.0, &params(1000.0, 0.0)).unwrap();
        assert!((w - 4e-7).abs() < 1e-20);
    }

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn branches_agree_at_thresholds() {
        for (limit, regime) in [
            (TAYLOR_MEAN_LIMIT, Regime::Taylor),
            (TAYLOR_SECOND_LIMIT, Regime::Taylor),
            (ASYMPTOTIC_LIMIT, Regime::Asymptotic),
        ] {
            let p = params(100.0, limit / 200.0);
            let q = quadrature_moments(&p).unwrap();
            let e = expansion_moments(&p, regime);
            eprintln!(
                "S={limit}: mean {} vs {}, second {} vs {}",
                q.mean, e.mean, q.second_moment, e.second_moment
            );
            assert!(rel(e.mean, q.mean) < 1e-3);
            assert!(rel(e.second_moment, q.second_moment) < 1e-3);
        }
    }
}
