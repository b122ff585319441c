//! Probability of exactly `m` completed changes in an observation window.
//!
//! Originations arrive as a Poisson process whose rate depends on the current
//! stage, and each change completes a Gamma-distributed fixation time after
//! its origination. The Laplace transform of `L_m(t)` has a closed form,
//!
//! ```text
//! L̂_m(s) = (1/s) Π_{i≤m} ω_i/(ω_i+s) · (β/(β+s))^{mα} · [1 − ω_{m+1}/(ω_{m+1}+s) · (β/(β+s))^α]
//! ```
//!
//! and is inverted numerically with Euler summation. Three measures keep the
//! inversion accurate when `L_m` is very close to 0 or 1: the `m = 0` case
//! inverts the complement `1 − L_0` when `L_0` is near one, all other cases
//! invert `e^{s* t} L_m(t)` with `s*` the slowest decay rate, and the Euler
//! sum is accumulated in the log domain. When the sum still cancels, a
//! real-axis saddle-point inversion is used instead.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{changes_count, Article, CycleDistribution, CycleStage, LanguageHistory, STAGES};
use crate::fixation::{gamma_params, FixationMoments};
use crate::numeric::cplx::{exp_m1, ln_1p};
use crate::{Error, Result};

/// Smallest usable ratio of the Euler sum to the summed term magnitudes.
const CANCELLATION_LIMIT: f64 = 1e-10;

/// Largest Euler order `M` tried before the saddle-point fallback.
const MAX_ORDER: usize = 39;

/// Order increment between successive convergence checks; each step lowers
/// the discretisation error by four decades.
const ORDER_STEP: usize = 6;

/// Euler summation of order `M`: `2M + 1` nodes on `Re z = M ln10 / 3`.
#[derive(Debug, Clone)]
struct EulerTable {
    a: f64,
    nodes: Vec<Complex64>,
    weights: Vec<f64>,
}

impl EulerTable {
    fn new(m: usize) -> Self {
        let n = 2 * m;
        let a = m as f64 * std::f64::consts::LN_10 / 3.0;
        // ξ weights of the Euler summation
        let mut xi = vec![1.0; n + 1];
        xi[0] = 0.5;
        let two_m = 0.5f64.powi(m as i32);
        xi[n] = two_m;
        let mut binom = 1.0;
        for k in 1..m {
            binom *= (m - k + 1) as f64 / k as f64;
            xi[n - k] = xi[n - k + 1] + two_m * binom;
        }
        let nodes = (0..=n)
            .map(|k| Complex64::new(a, std::f64::consts::PI * k as f64))
            .collect();
        let weights = xi
            .iter()
            .enumerate()
            .map(|(k, &x)| if k % 2 == 0 { x } else { -x })
            .collect();
        Self { a, nodes, weights }
    }

    /// `ln f(t)` from `ln f̂` evaluated on the contour.
    fn invert_log<F>(&self, t: f64, log_transform: &F) -> Result<f64>
    where
        F: Fn(Complex64) -> Complex64,
    {
        let logs: Vec<Complex64> = self.nodes.iter().map(|node| log_transform(node / t)).collect();
        let max = logs.iter().map(|l| l.re).fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() {
            return Err(Error::numerical(format!(
                "transform is not finite on the contour at t={t}"
            )));
        }
        let (sum, magnitude) = logs.iter().zip(&self.weights).fold((0.0, 0.0), |(sum, mag), (l, w)| {
            let term = w * (l.re - max).exp();
            (sum + term * l.im.cos(), mag + term.abs())
        });
        if !(sum > CANCELLATION_LIMIT * magnitude) {
            return Err(Error::numerical(format!(
                "Euler inversion lost all precision at t={t} (sum {sum:e})"
            )));
        }
        Ok(self.a + max + sum.ln() - t.ln())
    }
}

/// Euler inversion settings.
///
/// The base order comes from the node count. The discretisation error of
/// order `M` is about `10^{−2M/3} f(3t)`, which is large when `f` grows fast,
/// so the order is raised until two successive orders agree to the requested
/// precision.
#[derive(Debug, Clone)]
pub struct InversionConfig {
    pub precision_digits: u32,
    /// Base node count `n = 2M`; the sum uses `n + 1` transform evaluations.
    pub node_count: usize,
    tables: Vec<EulerTable>,
}

impl Default for InversionConfig {
    fn default() -> Self {
        Self::new(5, 18).expect("default inversion settings are consistent")
    }
}

impl InversionConfig {
    /// Node count needed for `digits` significant digits.
    pub fn required_nodes(digits: u32) -> usize {
        2 * (digits as f64 / 0.6).ceil() as usize
    }

    pub fn for_digits(digits: u32) -> Self {
        Self::new(digits, Self::required_nodes(digits)).expect("required node count is consistent")
    }

    pub fn new(precision_digits: u32, node_count: usize) -> Result<Self> {
        if precision_digits == 0 {
            return Err(Error::Config("precision must be at least one digit".into()));
        }
        if !node_count.is_multiple_of(2) {
            return Err(Error::Config(format!("node count {node_count} must be even")));
        }
        let needed = Self::required_nodes(precision_digits);
        if node_count < needed {
            return Err(Error::numerical(format!(
                "{precision_digits} digits need at least {needed} Euler nodes, {node_count} configured"
            )));
        }
        let base = node_count / 2;
        let tables = (base..=base.max(MAX_ORDER)).map(EulerTable::new).collect();
        Ok(Self {
            precision_digits,
            node_count,
            tables,
        })
    }

    fn base_order(&self) -> usize {
        self.node_count / 2
    }

    fn max_order(&self) -> usize {
        self.base_order() + self.tables.len() - 1
    }

    fn table(&self, order: usize) -> &EulerTable {
        &self.tables[order - self.base_order()]
    }

    /// `ln f(t)` from `ln f̂`, with the saddle-point approximation when Euler
    /// summation does not converge.
    fn invert_log<F>(&self, t: f64, log_transform: F) -> Result<f64>
    where
        F: Fn(Complex64) -> Complex64,
    {
        let saddle = |msg: String| {
            saddlepoint_log_inverse(t, |z| log_transform(Complex64::new(z, 0.0)).re)
                .map_err(|e| Error::numerical(format!("{msg}; {e}")))
        };
        let tolerance = 10f64.powi(-(self.precision_digits as i32));
        let mut previous: Option<f64> = None;
        let mut last_error = String::new();
        let mut order = self.base_order();
        while order <= self.max_order() {
            match self.table(order).invert_log(t, &log_transform) {
                Ok(v) => {
                    if previous.is_some_and(|p| (v - p).abs() < tolerance) {
                        return Ok(v);
                    }
                    previous = Some(v);
                }
                Err(Error::Numerical(msg)) => {
                    previous = None;
                    last_error = msg;
                }
                Err(e) => return Err(e),
            }
            order += ORDER_STEP;
        }
        if last_error.is_empty() {
            last_error = format!(
                "Euler inversion did not converge by order {} at t={t}",
                self.max_order()
            );
        }
        saddle(last_error)
    }
}

/// Distribution of the time from origination to fixation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FixationLaw {
    /// Fixation is immediate (Poisson counting process).
    Instant,
    Gamma {
        alpha: f64,
        beta: f64,
    },
}

impl FixationLaw {
    pub fn from_moments(m: &FixationMoments) -> Self {
        let (alpha, beta) = gamma_params(m);
        FixationLaw::Gamma { alpha, beta }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            FixationLaw::Instant => 0.0,
            FixationLaw::Gamma { alpha, beta } => alpha / beta,
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            FixationLaw::Instant => 0.0,
            FixationLaw::Gamma { alpha, beta } => alpha / (beta * beta),
        }
    }

    fn validate(&self) -> Result<()> {
        if let FixationLaw::Gamma { alpha, beta } = *self {
            if !(alpha > 0.0 && beta > 0.0) || !alpha.is_finite() || !beta.is_finite() {
                return Err(Error::domain(format!(
                    "Gamma parameters must be positive (α={alpha}, β={beta})"
                )));
            }
        }
        Ok(())
    }
}

/// The closed-form transform `L̂_m(s)`, with `rates = [ω_1, .., ω_{m+1}]`.
pub fn likelihood_transform(s: Complex64, m: usize, rates: &[f64], law: FixationLaw) -> Result<Complex64> {
    check_rates(m, rates)?;
    law.validate()?;
    let b = match law {
        FixationLaw::Instant => None,
        FixationLaw::Gamma { alpha, beta } => Some((alpha, beta)),
    };
    if s.norm() == 0.0
        || rates.iter().any(|&w| (s + w).norm() == 0.0)
        || b.is_some_and(|(_, beta)| (s + beta).norm() == 0.0)
    {
        return Err(Error::domain(format!("transform evaluated at a pole s={s}")));
    }
    let gamma_factor = |power: f64| match b {
        None => Complex64::new(1.0, 0.0),
        Some((_, beta)) => (Complex64::new(beta, 0.0) / (s + beta)).powf(power),
    };
    let alpha = b.map_or(0.0, |(a, _)| a);
    let mut value = Complex64::new(1.0, 0.0) / s;
    for &w in &rates[..m] {
        value *= Complex64::new(w, 0.0) / (s + w);
    }
    value *= gamma_factor(m as f64 * alpha);
    let next = rates[m];
    Ok(value * (Complex64::new(1.0, 0.0) - Complex64::new(next, 0.0) / (s + next) * gamma_factor(alpha)))
}

fn check_rates(m: usize, rates: &[f64]) -> Result<()> {
    if rates.len() != m + 1 {
        return Err(Error::domain(format!(
            "{m} changes need {} path rates, got {}",
            m + 1,
            rates.len()
        )));
    }
    if rates.iter().any(|&w| !(w > 0.0) || !w.is_finite()) {
        return Err(Error::domain("origination rates must be positive and finite"));
    }
    Ok(())
}

/// `ln(w / (w + s))` where `s = z - shift` and `w ≥ shift`; accurate both for
/// small `s/w` and near the shifted singularity.
fn ln_ratio(w: f64, z: Complex64, shift: f64) -> Complex64 {
    let s = z - shift;
    let u = s / w;
    if u.norm() < 0.5 {
        -ln_1p(u)
    } else {
        Complex64::new(w.ln(), 0.0) - (z + (w - shift)).ln()
    }
}

/// `ln(1 + u) / u`, smooth through `u = 0`.
fn ln_1p_over(u: Complex64) -> Complex64 {
    if u.norm() < 1e-300 {
        Complex64::new(1.0, 0.0)
    } else {
        ln_1p(u) / u
    }
}

/// `(e^x − 1) / x`, smooth through `x = 0`.
fn exp_m1_over(x: Complex64) -> Complex64 {
    if x.norm() < 1e-300 {
        Complex64::new(1.0, 0.0)
    } else {
        exp_m1(x) / x
    }
}

/// `ln L̂_m(z − shift)`.
fn log_transform_shifted(z: Complex64, shift: f64, m: usize, rates: &[f64], law: FixationLaw) -> Complex64 {
    let s = z - shift;
    let (alpha, beta) = match law {
        FixationLaw::Instant => (0.0, f64::INFINITY),
        FixationLaw::Gamma { alpha, beta } => (alpha, beta),
    };
    let gamma = beta.is_finite();
    let lb = if gamma {
        ln_ratio(beta, z, shift)
    } else {
        Complex64::new(0.0, 0.0)
    };
    let mut acc: Complex64 = rates[..m].iter().map(|&w| ln_ratio(w, z, shift)).sum();
    acc += lb * (m as f64 * alpha);

    // (1/s)·[1 − a·b^α] where ln(a·b^α) = x
    let next = rates[m];
    let near_zero = (s / next).norm() < 0.5 && (!gamma || (s / beta).norm() < 0.5);
    let bracket_over_s = if near_zero {
        // x = −ln1p(s/ω) − α ln1p(s/β); divide through by s before exponentiating
        let da = ln_1p_over(s / next) / next;
        let db = if gamma {
            ln_1p_over(s / beta) * (alpha / beta)
        } else {
            Complex64::new(0.0, 0.0)
        };
        let x_over_s = -(da + db);
        -exp_m1_over(x_over_s * s) * x_over_s
    } else {
        let x = ln_ratio(next, z, shift) + lb * alpha;
        return acc + ln_one_minus_exp(x) - s.ln();
    };
    acc + bracket_over_s.ln()
}

/// `ln(1 − e^x)` without overflow for large `Re x`.
fn ln_one_minus_exp(x: Complex64) -> Complex64 {
    if x.re > 0.0 {
        // 1 − e^x = −e^x (1 − e^{−x})
        x + Complex64::new(0.0, std::f64::consts::PI) + (-exp_m1(-x)).ln()
    } else {
        (-exp_m1(x)).ln()
    }
}

/// `ln[(1/z)·ω/(ω+z)·(β/(β+z))^α]`, the transform of `1 − L_0`.
fn log_complement_transform(z: Complex64, rate: f64, law: FixationLaw) -> Complex64 {
    let mut acc = -z.ln() + ln_ratio(rate, z, 0.0);
    if let FixationLaw::Gamma { alpha, beta } = law {
        acc += ln_ratio(beta, z, 0.0) * alpha;
    }
    acc
}

/// Slowest decay rate among the path rates and the fixation rate.
fn contour_shift(rates: &[f64], law: FixationLaw) -> f64 {
    let mut shift = rates.iter().copied().fold(f64::INFINITY, f64::min);
    if let FixationLaw::Gamma { beta, .. } = law {
        shift = shift.min(beta);
    }
    shift
}

/// `ln f(t)` by steepest descent along the real axis, for a transform whose
/// rightmost singularity is at `z = 0`.
///
/// Used when the Euler sum cancels to nothing, which happens when `f(t)` is
/// many orders of magnitude below the transform values on the contour. The
/// relative error is a few percent for the smooth, peaked densities where
/// that occurs.
fn saddlepoint_log_inverse<F: Fn(f64) -> f64>(t: f64, log_transform: F) -> Result<f64> {
    let h = |z: f64| log_transform(z) + z * t;
    let slope = |z: f64| {
        let d = 1e-5;
        (h(z * (1.0 + d)) - h(z * (1.0 - d))) / (2.0 * d * z)
    };
    let (mut lo, mut hi) = (1.0 / t, 1.0 / t);
    for _ in 0..200 {
        if slope(lo) < 0.0 {
            break;
        }
        lo *= 0.5;
    }
    for _ in 0..200 {
        if slope(hi) > 0.0 {
            break;
        }
        hi *= 2.0;
    }
    let (s_lo, s_hi) = (slope(lo), slope(hi));
    if !(s_lo < 0.0 && s_hi > 0.0) {
        return Err(Error::numerical(format!(
            "no real saddle point for the transform at t={t}"
        )));
    }
    for _ in 0..100 {
        let mid = (lo * hi).sqrt();
        if slope(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi / lo - 1.0 < 1e-12 {
            break;
        }
    }
    let z = (lo * hi).sqrt();
    let dz = 1e-3 * z;
    let curvature = (h(z + dz) - 2.0 * h(z) + h(z - dz)) / (dz * dz);
    let value = h(z) - 0.5 * (2.0 * std::f64::consts::PI * curvature).ln();
    if !(curvature > 0.0) || !value.is_finite() {
        return Err(Error::numerical(format!("saddle-point inversion failed at t={t}")));
    }
    Ok(value)
}

/// `ln L_m(t)` for path rates `[ω_1, .., ω_{m+1}]`.
pub fn invert_likelihood(m: usize, t: f64, rates: &[f64], law: FixationLaw, cfg: &InversionConfig) -> Result<f64> {
    check_inputs(m, t, rates, law)?;
    if m == 0 {
        let ln_c = cfg.invert_log(t, |z| log_complement_transform(z, rates[0], law))?;
        if ln_c <= -std::f64::consts::LN_2 {
            return Ok((-ln_c.exp()).ln_1p());
        }
    }
    let shift = contour_shift(rates, law);
    let ln_r = cfg.invert_log(t, |z| log_transform_shifted(z, shift, m, rates, law))?;
    Ok(ln_r - shift * t)
}

/// `ln(1 − L_0(t))`: probability that at least one change completes.
pub fn ln_change_probability(t: f64, rate: f64, law: FixationLaw, cfg: &InversionConfig) -> Result<f64> {
    check_inputs(0, t, &[rate], law)?;
    let ln_c = cfg.invert_log(t, |z| log_complement_transform(z, rate, law))?;
    if ln_c > -std::f64::consts::LN_2 {
        // the complement is not small, so L_0 itself is accurate
        let shift = contour_shift(&[rate], law);
        let ln_l0 = cfg.invert_log(t, |z| log_transform_shifted(z, shift, 0, &[rate], law))? - shift * t;
        return Ok((-ln_l0.exp()).ln_1p());
    }
    Ok(ln_c)
}

fn check_inputs(m: usize, t: f64, rates: &[f64], law: FixationLaw) -> Result<()> {
    if !(t > 0.0) {
        return Err(Error::domain(format!("observation time must be positive, got {t}")));
    }
    check_rates(m, rates)?;
    law.validate()
}

/// Probability that a change fixes before the next origination, `e^{−ω T̄_F}`.
pub fn interference_factor(omega: f64, mean_fixation: f64) -> Result<f64> {
    if !(omega >= 0.0 && mean_fixation >= 0.0) {
        return Err(Error::domain("interference needs non-negative rate and fixation time"));
    }
    Ok((-omega * mean_fixation).exp())
}

/// Population-level process for one language: origination rate out of each
/// stage and the fixation-time law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OriginFixationParams {
    /// `ω_i e^{−ln_rate_scale}` indexed by the stage being left.
    pub rates: [f64; STAGES],
    pub fixation: FixationLaw,
    /// Log factor applied to `rates`; nonzero only for rates too small to
    /// represent, in which regime `L_m` is proportional to their product.
    #[serde(default)]
    pub ln_rate_scale: f64,
}

impl OriginFixationParams {
    /// `ω_i = ω̄ / (V f_i)` with `V` the number of stages.
    pub fn from_mean_rate(omega_bar: f64, dist: &CycleDistribution, fixation: FixationLaw) -> Self {
        Self {
            rates: stage_rates(omega_bar, dist),
            fixation,
            ln_rate_scale: 0.0,
        }
    }

    /// Build from `ln ω_i`, rescaling rates that would underflow.
    pub fn from_ln_rates(ln_rates: [f64; STAGES], fixation: FixationLaw) -> Self {
        let top = ln_rates.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let ln_rate_scale = (top - TINY_LN_RATE).min(0.0);
        let mut rates = [0.0; STAGES];
        for (r, l) in rates.iter_mut().zip(ln_rates) {
            *r = (l - ln_rate_scale).exp().min(f64::MAX);
        }
        Self {
            rates,
            fixation,
            ln_rate_scale,
        }
    }

    /// The true rates `ω_i`, which may underflow to zero.
    pub fn actual_rates(&self) -> [f64; STAGES] {
        self.rates.map(|r| r * self.ln_rate_scale.exp())
    }

    pub fn poisson(omega_bar: f64, dist: &CycleDistribution) -> Self {
        Self::from_mean_rate(omega_bar, dist, FixationLaw::Instant)
    }

    /// Rates along a path of `m` changes starting at `start`, one more than the
    /// number of changes.
    pub fn path_rates(&self, start: CycleStage, m: usize) -> Vec<f64> {
        path_rates(&self.rates, start, m)
    }
}

/// Rates are stored rescaled once `ln ω` drops below this.
const TINY_LN_RATE: f64 = -230.0;

/// Distribute a mean rate over stages in inverse proportion to their
/// typological frequency.
pub fn stage_rates(mean_rate: f64, dist: &CycleDistribution) -> [f64; STAGES] {
    let mut out = [0.0; STAGES];
    for (o, f) in out.iter_mut().zip(dist.fractions) {
        *o = mean_rate / (STAGES as f64 * f);
    }
    out
}

pub fn path_rates(stage_rates: &[f64; STAGES], start: CycleStage, m: usize) -> Vec<f64> {
    (0..=m).map(|i| stage_rates[(start.index() + i) % STAGES]).collect()
}

/// Interference-corrected `ln L` of `m` changes in time `t` from `start`.
pub fn path_log_likelihood(
    start: CycleStage,
    m: usize,
    t: f64,
    params: &OriginFixationParams,
    cfg: &InversionConfig,
) -> Result<f64> {
    let rates = params.path_rates(start, m);
    let t_f = params.fixation.mean();
    let scale = params.ln_rate_scale.exp();
    let correction: f64 = rates[..m].iter().map(|w| -w * scale * t_f).sum();
    let scaled = m as f64 * params.ln_rate_scale;
    Ok(correction + scaled + invert_likelihood(m, t, &rates, params.fixation, cfg)?)
}

pub fn language_log_likelihood(
    history: &LanguageHistory,
    article: Article,
    params: &OriginFixationParams,
    cfg: &InversionConfig,
) -> Result<f64> {
    let record = history.record(article);
    path_log_likelihood(
        record.first_stage(),
        changes_count(record),
        history.observation_time(),
        params,
        cfg,
    )
    .map_err(|e| match e {
        Error::Numerical(msg) => Error::Numerical(format!("{} ({article}): {msg}", history.name)),
        other => other,
    })
}

/// Sum of per-language terms; `params[i]` belongs to `histories[i]`. Terms are
/// computed in parallel and added in dataset order.
pub fn dataset_log_likelihood(
    histories: &[LanguageHistory],
    article: Article,
    params: &[OriginFixationParams],
    cfg: &InversionConfig,
) -> Result<f64> {
    if histories.len() != params.len() {
        return Err(Error::domain("one parameter set per language is required"));
    }
    let terms: Vec<f64> = histories
        .par_iter()
        .zip(params.par_iter())
        .map(|(h, p)| language_log_likelihood(h, article, p, cfg))
        .collect::<Result<_>>()?;
    Ok(terms.iter().sum())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn default_table_shape() {
        let cfg = InversionConfig::default();
        assert_eq!(cfg.node_count, 18);
        let base = cfg.table(9);
        assert_eq!(base.nodes.len(), 19);
        assert!(InversionConfig::new(5, 10).is_err());
        let total: f64 = base.weights.iter().sum();
        assert!(total.abs() < 1.0);
    }

    #[test]
    fn many_changes_keep_precision() {
        let cfg = InversionConfig::default();
        let w = 1e-3;
        for m in [4usize, 8, 12, 20] {
            for wt in [0.5, 3.0, 10.0, 30.0] {
                let t = wt / w;
                let got = invert_likelihood(m, t, &vec![w; m + 1], FixationLaw::Instant, &cfg).unwrap();
                let exact = -wt + m as f64 * wt.ln() - (1..=m).map(|k| (k as f64).ln()).sum::<f64>();
                assert!((got - exact).abs() < 1e-4, "m={m} ωt={wt}: {got} vs {exact}");
            }
        }
    }

    #[test]
    fn poisson_single_rate() {
        let cfg = InversionConfig::default();
        let ln_l = invert_likelihood(0, 1000.0, &[6.05e-4], FixationLaw::Instant, &cfg).unwrap();
        assert!((ln_l + 0.605).abs() < 1e-5);
        let ln_l = invert_likelihood(1, 1000.0, &[1e-3, 1e-3], FixationLaw::Instant, &cfg).unwrap();
        assert!(rel(ln_l.exp(), (-1.0f64).exp()) < 1e-5);
    }

    #[test]
    fn exponential_fixation_closed_form() {
        let cfg = InversionConfig::default();
        let (w, b, t) = (1e-3, 1e-2, 1000.0);
        let law = FixationLaw::Gamma { alpha: 1.0, beta: b };
        let l = invert_likelihood(0, t, &[w], law, &cfg).unwrap().exp();
        let exact = (b * (-w * t).exp() - w * (-b * t).exp()) / (b - w);
        assert!(rel(l, exact) < 1e-5, "{l} vs {exact}");
        assert!((l - 0.40875).abs() < 1e-5);
    }

    #[test]
    fn transform_reduces_to_empty_product() {
        let s = Complex64::new(0.3, 0.7);
        let law = FixationLaw::Gamma { alpha: 2.0, beta: 0.5 };
        let v = likelihood_transform(s, 0, &[0.1], law).unwrap();
        let expect = (Complex64::new(1.0, 0.0) - 0.1 / (s + 0.1) * (0.5 / (s + 0.5)).powf(2.0)) / s;
        assert!((v - expect).norm() < 1e-15);
        assert!(likelihood_transform(Complex64::new(0.0, 0.0), 0, &[0.1], law).is_err());
    }

    #[test]
    fn shifted_log_transform_matches_direct() {
        let law = FixationLaw::Gamma { alpha: 0.7, beta: 0.02 };
        let rates = [0.003, 0.001, 0.004];
        let shift = contour_shift(&rates, law);
        let z = Complex64::new(0.01, 0.02);
        let direct = likelihood_transform(z - shift, 2, &rates, law).unwrap();
        let logged = log_transform_shifted(z, shift, 2, &rates, law).exp();
        assert!((direct - logged).norm() < 1e-10 * direct.norm());
    }

    #[test]
    fn interference() {
        assert_eq!(interference_factor(0.0, 50.0).unwrap(), 1.0);
        assert!((interference_factor(1e-3, 100.0).unwrap() - 0.904_837_4).abs() < 1e-7);
    }

    #[test]
    fn oracle_sweep() {
        let cfg = InversionConfig::default();
        let w = 1e-3;
        let mut worst: f64 = 0.0;
        for i in 0..=50 {
            let wt = 10f64.powf(-3.0 + 5.0 * i as f64 / 50.0);
            let t = wt / w;
            let l0 = invert_likelihood(0, t, &[w], FixationLaw::Instant, &cfg).unwrap();
            worst = worst.max(rel(l0.exp(), (-wt).exp()));
            let l1 = invert_likelihood(1, t, &[w, w], FixationLaw::Instant, &cfg).unwrap();
            worst = worst.max(rel(l1.exp(), wt * (-wt).exp()));
            for ratio in [0.1, 10.0] {
                let b = w * ratio;
                let law = FixationLaw::Gamma { alpha: 1.0, beta: b };
                let l = invert_likelihood(0, t, &[w], law, &cfg).unwrap().exp();
                let exact = (b * (-w * t).exp() - w * (-b * t).exp()) / (b - w);
                worst = worst.max(rel(l, exact));
            }
        }
        assert!(worst < 1e-5, "worst relative error {worst}");
    }

    /// Deep lower tail of a nearly deterministic fixation time, where the
    /// Euler sum cancels and the saddle-point fallback takes over.
    #[test]
    fn peaked_fixation_tail() {
        use crate::numeric::quad::{integrate, QuadOptions};
        let cfg = InversionConfig::default();
        let (alpha, beta) = (400.0, 0.5);
        let law = FixationLaw::Gamma { alpha, beta };
        let ln_pdf = |u: f64| (alpha - 1.0) * (u / 800.0).ln() - beta * (u - 800.0);
        let total = integrate(|u| ln_pdf(u).exp(), 1.0, 3000.0, QuadOptions::rel(1e-10))
            .unwrap()
            .value;
        for t in [400.0, 550.0, 650.0] {
            let part = integrate(|u| ln_pdf(u).exp(), 1.0, t, QuadOptions::rel(1e-10))
                .unwrap()
                .value;
            let exact = (part / total).ln();
            let got = ln_change_probability(t, 1e3, law, &cfg).unwrap();
            assert!((got - exact).abs() < 0.05, "t={t}: {got} vs {exact}");
            let l1 = invert_likelihood(1, t, &[1e3, 1e-3], law, &cfg).unwrap();
            assert!((l1 - exact).abs() < 0.05, "t={t}: {l1} vs {exact}");
        }
    }
}
