//! Maximum-likelihood fits, AICc comparison, scenario sweeps and Monte Carlo
//! goodness of fit.

use rand::Rng;
use rand_distr::{Distribution, Exp, Gamma};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{changes_count, Article, CycleDistribution, LanguageHistory, STAGES};
use crate::fixation::{
    effective_size_from_moments, fixation_time_moments, ln_fixation_probability, sample_degree_moments,
    DiffusionParams, NetworkSpec, DEFAULT_Z_MIN,
};
use crate::likelihood::{
    dataset_log_likelihood, ln_change_probability, path_log_likelihood, FixationLaw, InversionConfig,
    OriginFixationParams,
};
use crate::numeric::optimize::maximize_scalar;
use crate::numeric::rng::{mix, substream};
use crate::numeric::stats::Moments;
use crate::{Error, Result};

/// Small-sample corrected Akaike information criterion.
pub fn aicc(k: usize, n: usize, log_likelihood: f64) -> Result<f64> {
    if n <= k + 1 {
        return Err(Error::domain(format!("AICc needs n > k + 1 (k={k}, n={n})")));
    }
    let (k, n) = (k as f64, n as f64);
    Ok(2.0 * k - 2.0 * log_likelihood + 2.0 * k * (k + 1.0) / (n - k - 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub model: String,
    pub article: Article,
    /// Name of the maximised parameter.
    pub parameter: String,
    pub mle_value: f64,
    pub log_likelihood: f64,
    pub k: usize,
    pub n: usize,
    pub aicc: f64,
    pub reference: Option<String>,
    pub delta_aicc: Option<f64>,
    pub p_value: Option<f64>,
    pub overdispersion_changes: Option<f64>,
    pub overdispersion_binary: Option<f64>,
    pub at_boundary: bool,
    pub flags: Vec<String>,
    pub notes: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scenario: Option<ScenarioSpec>,
}

impl FitReport {
    /// Record the AICc difference `self − reference`.
    pub fn compare_to(&mut self, reference: &FitReport) {
        self.reference = Some(reference.model.clone());
        self.delta_aicc = Some(delta_aicc(self, reference));
    }
}

pub fn delta_aicc(candidate: &FitReport, reference: &FitReport) -> f64 {
    candidate.aicc - reference.aicc
}

/// Search range for the baseline mean rate, per year.
pub const BASELINE_RATE_RANGE: (f64, f64) = (1e-7, 1e-1);

/// Fit the constant-rate Poisson model `ω_i = ω̄ / (4 f_i)`.
pub fn fit_poisson_baseline(
    histories: &[LanguageHistory],
    article: Article,
    dist: &CycleDistribution,
    cfg: &InversionConfig,
) -> Result<FitReport> {
    if histories.is_empty() {
        return Err(Error::domain("cannot fit an empty dataset"));
    }
    let ln_l = |ln_w: f64| -> Result<f64> {
        let p = OriginFixationParams::poisson(ln_w.exp(), dist);
        dataset_log_likelihood(histories, article, &vec![p; histories.len()], cfg)
    };
    let (lo, hi) = (BASELINE_RATE_RANGE.0.ln(), BASELINE_RATE_RANGE.1.ln());
    let best = maximize_scalar(ln_l, lo, hi, 61, 1e-5)?;
    let n = histories.len();
    let k = 1;
    let mut flags = Vec::new();
    if best.at_boundary {
        flags.push("maximum at search boundary".to_string());
    }
    Ok(FitReport {
        model: "baseline".into(),
        article,
        parameter: "omega_bar".into(),
        mle_value: best.x.exp(),
        log_likelihood: best.value,
        k,
        n,
        aicc: aicc(k, n, best.value)?,
        reference: None,
        delta_aicc: None,
        p_value: None,
        overdispersion_changes: None,
        overdispersion_binary: Some(binary_overdispersion(
            histories,
            article,
            &vec![OriginFixationParams::poisson(best.x.exp(), dist); n],
            cfg,
        )?),
        at_boundary: best.at_boundary,
        flags,
        notes: vec!["stage rates omega_i = omega_bar / (4 f_i)".into()],
        scenario: None,
    })
}

/// Social structure of the speech community.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Network {
    Homogeneous,
    PowerLaw { nu: f64, z_min: u64 },
}

/// Individual-level hypothesis whose innovation rate `η̄` is fitted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub model: ScenarioKind,
    /// Interaction rate per year.
    pub r: f64,
    pub epsilon: f64,
    /// Selection strength; infinite means every innovation fixes instantly.
    #[serde(with = "f64_or_inf")]
    pub s: f64,
    pub network: Network,
    /// Free-parameter count used in AICc.
    pub k: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScenarioKind {
    Child,
    Usage,
    Network,
    Custom,
}

impl ScenarioKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioKind::Child => "child",
            ScenarioKind::Usage => "usage",
            ScenarioKind::Network => "network",
            ScenarioKind::Custom => "custom",
        }
    }
}

/// One learning event per 25-year generation.
pub const CHILD_RATE: f64 = 0.04;

/// Default AICc parameter count for scenarios: only `η̄` is maximised.
pub const DEFAULT_SCENARIO_K: usize = 1;

impl ScenarioSpec {
    /// Categorical child learners on a homogeneous population.
    pub fn child(s: f64) -> Self {
        Self {
            model: ScenarioKind::Child,
            r: CHILD_RATE,
            epsilon: 1.0,
            s,
            network: Network::Homogeneous,
            k: DEFAULT_SCENARIO_K,
        }
    }

    /// Usage-based learners with interaction rate `r` and memory time `t_m`.
    pub fn usage(s: f64, r: f64, t_m: f64) -> Self {
        Self {
            model: ScenarioKind::Usage,
            r,
            epsilon: 1.0 / (r * t_m),
            s,
            network: Network::Homogeneous,
            k: DEFAULT_SCENARIO_K,
        }
    }

    pub fn network(s: f64, nu: f64, r: f64, epsilon: f64) -> Self {
        Self {
            model: ScenarioKind::Network,
            r,
            epsilon,
            s,
            network: Network::PowerLaw {
                nu,
                z_min: DEFAULT_Z_MIN,
            },
            k: DEFAULT_SCENARIO_K,
        }
    }

    pub fn t_m(&self) -> f64 {
        1.0 / (self.r * self.epsilon)
    }

    fn validate(&self) -> Result<()> {
        if !(self.r > 0.0 && self.epsilon > 0.0) || self.s.is_nan() || self.s == f64::NEG_INFINITY {
            return Err(Error::Config(format!(
                "scenario needs R > 0, ε > 0 and s finite or +inf (got R={}, ε={}, s={})",
                self.r, self.epsilon, self.s
            )));
        }
        Ok(())
    }
}

/// Per-language process with rates proportional to `η̄`.
#[derive(Debug, Clone, Copy)]
struct LanguageProcess {
    /// `ln(ω_i / η̄)` for each stage.
    ln_base_rates: [f64; STAGES],
    law: FixationLaw,
}

impl LanguageProcess {
    fn params(&self, ln_eta: f64) -> OriginFixationParams {
        OriginFixationParams::from_ln_rates(self.ln_base_rates.map(|b| b + ln_eta), self.law)
    }
}

fn prepare_language(
    spec: &ScenarioSpec,
    size: f64,
    dist: &CycleDistribution,
    seed: u64,
) -> Result<(LanguageProcess, f64)> {
    if !(size > 0.0) {
        return Err(Error::domain(format!("language size must be positive, got {size}")));
    }
    let ne = match spec.network {
        Network::Homogeneous => size / spec.epsilon,
        Network::PowerLaw { nu, z_min } => {
            let n = size.round().max(2.0) as u64;
            let net = NetworkSpec {
                n,
                nu,
                z_min: z_min.min(n - 1),
                epsilon: spec.epsilon,
            };
            let (mean, mean_sq) = sample_degree_moments(&net, seed);
            effective_size_from_moments(size, spec.epsilon, mean, mean_sq)
        }
    };
    let x0 = (spec.epsilon / size).min(1.0);
    let (ln_q, law) = if spec.s == f64::INFINITY {
        (0.0, FixationLaw::Instant)
    } else {
        let diffusion = DiffusionParams::new(ne, spec.s, spec.t_m())?;
        let moments = fixation_time_moments(&diffusion)?;
        (
            ln_fixation_probability(x0, &diffusion)?,
            FixationLaw::from_moments(&moments),
        )
    };
    let mut ln_base_rates = [0.0; STAGES];
    for (b, f) in ln_base_rates.iter_mut().zip(dist.fractions) {
        // ω_i = N R η_i Q(ε/N) with η_i = η̄ / (4 f_i)
        *b = size.ln() + spec.r.ln() + ln_q - (STAGES as f64 * f).ln();
    }
    Ok((LanguageProcess { ln_base_rates, law }, ne))
}

/// Maximise the dataset likelihood over `η̄` for one scenario.
///
/// `sizes[i]` is the historical mean speaker count of `histories[i]`.
#[allow(clippy::too_many_arguments)]
pub fn evaluate_scenario(
    histories: &[LanguageHistory],
    article: Article,
    spec: &ScenarioSpec,
    sizes: &[f64],
    dist: &CycleDistribution,
    baseline: Option<&FitReport>,
    cfg: &InversionConfig,
    seed: u64,
) -> Result<FitReport> {
    spec.validate()?;
    if histories.len() != sizes.len() {
        return Err(Error::domain("one population size per language is required"));
    }
    if histories.is_empty() {
        return Err(Error::domain("cannot fit an empty dataset"));
    }
    let prepared: Vec<(LanguageProcess, f64)> = sizes
        .par_iter()
        .enumerate()
        .map(|(i, &n)| prepare_language(spec, n, dist, mix(seed, i as u64)))
        .collect::<Result<_>>()?;
    let processes: Vec<LanguageProcess> = prepared.iter().map(|p| p.0).collect();

    let failures = std::sync::atomic::AtomicUsize::new(0);
    let ln_l = |ln_eta: f64| -> Result<f64> {
        let params: Vec<_> = processes.iter().map(|p| p.params(ln_eta)).collect();
        match dataset_log_likelihood(histories, article, &params, cfg) {
            Ok(v) => Ok(v),
            Err(Error::Numerical(_)) => {
                failures.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                Ok(f64::NEG_INFINITY)
            }
            Err(e) => Err(e),
        }
    };

    // The likelihood can be multimodal in η̄, so scan densely between the
    // values that put the typical and the fastest-changing language at about
    // one origination per thousand years.
    let mean_ln_base: Vec<f64> = processes
        .iter()
        .map(|p| p.ln_base_rates.iter().sum::<f64>() / STAGES as f64)
        .collect();
    let typical = mean_ln_base.iter().sum::<f64>() / mean_ln_base.len() as f64;
    let fastest = mean_ln_base.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    const MARGIN: f64 = 14.0;
    let target = (1e-3f64).ln();
    let (mut lo, mut hi) = (target - fastest - MARGIN, target - typical + MARGIN);
    let scan_points = |lo: f64, hi: f64| ((2.0 * (hi - lo)).ceil() as usize).clamp(57, 241);
    let mut best = maximize_scalar(ln_l, lo, hi, scan_points(lo, hi), 1e-5)?;
    for _ in 0..6 {
        let edge_lo = (best.x - lo).abs() < 1e-3;
        let edge_hi = (best.x - hi).abs() < 1e-3;
        if !(best.at_boundary && (edge_lo || edge_hi)) {
            break;
        }
        (lo, hi) = if edge_hi {
            (hi - 2.0, hi + 2.0 * MARGIN)
        } else {
            (lo - 2.0 * MARGIN, lo + 2.0)
        };
        best = maximize_scalar(ln_l, lo, hi, scan_points(lo, hi), 1e-5)?;
    }
    if !best.value.is_finite() {
        return Err(Error::numerical(format!(
            "{} scenario (s={}) has no finite likelihood for any innovation rate",
            spec.model.as_str(),
            spec.s
        )));
    }

    let n = histories.len();
    let mut flags = Vec::new();
    if best.at_boundary {
        flags.push("maximum at search boundary".to_string());
    }
    if spec.epsilon > 1.0 {
        flags.push("unphysical: epsilon > 1".to_string());
    }
    let eta_bar = best.x.exp();
    let max_stage_eta = dist
        .fractions
        .iter()
        .map(|f| eta_bar / (STAGES as f64 * f))
        .fold(0.0, f64::max);
    if max_stage_eta > 1.0 {
        flags.push("unphysical: stage innovation probability > 1".to_string());
    }
    let failed = failures.load(std::sync::atomic::Ordering::Relaxed);
    if failed > 0 {
        flags.push(format!("{failed} likelihood evaluations failed during the search"));
    }
    let final_params: Vec<_> = processes.iter().map(|p| p.params(best.x)).collect();
    let mut notes = vec!["stage innovation rates eta_i = eta_bar / (4 f_i)".to_string()];
    if let Network::PowerLaw { z_min, .. } = spec.network {
        notes.push(format!(
            "Ne from sampled degree moments, z_min = {z_min}, seed = {seed}"
        ));
    }
    let mut report = FitReport {
        model: spec.model.as_str().to_string(),
        article,
        parameter: "eta_bar".into(),
        mle_value: eta_bar,
        log_likelihood: best.value,
        k: spec.k,
        n,
        aicc: aicc(spec.k, n, best.value)?,
        reference: None,
        delta_aicc: None,
        p_value: None,
        overdispersion_changes: None,
        overdispersion_binary: Some(binary_overdispersion(histories, article, &final_params, cfg)?),
        at_boundary: best.at_boundary,
        flags,
        notes,
        scenario: Some(*spec),
    };
    if let Some(b) = baseline {
        report.compare_to(b);
    }
    Ok(report)
}

/// Parameters of the fitted scenario for each language, for simulation.
pub fn scenario_params(
    spec: &ScenarioSpec,
    eta_bar: f64,
    sizes: &[f64],
    dist: &CycleDistribution,
    seed: u64,
) -> Result<Vec<OriginFixationParams>> {
    sizes
        .par_iter()
        .enumerate()
        .map(|(i, &n)| prepare_language(spec, n, dist, mix(seed, i as u64)).map(|(p, _)| p.params(eta_bar.ln())))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub index: usize,
    pub spec: ScenarioSpec,
    pub report: Option<FitReport>,
    pub error: Option<String>,
}

/// Evaluate every scenario in `grid`; failures are recorded per row.
#[allow(clippy::too_many_arguments)]
pub fn sweep(
    histories: &[LanguageHistory],
    article: Article,
    grid: &[ScenarioSpec],
    sizes: &[f64],
    dist: &CycleDistribution,
    baseline: Option<&FitReport>,
    cfg: &InversionConfig,
    seed: u64,
) -> Vec<SweepRow> {
    grid.par_iter()
        .enumerate()
        .map(
            |(index, spec)| match evaluate_scenario(histories, article, spec, sizes, dist, baseline, cfg, seed) {
                Ok(report) => SweepRow {
                    index,
                    spec: *spec,
                    report: Some(report),
                    error: None,
                },
                Err(e) => SweepRow {
                    index,
                    spec: *spec,
                    report: None,
                    error: Some(e.to_string()),
                },
            },
        )
        .collect()
}

/// Mean over languages of `(X − p)² / (p(1 − p))` for `X` = at least one
/// change, with `p = 1 − L_0(t)` from the model.
pub fn binary_overdispersion(
    histories: &[LanguageHistory],
    article: Article,
    params: &[OriginFixationParams],
    cfg: &InversionConfig,
) -> Result<f64> {
    let terms: Vec<Option<f64>> = histories
        .par_iter()
        .zip(params.par_iter())
        .map(|(h, p)| {
            let rec = h.record(article);
            let rate = p.path_rates(rec.first_stage(), 0)[0];
            let ln_p = ln_change_probability(h.observation_time(), rate, p.fixation, cfg)? + p.ln_rate_scale;
            let prob = ln_p.exp();
            let var = prob * -ln_p.exp_m1();
            if !(var > 0.0) {
                return Ok(None);
            }
            let x = if changes_count(rec) > 0 { 1.0 } else { 0.0 };
            Ok(Some((x - prob).powi(2) / var))
        })
        .collect::<Result<_>>()?;
    let used: Vec<f64> = terms.into_iter().flatten().collect();
    if used.is_empty() {
        return Err(Error::numerical("no language has a non-degenerate change probability"));
    }
    Ok(used.iter().sum::<f64>() / used.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GofResult {
    pub n_sim: usize,
    pub seed: u64,
    pub observed_log_likelihood: f64,
    /// Fraction of simulated datasets strictly less likely than the observed one.
    pub p_value: f64,
    pub overdispersion_changes: f64,
    /// Binary overdispersion with model mean and variance from the simulations.
    pub overdispersion_binary: f64,
    pub excluded_changes: Vec<String>,
    pub excluded_binary: Vec<String>,
}

const GOF_BLOCK: usize = 10_000;

/// Per-language `ln L_m` table; entries past the end are computed on demand.
struct LikelihoodTable {
    start: crate::data::CycleStage,
    t: f64,
    params: OriginFixationParams,
    values: Vec<f64>,
}

impl LikelihoodTable {
    fn build(
        h: &LanguageHistory,
        article: Article,
        params: &OriginFixationParams,
        cfg: &InversionConfig,
    ) -> Result<Self> {
        let rec = h.record(article);
        let start = rec.first_stage();
        let t = h.observation_time();
        let mut values = Vec::new();
        let mut mass = 0.0;
        let observed = changes_count(rec);
        for m in 0..400 {
            let v = path_log_likelihood(start, m, t, params, cfg)?;
            values.push(v);
            mass += v.exp();
            if m > observed && (mass > 1.0 - 1e-12 || v < -700.0) {
                break;
            }
        }
        Ok(Self {
            start,
            t,
            params: *params,
            values,
        })
    }

    fn get(&self, m: usize, cfg: &InversionConfig) -> f64 {
        match self.values.get(m) {
            Some(&v) => v,
            None => path_log_likelihood(self.start, m, self.t, &self.params, cfg).unwrap_or(f64::NEG_INFINITY),
        }
    }
}

/// Number of completed changes within `t` for one simulated history.
pub fn simulate_changes<R: Rng + ?Sized>(
    rng: &mut R,
    start: crate::data::CycleStage,
    t: f64,
    params: &OriginFixationParams,
) -> usize {
    let gamma = match params.fixation {
        FixationLaw::Instant => None,
        FixationLaw::Gamma { alpha, beta } => Gamma::new(alpha, 1.0 / beta).ok(),
    };
    let rates = params.actual_rates();
    let mut clock = 0.0;
    let mut stage = start.index();
    let mut m = 0;
    loop {
        let Ok(exp) = Exp::new(rates[stage]) else {
            return m;
        };
        clock += exp.sample(rng);
        if let Some(g) = &gamma {
            clock += g.sample(rng);
        }
        if clock > t {
            return m;
        }
        m += 1;
        stage = (stage + 1) % STAGES;
    }
}

struct GofBlock {
    lower: u64,
    changes: Vec<Moments>,
    binary: Vec<Moments>,
}

/// Parametric-bootstrap goodness of fit.
pub fn monte_carlo_gof(
    histories: &[LanguageHistory],
    article: Article,
    params: &[OriginFixationParams],
    n_sim: usize,
    seed: u64,
    cfg: &InversionConfig,
) -> Result<GofResult> {
    if n_sim < 1000 {
        return Err(Error::Config(format!(
            "goodness of fit needs at least 1000 simulations, got {n_sim}"
        )));
    }
    if histories.len() != params.len() {
        return Err(Error::domain("one parameter set per language is required"));
    }
    let tables: Vec<LikelihoodTable> = histories
        .par_iter()
        .zip(params.par_iter())
        .map(|(h, p)| LikelihoodTable::build(h, article, p, cfg))
        .collect::<Result<_>>()?;
    let observed_counts: Vec<usize> = histories.iter().map(|h| changes_count(h.record(article))).collect();
    let observed: f64 = tables.iter().zip(&observed_counts).map(|(t, &m)| t.get(m, cfg)).sum();

    let n_blocks = n_sim.div_ceil(GOF_BLOCK);
    let blocks: Vec<GofBlock> = (0..n_blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = substream(seed, b as u64);
            let count = GOF_BLOCK.min(n_sim - b * GOF_BLOCK);
            let mut block = GofBlock {
                lower: 0,
                changes: vec![Moments::default(); tables.len()],
                binary: vec![Moments::default(); tables.len()],
            };
            for _ in 0..count {
                let mut total = 0.0;
                for (l, table) in tables.iter().enumerate() {
                    let m = simulate_changes(&mut rng, table.start, table.t, &table.params);
                    total += table.get(m, cfg);
                    block.changes[l].push(m as f64);
                    block.binary[l].push(if m > 0 { 1.0 } else { 0.0 });
                }
                if total < observed {
                    block.lower += 1;
                }
            }
            block
        })
        .collect();

    let mut lower = 0;
    let mut changes = vec![Moments::default(); tables.len()];
    let mut binary = vec![Moments::default(); tables.len()];
    for b in &blocks {
        lower += b.lower;
        for l in 0..tables.len() {
            changes[l].merge(&b.changes[l]);
            binary[l].merge(&b.binary[l]);
        }
    }
    let overdispersion = |stats: &[Moments], value: &dyn Fn(usize) -> f64| {
        let mut excluded = Vec::new();
        let mut acc = 0.0;
        let mut used = 0;
        for (l, st) in stats.iter().enumerate() {
            let var = st.variance();
            if var > 0.0 {
                acc += (value(l) - st.mean()).powi(2) / var;
                used += 1;
            } else {
                excluded.push(histories[l].name.clone());
            }
        }
        (if used > 0 { acc / used as f64 } else { f64::NAN }, excluded)
    };
    let (o_changes, excluded_changes) = overdispersion(&changes, &|l| observed_counts[l] as f64);
    let (o_binary, excluded_binary) = overdispersion(&binary, &|l| if observed_counts[l] > 0 { 1.0 } else { 0.0 });
    Ok(GofResult {
        n_sim,
        seed,
        observed_log_likelihood: observed,
        p_value: lower as f64 / n_sim as f64,
        overdispersion_changes: o_changes,
        overdispersion_binary: o_binary,
        excluded_changes,
        excluded_binary,
    })
}

pub(crate) mod f64_or_inf {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() {
            s.serialize_str(if *v > 0.0 { "inf" } else { "-inf" })
        } else {
            s.serialize_f64(*v)
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) => t.trim().parse::<f64>().map_err(serde::de::Error::custom),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn aicc_arithmetic() {
        assert!((aicc(1, 52, -63.04).unwrap() - 128.16).abs() < 1e-12);
        assert_eq!(aicc(0, 10, -3.5).unwrap(), 7.0);
        assert!(aicc(3, 4, 0.0).is_err());
    }

    #[test]
    fn scenario_spec_round_trips_infinite_selection() {
        let spec = ScenarioSpec::child(f64::INFINITY);
        let text = serde_json::to_string(&spec).unwrap();
        assert!(text.contains("\"inf\""));
        let back: ScenarioSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(back, spec);
    }
}
