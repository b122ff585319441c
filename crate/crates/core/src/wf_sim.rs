//! Forward simulation of the individual-based Wright-Fisher model.
//!
//! Every tick (rate `R`) all speakers update simultaneously: speaker `n`
//! perceives the innovation with probability
//! `p_n = ((1 − x̄_n) η + (1 + s) x̄_n) / (1 + x̄_n s)`, where `x̄_n` is the
//! mean frequency over its neighbourhood (the whole population, including
//! itself, when homogeneous), and sets `x' = (1 − ε) x + ε τ`.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::fixation::{
    effective_population_size, fixation_probability, fixation_time_moments, gamma_params, sample_power_law_degrees,
    DiffusionParams, FixationMoments, NetworkSpec,
};
use crate::likelihood::{ln_change_probability, FixationLaw, InversionConfig};
use crate::numeric::rng::{mix, substream, SimRng};
use crate::numeric::stats::Moments;
use crate::{Error, Result};

/// Frequencies within this distance of 0 or 1 count as absorbed when `ε < 1`.
pub const DEFAULT_ABSORB_TOL: f64 = 1e-9;

/// Runs are dispatched to worker threads in chunks of this size.
const CHUNK: u64 = 1000;

const NETWORK_STREAM: u64 = 0x6e65_7477;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Topology {
    Homogeneous,
    /// Configuration-model graph with power-law degrees `p_z ∝ z^{-(1+ν)}`.
    Network {
        nu: f64,
        z_min: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub n: usize,
    pub epsilon: f64,
    pub s: f64,
    pub eta: f64,
    /// Interactions per year.
    pub r: f64,
    pub topology: Topology,
    /// Speakers starting at `x = ε`.
    pub x0_speakers: usize,
    pub max_steps: u64,
    pub seed: u64,
    /// Record the population mean every this many ticks (0 disables).
    pub trajectory_stride: u64,
    pub absorb_tol: f64,
}

impl SimConfig {
    /// Single initiator, no innovation, homogeneous population.
    pub fn new(n: usize, epsilon: f64, s: f64, r: f64) -> Self {
        Self {
            n,
            epsilon,
            s,
            eta: 0.0,
            r,
            topology: Topology::Homogeneous,
            x0_speakers: 1,
            max_steps: 100_000_000,
            seed: 1,
            trajectory_stride: 0,
            absorb_tol: DEFAULT_ABSORB_TOL,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.n < 2 {
            return bad(format!("population needs at least 2 speakers, got {}", self.n));
        }
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return bad(format!("ε must lie in (0, 1], got {}", self.epsilon));
        }
        if !(self.s > -1.0) || !self.s.is_finite() {
            return bad(format!("s must be finite and greater than -1, got {}", self.s));
        }
        if !(0.0..=1.0).contains(&self.eta) {
            return bad(format!("η must lie in [0, 1], got {}", self.eta));
        }
        if !(self.r > 0.0) || !self.r.is_finite() {
            return bad(format!("R must be positive, got {}", self.r));
        }
        if self.x0_speakers > self.n {
            return bad(format!("{} initial speakers exceed N={}", self.x0_speakers, self.n));
        }
        if !(self.absorb_tol >= 0.0 && self.absorb_tol < 0.5) {
            return bad(format!(
                "absorption tolerance must lie in [0, 0.5), got {}",
                self.absorb_tol
            ));
        }
        if let Topology::Network { nu, z_min } = self.topology {
            NetworkSpec::new(self.n as u64, nu, z_min, self.epsilon)?;
        }
        Ok(())
    }

    /// Memory lifetime `1/(R ε)` in years.
    pub fn t_m(&self) -> f64 {
        1.0 / (self.r * self.epsilon)
    }
}

impl Default for SimConfig {
    fn default() -> Self {
        Self::new(100, 1.0, 0.0, 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub time: f64,
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimOutcome {
    pub fixed: bool,
    /// `max_steps` reached before absorption.
    pub truncated: bool,
    /// Years until fixation, loss (η = 0) or truncation. With ε < 1 fixation
    /// is dated to the first tick after which nobody perceives the old
    /// variant again.
    pub time: f64,
    /// Ticks simulated.
    pub steps: u64,
    /// Times the innovation died out and had to be reintroduced (η > 0).
    pub losses: u64,
    pub trajectory: Vec<TrajectoryPoint>,
}

/// A configured population: the validated parameters plus, for networks,
/// the realised social graph shared by every run.
#[derive(Debug, Clone)]
pub struct Population {
    cfg: SimConfig,
    neighbours: Option<Vec<Vec<u32>>>,
    ne: f64,
}

impl Population {
    pub fn new(cfg: &SimConfig) -> Result<Self> {
        cfg.validate()?;
        let (neighbours, ne) = match cfg.topology {
            Topology::Homogeneous => (None, cfg.n as f64 / cfg.epsilon),
            Topology::Network { nu, z_min } => {
                let spec = NetworkSpec::new(cfg.n as u64, nu, z_min, cfg.epsilon)?;
                let adj = configuration_graph(&spec, mix(cfg.seed, NETWORK_STREAM));
                let degrees: Vec<u64> = adj.iter().map(|a| a.len() as u64).collect();
                (Some(adj), effective_population_size(&spec, &degrees))
            }
        };
        Ok(Self {
            cfg: cfg.clone(),
            neighbours,
            ne,
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    /// Effective size of the realised population.
    pub fn ne(&self) -> f64 {
        self.ne
    }

    pub fn neighbours(&self) -> Option<&[Vec<u32>]> {
        self.neighbours.as_deref()
    }

    /// Diffusion parameters matching this population.
    pub fn diffusion(&self) -> Result<DiffusionParams> {
        DiffusionParams::new(self.ne, self.cfg.s, self.cfg.t_m())
    }

    /// Run number `run`, drawn from its own random stream.
    pub fn run(&self, run: u64) -> SimOutcome {
        let mut rng = substream(self.cfg.seed, run);
        if self.neighbours.is_none() && self.cfg.epsilon == 1.0 {
            self.run_counts(&mut rng)
        } else {
            self.run_speakers(&mut rng)
        }
    }

    /// With ε = 1 and no network every speaker is at 0 or 1 and all share the
    /// same `p`, so the state is the count of innovators and a tick is one
    /// binomial draw.
    fn run_counts(&self, rng: &mut SimRng) -> SimOutcome {
        let cfg = &self.cfg;
        let n = cfg.n as u64;
        let mut k = cfg.x0_speakers as u64;
        let mut out = Recorder::new(cfg);
        let mut step = 0u64;
        out.record(step, k as f64 / n as f64);
        loop {
            if k == n {
                return out.finish(step, k as f64 / n as f64, true, false);
            }
            if k == 0 && cfg.eta == 0.0 {
                return out.finish(step, k as f64 / n as f64, false, false);
            }
            if step >= cfg.max_steps {
                return out.finish(step, k as f64 / n as f64, false, true);
            }
            let p = perception(k as f64 / n as f64, cfg.s, cfg.eta);
            let next = binomial(rng, n, p);
            if next == 0 && k > 0 {
                out.losses += 1;
            }
            k = next;
            step += 1;
            out.record(step, k as f64 / n as f64);
        }
    }

    fn run_speakers(&self, rng: &mut SimRng) -> SimOutcome {
        let cfg = &self.cfg;
        let n = cfg.n;
        let eps = cfg.epsilon;
        let mut x = vec![0.0; n];
        // initiators are the first speakers; on a network pick them at random
        let mut order: Vec<usize> = (0..n).collect();
        if self.neighbours.is_some() {
            order.shuffle(rng);
        }
        for &i in &order[..cfg.x0_speakers] {
            x[i] = eps;
        }
        let mut next = vec![0.0; n];
        let mut p = vec![0.0; n];
        let mut out = Recorder::new(cfg);
        let mut step = 0u64;
        let mut mean = x.iter().sum::<f64>() / n as f64;
        out.record(step, mean);
        let hi = 1.0 - cfg.absorb_tol;
        let lo = cfg.absorb_tol;
        let mut was_present = cfg.x0_speakers > 0;
        // last state produced by a tick in which someone perceived the old
        // variant; when ε < 1 the innovation has won one tick later even
        // though frequencies only approach 1 geometrically
        let mut last_mixed = 0u64;
        loop {
            let all_fixed = x.iter().all(|&v| v >= hi);
            if all_fixed {
                let won = if step == 0 { 0 } else { last_mixed + 1 };
                return out.finish_at(step, won, mean, true, false);
            }
            let all_lost = x.iter().all(|&v| v <= lo);
            if all_lost {
                if cfg.eta == 0.0 {
                    return out.finish(step, mean, false, false);
                }
                if was_present {
                    out.losses += 1;
                    x.iter_mut().for_each(|v| *v = 0.0);
                    was_present = false;
                }
            } else {
                was_present = true;
            }
            if step >= cfg.max_steps {
                return out.finish(step, mean, false, true);
            }
            match &self.neighbours {
                None => p.fill(perception(mean, cfg.s, cfg.eta)),
                Some(adj) => {
                    for (i, nb) in adj.iter().enumerate() {
                        let local = nb.iter().map(|&j| x[j as usize]).sum::<f64>() / nb.len() as f64;
                        p[i] = perception(local, cfg.s, cfg.eta);
                    }
                }
            }
            let mut mixed = false;
            for i in 0..n {
                let tau = if rng.random::<f64>() < p[i] {
                    1.0
                } else {
                    mixed = true;
                    0.0
                };
                next[i] = ((1.0 - eps) * x[i] + eps * tau).clamp(0.0, 1.0);
            }
            std::mem::swap(&mut x, &mut next);
            mean = x.iter().sum::<f64>() / n as f64;
            step += 1;
            if mixed {
                last_mixed = step;
            }
            out.record(step, mean);
        }
    }
}

struct Recorder {
    stride: u64,
    r: f64,
    losses: u64,
    trajectory: Vec<TrajectoryPoint>,
}

impl Recorder {
    fn new(cfg: &SimConfig) -> Self {
        Self {
            stride: cfg.trajectory_stride,
            r: cfg.r,
            losses: 0,
            trajectory: Vec::new(),
        }
    }

    fn record(&mut self, step: u64, mean: f64) {
        if self.stride > 0 && step.is_multiple_of(self.stride) {
            self.trajectory.push(TrajectoryPoint {
                time: step as f64 / self.r,
                mean,
            });
        }
    }

    fn finish(self, step: u64, mean: f64, fixed: bool, truncated: bool) -> SimOutcome {
        self.finish_at(step, step, mean, fixed, truncated)
    }

    /// `step` ticks were run; the reported time is that of state `at`.
    fn finish_at(mut self, step: u64, at: u64, mean: f64, fixed: bool, truncated: bool) -> SimOutcome {
        let end = step as f64 / self.r;
        if self.stride > 0 && self.trajectory.last().is_some_and(|p| p.time != end) {
            self.trajectory.push(TrajectoryPoint { time: end, mean });
        }
        SimOutcome {
            fixed,
            truncated,
            time: at as f64 / self.r,
            steps: step,
            losses: self.losses,
            trajectory: self.trajectory,
        }
    }
}

/// Probability that a speaker hearing a community at innovation frequency
/// `xbar` perceives the innovative variant.
pub fn perception(xbar: f64, s: f64, eta: f64) -> f64 {
    let denom = 1.0 + xbar * s;
    (((1.0 - xbar) * eta + (1.0 + s) * xbar) / denom).clamp(0.0, 1.0)
}

fn binomial(rng: &mut SimRng, n: u64, p: f64) -> u64 {
    if p <= 0.0 {
        0
    } else if p >= 1.0 {
        n
    } else {
        Binomial::new(n, p).expect("p checked to lie in (0, 1)").sample(rng)
    }
}

/// Simple graph from the configuration model: degrees are drawn from the
/// power law, stubs are paired at random, and self-loops and repeated edges
/// are erased. A speaker left without neighbours is joined to a random other
/// speaker so that every speaker can hear someone.
pub fn configuration_graph(spec: &NetworkSpec, seed: u64) -> Vec<Vec<u32>> {
    let n = spec.n as usize;
    let degrees = sample_power_law_degrees(spec, seed);
    let mut rng = substream(seed, 2);
    let mut stubs: Vec<u32> = Vec::with_capacity(degrees.iter().sum::<u64>() as usize);
    for (i, &z) in degrees.iter().enumerate() {
        stubs.extend(std::iter::repeat_n(i as u32, z as usize));
    }
    stubs.shuffle(&mut rng);
    let mut adj: Vec<Vec<u32>> = vec![Vec::new(); n];
    for pair in stubs.chunks_exact(2) {
        let (a, b) = (pair[0], pair[1]);
        if a != b {
            adj[a as usize].push(b);
            adj[b as usize].push(a);
        }
    }
    for list in adj.iter_mut() {
        list.sort_unstable();
        list.dedup();
    }
    for i in 0..n {
        if adj[i].is_empty() {
            let mut j = rng.random_range(0..n - 1);
            if j >= i {
                j += 1;
            }
            adj[i].push(j as u32);
            adj[j].push(i as u32);
            adj[j].sort_unstable();
        }
    }
    adj
}

/// One run of `cfg` (stream 0 of its seed).
pub fn simulate_run(cfg: &SimConfig) -> Result<SimOutcome> {
    Ok(Population::new(cfg)?.run(0))
}

/// Outcomes of runs `0..n_runs` in run order, computed in parallel.
pub fn simulate_many(pop: &Population, n_runs: u64) -> Vec<SimOutcome> {
    let chunks: Vec<u64> = (0..n_runs.div_ceil(CHUNK)).collect();
    chunks
        .par_iter()
        .map(|&c| {
            (c * CHUNK..((c + 1) * CHUNK).min(n_runs))
                .map(|i| pop.run(i))
                .collect::<Vec<_>>()
        })
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect()
}

/// Fewest fixations for which moment comparisons are considered meaningful.
pub const MIN_FIXATIONS: u64 = 100;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HistogramBin {
    pub lo: f64,
    pub hi: f64,
    pub count: u64,
    /// Empirical density `count / (fixations · width)`.
    pub density: f64,
    /// Gamma density at the bin centre.
    pub gamma_density: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FixationTimeReport {
    pub runs: u64,
    pub fixations: u64,
    pub truncated: u64,
    pub fixation_fraction: f64,
    pub fixation_fraction_se: f64,
    /// Diffusion fixation probability `Q(x0 ε / N)`.
    pub q_expected: f64,
    pub ne: f64,
    pub t_m: f64,
    pub mean: f64,
    pub variance: f64,
    pub mean_se: f64,
    pub diffusion: FixationMoments,
    pub gamma_shape: f64,
    pub gamma_rate: f64,
    pub histogram: Vec<HistogramBin>,
    pub flags: Vec<String>,
}

/// Conditional fixation-time statistics of `n_runs` runs without innovation,
/// with the Gamma approximation built from the diffusion moments.
pub fn fixation_time_distribution(cfg: &SimConfig, n_runs: u64, bins: usize) -> Result<FixationTimeReport> {
    if cfg.eta != 0.0 {
        return Err(Error::Config("fixation-time statistics need η = 0".into()));
    }
    if n_runs == 0 || bins == 0 {
        return Err(Error::Config("need at least one run and one histogram bin".into()));
    }
    let pop = Population::new(cfg)?;
    let diffusion = pop.diffusion()?;
    let x0 = cfg.x0_speakers as f64 * cfg.epsilon / cfg.n as f64;
    let q_expected = fixation_probability(x0.min(1.0), &diffusion)?;
    let moments = fixation_time_moments(&diffusion)?;
    let (alpha, beta) = gamma_params(&moments);

    let outcomes = simulate_many(&pop, n_runs);
    let truncated = outcomes.iter().filter(|o| o.truncated).count() as u64;
    let times: Vec<f64> = outcomes.iter().filter(|o| o.fixed).map(|o| o.time).collect();
    let fixations = times.len() as u64;
    let mut acc = Moments::default();
    times.iter().for_each(|&t| acc.push(t));

    let frac = fixations as f64 / n_runs as f64;
    let mut flags = Vec::new();
    if fixations < MIN_FIXATIONS {
        flags.push(format!(
            "only {fixations} fixations; moments are statistically unreliable"
        ));
    }
    if truncated > 0 {
        flags.push(format!("{truncated} runs hit max_steps"));
    }
    let histogram = if times.is_empty() {
        Vec::new()
    } else {
        histogram(&times, bins, alpha, beta)
    };
    Ok(FixationTimeReport {
        runs: n_runs,
        fixations,
        truncated,
        fixation_fraction: frac,
        fixation_fraction_se: (frac * (1.0 - frac) / n_runs as f64).sqrt(),
        q_expected,
        ne: pop.ne(),
        t_m: cfg.t_m(),
        mean: acc.mean(),
        variance: acc.variance(),
        mean_se: acc.std_error(),
        diffusion: moments,
        gamma_shape: alpha,
        gamma_rate: beta,
        histogram,
        flags,
    })
}

fn histogram(times: &[f64], bins: usize, alpha: f64, beta: f64) -> Vec<HistogramBin> {
    let max = times.iter().copied().fold(0.0, f64::max);
    let width = if max > 0.0 { max / bins as f64 } else { 1.0 };
    let mut counts = vec![0u64; bins];
    for &t in times {
        counts[((t / width) as usize).min(bins - 1)] += 1;
    }
    let total = times.len() as f64;
    counts
        .into_iter()
        .enumerate()
        .map(|(i, count)| {
            let lo = i as f64 * width;
            HistogramBin {
                lo,
                hi: lo + width,
                count,
                density: count as f64 / (total * width),
                gamma_density: gamma_pdf(lo + 0.5 * width, alpha, beta),
            }
        })
        .collect()
}

pub fn gamma_pdf(t: f64, alpha: f64, beta: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    (alpha * beta.ln() + (alpha - 1.0) * t.ln() - beta * t - libm::lgamma(alpha)).exp()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InterferenceConfig {
    pub n: usize,
    pub s: f64,
    pub r: f64,
    /// Values of `I = ω T̄_F` to simulate.
    pub i_grid: Vec<f64>,
    pub n_runs: u64,
    pub seed: u64,
    pub source: SecondSource,
}

impl Default for InterferenceConfig {
    fn default() -> Self {
        Self {
            n: 100,
            s: 0.01,
            r: 1.0,
            i_grid: (0..=8).map(|i| i as f64 * 0.25).collect(),
            n_runs: 1_000_000,
            seed: 1,
            source: SecondSource::default(),
        }
    }
}

/// Which speakers can produce the second innovation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SecondSource {
    /// Any instance not already of the second innovation, as in the
    /// single-innovation perception rule.
    #[default]
    AnyVariant,
    /// Only instances of the first innovation (the next stage of a cycle
    /// grows out of the current one).
    FirstOnly,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InterferencePoint {
    pub i: f64,
    /// Rate (per year) at which successful second innovations originate.
    pub omega: f64,
    /// Per-instance innovation probability producing that rate.
    pub eta2: f64,
    pub runs: u64,
    pub fixes: u64,
    /// `P(first fixes | ω) / P(first fixes | ω = 0)`.
    pub p: f64,
    pub stderr: f64,
    pub exponential: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InterferenceReport {
    pub config: InterferenceConfig,
    pub mean_fixation_time: f64,
    pub q_single: f64,
    pub baseline_fixes: u64,
    pub points: Vec<InterferencePoint>,
    pub monotone: bool,
    pub max_deviation: f64,
}

/// Chance that an innovation completes its sweep when a second, superseding
/// innovation keeps originating at rate `ω`.
///
/// Three variants with fitnesses 1, 1+s and (1+s)² evolve under ε = 1. The
/// first innovation starts in one speaker; every perceived instance of an
/// older variant turns into the second innovation with probability `η₂`,
/// chosen so that successful second innovations originate at
/// `ω = N R η₂ Q(1/N)`. A run succeeds when the first innovation reaches all
/// speakers and fails when it disappears.
pub fn interference_experiment(cfg: &InterferenceConfig) -> Result<InterferenceReport> {
    if cfg.n < 2 || !(cfg.s > 0.0) || !(cfg.r > 0.0) || cfg.n_runs == 0 {
        return Err(Error::Config(format!(
            "interference needs N ≥ 2, s > 0, R > 0 and runs > 0 (got N={}, s={}, R={}, runs={})",
            cfg.n, cfg.s, cfg.r, cfg.n_runs
        )));
    }
    if cfg.i_grid.iter().any(|&i| !(i >= 0.0) || !i.is_finite()) {
        return Err(Error::Config(
            "interference strengths must be finite and non-negative".into(),
        ));
    }
    let diffusion = DiffusionParams::new(cfg.n as f64, cfg.s, 1.0 / cfg.r)?;
    let q = fixation_probability(1.0 / cfg.n as f64, &diffusion)?;
    let t_bar = fixation_time_moments(&diffusion)?.mean;

    let count = |grid_index: u64, eta2: f64| -> u64 {
        let chunks: Vec<u64> = (0..cfg.n_runs.div_ceil(CHUNK)).collect();
        chunks
            .par_iter()
            .map(|&c| {
                (c * CHUNK..((c + 1) * CHUNK).min(cfg.n_runs))
                    .filter(|&run| {
                        let mut rng = substream(mix(cfg.seed, grid_index), run);
                        first_fixes(&mut rng, cfg.n as u64, cfg.s, eta2, cfg.source)
                    })
                    .count() as u64
            })
            .sum()
    };

    let runs = cfg.n_runs as f64;
    let baseline_fixes = count(0, 0.0);
    let p0 = baseline_fixes as f64 / runs;
    if baseline_fixes == 0 {
        return Err(Error::numerical(
            "no fixations without interference; increase the number of runs",
        ));
    }
    let points: Vec<InterferencePoint> = cfg
        .i_grid
        .iter()
        .enumerate()
        .map(|(k, &i)| {
            let omega = i / t_bar;
            let eta2 = (omega / (cfg.n as f64 * cfg.r * q)).min(1.0);
            let fixes = if i == 0.0 {
                baseline_fixes
            } else {
                count(k as u64 + 1, eta2)
            };
            let p1 = fixes as f64 / runs;
            let p = p1 / p0;
            let rel = if fixes == 0 || i == 0.0 {
                0.0
            } else {
                ((1.0 - p1) / (fixes as f64) + (1.0 - p0) / baseline_fixes as f64).sqrt()
            };
            InterferencePoint {
                i,
                omega,
                eta2,
                runs: cfg.n_runs,
                fixes,
                p,
                stderr: p * rel,
                exponential: (-i).exp(),
            }
        })
        .collect();
    let mut sorted: Vec<&InterferencePoint> = points.iter().collect();
    sorted.sort_by(|a, b| a.i.total_cmp(&b.i));
    let monotone = sorted.windows(2).all(|w| w[1].p <= w[0].p);
    let max_deviation = points.iter().map(|p| (p.p - p.exponential).abs()).fold(0.0, f64::max);
    Ok(InterferenceReport {
        config: cfg.clone(),
        mean_fixation_time: t_bar,
        q_single: q,
        baseline_fixes,
        points,
        monotone,
        max_deviation,
    })
}

/// One three-variant run; true if the first innovation reaches every speaker.
fn first_fixes(rng: &mut SimRng, n: u64, s: f64, eta2: f64, source: SecondSource) -> bool {
    let (mut n1, mut n2) = (1u64, 0u64);
    loop {
        if n1 == n {
            return true;
        }
        if n1 == 0 {
            return false;
        }
        let n0 = n - n1 - n2;
        let w0 = n0 as f64;
        let w1 = n1 as f64 * (1.0 + s);
        let w2 = n2 as f64 * (1.0 + s) * (1.0 + s);
        let total = w0 + w1 + w2;
        // multinomial draw of the perceived variants
        let a1 = binomial(rng, n, w1 / total);
        let rest = n - a1;
        let a2 = if w0 + w2 > 0.0 {
            binomial(rng, rest, w2 / (w0 + w2))
        } else {
            0
        };
        let a0 = rest - a2;
        let m0 = match source {
            SecondSource::FirstOnly => 0,
            SecondSource::AnyVariant => binomial(rng, a0, eta2),
        };
        let m1 = binomial(rng, a1, eta2);
        n1 = a1 - m1;
        n2 = a2 + m0 + m1;
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChangeCurvePoint {
    pub time: f64,
    /// Fraction of runs in which the first fixation happened by `time`.
    pub simulated: f64,
    pub stderr: f64,
    /// Origin-fixation prediction with Gamma fixation times.
    pub origin_fixation: f64,
    /// Poisson prediction ignoring the fixation time.
    pub poisson: f64,
}

/// Probability that the first change has completed by each of `times`, from
/// runs that start without innovators and keep innovating at rate η.
pub fn change_probability_curve(cfg: &SimConfig, n_runs: u64, times: &[f64]) -> Result<Vec<ChangeCurvePoint>> {
    if !(cfg.eta > 0.0) {
        return Err(Error::Config("the change-probability curve needs η > 0".into()));
    }
    let mut cfg = cfg.clone();
    cfg.x0_speakers = 0;
    let horizon = times.iter().copied().fold(0.0, f64::max);
    cfg.max_steps = cfg.max_steps.min((horizon * cfg.r).ceil() as u64 + 1);
    let pop = Population::new(&cfg)?;
    let diffusion = pop.diffusion()?;
    let omega = crate::fixation::origination_rate(cfg.n as f64, cfg.r, cfg.eta, cfg.epsilon, &diffusion)?;
    let law = FixationLaw::from_moments(&fixation_time_moments(&diffusion)?);
    let inversion = InversionConfig::for_digits(9);
    let fixed_times: Vec<f64> = simulate_many(&pop, n_runs)
        .into_iter()
        .filter(|o| o.fixed)
        .map(|o| o.time)
        .collect();
    let runs = n_runs as f64;
    times
        .iter()
        .map(|&t| {
            let hits = fixed_times.iter().filter(|&&f| f <= t).count() as f64;
            let p = hits / runs;
            let origin_fixation = if t > 0.0 {
                ln_change_probability(t, omega, law, &inversion)?.exp()
            } else {
                0.0
            };
            Ok(ChangeCurvePoint {
                time: t,
                simulated: p,
                stderr: (p * (1.0 - p) / runs).sqrt(),
                origin_fixation,
                poisson: -(-omega * t).exp_m1(),
            })
        })
        .collect()
}
