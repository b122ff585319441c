//! Demonstration agent-based model with births, deaths, evolving social
//! networks and heterogeneous speakers, and the jump-moment analysis that
//! maps it onto Wright-Fisher parameters.
//!
//! The simulation is event driven. Events at equal times are processed in
//! `(time, agent id, event kind)` order so a seed fixes the whole history.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::Rng;
use rand_distr::{Beta, Distribution, Exp1, Gamma, Geometric, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::numeric::rng::{mix, substream, SimRng};
use crate::{Error, Result};

/// How births are accepted once the population has reached `K`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BirthRule {
    /// Accept with probability `K / (N μ_k)`: one accepted offspring per
    /// agent on average at `N = K`, fewer above it.
    #[default]
    Stabilising,
    /// Accept with probability `1 − K / (N μ_k)`. With `μ_k = 2` this gives
    /// `μ_k − K/N > 1` offspring per agent above `K`, so `N` keeps growing.
    Unbounded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DemoParams {
    /// Carrying capacity.
    pub k: f64,
    pub mu_k: f64,
    /// Parent age at birth (years).
    pub mu_b: f64,
    pub sigma_b: f64,
    /// Age at network expansion (years).
    pub mu_e: f64,
    pub sigma_e: f64,
    /// Lifespan (years).
    pub mu_d: f64,
    pub sigma_d: f64,
    /// Mean interlocutors inherited from the parent.
    pub mu_i: f64,
    /// Mean interlocutors after expansion.
    pub mu_i_prime: f64,
    pub h: f64,
    pub w0: f64,
    /// Interaction rate at birth (per year).
    pub mu_rate: f64,
    pub sigma_rate: f64,
    /// Factor `r` in `R_∞ = R_0 / (1 + r)`.
    pub mu_decrease: f64,
    pub sigma_decrease: f64,
    /// Decay time of the interaction rate (years).
    pub mu_theta: f64,
    pub sigma_theta: f64,
    pub q: f64,
    pub mu_eps: f64,
    pub sigma_eps: f64,
    pub mu_chi: f64,
    pub sigma_chi: f64,
    pub birth_rule: BirthRule,
}

impl Default for DemoParams {
    fn default() -> Self {
        Self {
            k: 1000.0,
            mu_k: 2.0,
            mu_b: 30.0,
            sigma_b: 8.0,
            mu_e: 18.0,
            sigma_e: 4.0,
            mu_d: 60.0,
            sigma_d: 12.0,
            mu_i: 3.0,
            mu_i_prime: 10.0,
            h: 0.2,
            w0: 1.0,
            mu_rate: 1.0,
            sigma_rate: 0.1,
            mu_decrease: 10.0,
            sigma_decrease: 10.0,
            mu_theta: 20.0,
            sigma_theta: 10.0,
            q: 0.5,
            mu_eps: 0.15,
            sigma_eps: 0.15,
            mu_chi: 0.0,
            sigma_chi: 0.0,
            birth_rule: BirthRule::Stabilising,
        }
    }
}

/// The three bias settings of the jump-moment comparison:
/// (i) unbiased on average, (ii) uniform bias, (iii) biased on average.
pub fn bias_configurations() -> [(f64, f64); 3] {
    [(0.0, 0.005), (0.005, 0.0), (0.005, 0.005)]
}

impl DemoParams {
    pub fn with_bias(mut self, mu_chi: f64, sigma_chi: f64) -> Self {
        self.mu_chi = mu_chi;
        self.sigma_chi = sigma_chi;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("K", self.k),
            ("μ_k", self.mu_k),
            ("μ_b", self.mu_b),
            ("μ_e", self.mu_e),
            ("μ_d", self.mu_d),
            ("μ_R", self.mu_rate),
            ("μ_θ", self.mu_theta),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        let non_negative = [
            ("σ_b", self.sigma_b),
            ("σ_e", self.sigma_e),
            ("σ_d", self.sigma_d),
            ("μ_i", self.mu_i),
            ("μ_i'", self.mu_i_prime),
            ("h", self.h),
            ("w_0", self.w0),
            ("σ_R", self.sigma_rate),
            ("μ_r", self.mu_decrease),
            ("σ_r", self.sigma_decrease),
            ("σ_θ", self.sigma_theta),
            ("σ_χ", self.sigma_chi),
        ];
        for (name, v) in non_negative {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("{name} must be non-negative, got {v}")));
            }
        }
        if self.mu_decrease == 0.0 && self.sigma_decrease > 0.0 {
            return Err(Error::Config("μ_r = 0 requires σ_r = 0".into()));
        }
        if !(self.q > 0.0 && self.q <= 1.0) {
            return Err(Error::Config(format!("q must lie in (0, 1], got {}", self.q)));
        }
        let (m, s) = (self.mu_eps, self.sigma_eps);
        if !(m > 0.0 && m <= 1.0) || !(s >= 0.0) || (s > 0.0 && s * s >= m * (1.0 - m)) {
            return Err(Error::Config(format!(
                "ε distribution needs 0 < μ_ε ≤ 1 and σ_ε² < μ_ε(1 − μ_ε) (got μ_ε={m}, σ_ε={s})"
            )));
        }
        if !self.mu_chi.is_finite() {
            return Err(Error::Config("μ_χ must be finite".into()));
        }
        Ok(())
    }

    /// Number of model parameters (the birth-rule switch is not one).
    pub const COUNT: usize = 23;
}

/// Draws from the distributions of [`DemoParams`].
struct Sampler {
    lifespan: Positive,
    birth_age: Positive,
    expansion_age: Positive,
    rate: Positive,
    decrease: Positive,
    theta: Positive,
    offspring: Geometric,
    eps: Unit,
    chi: Option<Normal<f64>>,
    mu_chi: f64,
}

/// Gamma with given mean and standard deviation, or a constant.
enum Positive {
    Fixed(f64),
    Gamma(Gamma<f64>),
}

impl Positive {
    fn new(mean: f64, sd: f64) -> Result<Self> {
        if sd == 0.0 || mean == 0.0 {
            return Ok(Positive::Fixed(mean));
        }
        let shape = mean * mean / (sd * sd);
        Gamma::new(shape, mean / shape)
            .map(Positive::Gamma)
            .map_err(|e| Error::Config(format!("Gamma(mean {mean}, sd {sd}): {e}")))
    }

    fn sample(&self, rng: &mut SimRng) -> f64 {
        match self {
            Positive::Fixed(v) => *v,
            Positive::Gamma(g) => g.sample(rng),
        }
    }
}

/// Beta with given mean and standard deviation, or a constant.
enum Unit {
    Fixed(f64),
    Beta(Beta<f64>),
}

impl Unit {
    fn new(mean: f64, sd: f64) -> Result<Self> {
        if sd == 0.0 {
            return Ok(Unit::Fixed(mean));
        }
        let nu = mean * (1.0 - mean) / (sd * sd) - 1.0;
        Beta::new(mean * nu, (1.0 - mean) * nu)
            .map(Unit::Beta)
            .map_err(|e| Error::Config(format!("Beta(mean {mean}, sd {sd}): {e}")))
    }

    fn sample(&self, rng: &mut SimRng) -> f64 {
        match self {
            Unit::Fixed(v) => *v,
            Unit::Beta(b) => b.sample(rng),
        }
    }
}

impl Sampler {
    fn new(p: &DemoParams) -> Result<Self> {
        p.validate()?;
        Ok(Self {
            lifespan: Positive::new(p.mu_d, p.sigma_d)?,
            birth_age: Positive::new(p.mu_b, p.sigma_b)?,
            expansion_age: Positive::new(p.mu_e, p.sigma_e)?,
            rate: Positive::new(p.mu_rate, p.sigma_rate)?,
            decrease: Positive::new(p.mu_decrease, p.sigma_decrease)?,
            theta: Positive::new(p.mu_theta, p.sigma_theta)?,
            // failures before the first success: support from 0, mean μ_k
            offspring: Geometric::new(1.0 / (1.0 + p.mu_k))
                .map_err(|e| Error::Config(format!("offspring distribution: {e}")))?,
            eps: Unit::new(p.mu_eps, p.sigma_eps)?,
            chi: if p.sigma_chi > 0.0 {
                Some(Normal::new(p.mu_chi, p.sigma_chi).map_err(|e| Error::Config(format!("χ distribution: {e}")))?)
            } else {
                None
            },
            mu_chi: p.mu_chi,
        })
    }

    fn chi(&self, rng: &mut SimRng) -> f64 {
        self.chi.as_ref().map_or(self.mu_chi, |d| d.sample(rng))
    }

    /// `(R_0, R_∞, θ)`.
    fn rates(&self, rng: &mut SimRng) -> (f64, f64, f64) {
        let r0 = self.rate.sample(rng);
        let r = self.decrease.sample(rng);
        (r0, r0 / (1.0 + r), self.theta.sample(rng))
    }
}

/// Expected interactions over ages `[0, a]`.
fn integrated_rate(r0: f64, r_inf: f64, theta: f64, a: f64) -> f64 {
    r_inf * a - (r0 - r_inf) * theta * (-a / theta).exp_m1()
}

#[derive(Debug, Clone)]
struct Agent {
    birth: f64,
    death: f64,
    alive: bool,
    r0: f64,
    r_inf: f64,
    theta: f64,
    eps: f64,
    chi: f64,
    x: f64,
    interlocutors: Vec<u32>,
}

impl Agent {
    fn rate_at(&self, age: f64) -> f64 {
        self.r_inf + (self.r0 - self.r_inf) * (-age / self.theta).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Kind {
    Sample,
    Death,
    Birth,
    Expansion,
    Interaction,
}

#[derive(Debug, Clone, Copy)]
struct Event {
    time: f64,
    agent: u32,
    kind: Kind,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Event {}
impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Event {
    /// Reversed so that the max-heap pops the earliest event.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then(other.agent.cmp(&self.agent))
            .then(other.kind.cmp(&self.kind))
    }
}

/// Resampling attempts for a birth age that falls after the parent's death.
const BIRTH_AGE_ATTEMPTS: usize = 100;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DemoSample {
    pub time: f64,
    pub mean_x: f64,
    pub population: usize,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct DemoCounters {
    pub births: u64,
    pub rejected_births: u64,
    pub deaths: u64,
    pub interactions: u64,
    /// Interactions skipped because every interlocutor had died.
    pub isolated: u64,
    /// Offspring dropped after exhausting birth-age resampling.
    pub dropped_offspring: u64,
    /// Re-establishments after extinction.
    pub restarts: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DemoTrajectory {
    pub samples: Vec<DemoSample>,
    pub counters: DemoCounters,
    /// Stopped early because the population exceeded the size cap.
    pub overflow: bool,
    pub flags: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemoRunConfig {
    pub duration: f64,
    pub sample_interval: f64,
    pub initial_x: f64,
    pub seed: u64,
    /// Abort if the population exceeds this multiple of `K`.
    pub max_population_factor: f64,
}

impl DemoRunConfig {
    pub fn new(duration: f64, initial_x: f64, seed: u64) -> Self {
        Self {
            duration,
            sample_interval: 10.0,
            initial_x,
            seed,
            max_population_factor: 20.0,
        }
    }
}

struct World<'a> {
    p: &'a DemoParams,
    sampler: Sampler,
    rng: SimRng,
    agents: Vec<Agent>,
    alive: Vec<u32>,
    /// Position of each agent in `alive` (meaningless once dead).
    slot: Vec<usize>,
    queue: BinaryHeap<Event>,
    counters: DemoCounters,
}

impl<'a> World<'a> {
    /// Create an agent born at `birth` who is `age` years old at `now`
    /// (initial population) or newborn (`age = 0`). Returns its id, or
    /// `None` if its drawn lifespan is already over.
    fn create(&mut self, now: f64, age: f64, x: f64) -> Option<u32> {
        let birth = now - age;
        let d = self.sampler.lifespan.sample(&mut self.rng);
        if d <= age {
            return None;
        }
        let (r0, r_inf, theta) = self.sampler.rates(&mut self.rng);
        let id = self.agents.len() as u32;
        let agent = Agent {
            birth,
            death: birth + d,
            alive: true,
            r0,
            r_inf,
            theta,
            eps: self.sampler.eps.sample(&mut self.rng),
            chi: self.sampler.chi(&mut self.rng),
            x,
            interlocutors: Vec::new(),
        };
        self.agents.push(agent);
        self.slot.push(self.alive.len());
        self.alive.push(id);
        self.push(birth + d, id, Kind::Death);

        let k = self.sampler.offspring.sample(&mut self.rng);
        for _ in 0..k {
            match self.birth_age(d) {
                Some(b) if b > age => self.push(birth + b, id, Kind::Birth),
                Some(_) => {}
                None => self.counters.dropped_offspring += 1,
            }
        }
        let e = self.sampler.expansion_age.sample(&mut self.rng);
        if e < d && e > age {
            self.push(birth + e, id, Kind::Expansion);
        }
        self.schedule_interaction(id, now);
        Some(id)
    }

    fn birth_age(&mut self, lifespan: f64) -> Option<f64> {
        (0..BIRTH_AGE_ATTEMPTS)
            .map(|_| self.sampler.birth_age.sample(&mut self.rng))
            .find(|&b| b <= lifespan)
    }

    fn push(&mut self, time: f64, agent: u32, kind: Kind) {
        self.queue.push(Event { time, agent, kind });
    }

    /// Next interaction after `now` by thinning. The intensity never
    /// increases with age, so its current value bounds everything later.
    fn schedule_interaction(&mut self, id: u32, now: f64) {
        let a = &self.agents[id as usize];
        let (birth, death) = (a.birth, a.death);
        let mut t = now;
        let mut bound = a.rate_at(now - birth);
        if !(bound > 0.0) {
            return;
        }
        loop {
            t += self.rng.sample::<f64, _>(Exp1) / bound;
            if t >= death {
                return;
            }
            let rate = self.agents[id as usize].rate_at(t - birth);
            if self.rng.random::<f64>() * bound < rate {
                self.push(t, id, Kind::Interaction);
                return;
            }
            bound = rate;
        }
    }

    fn remove(&mut self, id: u32) {
        let pos = self.slot[id as usize];
        let last = *self.alive.last().expect("removing from a non-empty population");
        self.alive.swap_remove(pos);
        if last != id {
            self.slot[last as usize] = pos;
        }
        self.agents[id as usize].alive = false;
    }

    fn birth(&mut self, parent: u32, now: f64) {
        let n = self.alive.len() as f64;
        if n >= self.p.k {
            let ratio = self.p.k / (n * self.p.mu_k);
            let accept = match self.p.birth_rule {
                BirthRule::Stabilising => ratio,
                BirthRule::Unbounded => 1.0 - ratio,
            };
            if self.rng.random::<f64>() >= accept {
                self.counters.rejected_births += 1;
                return;
            }
        }
        let x = self.agents[parent as usize].x;
        let Some(child) = self.create(now, 0.0, x) else {
            return;
        };
        self.counters.births += 1;
        let inherited: Vec<u32> = self.agents[parent as usize]
            .interlocutors
            .iter()
            .copied()
            .filter(|&j| self.agents[j as usize].alive)
            .collect();
        let z = inherited.len() as f64;
        let keep = if z > 0.0 { (self.p.mu_i / z).min(1.0) } else { 0.0 };
        let mut set = vec![parent];
        for j in inherited {
            if self.rng.random::<f64>() < keep {
                set.push(j);
            }
        }
        set.sort_unstable();
        set.dedup();
        self.agents[child as usize].interlocutors = set;
    }

    /// Rebuild the interlocutor set of `id` from the whole population.
    fn expand(&mut self, id: u32) {
        let me = &self.agents[id as usize];
        let (birth, w0, h) = (me.birth, self.p.w0, self.p.h);
        let existing = me.interlocutors.clone();
        let weights: Vec<(u32, f64)> = self
            .alive
            .iter()
            .copied()
            .filter(|&j| j != id)
            .map(|j| {
                let w = if existing.binary_search(&j).is_ok() {
                    w0
                } else {
                    (-h * (self.agents[j as usize].birth - birth).abs()).exp()
                };
                (j, w)
            })
            .collect();
        let total: f64 = weights.iter().map(|&(_, w)| w).sum();
        let mut set = Vec::new();
        if total > 0.0 {
            for (j, w) in weights {
                if self.rng.random::<f64>() < (self.p.mu_i_prime * w / total).min(1.0) {
                    set.push(j);
                }
            }
        }
        set.sort_unstable();
        self.agents[id as usize].interlocutors = set;
    }

    fn interact(&mut self, id: u32) {
        let known = std::mem::take(&mut self.agents[id as usize].interlocutors);
        let live: Vec<u32> = known.into_iter().filter(|&j| self.agents[j as usize].alive).collect();
        if live.is_empty() {
            self.counters.isolated += 1;
            return;
        }
        // participants conditioned on at least one being present
        let y = loop {
            let (mut sum, mut count) = (0.0, 0usize);
            for &j in &live {
                if self.rng.random::<f64>() < self.p.q {
                    sum += self.agents[j as usize].x;
                    count += 1;
                }
            }
            if count > 0 {
                break sum / count as f64;
            }
        };
        let chi = self.agents[id as usize].chi;
        let p = ((1.0 + chi) * y / (1.0 + chi * y)).clamp(0.0, 1.0);
        let tau = if self.rng.random::<f64>() < p { 1.0 } else { 0.0 };
        let agent = &mut self.agents[id as usize];
        agent.x = ((1.0 - agent.eps) * agent.x + agent.eps * tau).clamp(0.0, 1.0);
        agent.interlocutors = live;
        self.counters.interactions += 1;
    }

    fn mean_x(&self) -> f64 {
        if self.alive.is_empty() {
            return 0.0;
        }
        self.alive.iter().map(|&i| self.agents[i as usize].x).sum::<f64>() / self.alive.len() as f64
    }
}

/// Population-mean innovation frequency sampled every `sample_interval`
/// years from `0` to `duration`.
///
/// The run starts from `K` agents of independent ages whose interlocutor
/// sets are built by the expansion rule; everyone starts at `initial_x`.
pub fn run_demo(params: &DemoParams, cfg: &DemoRunConfig) -> Result<DemoTrajectory> {
    if !(cfg.duration > 0.0) || !(cfg.sample_interval > 0.0) {
        return Err(Error::Config("duration and sample interval must be positive".into()));
    }
    if !(0.0..=1.0).contains(&cfg.initial_x) {
        return Err(Error::Config(format!(
            "initial x must lie in [0, 1], got {}",
            cfg.initial_x
        )));
    }
    let mut w = World {
        p: params,
        sampler: Sampler::new(params)?,
        rng: substream(cfg.seed, 0),
        agents: Vec::new(),
        alive: Vec::new(),
        slot: Vec::new(),
        queue: BinaryHeap::new(),
        counters: DemoCounters::default(),
    };
    let target = params.k.round().max(1.0) as usize;
    while w.alive.len() < target {
        let age = w.rng.random::<f64>() * params.mu_d;
        w.create(0.0, age, cfg.initial_x);
    }
    for id in w.alive.clone() {
        w.expand(id);
    }
    let n_samples = (cfg.duration / cfg.sample_interval).floor() as u64;
    for j in 0..=n_samples {
        w.push(j as f64 * cfg.sample_interval, 0, Kind::Sample);
    }
    let cap = (params.k * cfg.max_population_factor).ceil() as usize;
    let mut samples = Vec::with_capacity(n_samples as usize + 1);
    let mut overflow = false;
    while let Some(ev) = w.queue.pop() {
        if ev.time > cfg.duration {
            break;
        }
        match ev.kind {
            Kind::Sample => samples.push(DemoSample {
                time: ev.time,
                mean_x: w.mean_x(),
                population: w.alive.len(),
            }),
            Kind::Death => {
                let x = w.agents[ev.agent as usize].x;
                w.remove(ev.agent);
                w.counters.deaths += 1;
                if w.alive.is_empty() {
                    w.counters.restarts += 1;
                    while w.create(ev.time, 0.0, x).is_none() {}
                }
            }
            Kind::Birth => {
                if w.agents[ev.agent as usize].alive {
                    w.birth(ev.agent, ev.time);
                }
            }
            Kind::Expansion => {
                if w.agents[ev.agent as usize].alive {
                    w.expand(ev.agent);
                }
            }
            Kind::Interaction => {
                if w.agents[ev.agent as usize].alive {
                    w.interact(ev.agent);
                    w.schedule_interaction(ev.agent, ev.time);
                }
            }
        }
        if w.alive.len() > cap {
            overflow = true;
            break;
        }
    }
    let mut flags = Vec::new();
    if overflow {
        flags.push(format!("population exceeded {cap} agents; run stopped"));
    }
    if w.counters.restarts > 0 {
        flags.push(format!("population went extinct {} times", w.counters.restarts));
    }
    if w.counters.isolated > 0 {
        flags.push(format!(
            "{} interactions skipped for lack of live interlocutors",
            w.counters.isolated
        ));
    }
    if w.counters.dropped_offspring > 0 {
        flags.push(format!(
            "{} offspring dropped after birth-age resampling",
            w.counters.dropped_offspring
        ));
    }
    Ok(DemoTrajectory {
        samples,
        counters: w.counters,
        overflow,
        flags,
    })
}

/// Fewest increments a bin needs to enter the fits.
pub const MIN_BIN_COUNT: usize = 30;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MomentBin {
    pub x_lo: f64,
    pub x_hi: f64,
    /// Mean starting frequency of the increments in the bin.
    pub x: f64,
    pub count: usize,
    pub m1: f64,
    pub m2: f64,
    pub m1_se: f64,
    pub m2_se: f64,
}

/// Least-squares fit of `A x(1 − x)` to binned moments.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ParabolaFit {
    /// Amplitude per interval.
    pub amplitude: f64,
    pub amplitude_se: f64,
    pub r_squared: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JumpMoments {
    pub dt: f64,
    pub increments: usize,
    pub bins: Vec<MomentBin>,
    pub first: ParabolaFit,
    pub second: ParabolaFit,
    /// Amplitudes divided by `dt`: estimates of `s/T_M` and `1/(T_M Ne)`.
    pub a1_rate: f64,
    pub a2_rate: f64,
    pub dropped_bins: usize,
    pub flags: Vec<String>,
}

/// Bin the increments of each series over `dt` by starting frequency and fit
/// `A x(1 − x)` to the first and second moments.
///
/// Each series must be sampled on a regular grid whose spacing divides `dt`.
pub fn estimate_jump_moments(series: &[Vec<(f64, f64)>], dt: f64, n_bins: usize) -> Result<JumpMoments> {
    if !(dt > 0.0) || n_bins == 0 {
        return Err(Error::Config("dt and the bin count must be positive".into()));
    }
    let mut increments: Vec<(f64, f64)> = Vec::new();
    for s in series {
        if s.len() < 2 {
            continue;
        }
        let step = s[1].0 - s[0].0;
        let lag = (dt / step).round() as usize;
        if !(step > 0.0) || lag == 0 || ((lag as f64 * step) - dt).abs() > 1e-9 * dt {
            return Err(Error::Config(format!(
                "series spacing {step} does not divide dt = {dt}"
            )));
        }
        for i in 0..s.len().saturating_sub(lag) {
            increments.push((s[i].1, s[i + lag].1 - s[i].1));
        }
    }
    let width = 1.0 / n_bins as f64;
    let mut acc = vec![(0usize, 0.0, 0.0, 0.0, 0.0); n_bins];
    for &(x, d) in &increments {
        let b = ((x / width) as usize).min(n_bins - 1);
        let a = &mut acc[b];
        a.0 += 1;
        a.1 += x;
        a.2 += d;
        a.3 += d * d;
        a.4 += d * d * d * d;
    }
    let mut bins = Vec::new();
    let mut dropped = 0;
    for (b, &(n, sx, s1, s2, s4)) in acc.iter().enumerate() {
        if n == 0 {
            continue;
        }
        if n < MIN_BIN_COUNT {
            dropped += 1;
            continue;
        }
        let nf = n as f64;
        let (m1, m2) = (s1 / nf, s2 / nf);
        let var1 = (m2 - m1 * m1).max(0.0) * nf / (nf - 1.0);
        let var2 = (s4 / nf - m2 * m2).max(0.0) * nf / (nf - 1.0);
        bins.push(MomentBin {
            x_lo: b as f64 * width,
            x_hi: (b + 1) as f64 * width,
            x: sx / nf,
            count: n,
            m1,
            m2,
            m1_se: (var1 / nf).sqrt(),
            m2_se: (var2 / nf).sqrt(),
        });
    }
    let mut flags = Vec::new();
    if dropped > 0 {
        flags.push(format!(
            "{dropped} bins with fewer than {MIN_BIN_COUNT} increments dropped"
        ));
    }
    if bins.is_empty() {
        return Err(Error::Config("no bin has enough increments for a fit".into()));
    }
    let first = fit_parabola(&bins, |b| (b.m1, b.m1_se));
    let second = fit_parabola(&bins, |b| (b.m2, b.m2_se));
    Ok(JumpMoments {
        dt,
        increments: increments.len(),
        a1_rate: first.amplitude / dt,
        a2_rate: second.amplitude / dt,
        bins,
        first,
        second,
        dropped_bins: dropped,
        flags,
    })
}

/// Weighted (inverse variance) least squares for `y = A x(1 − x)`; R² is
/// computed with the same weights about the weighted mean.
fn fit_parabola(bins: &[MomentBin], moment: impl Fn(&MomentBin) -> (f64, f64)) -> ParabolaFit {
    let pts: Vec<(f64, f64, f64)> = bins
        .iter()
        .map(|b| {
            let (y, se) = moment(b);
            let w = if se > 0.0 { 1.0 / (se * se) } else { b.count as f64 };
            (b.x * (1.0 - b.x), y, w)
        })
        .collect();
    let sff: f64 = pts.iter().map(|&(f, _, w)| w * f * f).sum();
    let sfy: f64 = pts.iter().map(|&(f, y, w)| w * f * y).sum();
    let amplitude = if sff > 0.0 { sfy / sff } else { 0.0 };
    let sw: f64 = pts.iter().map(|&(_, _, w)| w).sum();
    let ybar = pts.iter().map(|&(_, y, w)| w * y).sum::<f64>() / sw;
    let ss_res: f64 = pts.iter().map(|&(f, y, w)| w * (y - amplitude * f).powi(2)).sum();
    let ss_tot: f64 = pts.iter().map(|&(_, y, w)| w * (y - ybar).powi(2)).sum();
    let r_squared = if ss_tot > 0.0 {
        1.0 - ss_res / ss_tot
    } else if ss_res == 0.0 {
        1.0
    } else {
        0.0
    };
    ParabolaFit {
        amplitude,
        amplitude_se: if sff > 0.0 { (1.0 / sff).sqrt() } else { f64::INFINITY },
        r_squared,
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct NaiveEstimates {
    /// Lifetime-averaged interaction rate (per year).
    pub r_bar: f64,
    pub eps_mean: f64,
    pub eps_sq_mean: f64,
    pub n_bar: f64,
    pub t_m: f64,
    pub s: f64,
    pub ne: f64,
    /// `s / T_M`.
    pub a1_rate: f64,
    /// `1 / (T_M Ne)`.
    pub a2_rate: f64,
}

/// `T_M = 1/(R̄ ε̄)`, `s = χ̄`, `Ne = N̄ ε̄ / mean(ε²)`, with `R̄` the total
/// expected interactions over `samples` sampled lifetimes divided by their
/// total length. `N̄` defaults to `K`.
pub fn naive_estimates(params: &DemoParams, n_bar: Option<f64>, samples: usize, seed: u64) -> Result<NaiveEstimates> {
    let sampler = Sampler::new(params)?;
    if samples == 0 {
        return Err(Error::Config("need at least one lifetime sample".into()));
    }
    let mut rng = substream(seed, 0);
    let (mut interactions, mut years) = (0.0, 0.0);
    for _ in 0..samples {
        let d = sampler.lifespan.sample(&mut rng);
        let (r0, r_inf, theta) = sampler.rates(&mut rng);
        interactions += integrated_rate(r0, r_inf, theta, d);
        years += d;
    }
    let r_bar = interactions / years;
    let eps_mean = params.mu_eps;
    let eps_sq_mean = params.mu_eps * params.mu_eps + params.sigma_eps * params.sigma_eps;
    let n_bar = n_bar.unwrap_or(params.k);
    let t_m = 1.0 / (r_bar * eps_mean);
    let ne = n_bar * eps_mean / eps_sq_mean;
    Ok(NaiveEstimates {
        r_bar,
        eps_mean,
        eps_sq_mean,
        n_bar,
        t_m,
        s: params.mu_chi,
        ne,
        a1_rate: params.mu_chi / t_m,
        a2_rate: 1.0 / (t_m * ne),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct JumpExperiment {
    /// Initial frequencies; each gets `replicates` independent runs.
    pub starts: Vec<f64>,
    pub replicates: usize,
    pub duration: f64,
    /// Initial stretch of each run left out of the increments.
    pub burn_in: f64,
    pub dt: f64,
    pub bins: usize,
    pub seed: u64,
}

impl Default for JumpExperiment {
    fn default() -> Self {
        Self {
            starts: (1..10).map(|i| i as f64 / 10.0).collect(),
            replicates: 12,
            duration: 2100.0,
            burn_in: 100.0,
            dt: 10.0,
            bins: 20,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JumpReport {
    pub params: DemoParams,
    pub experiment: JumpExperiment,
    pub moments: JumpMoments,
    pub naive: NaiveEstimates,
    pub mean_population: f64,
    pub counters: DemoCounters,
    pub flags: Vec<String>,
}

/// Replicated demo runs, their jump moments, and the naive parameter
/// estimates with `N̄` taken from the simulated population.
pub fn jump_moment_experiment(params: &DemoParams, exp: &JumpExperiment) -> Result<JumpReport> {
    if exp.starts.is_empty() || exp.replicates == 0 || !(exp.duration > exp.burn_in) {
        return Err(Error::Config(
            "need start frequencies, replicates and a duration beyond the burn-in".into(),
        ));
    }
    let jobs: Vec<(usize, f64)> = exp
        .starts
        .iter()
        .enumerate()
        .flat_map(|(i, &x)| (0..exp.replicates).map(move |r| (i * exp.replicates + r, x)))
        .collect();
    let runs: Vec<DemoTrajectory> = jobs
        .par_iter()
        .map(|&(job, x)| {
            let mut cfg = DemoRunConfig::new(exp.duration, x, mix(exp.seed, job as u64));
            cfg.sample_interval = exp.dt;
            run_demo(params, &cfg)
        })
        .collect::<Result<_>>()?;
    let mut counters = DemoCounters::default();
    let mut flags = Vec::new();
    let (mut pop_sum, mut pop_n) = (0.0, 0usize);
    let series: Vec<Vec<(f64, f64)>> = runs
        .iter()
        .map(|run| {
            let c = &run.counters;
            counters.births += c.births;
            counters.rejected_births += c.rejected_births;
            counters.deaths += c.deaths;
            counters.interactions += c.interactions;
            counters.isolated += c.isolated;
            counters.dropped_offspring += c.dropped_offspring;
            counters.restarts += c.restarts;
            let kept: Vec<(f64, f64)> = run
                .samples
                .iter()
                .filter(|s| s.time >= exp.burn_in)
                .map(|s| {
                    pop_sum += s.population as f64;
                    pop_n += 1;
                    (s.time, s.mean_x)
                })
                .collect();
            kept
        })
        .collect();
    let overflowed = runs.iter().filter(|r| r.overflow).count();
    if overflowed > 0 {
        flags.push(format!("{overflowed} runs stopped at the population cap"));
    }
    let moments = estimate_jump_moments(&series, exp.dt, exp.bins)?;
    flags.extend(moments.flags.iter().cloned());
    let mean_population = if pop_n > 0 { pop_sum / pop_n as f64 } else { f64::NAN };
    let naive = naive_estimates(params, Some(mean_population), 200_000, mix(exp.seed, u64::MAX))?;
    Ok(JumpReport {
        params: params.clone(),
        experiment: exp.clone(),
        moments,
        naive,
        mean_population,
        counters,
        flags,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid_and_complete() {
        let p = DemoParams::default();
        p.validate().unwrap();
        assert_eq!(p.k, 1000.0);
        assert_eq!(p.sigma_eps, 0.15);
    }

    #[test]
    fn epsilon_moments_give_ten_thirds() {
        let p = DemoParams::default();
        let est = naive_estimates(&p, Some(1000.0), 10, 1).unwrap();
        assert!((est.eps_mean / est.eps_sq_mean - 10.0 / 3.0).abs() < 1e-12);
        assert!((est.ne - 1000.0 * 10.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn constant_rate_limit() {
        let p = DemoParams {
            sigma_rate: 0.0,
            mu_decrease: 0.0,
            sigma_decrease: 0.0,
            sigma_theta: 0.0,
            ..DemoParams::default()
        };
        let est = naive_estimates(&p, None, 1000, 3).unwrap();
        assert!((est.r_bar - p.mu_rate).abs() < 1e-12);
    }

    #[test]
    fn integrated_rate_limits() {
        assert!((integrated_rate(2.0, 2.0, 5.0, 3.0) - 6.0).abs() < 1e-12);
        // long-lived: slope R_∞ plus the transient excess (R_0 − R_∞)θ
        let big = integrated_rate(1.0, 0.1, 10.0, 1000.0);
        assert!((big - (100.0 + 9.0)).abs() < 1e-9);
    }

    #[test]
    fn event_order_breaks_ties() {
        let mut q = BinaryHeap::new();
        q.push(Event {
            time: 1.0,
            agent: 2,
            kind: Kind::Death,
        });
        q.push(Event {
            time: 1.0,
            agent: 1,
            kind: Kind::Interaction,
        });
        q.push(Event {
            time: 1.0,
            agent: 1,
            kind: Kind::Death,
        });
        q.push(Event {
            time: 0.5,
            agent: 9,
            kind: Kind::Birth,
        });
        let order: Vec<(u32, Kind)> = std::iter::from_fn(|| q.pop()).map(|e| (e.agent, e.kind)).collect();
        assert_eq!(
            order,
            vec![
                (9, Kind::Birth),
                (1, Kind::Death),
                (1, Kind::Interaction),
                (2, Kind::Death)
            ]
        );
    }

    #[test]
    fn constant_series_has_zero_moments() {
        let flat: Vec<Vec<(f64, f64)>> = (0..5)
            .map(|k| (0..200).map(|i| (i as f64, 0.1 + 0.2 * k as f64)).collect())
            .collect();
        let jm = estimate_jump_moments(&flat, 10.0, 10).unwrap();
        assert_eq!(jm.first.amplitude, 0.0);
        assert_eq!(jm.second.amplitude, 0.0);
    }
}
