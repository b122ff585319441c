//! Command-line front end.
//!
//! Settings come from an optional TOML file (`--config`) and are then
//! overridden by flags. Every JSON output embeds the resolved settings and
//! seed; the worker count is deliberately left out so that outputs do not
//! depend on it.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::abm::{
    bias_configurations, jump_moment_experiment, run_demo, DemoParams, DemoRunConfig, JumpExperiment, JumpReport,
};
use crate::data::{
    changes_count, default_data_dir, format_sig3, load_regions, rate_estimate, Article, Dataset, DATA_DIR_ENV,
};
use crate::demography::{
    fit_population_model, language_mean_size_from_weight, DemographyFit, DEFAULT_REFERENCE_REGION,
};
use crate::inference::{
    evaluate_scenario, fit_poisson_baseline, monte_carlo_gof, scenario_params, sweep, FitReport, GofResult,
    ScenarioSpec, SweepRow,
};
use crate::likelihood::{InversionConfig, OriginFixationParams};
use crate::numeric::stats::quantile;
use crate::output::{envelope, num, opt_num, OutputDir, Table};
use crate::wf_sim::{
    change_probability_curve, fixation_time_distribution, interference_experiment, InterferenceConfig, SimConfig,
};
use crate::{Error, Result};

const HOUR: f64 = 1.0 / 8766.0;
const MINUTE: f64 = HOUR / 60.0;

#[derive(Debug, Parser)]
#[command(
    name = "langchange",
    version,
    about = "Origin-fixation analysis of article grammaticalisation cycles"
)]
pub struct Cli {
    /// TOML file with settings; flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Directory holding histories.tsv, wals.tsv and demography_fit.json.
    #[arg(long, global = true, env = DATA_DIR_ENV)]
    pub data_dir: Option<PathBuf>,
    /// Directory for result files.
    #[arg(long, short, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (results do not depend on this).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Significant digits requested from the Laplace inversion.
    #[arg(long, global = true)]
    pub digits: Option<u32>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit region weights and the growth curve to population records.
    FitDemography(FitDemographyArgs),
    /// Fit the constant-rate Poisson model and test its goodness of fit.
    Baseline(BaselineArgs),
    /// Evaluate a grid of individual-level scenarios against the baseline.
    Sweep(SweepArgs),
    /// Monte Carlo goodness of fit of a fitted model.
    Gof(GofArgs),
    /// Run the individual-based simulations.
    Simulate(SimulateArgs),
    /// Per-language change counts and rate estimates.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct FitDemographyArgs {
    /// Tab-delimited region, year, population records.
    #[arg(long)]
    pub regions: Option<PathBuf>,
    #[arg(long)]
    pub reference_region: Option<String>,
}

#[derive(Debug, Args)]
pub struct BaselineArgs {
    #[arg(long)]
    pub article: Option<Article>,
    /// Simulated datasets for the goodness of fit (0 skips it).
    #[arg(long)]
    pub gof_sims: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepModel {
    Child,
    Usage,
    Network,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long, value_enum)]
    pub model: Option<SweepModel>,
    #[arg(long)]
    pub article: Option<Article>,
    /// Largest selection strength in the grid; `inf` adds the instant-fixation row.
    #[arg(long)]
    pub s_max: Option<f64>,
    /// AICc parameter count for scenario fits.
    #[arg(long)]
    pub k: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GofModel {
    Baseline,
    Child,
}

#[derive(Debug, Args)]
pub struct GofArgs {
    #[arg(long)]
    pub article: Option<Article>,
    #[arg(long, value_enum)]
    pub model: Option<GofModel>,
    /// Selection strength of the child scenario (`inf` allowed).
    #[arg(long)]
    pub s: Option<f64>,
    #[arg(long)]
    pub n_sim: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(subcommand)]
    pub target: SimTarget,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WfPreset {
    /// Conditional fixation times, N = 100, s = 0.
    NeutralTimes,
    /// Conditional fixation times, N = 150, s = 0.01.
    SelectedTimes,
    /// Probability that the first of two innovations fixes.
    Interference,
    /// Probability that a change has completed by time t, N = 100, η = 1e-3.
    ChangeCurve,
}

#[derive(Debug, Subcommand)]
pub enum SimTarget {
    /// Wright-Fisher model.
    Wf(WfArgs),
    /// Demonstration agent-based model.
    Abm(AbmArgs),
}

#[derive(Debug, Args)]
pub struct WfArgs {
    #[arg(long, value_enum)]
    pub preset: Option<WfPreset>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub s: Option<f64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long)]
    pub runs: Option<u64>,
    #[arg(long)]
    pub bins: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BiasCase {
    I,
    Ii,
    Iii,
}

impl BiasCase {
    fn index(self) -> usize {
        match self {
            BiasCase::I => 0,
            BiasCase::Ii => 1,
            BiasCase::Iii => 2,
        }
    }

    fn name(self) -> &'static str {
        match self {
            BiasCase::I => "i",
            BiasCase::Ii => "ii",
            BiasCase::Iii => "iii",
        }
    }
}

#[derive(Debug, Args)]
pub struct AbmArgs {
    /// Bias configurations for the jump moments (default: all three).
    #[arg(long, value_enum)]
    pub bias: Vec<BiasCase>,
    /// Length of the single recorded trajectory (years).
    #[arg(long)]
    pub duration: Option<f64>,
    #[arg(long)]
    pub initial_x: Option<f64>,
    #[arg(long)]
    pub replicates: Option<usize>,
    /// Only record the single trajectory.
    #[arg(long)]
    pub trajectory_only: bool,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long)]
    pub article: Option<Article>,
    /// Histogram bin width in changes per 1000 years.
    #[arg(long)]
    pub bin_width: Option<f64>,
}

/// Every setting a command can use.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub data_dir: Option<PathBuf>,
    /// Where results go; never written to outputs.
    #[serde(skip_serializing)]
    pub out_dir: PathBuf,
    pub seed: u64,
    pub precision_digits: u32,
    pub articles: Vec<Article>,
    /// Worker threads; never written to outputs.
    #[serde(skip_serializing)]
    pub jobs: Option<usize>,
    pub demography: DemographySection,
    pub baseline: BaselineSection,
    pub gof: GofSection,
    pub sweep: SweepSection,
    pub wf: WfSection,
    pub abm: AbmSection,
    pub report: ReportSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            data_dir: None,
            out_dir: PathBuf::from("out"),
            seed: 1,
            precision_digits: InversionConfig::default().precision_digits,
            articles: Article::ALL.to_vec(),
            jobs: None,
            demography: DemographySection::default(),
            baseline: BaselineSection::default(),
            gof: GofSection::default(),
            sweep: SweepSection::default(),
            wf: WfSection::default(),
            abm: AbmSection::default(),
            report: ReportSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DemographySection {
    pub regions: Option<PathBuf>,
    pub reference_region: String,
    /// Fit used for language sizes (default: `demography_fit.json` in the data directory).
    pub fit: Option<PathBuf>,
}

impl Default for DemographySection {
    fn default() -> Self {
        Self {
            regions: None,
            reference_region: DEFAULT_REFERENCE_REGION.into(),
            fit: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineSection {
    pub gof_sims: usize,
}

impl Default for BaselineSection {
    fn default() -> Self {
        Self { gof_sims: 100_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GofSection {
    pub model: GofModel,
    #[serde(with = "crate::inference::f64_or_inf")]
    pub s: f64,
    pub n_sim: usize,
}

impl Default for GofSection {
    fn default() -> Self {
        Self {
            model: GofModel::Baseline,
            s: f64::INFINITY,
            n_sim: 1_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub model: SweepModel,
    /// Upper end of the selection grid; infinite adds the instant-fixation row.
    #[serde(with = "crate::inference::f64_or_inf")]
    pub s_max: f64,
    pub k: usize,
    /// Selection strengths for child and network sweeps.
    pub s_values: Vec<f64>,
    /// Selection strengths for usage sweeps.
    pub usage_s: Vec<f64>,
    /// Memory times (years) for usage sweeps, one curve each.
    pub usage_t_m: Vec<f64>,
    /// Interaction rates (per year) along each usage curve.
    pub usage_r: Vec<f64>,
    /// Degree exponents for child learners on networks.
    pub network_nu: Vec<f64>,
    /// Interaction rates for the network memory-time curves (ν = 1.2, ε = 1).
    pub network_r: Vec<f64>,
    /// Explicit scenarios; when non-empty they replace the generated grid.
    pub custom: Vec<ScenarioSpec>,
}

fn log_grid(lo: f64, hi: f64, per_decade: usize) -> Vec<f64> {
    let (a, b) = (lo.log10(), hi.log10());
    let n = ((b - a) * per_decade as f64).round() as usize;
    (0..=n).map(|i| 10f64.powf(a + (b - a) * i as f64 / n as f64)).collect()
}

impl Default for SweepSection {
    fn default() -> Self {
        let mut s_values: Vec<f64> = [-0.1, -0.03, -0.01, -0.003, -0.001].to_vec();
        s_values.extend(log_grid(1e-3, 1e3, 4));
        Self {
            model: SweepModel::Child,
            s_max: f64::INFINITY,
            k: crate::inference::DEFAULT_SCENARIO_K,
            s_values,
            usage_s: vec![0.0],
            usage_t_m: vec![25.0, 1.0, 1.0 / 12.0, 1.0 / 365.25, HOUR, MINUTE],
            usage_r: log_grid(0.04, 4e6, 2),
            network_nu: vec![1.2, 1.5, 2.0, 2.5],
            network_r: vec![1.0, 12.0, 365.25, 8766.0],
            custom: Vec::new(),
        }
    }
}

impl SweepSection {
    /// Scenario grid for the selected model.
    pub fn grid(&self) -> Vec<ScenarioSpec> {
        let with_k = |mut spec: ScenarioSpec| {
            spec.k = self.k;
            spec
        };
        if !self.custom.is_empty() {
            return self.custom.iter().copied().map(with_k).collect();
        }
        let mut s: Vec<f64> = self.s_values.iter().copied().filter(|&v| v <= self.s_max).collect();
        if self.s_max == f64::INFINITY {
            s.push(f64::INFINITY);
        }
        let grid: Vec<ScenarioSpec> = match self.model {
            SweepModel::Child => s.iter().map(|&v| ScenarioSpec::child(v)).collect(),
            SweepModel::Usage => self
                .usage_t_m
                .iter()
                .flat_map(|&t_m| {
                    self.usage_s
                        .iter()
                        .flat_map(move |&sv| self.usage_r.iter().map(move |&r| ScenarioSpec::usage(sv, r, t_m)))
                })
                .collect(),
            SweepModel::Network => {
                let positive: Vec<f64> = s.iter().copied().filter(|&v| v > 0.0).collect();
                let mut g: Vec<ScenarioSpec> = self
                    .network_nu
                    .iter()
                    .flat_map(|&nu| {
                        positive
                            .iter()
                            .map(move |&sv| ScenarioSpec::network(sv, nu, crate::inference::CHILD_RATE, 1.0))
                    })
                    .collect();
                g.extend(
                    self.network_r
                        .iter()
                        .flat_map(|&r| positive.iter().map(move |&sv| ScenarioSpec::network(sv, 1.2, r, 1.0))),
                );
                g
            }
        };
        grid.into_iter().map(with_k).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WfSection {
    pub preset: WfPreset,
    pub sim: SimConfig,
    pub runs: u64,
    pub bins: usize,
    pub interference: InterferenceConfig,
    /// Times (years) at which the change-probability curve is reported.
    pub curve_times: Vec<f64>,
}

impl Default for WfSection {
    fn default() -> Self {
        Self {
            preset: WfPreset::NeutralTimes,
            sim: SimConfig::default(),
            runs: 1_000_000,
            bins: 50,
            interference: InterferenceConfig::default(),
            curve_times: (0..=20).map(|i| i as f64 * 250.0).collect(),
        }
    }
}

impl WfSection {
    /// Apply a preset's population settings, keeping the seed.
    fn apply_preset(&mut self, preset: WfPreset) {
        self.preset = preset;
        let seed = self.sim.seed;
        match preset {
            WfPreset::NeutralTimes => {
                self.sim = SimConfig::new(100, 1.0, 0.0, 1.0);
                self.runs = 1_000_000;
            }
            WfPreset::SelectedTimes => {
                self.sim = SimConfig::new(150, 1.0, 0.01, 1.0);
                self.runs = 500_000;
            }
            WfPreset::Interference => {}
            WfPreset::ChangeCurve => {
                self.sim = SimConfig::new(100, 1.0, 0.0, 1.0);
                self.sim.eta = 1e-3;
                self.runs = 20_000;
            }
        }
        self.sim.seed = seed;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AbmSection {
    pub params: DemoParams,
    pub duration: f64,
    pub initial_x: f64,
    pub sample_interval: f64,
    pub experiment: JumpExperiment,
    pub bias: Vec<BiasCase>,
    pub trajectory_only: bool,
}

impl Default for AbmSection {
    fn default() -> Self {
        Self {
            params: DemoParams::default(),
            duration: 2000.0,
            initial_x: 0.5,
            sample_interval: 10.0,
            experiment: JumpExperiment::default(),
            bias: vec![BiasCase::I, BiasCase::Ii, BiasCase::Iii],
            trajectory_only: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportSection {
    pub bin_width: f64,
}

impl Default for ReportSection {
    fn default() -> Self {
        Self { bin_width: 0.5 }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn data_dir(&self) -> PathBuf {
        self.data_dir.clone().unwrap_or_else(default_data_dir)
    }

    fn inversion(&self) -> Result<InversionConfig> {
        let d = self.precision_digits;
        InversionConfig::new(d, InversionConfig::required_nodes(d))
    }

    /// Merge the global flags and the command's own flags.
    pub fn apply(&mut self, cli: &Cli) {
        if let Some(d) = &cli.data_dir {
            self.data_dir = Some(d.clone());
        }
        if let Some(o) = &cli.out {
            self.out_dir = o.clone();
        }
        if let Some(s) = cli.seed {
            self.seed = s;
        }
        if let Some(j) = cli.jobs {
            self.jobs = Some(j);
        }
        if let Some(d) = cli.digits {
            self.precision_digits = d;
        }
        let article = |a: Option<Article>, articles: &mut Vec<Article>| {
            if let Some(a) = a {
                *articles = vec![a];
            }
        };
        match &cli.command {
            Command::FitDemography(a) => {
                if let Some(r) = &a.regions {
                    self.demography.regions = Some(r.clone());
                }
                if let Some(r) = &a.reference_region {
                    self.demography.reference_region = r.clone();
                }
            }
            Command::Baseline(a) => {
                article(a.article, &mut self.articles);
                if let Some(n) = a.gof_sims {
                    self.baseline.gof_sims = n;
                }
            }
            Command::Sweep(a) => {
                article(a.article, &mut self.articles);
                if let Some(m) = a.model {
                    self.sweep.model = m;
                }
                if let Some(s) = a.s_max {
                    self.sweep.s_max = s;
                }
                if let Some(k) = a.k {
                    self.sweep.k = k;
                }
            }
            Command::Gof(a) => {
                article(a.article, &mut self.articles);
                if let Some(m) = a.model {
                    self.gof.model = m;
                }
                if let Some(s) = a.s {
                    self.gof.s = s;
                }
                if let Some(n) = a.n_sim {
                    self.gof.n_sim = n;
                }
            }
            Command::Simulate(SimulateArgs {
                target: SimTarget::Wf(a),
            }) => {
                self.wf.sim.seed = self.seed;
                self.wf.interference.seed = self.seed;
                if let Some(p) = a.preset {
                    self.wf.apply_preset(p);
                }
                if let Some(n) = a.n {
                    self.wf.sim.n = n;
                    self.wf.interference.n = n;
                }
                if let Some(s) = a.s {
                    self.wf.sim.s = s;
                    self.wf.interference.s = s;
                }
                if let Some(e) = a.epsilon {
                    self.wf.sim.epsilon = e;
                }
                if let Some(e) = a.eta {
                    self.wf.sim.eta = e;
                }
                if let Some(r) = a.runs {
                    self.wf.runs = r;
                    self.wf.interference.n_runs = r;
                }
                if let Some(b) = a.bins {
                    self.wf.bins = b;
                }
            }
            Command::Simulate(SimulateArgs {
                target: SimTarget::Abm(a),
            }) => {
                self.abm.experiment.seed = self.seed;
                if !a.bias.is_empty() {
                    self.abm.bias = a.bias.clone();
                }
                if let Some(d) = a.duration {
                    self.abm.duration = d;
                }
                if let Some(x) = a.initial_x {
                    self.abm.initial_x = x;
                }
                if let Some(r) = a.replicates {
                    self.abm.experiment.replicates = r;
                }
                if a.trajectory_only {
                    self.abm.trajectory_only = true;
                }
            }
            Command::Report(a) => {
                article(a.article, &mut self.articles);
                if let Some(w) = a.bin_width {
                    self.report.bin_width = w;
                }
            }
        }
    }
}

/// Parse flags, resolve settings, run the command. Returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(&cli) {
        Ok(paths) => {
            for p in paths {
                println!("wrote {}", p.display());
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Resolve the configuration and execute the command.
pub fn run(cli: &Cli) -> Result<Vec<PathBuf>> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    cfg.apply(cli);
    if let Some(j) = cfg.jobs {
        // a pool already built (e.g. in tests) is fine to keep
        let _ = rayon::ThreadPoolBuilder::new().num_threads(j.max(1)).build_global();
    }
    let mut out = OutputDir::new(cfg.out_dir.clone());
    match &cli.command {
        Command::FitDemography(_) => cmd_fit_demography(&cfg, &mut out)?,
        Command::Baseline(_) => cmd_baseline(&cfg, &mut out)?,
        Command::Sweep(_) => cmd_sweep(&cfg, &mut out)?,
        Command::Gof(_) => cmd_gof(&cfg, &mut out)?,
        Command::Simulate(SimulateArgs {
            target: SimTarget::Wf(_),
        }) => cmd_simulate_wf(&cfg, &mut out)?,
        Command::Simulate(SimulateArgs {
            target: SimTarget::Abm(_),
        }) => cmd_simulate_abm(&cfg, &mut out)?,
        Command::Report(_) => cmd_report(&cfg, &mut out)?,
    }
    Ok(out.written().to_vec())
}

struct Loaded {
    data: Dataset,
    sizes: Vec<f64>,
}

fn load_data(cfg: &RunConfig, need_sizes: bool) -> Result<Loaded> {
    let dir = cfg.data_dir();
    let data = Dataset::load_dir(&dir)?;
    let sizes = if need_sizes {
        let fit_path = cfg
            .demography
            .fit
            .clone()
            .unwrap_or_else(|| dir.join("demography_fit.json"));
        let fit = DemographyFit::load(&fit_path)?;
        data.histories
            .iter()
            .map(|h| language_mean_size_from_weight(h, &fit))
            .collect::<Result<_>>()?
    } else {
        Vec::new()
    };
    Ok(Loaded { data, sizes })
}

pub fn cmd_fit_demography(cfg: &RunConfig, out: &mut OutputDir) -> Result<()> {
    let path = cfg
        .demography
        .regions
        .clone()
        .unwrap_or_else(|| cfg.data_dir().join("regions.tsv"));
    let records = load_regions(&path)?;
    let (fit, residuals) = fit_population_model(&records, &cfg.demography.reference_region)?;
    println!(
        "N0 = {}, R² = {}, residual range [{}, {}], reference region {}",
        format_sig3(fit.n0),
        format_sig3(fit.r_squared),
        format_sig3(fit.residual_quantiles[0]),
        format_sig3(fit.residual_quantiles[1]),
        fit.reference_region
    );
    out.json("demography_fit.json", &envelope("fit-demography", cfg.seed, cfg, &fit))?;
    let mut t = Table::new(&["region", "year", "observed", "fitted", "residual"]);
    for r in &residuals {
        t.push(vec![
            r.region.clone(),
            num(r.year),
            num(r.observed),
            num(r.fitted),
            num(r.residual),
        ]);
    }
    out.csv("demography_residuals.csv", &t)?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct BaselineOutput {
    report: FitReport,
    gof: Option<GofResult>,
}

pub fn cmd_baseline(cfg: &RunConfig, out: &mut OutputDir) -> Result<()> {
    let Loaded { data, .. } = load_data(cfg, false)?;
    let inv = cfg.inversion()?;
    let mut results = Vec::new();
    for &article in &cfg.articles {
        let dist = data.wals.get(article);
        let mut report = fit_poisson_baseline(&data.histories, article, dist, &inv)?;
        let gof = if cfg.baseline.gof_sims > 0 {
            let params = vec![OriginFixationParams::poisson(report.mle_value, dist); data.histories.len()];
            let g = monte_carlo_gof(&data.histories, article, &params, cfg.baseline.gof_sims, cfg.seed, &inv)?;
            report.p_value = Some(g.p_value);
            report.overdispersion_changes = Some(g.overdispersion_changes);
            Some(g)
        } else {
            None
        };
        println!(
            "{article}: omega_bar = {} /yr, lnL = {}, AICc = {}, p = {}, O_changes = {}, O_binary = {}",
            format_sig3(report.mle_value),
            format_sig3(report.log_likelihood),
            format_sig3(report.aicc),
            report.p_value.map(format_sig3).unwrap_or_else(|| "-".into()),
            report
                .overdispersion_changes
                .map(format_sig3)
                .unwrap_or_else(|| "-".into()),
            report
                .overdispersion_binary
                .map(format_sig3)
                .unwrap_or_else(|| "-".into()),
        );
        results.push(BaselineOutput { report, gof });
    }
    out.json("fit_report.json", &envelope("baseline", cfg.seed, cfg, &results))?;
    Ok(())
}

pub fn cmd_sweep(cfg: &RunConfig, out: &mut OutputDir) -> Result<()> {
    let Loaded { data, sizes } = load_data(cfg, true)?;
    let inv = cfg.inversion()?;
    let grid = cfg.sweep.grid();
    if grid.is_empty() {
        return Err(Error::Config("the sweep grid is empty".into()));
    }
    let model = match cfg.sweep.model {
        SweepModel::Child => "child",
        SweepModel::Usage => "usage",
        SweepModel::Network => "network",
    };
    for &article in &cfg.articles {
        let dist = data.wals.get(article);
        let base = fit_poisson_baseline(&data.histories, article, dist, &inv)?;
        let rows = sweep(
            &data.histories,
            article,
            &grid,
            &sizes,
            dist,
            Some(&base),
            &inv,
            cfg.seed,
        );
        let mut t = Table::new(&[
            "index",
            "model",
            "s",
            "r",
            "epsilon",
            "t_m",
            "nu",
            "k",
            "eta_bar",
            "log_likelihood",
            "aicc",
            "delta_aicc",
            "overdispersion_binary",
            "at_boundary",
            "unphysical",
            "flags",
            "error",
        ]);
        for row in &rows {
            t.push(sweep_row(row));
        }
        if let Some(best) = rows
            .iter()
            .filter_map(|r| r.report.as_ref())
            .min_by(|a, b| a.aicc.total_cmp(&b.aicc))
        {
            println!(
                "{article}: {} scenarios, best ΔAICc = {} at s = {}",
                rows.len(),
                format_sig3(best.delta_aicc.unwrap_or(f64::NAN)),
                best.scenario.map(|s| num(s.s)).unwrap_or_default()
            );
        }
        let failed = rows.iter().filter(|r| r.error.is_some()).count();
        if failed > 0 {
            eprintln!("{article}: {failed} scenarios failed; see the error column");
        }
        out.csv(&format!("sweep_{model}_{article}.csv"), &t)?;
        #[derive(Serialize)]
        struct SweepOutput<'a> {
            baseline: &'a FitReport,
            rows: &'a [SweepRow],
        }
        out.json(
            &format!("sweep_{model}_{article}.json"),
            &envelope(
                "sweep",
                cfg.seed,
                cfg,
                &SweepOutput {
                    baseline: &base,
                    rows: &rows,
                },
            ),
        )?;
    }
    Ok(())
}

fn sweep_row(row: &SweepRow) -> Vec<String> {
    let spec = &row.spec;
    let nu = match spec.network {
        crate::inference::Network::Homogeneous => String::new(),
        crate::inference::Network::PowerLaw { nu, .. } => num(nu),
    };
    let r = row.report.as_ref();
    vec![
        row.index.to_string(),
        spec.model.as_str().to_string(),
        num(spec.s),
        num(spec.r),
        num(spec.epsilon),
        num(spec.t_m()),
        nu,
        spec.k.to_string(),
        opt_num(r.map(|r| r.mle_value)),
        opt_num(r.map(|r| r.log_likelihood)),
        opt_num(r.map(|r| r.aicc)),
        opt_num(r.and_then(|r| r.delta_aicc)),
        opt_num(r.and_then(|r| r.overdispersion_binary)),
        r.map(|r| r.at_boundary.to_string()).unwrap_or_default(),
        (spec.epsilon > 1.0).to_string(),
        r.map(|r| r.flags.join("; ")).unwrap_or_default(),
        row.error.clone().unwrap_or_default(),
    ]
}

pub fn cmd_gof(cfg: &RunConfig, out: &mut OutputDir) -> Result<()> {
    let need_sizes = cfg.gof.model == GofModel::Child;
    let Loaded { data, sizes } = load_data(cfg, need_sizes)?;
    let inv = cfg.inversion()?;
    for &article in &cfg.articles {
        let dist = data.wals.get(article);
        let base = fit_poisson_baseline(&data.histories, article, dist, &inv)?;
        let (report, params) = match cfg.gof.model {
            GofModel::Baseline => {
                let params = vec![OriginFixationParams::poisson(base.mle_value, dist); data.histories.len()];
                (base, params)
            }
            GofModel::Child => {
                let spec = ScenarioSpec::child(cfg.gof.s);
                let report = evaluate_scenario(
                    &data.histories,
                    article,
                    &spec,
                    &sizes,
                    dist,
                    Some(&base),
                    &inv,
                    cfg.seed,
                )?;
                let params = scenario_params(&spec, report.mle_value, &sizes, dist, cfg.seed)?;
                (report, params)
            }
        };
        let gof = monte_carlo_gof(&data.histories, article, &params, cfg.gof.n_sim, cfg.seed, &inv)?;
        println!(
            "{article} ({}): p = {}, O_changes = {}, O_binary = {}",
            report.model,
            format_sig3(gof.p_value),
            format_sig3(gof.overdispersion_changes),
            format_sig3(gof.overdispersion_binary)
        );
        #[derive(Serialize)]
        struct GofOutput<'a> {
            report: &'a FitReport,
            gof: &'a GofResult,
        }
        out.json(
            &format!("gof_{article}.json"),
            &envelope(
                "gof",
                cfg.seed,
                cfg,
                &GofOutput {
                    report: &report,
                    gof: &gof,
                },
            ),
        )?;
    }
    Ok(())
}

pub fn cmd_simulate_wf(cfg: &RunConfig, out: &mut OutputDir) -> Result<()> {
    let wf = &cfg.wf;
    match wf.preset {
        WfPreset::NeutralTimes | WfPreset::SelectedTimes => {
            let report = fixation_time_distribution(&wf.sim, wf.runs, wf.bins)?;
            println!(
                "{} fixations in {} runs (Q = {}); mean {} vs {}, variance {} vs {}",
                report.fixations,
                report.runs,
                format_sig3(report.q_expected),
                format_sig3(report.mean),
                format_sig3(report.diffusion.mean),
                format_sig3(report.variance),
                format_sig3(report.diffusion.variance)
            );
            for f in &report.flags {
                eprintln!("warning: {f}");
            }
            let mut t = Table::new(&["bin", "lo", "hi", "count", "density", "gamma_density"]);
            for (i, b) in report.histogram.iter().enumerate() {
                t.push(vec![
                    i.to_string(),
                    num(b.lo),
                    num(b.hi),
                    b.count.to_string(),
                    num(b.density),
                    num(b.gamma_density),
                ]);
            }
            out.csv("fixation_hist.csv", &t)?;
            out.json("wf_fixation.json", &envelope("simulate wf", cfg.seed, cfg, &report))?;
        }
        WfPreset::Interference => {
            let report = interference_experiment(&wf.interference)?;
            let mut t = Table::new(&["I", "P", "stderr", "exp_minus_I", "omega", "eta2", "fixes", "runs"]);
            for p in &report.points {
                t.push(vec![
                    num(p.i),
                    num(p.p),
                    num(p.stderr),
                    num(p.exponential),
                    num(p.omega),
                    num(p.eta2),
                    p.fixes.to_string(),
                    p.runs.to_string(),
                ]);
            }
            println!(
                "interference: monotone = {}, largest |P - exp(-I)| = {}",
                report.monotone,
                format_sig3(report.max_deviation)
            );
            out.csv("interference.csv", &t)?;
            out.json("interference.json", &envelope("simulate wf", cfg.seed, cfg, &report))?;
        }
        WfPreset::ChangeCurve => {
            let curve = change_probability_curve(&wf.sim, wf.runs, &wf.curve_times)?;
            let mut t = Table::new(&["time", "simulated", "stderr", "origin_fixation", "poisson"]);
            for p in &curve {
                t.push(vec![
                    num(p.time),
                    num(p.simulated),
                    num(p.stderr),
                    num(p.origin_fixation),
                    num(p.poisson),
                ]);
            }
            out.csv("change_curve.csv", &t)?;
            out.json("change_curve.json", &envelope("simulate wf", cfg.seed, cfg, &curve))?;
        }
    }
    Ok(())
}

pub fn cmd_simulate_abm(cfg: &RunConfig, out: &mut OutputDir) -> Result<()> {
    let abm = &cfg.abm;
    let mut run_cfg = DemoRunConfig::new(abm.duration, abm.initial_x, cfg.seed);
    run_cfg.sample_interval = abm.sample_interval;
    let traj = run_demo(&abm.params, &run_cfg)?;
    let mut t = Table::new(&["time", "mean_x", "population"]);
    for s in &traj.samples {
        t.push(vec![num(s.time), num(s.mean_x), s.population.to_string()]);
    }
    out.csv("demo_trajectory.csv", &t)?;
    for f in &traj.flags {
        eprintln!("note: {f}");
    }
    if abm.trajectory_only {
        out.json("demo_trajectory.json", &envelope("simulate abm", cfg.seed, cfg, &traj))?;
        return Ok(());
    }
    let cases = bias_configurations();
    let mut reports: Vec<(String, JumpReport)> = Vec::new();
    for case in &abm.bias {
        let (mu, sigma) = cases[case.index()];
        let params = abm.params.clone().with_bias(mu, sigma);
        let report = jump_moment_experiment(&params, &abm.experiment)?;
        let jm = &report.moments;
        println!(
            "bias ({}): A1 = {} ± {} /yr (naive {}), A2 = {} /yr (naive {}, R² = {})",
            case.name(),
            format_sig3(jm.a1_rate),
            format_sig3(jm.first.amplitude_se / jm.dt),
            format_sig3(report.naive.a1_rate),
            format_sig3(jm.a2_rate),
            format_sig3(report.naive.a2_rate),
            format_sig3(jm.second.r_squared)
        );
        let mut t = Table::new(&[
            "x_bin", "x", "count", "m1", "m1_se", "m2", "m2_se", "m1_fit", "m2_fit", "m1_naive", "m2_naive",
        ]);
        for b in &jm.bins {
            let f = b.x * (1.0 - b.x);
            t.push(vec![
                num(0.5 * (b.x_lo + b.x_hi)),
                num(b.x),
                b.count.to_string(),
                num(b.m1),
                num(b.m1_se),
                num(b.m2),
                num(b.m2_se),
                num(jm.first.amplitude * f),
                num(jm.second.amplitude * f),
                num(report.naive.a1_rate * jm.dt * f),
                num(report.naive.a2_rate * jm.dt * f),
            ]);
        }
        out.csv(&format!("jump_moments_{}.csv", case.name()), &t)?;
        reports.push((case.name().to_string(), report));
    }
    out.json("jump_moments.json", &envelope("simulate abm", cfg.seed, cfg, &reports))?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct LanguageRate {
    language: String,
    changes: usize,
    years: f64,
    changes_per_kyr: f64,
    rate_estimate: f64,
}

#[derive(Debug, Serialize)]
struct RateSummary {
    article: Article,
    languages: Vec<LanguageRate>,
    median_changes_per_kyr: f64,
    median_rate_estimate: f64,
}

pub fn cmd_report(cfg: &RunConfig, out: &mut OutputDir) -> Result<()> {
    let Loaded { data, .. } = load_data(cfg, false)?;
    let width = cfg.report.bin_width;
    if !(width > 0.0) {
        return Err(Error::Config(format!("bin width must be positive, got {width}")));
    }
    let mut summaries = Vec::new();
    for &article in &cfg.articles {
        let languages: Vec<LanguageRate> = data
            .histories
            .iter()
            .map(|h| {
                let m = changes_count(h.record(article));
                let t = h.observation_time();
                Ok(LanguageRate {
                    language: h.name.clone(),
                    changes: m,
                    years: t,
                    changes_per_kyr: 1000.0 * m as f64 / t,
                    rate_estimate: rate_estimate(m, t)?,
                })
            })
            .collect::<Result<_>>()?;
        let mut per_kyr: Vec<f64> = languages.iter().map(|l| l.changes_per_kyr).collect();
        per_kyr.sort_by(f64::total_cmp);
        let median = quantile(&per_kyr, 0.5);
        let mut rates: Vec<f64> = languages.iter().map(|l| l.rate_estimate).collect();
        rates.sort_by(f64::total_cmp);
        let median_rate = quantile(&rates, 0.5);
        let top = per_kyr.last().copied().unwrap_or(0.0);
        let n_bins = ((top / width).floor() as usize) + 1;
        let mut counts = vec![0usize; n_bins];
        for &v in &per_kyr {
            counts[((v / width).floor() as usize).min(n_bins - 1)] += 1;
        }
        let mut t = Table::new(&["lo", "hi", "count"]);
        for (i, c) in counts.iter().enumerate() {
            t.push(vec![num(i as f64 * width), num((i + 1) as f64 * width), c.to_string()]);
        }
        out.csv(&format!("changes_hist_{article}.csv"), &t)?;
        println!(
            "{article}: median {} changes per 1000 years, median rate estimate {} /yr",
            format_sig3(median),
            format_sig3(median_rate)
        );
        summaries.push(RateSummary {
            article,
            languages,
            median_changes_per_kyr: median,
            median_rate_estimate: median_rate,
        });
    }
    out.json("rates_report.json", &envelope("report", cfg.seed, cfg, &summaries))?;
    Ok(())
}
