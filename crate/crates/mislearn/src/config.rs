//! Pipeline configuration, read from a TOML file.
//!
//! Unknown keys are rejected so a typo never silently falls back to a
//! default. Relative data paths resolve against the config file's directory.

use std::path::{Path, PathBuf};

use mislearn_core::hp::HP_LAMBDA_MONTHLY;
use mislearn_core::mislearning::{DEFAULT_ROLLING_WINDOW, DEFAULT_SPIKE_QUANTILE};
use mislearn_core::outcomes::{Outcome, DEFAULT_FAILURE_QUANTILE, DEFAULT_HORIZONS};
use serde::Deserialize;

use crate::io::{Layout, Unit};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Syntax { path: PathBuf, message: String },
    #[error("config `{key}`: {reason}")]
    Invalid { key: String, reason: String },
}

fn invalid(key: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        key: key.into(),
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    #[serde(default)]
    pub samples: Vec<SampleConfig>,
    pub passive: Option<PassiveConfig>,
    #[serde(default)]
    pub fit: FitConfig,
    #[serde(default)]
    pub regress: RegressConfig,
    #[serde(default)]
    pub xsec: XsecConfig,
    #[serde(default)]
    pub simulate: SimulateConfig,
}

fn default_seed() -> u64 {
    20_240_601
}

fn default_output() -> PathBuf {
    "out".into()
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: default_seed(),
            output: default_output(),
            samples: Vec::new(),
            passive: None,
            fit: FitConfig::default(),
            regress: RegressConfig::default(),
            xsec: XsecConfig::default(),
            simulate: SimulateConfig::default(),
        }
    }
}

/// One return panel: a factor set such as FF6 or q5, or an anomaly universe.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleConfig {
    pub name: String,
    pub path: PathBuf,
    #[serde(default = "default_layout")]
    pub layout: Layout,
    #[serde(default = "default_unit")]
    pub unit: Unit,
    /// Restricts the panel to these series; all series when absent.
    pub series: Option<Vec<String>>,
    /// Series used for the market-volatility control.
    pub market: Option<String>,
    /// Keep only months where every selected series is observed.
    #[serde(default)]
    pub common_sample: bool,
}

fn default_layout() -> Layout {
    Layout::Wide
}

fn default_unit() -> Unit {
    Unit::Decimal
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PassiveConfig {
    pub path: PathBuf,
    #[serde(default = "default_unit")]
    pub unit: Unit,
    /// Adds the one-sided HP cycle as a second proxy.
    #[serde(default = "yes")]
    pub detrend: bool,
    #[serde(default = "default_hp_lambda")]
    pub hp_lambda: f64,
    #[serde(default = "default_passive_outcome")]
    pub outcome: String,
    #[serde(default = "default_passive_horizon")]
    pub horizon: usize,
    /// Samples the interaction designs run on; all samples when absent.
    pub samples: Option<Vec<String>>,
}

fn yes() -> bool {
    true
}

fn default_hp_lambda() -> f64 {
    HP_LAMBDA_MONTHLY
}

fn default_passive_outcome() -> String {
    "cumret".into()
}

fn default_passive_horizon() -> usize {
    12
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitConfig {
    pub rolling_window: usize,
    pub spike_quantile: f64,
    /// Re-estimate both models on expanding windows instead of once on the
    /// full sample.
    pub expanding: bool,
    pub expanding_min_obs: usize,
    pub refit_every: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            rolling_window: DEFAULT_ROLLING_WINDOW,
            spike_quantile: DEFAULT_SPIKE_QUANTILE,
            expanding: false,
            expanding_min_obs: 120,
            refit_every: 12,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Estimator {
    Classic,
    Hc0,
    Hc3,
    /// Newey–West; the lag is `regress.nw_lag` or the horizon.
    Nw,
    ClusterTime,
    ClusterSeries,
    TwoWay,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FixedEffectsChoice {
    None,
    Series,
    Month,
    SeriesMonth,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Baseline,
    Controlled,
    Sweep,
    Passive,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RegressConfig {
    pub horizons: Vec<usize>,
    pub outcomes: Vec<String>,
    pub failure_quantile: f64,
    pub suites: Vec<Suite>,
    pub estimator: Estimator,
    /// Fixed lag for Newey–West; the horizon when absent.
    pub nw_lag: Option<usize>,
    pub pooled_fixed_effects: FixedEffectsChoice,
    /// Also fit every series on its own.
    pub per_series: bool,
    pub sweep_outcome: String,
    pub sweep_horizon: usize,
    pub sweep_controls: bool,
}

impl Default for RegressConfig {
    fn default() -> Self {
        Self {
            horizons: DEFAULT_HORIZONS.to_vec(),
            outcomes: Outcome::ALL.iter().map(|o| o.name().to_owned()).collect(),
            failure_quantile: DEFAULT_FAILURE_QUANTILE,
            suites: vec![Suite::Baseline, Suite::Controlled, Suite::Sweep],
            estimator: Estimator::Nw,
            nw_lag: None,
            pooled_fixed_effects: FixedEffectsChoice::Series,
            per_series: true,
            sweep_outcome: "sharpe".into(),
            sweep_horizon: 12,
            sweep_controls: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct XsecConfig {
    /// Multiplier applied to IVOL in output tables (100: percent per month).
    pub ivol_scale: f64,
    /// Sample holding the three IVOL factors.
    pub factors_sample: Option<String>,
    pub factors: Vec<String>,
    /// Spread allowed in μ0 when screening the common-μ0 hypothesis.
    pub mu0_tolerance: f64,
}

impl Default for XsecConfig {
    fn default() -> Self {
        Self {
            ivol_scale: 100.0,
            factors_sample: None,
            factors: vec!["MKT".into(), "SMB".into(), "HML".into()],
            mu0_tolerance: 0.01,
        }
    }
}

/// Illustrative path written to `paths.csv`.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathConfig {
    pub a: f64,
    pub sigma_eta: f64,
    pub sigma_u: f64,
    pub p: f64,
    pub mu_j: f64,
    pub sigma_j: f64,
    pub t: usize,
    pub lambda0: f64,
    pub believed_sigma_eta: f64,
}

impl Default for PathConfig {
    fn default() -> Self {
        Self {
            a: 0.9,
            sigma_eta: 0.01,
            sigma_u: 0.04,
            p: 0.02,
            mu_j: 0.0,
            sigma_j: 0.05,
            t: 600,
            lambda0: 0.0,
            believed_sigma_eta: 0.005,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Prop1Section {
    pub paths: usize,
    pub a: f64,
    pub sigma_eta: f64,
    pub believed_sigma_eta: f64,
    pub sigma_u: f64,
    pub p: f64,
    pub sigma_j: f64,
    pub jump: f64,
    pub horizons: Vec<usize>,
    /// Believed state-noise grid for the gain monotonicity check.
    pub gain_grid: Vec<f64>,
}

impl Default for Prop1Section {
    fn default() -> Self {
        Self {
            paths: 100_000,
            a: 0.9,
            sigma_eta: 0.5,
            // Steady-state gain 0.2 at a = 0.9, σ_u = 1.
            believed_sigma_eta: 0.088f64.sqrt(),
            sigma_u: 1.0,
            p: 0.01,
            sigma_j: 1.0,
            jump: 1.0,
            horizons: vec![0, 1, 5, 10],
            gain_grid: (1..=10).map(|i| 0.05 * i as f64).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    pub lemma1_points: usize,
    pub prop2_points: usize,
}

impl Default for GridSection {
    fn default() -> Self {
        Self {
            lemma1_points: 10_000,
            prop2_points: 1_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EquilibriumSection {
    pub gamma: f64,
    pub sigma_u: f64,
    pub s_bar: f64,
    pub nu_sd: f64,
    pub a: f64,
    pub sigma_eta: f64,
    pub believed_sigma_eta: f64,
    pub t: usize,
    pub shift_at: usize,
    pub shift: f64,
}

impl Default for EquilibriumSection {
    fn default() -> Self {
        Self {
            gamma: 2.0,
            sigma_u: 0.2,
            s_bar: 1.0,
            nu_sd: 0.05,
            a: 0.9,
            sigma_eta: 0.02,
            believed_sigma_eta: 0.01,
            t: 240,
            shift_at: 100,
            shift: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Corollary1Section {
    pub replications: usize,
    pub sizes: Vec<f64>,
    pub h: usize,
}

impl Default for Corollary1Section {
    fn default() -> Self {
        Self {
            replications: 10_000,
            sizes: vec![0.5, 1.0, 2.0],
            h: 12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpikeSection {
    /// Zero, the default, skips the check: 500 paths take over a minute.
    pub paths: usize,
    pub a: f64,
    pub sigma_eta: f64,
    pub sigma_u: f64,
    pub t: usize,
    pub t_star: usize,
    pub size_sd: f64,
    pub window: usize,
    pub quantile: f64,
    pub min_pass_rate: f64,
}

impl Default for SpikeSection {
    fn default() -> Self {
        Self {
            paths: 0,
            a: 0.9,
            sigma_eta: 0.01,
            sigma_u: 0.04,
            t: 260,
            t_star: 200,
            size_sd: 4.0,
            window: 3,
            quantile: 0.99,
            min_pass_rate: 0.95,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateConfig {
    pub path: PathConfig,
    pub prop1: Prop1Section,
    pub grids: GridSection,
    pub equilibrium: EquilibriumSection,
    pub corollary1: Corollary1Section,
    pub spike: SpikeSection,
}

impl PipelineConfig {
    /// Parses and validates a config file; relative paths are made relative
    /// to its directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.into(),
            source,
        })?;
        let mut cfg = Self::parse(&text).map_err(|e| match e {
            ConfigError::Syntax { message, .. } => ConfigError::Syntax {
                path: path.into(),
                message,
            },
            other => other,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        cfg.validate()?;
        Ok(cfg)
    }

    /// Parses without touching the file system.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Syntax {
            path: PathBuf::from("<config>"),
            message: e.message().to_owned(),
        })
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for s in &mut self.samples {
            fix(&mut s.path);
        }
        if let Some(p) = &mut self.passive {
            fix(&mut p.path);
        }
        fix(&mut self.output);
    }

    pub fn sample(&self, name: &str) -> Option<&SampleConfig> {
        self.samples.iter().find(|s| s.name == name)
    }

    pub fn outcomes(&self) -> Vec<Outcome> {
        self.regress.outcomes.iter().filter_map(|o| Outcome::parse(o)).collect()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut names = std::collections::BTreeSet::new();
        for s in &self.samples {
            if s.name.is_empty() || s.name.contains(['/', '\\']) {
                return Err(invalid("samples.name", format!("`{}` is not a usable sample name", s.name)));
            }
            if !names.insert(&s.name) {
                return Err(invalid("samples.name", format!("duplicate sample `{}`", s.name)));
            }
            if !s.path.exists() {
                return Err(invalid("samples.path", format!("{} does not exist", s.path.display())));
            }
        }
        if let Some(p) = &self.passive {
            if !p.path.exists() {
                return Err(invalid("passive.path", format!("{} does not exist", p.path.display())));
            }
            if !(p.hp_lambda > 0.0) || !p.hp_lambda.is_finite() {
                return Err(invalid("passive.hp_lambda", "must be > 0"));
            }
            if Outcome::parse(&p.outcome).is_none() {
                return Err(invalid("passive.outcome", format!("unknown outcome `{}`", p.outcome)));
            }
            if !(1..=60).contains(&p.horizon) {
                return Err(invalid("passive.horizon", "must lie in 1..=60"));
            }
            for name in p.samples.iter().flatten() {
                if self.sample(name).is_none() {
                    return Err(invalid("passive.samples", format!("unknown sample `{name}`")));
                }
            }
        }
        let f = &self.fit;
        if f.rolling_window == 0 {
            return Err(invalid("fit.rolling_window", "must be >= 1"));
        }
        if !(f.spike_quantile > 0.0 && f.spike_quantile < 1.0) {
            return Err(invalid("fit.spike_quantile", "must lie in (0, 1)"));
        }
        if f.refit_every == 0 {
            return Err(invalid("fit.refit_every", "must be >= 1"));
        }
        let r = &self.regress;
        if r.horizons.is_empty() || r.horizons.iter().any(|h| !(1..=60).contains(h)) {
            return Err(invalid("regress.horizons", "each horizon must lie in 1..=60"));
        }
        if let Some(o) = r.outcomes.iter().find(|o| Outcome::parse(o).is_none()) {
            return Err(invalid("regress.outcomes", format!("unknown outcome `{o}`")));
        }
        if Outcome::parse(&r.sweep_outcome).is_none() {
            return Err(invalid("regress.sweep_outcome", format!("unknown outcome `{}`", r.sweep_outcome)));
        }
        if !(1..=60).contains(&r.sweep_horizon) {
            return Err(invalid("regress.sweep_horizon", "must lie in 1..=60"));
        }
        if !(r.failure_quantile > 0.0 && r.failure_quantile < 1.0) {
            return Err(invalid("regress.failure_quantile", "must lie in (0, 1)"));
        }
        let x = &self.xsec;
        if !(x.ivol_scale > 0.0) || !x.ivol_scale.is_finite() {
            return Err(invalid("xsec.ivol_scale", "must be > 0"));
        }
        if x.factors.len() != 3 {
            return Err(invalid("xsec.factors", "exactly three factor series are required"));
        }
        if let Some(s) = &x.factors_sample {
            if self.sample(s).is_none() {
                return Err(invalid("xsec.factors_sample", format!("unknown sample `{s}`")));
            }
        }
        if !(x.mu0_tolerance >= 0.0) {
            return Err(invalid("xsec.mu0_tolerance", "must be >= 0"));
        }
        let s = &self.simulate;
        if s.prop1.horizons.iter().any(|h| *h > 60) {
            return Err(invalid("simulate.prop1.horizons", "horizons must be <= 60"));
        }
        if s.spike.paths > 0 && !(s.spike.min_pass_rate > 0.0 && s.spike.min_pass_rate <= 1.0) {
            return Err(invalid("simulate.spike.min_pass_rate", "must lie in (0, 1]"));
        }
        if s.corollary1.sizes.is_empty() {
            return Err(invalid("simulate.corollary1.sizes", "at least one size is required"));
        }
        Ok(())
    }
}
