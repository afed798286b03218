//! TOML scenario files.
//!
//! A scenario names an arrival profile, a service law and an initial
//! condition, plus one section per tool that reads it. Unknown keys are
//! rejected everywhere.
//!
//! ```toml
//! choices = 2
//!
//! [arrival]
//! kind = "constant"
//! rate = 0.5
//!
//! [service]
//! family = "lomax"
//! shape = 2.25
//!
//! [initial]
//! kind = "jobs"
//! jobs = 1
//!
//! [pde]
//! levels = 6
//! r_max = 20.0
//! delta = 0.001
//! horizon = 10.0
//! output_times = [1.0, 5.0, 10.0]
//!
//! [mc]
//! servers = 1000
//! replications = 1000
//! seed = 7
//! sample_times = [0.5, 1.0, 1.5]
//! ```

use serde::{Deserialize, Serialize};
use sqdfluid_core::{ArrivalProfile, Family, FluidParams, InitialCondition, Schedule, Segment, ServiceDistribution};

use crate::Error;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    /// Queues sampled per arrival.
    #[serde(default = "default_choices")]
    pub choices: u32,
    pub arrival: ArrivalConfig,
    pub service: ServiceConfig,
    #[serde(default)]
    pub initial: InitialConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pde: Option<PdeConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mc: Option<McConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub validate: Option<ValidateConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub backlog: Option<BacklogConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub periodic: Option<PeriodicConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ctmc: Option<CtmcConfig>,
}

fn default_choices() -> u32 {
    2
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentConfig {
    pub duration: f64,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ArrivalConfig {
    Constant { rate: f64 },
    /// Square wave: `mean + delta` for the first half period, `mean - delta` after.
    Periodic { mean: f64, delta: f64, period: f64 },
    Piecewise {
        segments: Vec<SegmentConfig>,
        #[serde(default)]
        repeat: bool,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum ServiceConfig {
    Exponential,
    /// Unit-mean Pareto II with tail exponent `shape`.
    Lomax { shape: f64 },
    LogNormal { sigma: f64 },
    Gamma { shape: f64 },
    /// Two-phase mixture with its weight fixed by the unit mean.
    HyperExponential { rate1: f64, rate2: f64 },
    Weibull { shape: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialConfig {
    /// `jobs` jobs per queue, all with age zero.
    Jobs { jobs: u32 },
    /// `jobs` jobs per queue, the one in service at its stationary age.
    StationaryAge { jobs: u32 },
    /// Start empty and run the history; its end becomes time zero.
    Backlog { history: Vec<SegmentConfig> },
}

impl Default for InitialConfig {
    fn default() -> Self {
        InitialConfig::Jobs { jobs: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PdeConfig {
    pub levels: usize,
    pub r_max: f64,
    pub delta: f64,
    pub horizon: f64,
    /// Times at which the full residual slice is written.
    #[serde(default)]
    pub output_times: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub correction_limit: Option<f64>,
    /// Spacing of the tail and wait tables; every step when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub record_step: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McConfig {
    pub servers: usize,
    pub replications: usize,
    /// Required; TOML integers cap it at `i64::MAX`.
    pub seed: Option<u64>,
    pub sample_times: Vec<f64>,
    #[serde(default = "default_mc_levels")]
    pub levels: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wait_bin: Option<f64>,
}

fn default_mc_levels() -> usize {
    2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidateConfig {
    /// Absolute tolerance on queue tails.
    #[serde(default = "default_tail_tolerance")]
    pub tolerance: f64,
    /// Relative tolerance on the mean virtual wait.
    #[serde(default = "default_wait_tolerance")]
    pub wait_tolerance: f64,
    #[serde(default = "default_validate_levels")]
    pub levels: Vec<usize>,
    /// Wait comparisons start here; the wait is tiny just after an empty start.
    #[serde(default)]
    pub wait_from: f64,
}

fn default_tail_tolerance() -> f64 {
    0.03
}

fn default_wait_tolerance() -> f64 {
    0.07
}

fn default_validate_levels() -> Vec<usize> {
    vec![1, 2]
}

impl Default for ValidateConfig {
    fn default() -> Self {
        Self {
            tolerance: default_tail_tolerance(),
            wait_tolerance: default_wait_tolerance(),
            levels: default_validate_levels(),
            wait_from: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BacklogConfig {
    pub history: Vec<SegmentConfig>,
    pub nominal_rate: f64,
    pub horizon: f64,
    /// Time between recorded wait values.
    #[serde(default = "default_sample_step")]
    pub sample_step: f64,
    /// Service laws to compare; empty means the scenario's own.
    #[serde(default)]
    pub families: Vec<ServiceConfig>,
}

fn default_sample_step() -> f64 {
    0.1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PeriodicConfig {
    pub mean: f64,
    pub period: f64,
    pub deltas: Vec<f64>,
    #[serde(default)]
    pub families: Vec<ServiceConfig>,
    #[serde(default = "default_max_rate")]
    pub max_rate: f64,
    #[serde(default = "default_rate_tolerance")]
    pub rate_tolerance: f64,
    #[serde(default = "default_warm_periods")]
    pub warm_periods: usize,
    #[serde(default = "default_max_horizon")]
    pub max_horizon: f64,
}

fn default_max_rate() -> f64 {
    0.999
}

fn default_rate_tolerance() -> f64 {
    1e-3
}

fn default_warm_periods() -> usize {
    5
}

fn default_max_horizon() -> f64 {
    2000.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CtmcConfig {
    pub servers: usize,
    pub rate: f64,
    pub cap: usize,
    pub initial: Vec<usize>,
    pub times: Vec<f64>,
}

/// Command-line values that replace scenario fields before checking.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub replications: Option<usize>,
    pub tolerance: Option<f64>,
}

impl Overrides {
    pub fn apply(&self, s: &mut Scenario) {
        if let Some(m) = &mut s.mc {
            if self.seed.is_some() {
                m.seed = self.seed;
            }
            if let Some(r) = self.replications {
                m.replications = r;
            }
        }
        if let Some(t) = self.tolerance {
            s.validate.get_or_insert_with(ValidateConfig::default).tolerance = t;
        }
    }
}

pub fn parse_scenario(text: &str) -> Result<Scenario, Error> {
    parse_scenario_with(text, &Overrides::default())
}

pub fn parse_scenario_with(text: &str, overrides: &Overrides) -> Result<Scenario, Error> {
    let mut s: Scenario = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    overrides.apply(&mut s);
    s.check()?;
    Ok(s)
}

pub fn load_scenario(path: &std::path::Path, overrides: &Overrides) -> Result<Scenario, Error> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_scenario_with(&text, overrides).map_err(|e| match e {
        Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
        other => other,
    })
}

impl Scenario {
    pub fn render(&self) -> Result<String, Error> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Checks everything the core constructors would reject, so errors
    /// surface at load time with the offending key.
    pub fn check(&self) -> Result<(), Error> {
        let bad = |key: &str, msg: String| Err(Error::Config(format!("{key}: {msg}")));
        self.profile()?;
        self.distribution()?;
        self.initial_condition()?;
        if self.choices == 0 {
            return bad("choices", "must be at least 1".into());
        }
        if let Some(p) = &self.pde {
            p.params(self.choices).steps_to(p.horizon).map_err(|e| Error::Config(format!("pde.horizon: {e}")))?;
            if p.levels < 2 || !(p.delta > 0.0) || !(p.r_max >= p.delta) {
                return bad("pde", "need levels ≥ 2 and 0 < delta ≤ r_max".into());
            }
            if let Some(c) = p.correction_limit {
                if !(c > 0.0) {
                    return bad("pde.correction_limit", format!("must be positive, got {c}"));
                }
            }
            if p.output_times.iter().any(|&t| !(t >= 0.0 && t <= p.horizon)) {
                return bad("pde.output_times", "must lie in [0, horizon]".into());
            }
            if let Some(r) = p.record_step {
                p.params(self.choices).steps_to(r).ok().filter(|&k| k > 0).ok_or_else(|| {
                    Error::Config(format!("pde.record_step: {r} is not a positive multiple of delta"))
                })?;
            }
        }
        if let Some(m) = &self.mc {
            if m.seed.is_none() {
                return bad("mc.seed", "a seed is required for Monte Carlo runs".into());
            }
            if m.servers == 0 || m.replications == 0 || m.levels == 0 {
                return bad("mc", "servers, replications and levels must be positive".into());
            }
            if m.sample_times.is_empty() || m.sample_times.iter().any(|&t| !(t >= 0.0)) || m.sample_times.windows(2).any(|w| w[1] <= w[0]) {
                return bad("mc.sample_times", "must be non-empty, non-negative and strictly increasing".into());
            }
            if let Some(b) = m.wait_bin {
                if !(b > 0.0) {
                    return bad("mc.wait_bin", format!("must be positive, got {b}"));
                }
            }
        }
        if let Some(v) = &self.validate {
            if !(v.tolerance >= 0.0) || !(v.wait_tolerance >= 0.0) {
                return bad("validate", "tolerances must be non-negative".into());
            }
            if v.levels.contains(&0) {
                return bad("validate.levels", "levels start at 1".into());
            }
        }
        if let Some(b) = &self.backlog {
            schedule(&b.history, false).map_err(|e| Error::Config(format!("backlog.history: {e}")))?;
            ArrivalProfile::constant(b.nominal_rate).map_err(|e| Error::Config(format!("backlog.nominal_rate: {e}")))?;
            if !(b.horizon > 0.0) || !(b.sample_step > 0.0) {
                return bad("backlog", "horizon and sample_step must be positive".into());
            }
            for f in &b.families {
                f.distribution()?;
            }
        }
        if let Some(p) = &self.periodic {
            for &d in &p.deltas {
                ArrivalProfile::periodic(p.mean, d, p.period).map_err(|e| Error::Config(format!("periodic.deltas: {e}")))?;
            }
            if !(p.mean < p.max_rate) || !(p.rate_tolerance > 0.0) || !(p.max_horizon > 0.0) {
                return bad("periodic", "need mean < max_rate and positive tolerances".into());
            }
            for f in &p.families {
                f.distribution()?;
            }
        }
        if let Some(c) = &self.ctmc {
            if c.initial.len() != c.servers {
                return bad("ctmc.initial", format!("expected {} entries", c.servers));
            }
        }
        Ok(())
    }

    pub fn profile(&self) -> Result<ArrivalProfile, Error> {
        self.arrival.profile()
    }

    pub fn distribution(&self) -> Result<ServiceDistribution, Error> {
        self.service.distribution()
    }

    pub fn initial_condition(&self) -> Result<InitialCondition, Error> {
        Ok(match &self.initial {
            InitialConfig::Jobs { jobs } => InitialCondition::JobsPerQueue { jobs: *jobs },
            InitialConfig::StationaryAge { jobs } => InitialCondition::StationaryAge { jobs: *jobs },
            InitialConfig::Backlog { history } => InitialCondition::Backlog {
                history: schedule(history, false).map_err(|e| Error::Config(format!("initial.history: {e}")))?,
            },
        })
    }

    pub fn pde(&self) -> Result<&PdeConfig, Error> {
        self.pde.as_ref().ok_or_else(|| Error::Config("missing [pde] section".into()))
    }

    pub fn mc(&self) -> Result<&McConfig, Error> {
        self.mc.as_ref().ok_or_else(|| Error::Config("missing [mc] section".into()))
    }
}

impl PdeConfig {
    pub fn params(&self, choices: u32) -> FluidParams {
        let mut p = FluidParams::new(self.levels, self.r_max, self.delta);
        if choices != 2 {
            p = p.with_choices(choices);
        }
        if let Some(c) = self.correction_limit {
            p.correction_limit = c;
        }
        p
    }
}

impl ArrivalConfig {
    pub fn profile(&self) -> Result<ArrivalProfile, Error> {
        let r = match self {
            ArrivalConfig::Constant { rate } => ArrivalProfile::constant(*rate),
            ArrivalConfig::Periodic { mean, delta, period } => ArrivalProfile::periodic(*mean, *delta, *period),
            ArrivalConfig::Piecewise { segments, repeat } => schedule(segments, *repeat).map(ArrivalProfile::Piecewise),
        };
        r.map_err(|e| Error::Config(format!("arrival: {e}")))
    }
}

impl ServiceConfig {
    pub fn family(&self) -> Family {
        match *self {
            ServiceConfig::Exponential => Family::Exponential,
            ServiceConfig::Lomax { shape } => Family::Lomax { shape },
            ServiceConfig::LogNormal { sigma } => Family::LogNormal { sigma },
            ServiceConfig::Gamma { shape } => Family::Gamma { shape },
            ServiceConfig::HyperExponential { rate1, rate2 } => Family::HyperExponential { rate1, rate2 },
            ServiceConfig::Weibull { shape } => Family::Weibull { shape },
        }
    }

    pub fn distribution(&self) -> Result<ServiceDistribution, Error> {
        ServiceDistribution::new(self.family()).map_err(|e| Error::Config(format!("service: {e}")))
    }

    /// Short label used in CSV rows, e.g. `lomax(2.25)`.
    pub fn label(&self) -> String {
        match *self {
            ServiceConfig::Exponential => "exponential".into(),
            ServiceConfig::Lomax { shape } => format!("lomax({shape})"),
            ServiceConfig::LogNormal { sigma } => format!("lognormal({sigma})"),
            ServiceConfig::Gamma { shape } => format!("gamma({shape})"),
            ServiceConfig::HyperExponential { rate1, rate2 } => format!("hyperexponential({rate1},{rate2})"),
            ServiceConfig::Weibull { shape } => format!("weibull({shape})"),
        }
    }
}

pub fn schedule(segments: &[SegmentConfig], repeat: bool) -> Result<Schedule, sqdfluid_core::ArrivalError> {
    Schedule::new(segments.iter().map(|s| Segment { duration: s.duration, rate: s.rate }).collect(), repeat)
}
