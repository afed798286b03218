//! One function per CLI verb. Each returns the CSV tables it produced, so
//! callers decide where (or whether) to write them.
//!
//! | verb | tables |
//! |------|--------|
//! | `solve-pde` | `pde_tails`, `pde_wait`, `pde_slices`, `pde_diagnostics` |
//! | `simulate` | `mc_tails`, `mc_wait`, `mc_chaos`, `mc_actual_wait` |
//! | `validate` | the above plus `validation` |
//! | `scenario-backlog` | `backlog_wait`, `relaxation` |
//! | `scenario-periodic` | `effective_rate` (one row per family and Δ) |
//! | `effective-rate` | `effective_rate` (one row) |
//! | `oracle-ctmc` | `ctmc_marginals`, `ctmc_fractions` |

use std::collections::{BTreeSet, HashMap};

use sqdfluid_core::ctmc;
use sqdfluid_core::fluid::{ode_solve_exponential, FluidGrid, StepDiagnostics};
use sqdfluid_core::metrics::{
    backlog_study, effective_rate_for, mean_virtual_wait, periodic_average, plateau_wait, tail_series,
    virtual_wait_series, EffectiveRate, LongRun, RateSearch,
};
use sqdfluid_core::sim::{EnsembleSpec, EnsembleSummary};
use sqdfluid_core::{
    ArrivalProfile, Family, FluidParams, FluidSolver, MetricSeries, Provenance, ServiceDistribution,
};

use crate::config::{schedule, ArrivalConfig, InitialConfig, PeriodicConfig, Scenario, ServiceConfig};
use crate::ensemble::par_ensemble;
use crate::output::{num, opt, Outputs, Table};
use crate::validate::{compare, ValidationReport};
use crate::Error;

/// Sup-norm tolerance of the PDE against the exponential ODE.
pub const ODE_TOLERANCE: f64 = 1e-3;

/// PDE tails and waits at the recorded steps.
#[derive(Debug, Clone, PartialEq)]
pub struct PdeRun {
    pub params: FluidParams,
    pub times: Vec<f64>,
    /// `times.len() × levels`.
    pub tails: Vec<f64>,
    pub waits: Vec<f64>,
    pub slices: Vec<FluidGrid>,
    pub diagnostics: StepDiagnostics,
}

impl PdeRun {
    pub fn tail(&self, row: usize, level: usize) -> f64 {
        self.tails[row * self.params.levels + level - 1]
    }

    pub fn tail_series(&self, level: usize) -> Result<MetricSeries, Error> {
        let v = (0..self.times.len()).map(|k| self.tail(k, level)).collect();
        Ok(MetricSeries::new("queue_tail", Provenance::Pde, self.times.clone(), v, None)?.with_level(level))
    }

    pub fn wait_series(&self) -> Result<MetricSeries, Error> {
        Ok(MetricSeries::new("mean_virtual_wait", Provenance::Pde, self.times.clone(), self.waits.clone(), None)?)
    }
}

/// Solves the scenario's PDE, recording every `record_step` and at `extra` times.
pub fn run_pde(s: &Scenario, extra: &[f64]) -> Result<PdeRun, Error> {
    let cfg = s.pde()?;
    let params = cfg.params(s.choices);
    let dist = s.distribution()?;
    let mut solver = FluidSolver::new(params, &dist, s.profile()?, &s.initial_condition()?)?;
    let stride = match cfg.record_step {
        Some(r) => params.steps_to(r)?.max(1),
        None => 1,
    };
    let wanted: BTreeSet<u64> = extra.iter().map(|&t| params.steps_to(t)).collect::<Result<_, _>>()?;
    let slices_at: BTreeSet<u64> = cfg.output_times.iter().map(|&t| params.steps_to(t)).collect::<Result<_, _>>()?;
    let mut run = PdeRun {
        params,
        times: Vec::new(),
        tails: Vec::new(),
        waits: Vec::new(),
        slices: Vec::new(),
        diagnostics: StepDiagnostics::default(),
    };
    solver.run_until(cfg.horizon, |g| {
        let k = g.step_index();
        if k % stride == 0 || wanted.contains(&k) {
            run.times.push(g.time());
            run.tails.extend((1..=params.levels).map(|l| g.tail(l)));
            run.waits.push(mean_virtual_wait(g));
        }
        if slices_at.contains(&k) {
            run.slices.push(g.clone());
        }
    })?;
    run.diagnostics = solver.diagnostics();
    Ok(run)
}

fn pde_tables(run: &PdeRun, out: &mut Outputs) {
    let levels = run.params.levels;
    let mut header = vec!["t".to_string()];
    header.extend((1..=levels).map(|l| format!("z{l}")));
    let mut tails = Table::new(&header);
    let mut wait = Table::new(&["t", "mean_virtual_wait"]);
    for (k, &t) in run.times.iter().enumerate() {
        let mut row = vec![num(t)];
        row.extend((1..=levels).map(|l| num(run.tail(k, l))));
        tails.push(row);
        wait.push(vec![num(t), num(run.waits[k])]);
    }
    let mut slices = Table::new(&["t", "level", "r", "z"]);
    for g in &run.slices {
        for l in 1..=levels {
            for (n, &z) in g.row(l).iter().enumerate() {
                slices.push(vec![num(g.time()), l.to_string(), num(n as f64 * g.delta()), num(z)]);
            }
        }
    }
    let mut diag = Table::new(&["steps", "max_correction"]);
    diag.push(vec![run.diagnostics.steps.to_string(), num(run.diagnostics.max_correction)]);
    out.add("pde_tails", tails);
    out.add("pde_wait", wait);
    out.add("pde_slices", slices);
    out.add("pde_diagnostics", diag);
}

pub fn solve_pde(s: &Scenario) -> Result<(Outputs, PdeRun), Error> {
    let run = run_pde(s, &[])?;
    let mut out = Outputs::default();
    pde_tables(&run, &mut out);
    Ok((out, run))
}

pub fn ensemble_spec(s: &Scenario) -> Result<EnsembleSpec, Error> {
    let m = s.mc()?;
    let horizon = *m.sample_times.last().unwrap_or(&0.0);
    Ok(EnsembleSpec {
        servers: m.servers,
        choices: s.choices,
        dist: s.distribution()?,
        profile: s.profile()?,
        initial: s.initial_condition()?,
        horizon,
        sample_times: m.sample_times.clone(),
        levels: m.levels,
        wait_bin: m.wait_bin,
    })
}

fn mc_tables(sum: &EnsembleSummary, out: &mut Outputs) {
    let mut tails = Table::new(&["t", "level", "mean", "std_error"]);
    let mut wait = Table::new(&["t", "mean", "std_error", "probe_mean", "probe_std_error"]);
    let mut chaos = Table::new(&["t", "level", "joint", "first", "second", "difference", "std_error"]);
    for (k, &t) in sum.sample_times.iter().enumerate() {
        for l in 1..=sum.levels {
            let e = sum.tail(k, l);
            tails.push(vec![num(t), l.to_string(), num(e.mean), num(e.std_error)]);
        }
        let (w, p) = (sum.virtual_wait[k], sum.virtual_wait_probe[k]);
        wait.push(vec![num(t), num(w.mean), num(w.std_error), num(p.mean), num(p.std_error)]);
        let c = sum.chaos[k];
        chaos.push(vec![
            num(t),
            c.level.to_string(),
            num(c.joint),
            num(c.first),
            num(c.second),
            num(c.difference),
            num(c.std_error),
        ]);
    }
    let mut actual = Table::new(&["bin_start", "mean", "std_error", "count"]);
    for (b, e) in &sum.actual_wait {
        actual.push(vec![num(*b), num(e.mean), num(e.std_error), e.count.to_string()]);
    }
    out.add("mc_tails", tails);
    out.add("mc_wait", wait);
    out.add("mc_chaos", chaos);
    out.add("mc_actual_wait", actual);
}

pub fn simulate(s: &Scenario) -> Result<(Outputs, EnsembleSummary), Error> {
    let m = s.mc()?;
    let seed = m.seed.ok_or_else(|| Error::Config("mc.seed: a seed is required for Monte Carlo runs".into()))?;
    let sum = par_ensemble(&ensemble_spec(s)?, m.replications, seed)?;
    let mut out = Outputs::default();
    mc_tables(&sum, &mut out);
    Ok((out, sum))
}

/// `S_ℓ(0)` of the exponential ODE, when the initial condition has one.
fn ode_start(s: &Scenario, levels: usize) -> Option<Vec<f64>> {
    let jobs = match s.initial {
        InitialConfig::Jobs { jobs } | InitialConfig::StationaryAge { jobs } => jobs as usize,
        InitialConfig::Backlog { .. } => return None,
    };
    Some((1..=levels).map(|l| if l <= jobs { 1.0 } else { 0.0 }).collect())
}

/// Runs Monte Carlo and the PDE and compares them on the MC sample times.
/// Exponential scenarios are also checked against the ODE at every recorded step.
pub fn validate(s: &Scenario) -> Result<(Outputs, ValidationReport), Error> {
    let v = s.validate.clone().unwrap_or_default();
    let (mut out, sum) = simulate(s)?;
    let run = run_pde(s, &sum.sample_times)?;
    pde_tables(&run, &mut out);
    let mut report = ValidationReport::default();
    for &l in &v.levels {
        if l > sum.levels || l > run.params.levels {
            return Err(Error::Config(format!("validate.levels: level {l} is not recorded by both runs")));
        }
        let c = compare("queue_tail", &run.tail_series(l)?, &tail_series(&sum, l)?, v.tolerance, false, 0.0)?;
        report.comparisons.push(c);
    }
    let c = compare("mean_virtual_wait", &run.wait_series()?, &virtual_wait_series(&sum)?, v.wait_tolerance, true, v.wait_from)?;
    report.comparisons.push(c);
    if s.service == ServiceConfig::Exponential && s.choices == 2 {
        if let Some(init) = ode_start(s, run.params.levels) {
            let horizon = run.times.last().copied().unwrap_or(0.0);
            let ode = ode_solve_exponential(&s.profile()?, &init, horizon, run.params.delta);
            for l in 1..=run.params.levels {
                let reference = MetricSeries::new(
                    "ode_tail",
                    Provenance::Pde,
                    run.times.clone(),
                    run.times.iter().map(|&t| ode.tail_at(t, l)).collect(),
                    None,
                )?
                .with_level(l);
                report.comparisons.push(compare("ode_tail", &reference, &run.tail_series(l)?, ODE_TOLERANCE, false, 0.0)?);
            }
        }
    }
    out.add("validation", report.to_table());
    Ok((out, report))
}

fn families(listed: &[ServiceConfig], own: ServiceConfig) -> Vec<ServiceConfig> {
    if listed.is_empty() {
        vec![own]
    } else {
        listed.to_vec()
    }
}

/// One row of the relaxation table.
#[derive(Debug, Clone, PartialEq)]
pub struct Relaxation {
    pub family: ServiceConfig,
    pub median: f64,
    pub initial_wait: f64,
    pub time: Option<f64>,
}

pub fn scenario_backlog(s: &Scenario) -> Result<(Outputs, Vec<Relaxation>), Error> {
    let b = s.backlog.as_ref().ok_or_else(|| Error::Config("missing [backlog] section".into()))?;
    let params = s.pde()?.params(s.choices);
    let history = schedule(&b.history, false).map_err(|e| Error::Config(format!("backlog.history: {e}")))?;
    let stride = params.steps_to(b.sample_step)?.max(1);
    params.steps_to(b.horizon)?;
    let mut curves = Table::new(&["family", "t", "mean_virtual_wait"]);
    let mut table = Table::new(&["family", "median", "initial_wait", "relaxation_time"]);
    let mut rows = Vec::new();
    for f in families(&b.families, s.service) {
        let dist = f.distribution()?;
        let (series, relax) = backlog_study(&params, &dist, &history, b.nominal_rate, b.horizon, stride)?;
        let label = f.label();
        for (t, w) in series.times().iter().zip(series.values()) {
            curves.push(vec![label.clone(), num(*t), num(*w)]);
        }
        let r = Relaxation { family: f, median: dist.median(), initial_wait: series.values()[0], time: relax };
        table.push(vec![label, num(r.median), num(r.initial_wait), opt(r.time)]);
        rows.push(r);
    }
    let mut out = Outputs::default();
    out.add("backlog_wait", curves);
    out.add("relaxation", table);
    Ok((out, rows))
}

/// One row of the effective-rate table.
#[derive(Debug, Clone, PartialEq)]
pub struct RateRow {
    pub family: ServiceConfig,
    pub delta: f64,
    pub result: EffectiveRate,
}

fn rate_search(p: &PeriodicConfig) -> RateSearch {
    RateSearch {
        max_rate: p.max_rate,
        tolerance: p.rate_tolerance,
        long_run: LongRun { warm_periods: p.warm_periods, max_horizon: p.max_horizon, ..LongRun::default() },
    }
}

/// Plateau waits keyed by the bit pattern of the rate. The bisection visits
/// the same midpoints for every target with the same mean, so a sweep over
/// Δ reuses most of them.
struct PlateauCache<'a> {
    params: FluidParams,
    dist: &'a ServiceDistribution,
    rule: LongRun,
    seen: HashMap<u64, f64>,
}

impl PlateauCache<'_> {
    fn get(&mut self, rate: f64) -> Result<f64, sqdfluid_core::MetricError> {
        if let Some(&w) = self.seen.get(&rate.to_bits()) {
            return Ok(w);
        }
        let w = plateau_wait(&self.params, self.dist, rate, &self.rule)?;
        self.seen.insert(rate.to_bits(), w);
        Ok(w)
    }
}

fn effective_rates(
    params: FluidParams,
    family: ServiceConfig,
    mean: f64,
    period: f64,
    deltas: &[f64],
    search: &RateSearch,
) -> Result<Vec<RateRow>, Error> {
    let dist = family.distribution()?;
    let mut cache = PlateauCache { params, dist: &dist, rule: search.long_run, seen: HashMap::new() };
    let mut rows = Vec::new();
    for &delta in deltas {
        let result = if delta == 0.0 {
            // no burst: the comparator is the process itself
            let target = cache.get(mean)?;
            EffectiveRate { rate: mean, target, evaluations: 0 }
        } else {
            let profile = ArrivalProfile::periodic(mean, delta, period).map_err(|e| Error::Config(e.to_string()))?;
            let target = periodic_average(&params, &dist, profile, period, &search.long_run)?.value;
            effective_rate_for(target, mean, search, |c| cache.get(c))?
        };
        rows.push(RateRow { family, delta, result });
    }
    Ok(rows)
}

fn rate_table(rows: &[RateRow], mean: f64) -> Table {
    let mut t = Table::new(&["family", "mean_rate", "delta", "period_average_wait", "effective_rate", "evaluations"]);
    for r in rows {
        t.push(vec![
            r.family.label(),
            num(mean),
            num(r.delta),
            num(r.result.target),
            num(r.result.rate),
            r.result.evaluations.to_string(),
        ]);
    }
    t
}

pub fn scenario_periodic(s: &Scenario) -> Result<(Outputs, Vec<RateRow>), Error> {
    let p = s.periodic.as_ref().ok_or_else(|| Error::Config("missing [periodic] section".into()))?;
    let params = s.pde()?.params(s.choices);
    let search = rate_search(p);
    let mut rows = Vec::new();
    for f in families(&p.families, s.service) {
        rows.extend(effective_rates(params, f, p.mean, p.period, &p.deltas, &search)?);
    }
    let mut out = Outputs::default();
    out.add("effective_rate", rate_table(&rows, p.mean));
    Ok((out, rows))
}

/// Effective rate of the scenario's own periodic arrival profile.
pub fn effective_rate(s: &Scenario) -> Result<(Outputs, RateRow), Error> {
    let ArrivalConfig::Periodic { mean, delta, period } = s.arrival else {
        return Err(Error::Config("arrival: effective-rate needs a periodic profile".into()));
    };
    let params = s.pde()?.params(s.choices);
    let search = match &s.periodic {
        Some(p) => rate_search(p),
        None => RateSearch::default(),
    };
    let row = effective_rates(params, s.service, mean, period, &[delta], &search)?.remove(0);
    let mut out = Outputs::default();
    out.add("effective_rate", rate_table(std::slice::from_ref(&row), mean));
    Ok((out, row))
}

pub fn oracle_ctmc(s: &Scenario) -> Result<(Outputs, Vec<ctmc::CtmcMarginals>), Error> {
    let c = s.ctmc.as_ref().ok_or_else(|| Error::Config("missing [ctmc] section".into()))?;
    if s.service.family() != Family::Exponential {
        return Err(Error::Config("service: the chain oracle needs exponential service".into()));
    }
    let marginals = ctmc::transient(c.servers, s.choices, c.rate, c.cap, &c.initial, &c.times)?;
    let mut per_server = Table::new(&["t", "server", "level", "probability"]);
    let mut fractions = Table::new(&["t", "level", "fraction", "boundary_mass", "truncation"]);
    for m in &marginals {
        for (srv, tails) in m.tails.iter().enumerate() {
            for (l, p) in tails.iter().enumerate() {
                per_server.push(vec![num(m.t), srv.to_string(), (l + 1).to_string(), num(*p)]);
            }
        }
        for l in 1..=c.cap {
            fractions.push(vec![num(m.t), l.to_string(), num(m.fraction_at_least(l)), num(m.boundary_mass), num(m.truncation)]);
        }
    }
    let mut out = Outputs::default();
    out.add("ctmc_marginals", per_server);
    out.add("ctmc_fractions", fractions);
    Ok((out, marginals))
}
