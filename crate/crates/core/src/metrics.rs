//! Performance functionals of fluid solutions: queue tails, the mean virtual
//! waiting time, relaxation times, period averages and effective arrival rates.

use alloc::string::String;
use alloc::vec::Vec;

use libm::{ceil, floor, log2};

use crate::arrivals::ArrivalProfile;
use crate::fluid::{FluidError, FluidGrid, FluidParams, FluidSolver, Trajectory};
use crate::initial::InitialCondition;
use crate::service::ServiceDistribution;
use crate::sim::EnsembleSummary;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricError {
    #[error("series is empty")]
    Empty,
    #[error("series times must be strictly increasing")]
    TimesNotIncreasing,
    #[error("series value {0} is not finite")]
    NonFinite(f64),
    #[error("series has {times} times but {values} values")]
    LengthMismatch { times: usize, values: usize },
    #[error("level {level} outside 1..={levels}")]
    LevelOutOfRange { level: usize, levels: usize },
    #[error("time {0} is not a recorded mesh time")]
    TimeNotRecorded(f64),
    #[error("series covers {covered} periods, need at least {needed}")]
    HorizonTooShort { covered: usize, needed: usize },
    #[error("period must be a positive multiple of the mesh step")]
    BadPeriod,
    #[error("no plateau within horizon {horizon}: last change {change:e}")]
    NotConverged { horizon: f64, change: f64 },
    #[error("target wait {target} exceeds the plateau {plateau} at the largest stable rate")]
    Unbounded { target: f64, plateau: f64 },
    #[error("invalid rate bracket [{lo}, {hi}]")]
    Bracket { lo: f64, hi: f64 },
    #[error(transparent)]
    Fluid(#[from] FluidError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Pde,
    Mc,
}

/// A named time series, optionally tied to a queue level.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricSeries {
    pub name: String,
    pub level: Option<usize>,
    pub provenance: Provenance,
    times: Vec<f64>,
    values: Vec<f64>,
    std_errors: Option<Vec<f64>>,
}

impl MetricSeries {
    pub fn new(
        name: impl Into<String>,
        provenance: Provenance,
        times: Vec<f64>,
        values: Vec<f64>,
        std_errors: Option<Vec<f64>>,
    ) -> Result<Self, MetricError> {
        if times.len() != values.len() {
            return Err(MetricError::LengthMismatch { times: times.len(), values: values.len() });
        }
        if let Some(se) = &std_errors {
            if se.len() != times.len() {
                return Err(MetricError::LengthMismatch { times: times.len(), values: se.len() });
            }
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(MetricError::TimesNotIncreasing);
        }
        if let Some(&bad) = values.iter().chain(times.iter()).find(|v| !v.is_finite()) {
            return Err(MetricError::NonFinite(bad));
        }
        Ok(Self { name: name.into(), level: None, provenance, times, values, std_errors })
    }

    pub fn with_level(mut self, level: usize) -> Self {
        self.level = Some(level);
        self
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn std_errors(&self) -> Option<&[f64]> {
        self.std_errors.as_deref()
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Value at the recorded time closest to `t`, if within `tol`.
    pub fn value_at(&self, t: f64, tol: f64) -> Option<f64> {
        let i = self.times.partition_point(|&s| s < t - tol);
        (i < self.times.len() && (self.times[i] - t).abs() <= tol).then(|| self.values[i])
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= factor);
        if let Some(se) = &mut out.std_errors {
            se.iter_mut().for_each(|v| *v *= factor.abs());
        }
        out
    }
}

/// `Ẑ_ℓ(t, 0)` from a solved trajectory.
pub fn queue_tail(traj: &Trajectory, t: f64, level: usize) -> Result<f64, MetricError> {
    if level == 0 || level > traj.levels {
        return Err(MetricError::LevelOutOfRange { level, levels: traj.levels });
    }
    traj.tail_at(t, level).ok_or(MetricError::TimeNotRecorded(t))
}

/// Mean virtual waiting time of a fluid slice:
/// `Σ_{ℓ≥2} Ẑ_ℓ(0)² + Σ_{ℓ<L0} [Ẑ_ℓ(0) + Ẑ_{ℓ+1}(0)] Σ_j [Ẑ_ℓ(r_j) − Ẑ_{ℓ+1}(r_j)] δ`.
pub fn mean_virtual_wait(grid: &FluidGrid) -> f64 {
    let levels = grid.levels();
    let mut w = 0.0;
    for l in 2..=levels {
        w += grid.tail(l) * grid.tail(l);
    }
    for l in 1..levels {
        let weight = grid.tail(l) + grid.tail(l + 1);
        if weight == 0.0 {
            continue;
        }
        let area: f64 = grid.row(l).iter().zip(grid.row(l + 1)).map(|(a, b)| a - b).sum();
        w += weight * area * grid.delta();
    }
    w
}

/// Runs `solver` to `horizon`, recording the mean virtual wait every `stride` steps.
pub fn wait_series(solver: &mut FluidSolver, horizon: f64, stride: u64) -> Result<MetricSeries, MetricError> {
    let stride = stride.max(1);
    let (mut times, mut values) = (Vec::new(), Vec::new());
    solver.run_until(horizon, |g| {
        if g.step_index() % stride == 0 {
            times.push(g.time());
            values.push(mean_virtual_wait(g));
        }
    })?;
    MetricSeries::new("mean_virtual_wait", Provenance::Pde, times, values, None)
}

/// First time the series falls to half its initial value, linearly
/// interpolated. `None` if it never does or starts at zero.
pub fn relaxation_time(series: &MetricSeries) -> Option<f64> {
    let (t, w) = (series.times(), series.values());
    let w0 = *w.first()?;
    if !(w0 > 0.0) {
        return None;
    }
    let half = 0.5 * w0;
    for i in 1..w.len() {
        if w[i] <= half {
            let (a, b) = (w[i - 1], w[i]);
            let frac = if a == b { 0.0 } else { (a - half) / (a - b) };
            return Some(t[i - 1] + frac * (t[i] - t[i - 1]));
        }
    }
    None
}

/// Trapezoidal average of the series over its last full period, after at
/// least `warm` whole periods. Period boundaries fall on `k · period`.
pub fn period_averaged_wait(series: &MetricSeries, period: f64, warm: usize) -> Result<f64, MetricError> {
    let t = series.times();
    if t.is_empty() {
        return Err(MetricError::Empty);
    }
    if !(period > 0.0) {
        return Err(MetricError::BadPeriod);
    }
    let tol = 1e-9 * period.max(1.0);
    let covered = floor((t[t.len() - 1] + tol) / period) as usize;
    if covered < warm + 1 {
        return Err(MetricError::HorizonTooShort { covered, needed: warm + 1 });
    }
    let (a, b) = ((covered - 1) as f64 * period, covered as f64 * period);
    let lo = t.partition_point(|&s| s < a - tol);
    let hi = t.partition_point(|&s| s <= b + tol);
    if lo >= t.len() || (t[lo] - a).abs() > tol || (t[hi - 1] - b).abs() > tol {
        return Err(MetricError::BadPeriod);
    }
    Ok(trapezoid(&t[lo..hi], &series.values()[lo..hi]) / period)
}

fn trapezoid(t: &[f64], y: &[f64]) -> f64 {
    t.windows(2).zip(y.windows(2)).map(|(t, y)| 0.5 * (y[0] + y[1]) * (t[1] - t[0])).sum()
}

/// Stopping rules for long-run fluid averages.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LongRun {
    /// Whole periods discarded before any average is accepted.
    pub warm_periods: usize,
    /// Two consecutive period averages (or unit-time plateau samples) closer
    /// than this end the run.
    pub tolerance: f64,
    /// Give up after this much simulated time.
    pub max_horizon: f64,
}

impl Default for LongRun {
    fn default() -> Self {
        Self { warm_periods: 5, tolerance: 1e-4, max_horizon: 2000.0 }
    }
}

/// Result of a converged periodic run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodAverage {
    pub value: f64,
    pub previous: f64,
    pub periods: usize,
}

fn steps_per(params: &FluidParams, span: f64) -> Result<u64, MetricError> {
    match params.steps_to(span) {
        Ok(0) | Err(_) => Err(MetricError::BadPeriod),
        Ok(k) => Ok(k),
    }
}

/// Period-averaged mean virtual wait of an initially empty fluid network fed
/// by `profile`. Runs whole periods until two consecutive averages agree.
pub fn periodic_average(
    params: &FluidParams,
    dist: &ServiceDistribution,
    profile: ArrivalProfile,
    period: f64,
    rule: &LongRun,
) -> Result<PeriodAverage, MetricError> {
    let per = steps_per(params, period)?;
    let mut solver = FluidSolver::new(*params, dist, profile, &InitialCondition::empty())?;
    let dt = params.delta;
    let mut w_prev = mean_virtual_wait(solver.grid());
    let mut last = f64::NAN;
    let mut periods = 0usize;
    loop {
        let mut area = 0.0;
        for _ in 0..per {
            solver.step()?;
            let w = mean_virtual_wait(solver.grid());
            area += 0.5 * (w_prev + w) * dt;
            w_prev = w;
        }
        periods += 1;
        let avg = area / (per as f64 * dt);
        if periods > rule.warm_periods && (avg - last).abs() < rule.tolerance {
            return Ok(PeriodAverage { value: avg, previous: last, periods });
        }
        if periods as f64 * period >= rule.max_horizon {
            return Err(MetricError::NotConverged { horizon: solver.time(), change: (avg - last).abs() });
        }
        last = avg;
    }
}

/// Long-run mean virtual wait at constant `rate` from an empty start: the
/// first unit-time sample that differs from the previous one by less than
/// the tolerance.
pub fn plateau_wait(
    params: &FluidParams,
    dist: &ServiceDistribution,
    rate: f64,
    rule: &LongRun,
) -> Result<f64, MetricError> {
    let unit = steps_per(params, 1.0)?;
    let profile = ArrivalProfile::constant(rate).map_err(FluidError::from)?;
    let mut solver = FluidSolver::new(*params, dist, profile, &InitialCondition::empty())?;
    let mut last = mean_virtual_wait(solver.grid());
    let mut change = f64::INFINITY;
    let mut t = 0.0;
    while t < rule.max_horizon {
        solver.advance(unit)?;
        t += 1.0;
        let w = mean_virtual_wait(solver.grid());
        change = (w - last).abs();
        // an empty start rises before it settles; skip the first unit
        if t > 1.0 && change < rule.tolerance {
            return Ok(w);
        }
        last = w;
    }
    Err(MetricError::NotConverged { horizon: t, change })
}

/// Effective arrival rate and the quantities behind it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectiveRate {
    pub rate: f64,
    /// Period-averaged wait of the bursty profile.
    pub target: f64,
    pub evaluations: usize,
}

/// Search settings for [`effective_rate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateSearch {
    /// Upper end of the constant-rate bracket.
    pub max_rate: f64,
    /// Final bracket width.
    pub tolerance: f64,
    pub long_run: LongRun,
}

impl Default for RateSearch {
    fn default() -> Self {
        Self { max_rate: 0.999, tolerance: 1e-3, long_run: LongRun::default() }
    }
}

/// Constant rate whose plateau wait equals the period-averaged wait of the
/// square wave `mean ± burst`.
pub fn effective_rate(
    params: &FluidParams,
    dist: &ServiceDistribution,
    mean: f64,
    burst: f64,
    period: f64,
    search: &RateSearch,
) -> Result<EffectiveRate, MetricError> {
    if burst == 0.0 {
        return Ok(EffectiveRate { rate: mean, target: f64::NAN, evaluations: 0 });
    }
    let profile = ArrivalProfile::periodic(mean, burst, period).map_err(FluidError::from)?;
    let target = periodic_average(params, dist, profile, period, &search.long_run)?.value;
    effective_rate_for(target, mean, search, |c| plateau_wait(params, dist, c, &search.long_run))
}

/// Bisection behind [`effective_rate`] with a caller-supplied plateau map,
/// which lets callers cache plateau values across targets.
///
/// The bracket `[mean, max_rate]` and the number of halvings depend only on
/// `mean`, so for a fixed `mean` the result is monotone in `target`.
pub fn effective_rate_for<F>(target: f64, mean: f64, search: &RateSearch, mut plateau: F) -> Result<EffectiveRate, MetricError>
where
    F: FnMut(f64) -> Result<f64, MetricError>,
{
    let (lo0, hi0) = (mean, search.max_rate);
    if !(lo0 >= 0.0 && lo0 < hi0) || !(search.tolerance > 0.0) {
        return Err(MetricError::Bracket { lo: lo0, hi: hi0 });
    }
    let mut evaluations = 1;
    if target <= plateau(lo0)? {
        return Ok(EffectiveRate { rate: mean, target, evaluations });
    }
    let iterations = ceil(log2((hi0 - lo0) / search.tolerance)).max(0.0) as usize;
    let (mut lo, mut hi) = (lo0, hi0);
    let mut only_raised = true;
    for _ in 0..iterations {
        let mid = 0.5 * (lo + hi);
        evaluations += 1;
        if plateau(mid)? < target {
            lo = mid;
        } else {
            hi = mid;
            only_raised = false;
        }
    }
    if only_raised {
        evaluations += 1;
        let top = plateau(hi0)?;
        if top < target {
            return Err(MetricError::Unbounded { target, plateau: top });
        }
    }
    Ok(EffectiveRate { rate: 0.5 * (lo + hi), target, evaluations })
}

/// Mean virtual wait after a backlog history, and its relaxation time.
pub fn backlog_study(
    params: &FluidParams,
    dist: &ServiceDistribution,
    history: &crate::arrivals::Schedule,
    nominal_rate: f64,
    horizon: f64,
    stride: u64,
) -> Result<(MetricSeries, Option<f64>), MetricError> {
    let profile = ArrivalProfile::constant(nominal_rate).map_err(FluidError::from)?;
    let init = InitialCondition::Backlog { history: history.clone() };
    let mut solver = FluidSolver::new(*params, dist, profile, &init)?;
    let series = wait_series(&mut solver, horizon, stride)?;
    let relax = relaxation_time(&series);
    Ok((series, relax))
}

/// `P̂(X ≥ level)` over the ensemble's sample times.
pub fn tail_series(summary: &EnsembleSummary, level: usize) -> Result<MetricSeries, MetricError> {
    if level == 0 || level > summary.levels {
        return Err(MetricError::LevelOutOfRange { level, levels: summary.levels });
    }
    let est: Vec<_> = (0..summary.sample_times.len()).map(|k| summary.tail(k, level)).collect();
    Ok(MetricSeries::new(
        "queue_tail",
        Provenance::Mc,
        summary.sample_times.clone(),
        est.iter().map(|e| e.mean).collect(),
        Some(est.iter().map(|e| e.std_error).collect()),
    )?
    .with_level(level))
}

/// Ensemble mean virtual wait over the sample times.
pub fn virtual_wait_series(summary: &EnsembleSummary) -> Result<MetricSeries, MetricError> {
    MetricSeries::new(
        "mean_virtual_wait",
        Provenance::Mc,
        summary.sample_times.clone(),
        summary.virtual_wait.iter().map(|e| e.mean).collect(),
        Some(summary.virtual_wait.iter().map(|e| e.std_error).collect()),
    )
}

/// Tail curve `Ẑ_ℓ(·, 0)` at every recorded step of a trajectory.
pub fn pde_tail_series(traj: &Trajectory, level: usize) -> Result<MetricSeries, MetricError> {
    if level == 0 || level > traj.levels {
        return Err(MetricError::LevelOutOfRange { level, levels: traj.levels });
    }
    let rows = traj.rows();
    MetricSeries::new(
        "queue_tail",
        Provenance::Pde,
        (0..rows).map(|k| traj.time_of_row(k)).collect(),
        (0..rows).map(|k| traj.tails[k * traj.levels + level - 1]).collect(),
        None,
    )
    .map(|s| s.with_level(level))
}
