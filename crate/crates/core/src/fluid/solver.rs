use alloc::vec::Vec;

use libm::{floor, pow, round};

use super::grid::FluidGrid;
use super::FluidError;
use crate::arrivals::ArrivalProfile;
use crate::initial::InitialCondition;
use crate::service::{ServiceDistribution, SURVIVAL_UNDERFLOW};

/// Truncation and mesh parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FluidParams {
    /// Queue-length truncation `L0`; `Ẑ_{L0+1} ≡ 0`.
    pub levels: usize,
    /// Residual-axis truncation `R0`.
    pub r_max: f64,
    /// Mesh step in both `t` and `r`.
    pub delta: f64,
    /// Number of sampled queues `d`.
    pub choices: u32,
    /// Allows `d ≠ 2` (routing factor generalised from the SQ(2) system).
    pub general_choices: bool,
    /// Largest clamp correction tolerated per step before the step fails.
    pub correction_limit: f64,
}

impl FluidParams {
    pub fn new(levels: usize, r_max: f64, delta: f64) -> Self {
        Self { levels, r_max, delta, choices: 2, general_choices: false, correction_limit: 1e-6 }
    }

    /// Enables the SQ(d) extension.
    pub fn with_choices(mut self, choices: u32) -> Self {
        self.choices = choices;
        self.general_choices = true;
        self
    }

    pub fn points(&self) -> usize {
        floor(self.r_max / self.delta + 1e-9) as usize + 1
    }

    fn validate(&self) -> Result<(), FluidError> {
        if self.levels < 2 {
            return Err(FluidError::TooFewLevels(self.levels));
        }
        if !(self.delta.is_finite() && self.delta > 0.0) {
            return Err(FluidError::InvalidStep(self.delta));
        }
        if !(self.r_max.is_finite() && self.r_max >= self.delta) {
            return Err(FluidError::InvalidWindow { r_max: self.r_max, delta: self.delta });
        }
        if self.choices == 0 || (self.choices != 2 && !self.general_choices) {
            return Err(FluidError::ChoicesNeedExtension(self.choices));
        }
        Ok(())
    }

    /// Number of steps to reach `t`, which must lie on the mesh.
    pub fn steps_to(&self, t: f64) -> Result<u64, FluidError> {
        let k = round(t / self.delta);
        if !(k >= 0.0) || (k * self.delta - t).abs() > 1e-6 * self.delta + 1e-12 * t.abs() {
            return Err(FluidError::HorizonOffGrid { horizon: t, delta: self.delta });
        }
        Ok(k as u64)
    }
}

/// Per-run bookkeeping of the post-step clamp.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StepDiagnostics {
    /// Largest clamp/monotonization correction seen in any step.
    pub max_correction: f64,
    pub steps: u64,
}

/// Advances a [`FluidGrid`] in time.
#[derive(Debug, Clone)]
pub struct FluidSolver {
    params: FluidParams,
    profile: ArrivalProfile,
    survival: Vec<f64>,
    ghost_ratio: f64,
    ones: Vec<f64>,
    current: FluidGrid,
    scratch: FluidGrid,
    diagnostics: StepDiagnostics,
}

/// Queue tails at every step plus full slices at requested times.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub delta: f64,
    pub levels: usize,
    /// Step index of the first row of `tails`.
    pub first_step: u64,
    /// `rows × levels`, `Ẑ_ℓ(t, 0)` after each step.
    pub tails: Vec<f64>,
    pub slices: Vec<FluidGrid>,
    pub diagnostics: StepDiagnostics,
}

impl Trajectory {
    pub fn rows(&self) -> usize {
        self.tails.len() / self.levels
    }

    pub fn time_of_row(&self, row: usize) -> f64 {
        (self.first_step + row as u64) as f64 * self.delta
    }

    /// `Ẑ_level(t, 0)` at the row whose time is `t`, if `t` lies on the mesh.
    pub fn tail_at(&self, t: f64, level: usize) -> Option<f64> {
        if level == 0 || level > self.levels {
            return None;
        }
        let k = round(t / self.delta);
        if (k * self.delta - t).abs() > 1e-6 * self.delta + 1e-12 * t.abs() || k < self.first_step as f64 {
            return None;
        }
        let row = (k as u64 - self.first_step) as usize;
        (row < self.rows()).then(|| self.tails[row * self.levels + level - 1])
    }

    pub fn slice_at(&self, t: f64) -> Option<&FluidGrid> {
        self.slices.iter().find(|g| (g.time() - t).abs() <= 1e-6 * self.delta + 1e-12 * t.abs())
    }
}

/// `Σ_{i<d} a^i b^{d−1−i}`, i.e. `(a^d − b^d)/(a − b)`; `a + b` for `d = 2`.
#[inline]
fn routing_factor(a: f64, b: f64, choices: u32) -> f64 {
    if choices == 2 {
        return a + b;
    }
    (0..choices).map(|i| pow(a, i as f64) * pow(b, (choices - 1 - i) as f64)).sum()
}

/// Values below this are stored as zero so the grid never holds subnormals,
/// which would slow every later step by orders of magnitude.
const FLUSH: f64 = 1e-280;

#[inline(always)]
fn clamp(v: f64, hi: f64) -> f64 {
    let v = if v < FLUSH { 0.0 } else { v };
    if v > hi {
        hi
    } else {
        v
    }
}

const LANES: usize = 8;

/// `out[n] = clamp(shifted[n] + gain·g[n] + transfer·(above[n] − own[n]))` with
/// the largest clamp correction and a finiteness flag. Lane-wise
/// accumulators keep the loop vectorizable.
#[allow(clippy::too_many_arguments)]
#[inline]
fn update_row(
    out: &mut [f64],
    shifted: &[f64],
    g: &[f64],
    gain: f64,
    transfer: f64,
    above: &[f64],
    upper: &[f64],
) -> (f64, bool) {
    let n = out.len();
    let body = n - n % LANES;
    let mut corr = [0.0f64; LANES];
    let mut ok = [true; LANES];
    let lanes = out[..body]
        .chunks_exact_mut(LANES)
        .zip(shifted[..body].chunks_exact(LANES))
        .zip(g[..body].chunks_exact(LANES))
        .zip(above[..body].chunks_exact(LANES))
        .zip(upper[..body].chunks_exact(LANES));
    for ((((o, s), g), a), u) in lanes {
        for k in 0..LANES {
            let v = s[k] + gain * g[k] + transfer * (a[k] - s[k]);
            ok[k] &= v.is_finite();
            let cl = clamp(v, u[k]);
            let c = (v - cl).abs();
            corr[k] = if c > corr[k] { c } else { corr[k] };
            o[k] = cl;
        }
    }
    let mut worst = corr.iter().fold(0.0f64, |a, &b| a.max(b));
    let mut finite = ok.iter().all(|&b| b);
    for i in body..n {
        let v = shifted[i] + gain * g[i] + transfer * (above[i] - shifted[i]);
        finite &= v.is_finite();
        let cl = clamp(v, upper[i]);
        worst = worst.max((v - cl).abs());
        out[i] = cl;
    }
    (worst, finite)
}

/// Evaluates an initial condition on the residual grid. Backlog histories are
/// integrated from the empty grid and the terminal slice becomes time zero.
pub fn initial_grid(
    kind: &InitialCondition,
    dist: &ServiceDistribution,
    params: &FluidParams,
) -> Result<FluidGrid, FluidError> {
    params.validate()?;
    let points = params.points();
    let mut grid = FluidGrid::zeros(params.levels, points, params.delta);
    match kind {
        InitialCondition::JobsPerQueue { jobs } => {
            for l in 1..=(*jobs as usize).min(params.levels) {
                for (n, v) in grid.row_mut(l).iter_mut().enumerate() {
                    *v = dist.sf(n as f64 * params.delta);
                }
            }
        }
        InitialCondition::StationaryAge { jobs } => {
            for l in 1..=(*jobs as usize).min(params.levels) {
                for (n, v) in grid.row_mut(l).iter_mut().enumerate() {
                    *v = dist.stationary_age_ccdf(n as f64 * params.delta).unwrap_or(0.0);
                }
            }
        }
        InitialCondition::Backlog { history } => {
            let profile = ArrivalProfile::Piecewise(history.clone());
            let steps = params.steps_to(history.cycle_length())?;
            let mut pre = FluidSolver::from_grid(*params, dist, profile, grid)?;
            pre.advance(steps)?;
            grid = pre.into_grid();
            grid.set_step(0);
        }
    }
    Ok(grid)
}

impl FluidSolver {
    pub fn new(
        params: FluidParams,
        dist: &ServiceDistribution,
        profile: ArrivalProfile,
        initial: &InitialCondition,
    ) -> Result<Self, FluidError> {
        let grid = initial_grid(initial, dist, &params)?;
        Self::from_grid(params, dist, profile, grid)
    }

    /// Starts from an explicit slice (its step index is kept).
    pub fn from_grid(
        params: FluidParams,
        dist: &ServiceDistribution,
        profile: ArrivalProfile,
        grid: FluidGrid,
    ) -> Result<Self, FluidError> {
        params.validate()?;
        let points = params.points();
        if grid.levels() != params.levels || grid.points() != points || grid.delta() != params.delta {
            return Err(FluidError::GridMismatch);
        }
        let survival: Vec<f64> = (0..points)
            .map(|n| dist.sf(n as f64 * params.delta))
            .map(|v| if v < FLUSH { 0.0 } else { v })
            .collect();
        let r_last = (points - 1) as f64 * params.delta;
        let tail = dist.sf(r_last);
        let ghost_ratio = if tail < SURVIVAL_UNDERFLOW { 0.0 } else { dist.sf(r_last + params.delta) / tail };
        let mut scratch = grid.clone();
        scratch.values_mut().iter_mut().for_each(|v| *v = 0.0);
        Ok(Self { params, profile, survival, ghost_ratio, ones: alloc::vec![1.0; points], current: grid, scratch, diagnostics: StepDiagnostics::default() })
    }

    pub fn params(&self) -> &FluidParams {
        &self.params
    }

    pub fn grid(&self) -> &FluidGrid {
        &self.current
    }

    pub fn into_grid(self) -> FluidGrid {
        self.current
    }

    pub fn time(&self) -> f64 {
        self.current.time()
    }

    pub fn diagnostics(&self) -> StepDiagnostics {
        self.diagnostics
    }

    /// Replaces the arrival profile (times stay absolute).
    pub fn set_profile(&mut self, profile: ArrivalProfile) {
        self.profile = profile;
    }

    /// One explicit step `t → t + δ`.
    pub fn step(&mut self) -> Result<(), FluidError> {
        let delta = self.params.delta;
        let d = self.params.choices;
        let levels = self.params.levels;
        let step = self.current.step_index();
        let t = step as f64 * delta;
        let mass = self.profile.integrated_rate(t, t + delta)?;
        let old = &self.current;
        let np = old.points();
        let last = np - 1;
        let g = &self.survival[..];
        let ghost = self.ghost_ratio;
        let mut worst: f64 = 0.0;

        let ones = &self.ones[..];
        let new_values = self.scratch.values_mut();
        for l in 1..=levels {
            let o = old.row(l);
            let dep = if l < levels { old.z(l + 1, 1) - old.z(l + 1, 0) } else { 0.0 };
            let (done, rest) = new_values.split_at_mut((l - 1) * np);
            let out = &mut rest[..np];
            // ℓ = 1 has no transfer term; the arrivals enter through Ḡ instead
            let (above_old, upper, gain, transfer) = if l == 1 {
                (o, ones, (1.0 - pow(o[0], d as f64)) * mass - dep, 0.0)
            } else {
                let above_old = old.row(l - 1);
                let b = routing_factor(above_old[0], o[0], d) * mass;
                (above_old, &done[(l - 2) * np..(l - 1) * np], -dep, b)
            };
            // the transfer term is read at the upwind point like the transport term
            let (mut corr, mut finite) =
                update_row(&mut out[..last], &o[1..], &g[..last], gain, transfer, &above_old[1..], &upper[..last]);
            let v = o[last] * ghost + g[last] * gain + transfer * (above_old[last] - o[last]) * ghost;
            finite &= v.is_finite();
            let cl = clamp(v, upper[last]);
            corr = corr.max((v - cl).abs());
            out[last] = cl;
            if !finite {
                let r_index = out.iter().position(|v| !v.is_finite()).unwrap_or(0);
                return Err(FluidError::NonFinite { t: t + delta, level: l, r_index });
            }
            if corr > self.params.correction_limit {
                return Err(FluidError::Instability {
                    t: t + delta,
                    level: l,
                    correction: corr,
                    limit: self.params.correction_limit,
                });
            }
            worst = worst.max(corr);
        }
        // NaN inputs are caught above; `max`/`min` would otherwise swallow them
        self.scratch.set_step(step + 1);
        core::mem::swap(&mut self.current, &mut self.scratch);
        self.diagnostics.max_correction = self.diagnostics.max_correction.max(worst);
        self.diagnostics.steps += 1;
        Ok(())
    }

    /// Takes `steps` steps.
    pub fn advance(&mut self, steps: u64) -> Result<(), FluidError> {
        for _ in 0..steps {
            self.step()?;
        }
        Ok(())
    }

    /// Steps until absolute time `t`, calling `observe` on every slice
    /// (including the current one).
    pub fn run_until<F: FnMut(&FluidGrid)>(&mut self, t: f64, mut observe: F) -> Result<(), FluidError> {
        let target = self.params.steps_to(t)?;
        observe(&self.current);
        while self.current.step_index() < target {
            self.step()?;
            observe(&self.current);
        }
        Ok(())
    }

    /// Integrates to `horizon`, keeping `Ẑ_ℓ(·, 0)` at every step and full
    /// slices at `output_times`.
    pub fn solve(&mut self, horizon: f64, output_times: &[f64]) -> Result<Trajectory, FluidError> {
        let target = self.params.steps_to(horizon)?;
        let mut wanted = output_times
            .iter()
            .map(|&t| self.params.steps_to(t))
            .collect::<Result<Vec<_>, _>>()?;
        wanted.sort_unstable();
        wanted.dedup();
        let levels = self.params.levels;
        let first_step = self.current.step_index();
        let rows = target.saturating_sub(first_step) as usize + 1;
        let mut tails = Vec::with_capacity(rows * levels);
        let mut slices = Vec::new();
        let mut next_out = wanted.iter().peekable();
        loop {
            let g = &self.current;
            tails.extend((1..=levels).map(|l| g.tail(l)));
            while let Some(&&k) = next_out.peek() {
                if k < g.step_index() {
                    next_out.next();
                } else {
                    if k == g.step_index() {
                        slices.push(g.clone());
                        next_out.next();
                    }
                    break;
                }
            }
            if self.current.step_index() >= target {
                break;
            }
            self.step()?;
        }
        Ok(Trajectory {
            delta: self.params.delta,
            levels,
            first_step,
            tails,
            slices,
            diagnostics: self.diagnostics,
        })
    }
}
