//! Piecewise-constant arrival-rate profiles λ(·) and exact sampling of the
//! time-inhomogeneous Poisson process they drive.
//!
//! Rates are per server; an `N`-server network sees `N · λ(t)`.

use alloc::vec::Vec;

use libm::{floor, log};
use rand::Rng;

use crate::service::open_unit;

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum ArrivalError {
    #[error("rate must be finite and non-negative, got {0}")]
    InvalidRate(f64),
    #[error("burstiness {delta} exceeds mean rate {mean}")]
    BurstTooLarge { mean: f64, delta: f64 },
    #[error("period and segment durations must be positive and finite")]
    InvalidDuration,
    #[error("schedule needs at least one segment")]
    EmptySchedule,
    #[error("interval end {end} precedes start {start}")]
    ReversedInterval { start: f64, end: f64 },
    #[error("time must be non-negative, got {0}")]
    NegativeTime(f64),
}

/// One constant-rate stretch of a schedule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub duration: f64,
    pub rate: f64,
}

/// Sequence of constant-rate segments, either run once (rate 0 afterwards)
/// or repeated forever.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    segments: Vec<Segment>,
    repeat: bool,
    starts: Vec<f64>,
    // ∫ λ over the segments preceding each one
    mass_before: Vec<f64>,
    cycle: f64,
    cycle_mass: f64,
}

impl Schedule {
    pub fn new(segments: Vec<Segment>, repeat: bool) -> Result<Self, ArrivalError> {
        if segments.is_empty() {
            return Err(ArrivalError::EmptySchedule);
        }
        let last = segments.len() - 1;
        for (i, s) in segments.iter().enumerate() {
            check_rate(s.rate)?;
            // an open-ended final segment is allowed for one-shot schedules
            let open_end = !repeat && i == last && s.duration == f64::INFINITY;
            if !(s.duration > 0.0 && (s.duration.is_finite() || open_end)) {
                return Err(ArrivalError::InvalidDuration);
            }
        }
        let mut starts = Vec::with_capacity(segments.len());
        let mut mass_before = Vec::with_capacity(segments.len());
        let mut t = 0.0;
        let mut m = 0.0;
        for s in &segments {
            starts.push(t);
            mass_before.push(m);
            t += s.duration;
            if s.duration.is_finite() {
                m += s.duration * s.rate;
            }
        }
        Ok(Self { segments, repeat, starts, mass_before, cycle: t, cycle_mass: m })
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn repeats(&self) -> bool {
        self.repeat
    }

    /// Total length of one pass through the segments.
    pub fn cycle_length(&self) -> f64 {
        self.cycle
    }

    // Index of the segment containing `phase` (right-continuous).
    fn locate(&self, phase: f64) -> usize {
        match self.starts.partition_point(|&s| s <= phase) {
            0 => 0,
            k => k - 1,
        }
    }

    fn cumulative(&self, t: f64) -> f64 {
        let (cycles, phase) = if self.repeat {
            let k = floor(t / self.cycle);
            (k, (t - k * self.cycle).max(0.0))
        } else if t >= self.cycle {
            return self.cycle_mass;
        } else {
            (0.0, t)
        };
        let i = self.locate(phase);
        let within = (phase - self.starts[i]).min(self.segments[i].duration);
        cycles * self.cycle_mass + self.mass_before[i] + within * self.segments[i].rate
    }

    fn piece(&self, t: f64) -> Option<Piece> {
        if !self.repeat {
            if t >= self.cycle {
                return None;
            }
            let i = self.locate(t);
            return Some(Piece { end: self.starts[i] + self.segments[i].duration, rate: self.segments[i].rate });
        }
        let mut k = floor(t / self.cycle);
        let mut phase = t - k * self.cycle;
        if phase >= self.cycle {
            k += 1.0;
            phase = 0.0;
        }
        let i = self.locate(phase.max(0.0));
        let mut end = k * self.cycle + self.starts[i] + self.segments[i].duration;
        if end <= t {
            // rounding put us on the boundary; the next segment starts here
            let j = (i + 1) % self.segments.len();
            let kk = if j == 0 { k + 1.0 } else { k };
            end = kk * self.cycle + self.starts[j] + self.segments[j].duration;
            return Some(Piece { end, rate: self.segments[j].rate });
        }
        Some(Piece { end, rate: self.segments[i].rate })
    }
}

/// Time-varying per-server arrival rate.
#[derive(Debug, Clone, PartialEq)]
pub enum ArrivalProfile {
    Constant { rate: f64 },
    Piecewise(Schedule),
    /// `mean_rate + delta` in the first half of each period, `mean_rate - delta` in the second.
    PeriodicSquare { mean_rate: f64, delta: f64, period: f64 },
}

#[derive(Debug, Clone, Copy)]
struct Piece {
    end: f64,
    rate: f64,
}

fn check_rate(r: f64) -> Result<(), ArrivalError> {
    if r.is_finite() && r >= 0.0 {
        Ok(())
    } else {
        Err(ArrivalError::InvalidRate(r))
    }
}

impl ArrivalProfile {
    pub fn constant(rate: f64) -> Result<Self, ArrivalError> {
        check_rate(rate)?;
        Ok(Self::Constant { rate })
    }

    pub fn piecewise(segments: Vec<Segment>, repeat: bool) -> Result<Self, ArrivalError> {
        Ok(Self::Piecewise(Schedule::new(segments, repeat)?))
    }

    pub fn periodic(mean_rate: f64, delta: f64, period: f64) -> Result<Self, ArrivalError> {
        check_rate(mean_rate)?;
        check_rate(delta)?;
        if delta > mean_rate {
            return Err(ArrivalError::BurstTooLarge { mean: mean_rate, delta });
        }
        if !(period.is_finite() && period > 0.0) {
            return Err(ArrivalError::InvalidDuration);
        }
        Ok(Self::PeriodicSquare { mean_rate, delta, period })
    }

    /// λ(t), right-continuous at segment boundaries.
    pub fn rate(&self, t: f64) -> f64 {
        match self {
            Self::Constant { rate } => *rate,
            Self::Piecewise(s) => s.piece(t.max(0.0)).map_or(0.0, |p| p.rate),
            Self::PeriodicSquare { .. } => self.periodic_piece(t.max(0.0)).rate,
        }
    }

    /// Λ(t) = ∫₀ᵗ λ(u) du.
    pub fn cumulative(&self, t: f64) -> f64 {
        let t = t.max(0.0);
        match self {
            Self::Constant { rate } => rate * t,
            Self::Piecewise(s) => s.cumulative(t),
            Self::PeriodicSquare { mean_rate, delta, period } => {
                let k = floor(t / period);
                let phase = (t - k * period).max(0.0);
                let half = 0.5 * period;
                let partial = if phase < half {
                    (mean_rate + delta) * phase
                } else {
                    (mean_rate + delta) * half + (mean_rate - delta) * (phase - half)
                };
                k * mean_rate * period + partial
            }
        }
    }

    /// ∫_{t1}^{t2} λ(u) du.
    pub fn integrated_rate(&self, t1: f64, t2: f64) -> Result<f64, ArrivalError> {
        if t1 < 0.0 {
            return Err(ArrivalError::NegativeTime(t1));
        }
        if t2 < t1 {
            return Err(ArrivalError::ReversedInterval { start: t1, end: t2 });
        }
        if let Self::Constant { rate } = self {
            return Ok(rate * (t2 - t1));
        }
        Ok((self.cumulative(t2) - self.cumulative(t1)).max(0.0))
    }

    fn periodic_piece(&self, t: f64) -> Piece {
        let Self::PeriodicSquare { mean_rate, delta, period } = *self else {
            unreachable!("periodic_piece on non-periodic profile")
        };
        let half = 0.5 * period;
        let mut h = floor(t / half);
        let mut end = (h + 1.0) * half;
        if end <= t {
            h += 1.0;
            end = (h + 1.0) * half;
        }
        let peak = (h as i64).rem_euclid(2) == 0;
        Piece { end, rate: if peak { mean_rate + delta } else { mean_rate - delta } }
    }

    fn piece(&self, t: f64) -> Option<Piece> {
        match self {
            Self::Constant { rate } => Some(Piece { end: f64::INFINITY, rate: *rate }),
            Self::Piecewise(s) => s.piece(t),
            Self::PeriodicSquare { .. } => Some(self.periodic_piece(t)),
        }
    }

    // Whether any arrivals can ever happen after `t`.
    fn exhausted_after(&self, t: f64) -> bool {
        match self {
            Self::Constant { rate } => *rate == 0.0,
            Self::PeriodicSquare { mean_rate, .. } => *mean_rate == 0.0,
            Self::Piecewise(s) => {
                if s.repeat {
                    return s.cycle_mass == 0.0;
                }
                let last = s.segments.len() - 1;
                if s.segments[last].duration.is_infinite() && s.segments[last].rate > 0.0 {
                    return false;
                }
                let finite_end = if s.cycle.is_finite() { s.cycle } else { s.starts[last] };
                t >= finite_end || s.cumulative(finite_end) - s.cumulative(t) == 0.0
            }
        }
    }

    /// Next event time after `t` of the Poisson process with rate
    /// `multiplier · λ(·)`, given a unit-exponential draw `unit_exp`.
    /// `None` when the rate vanishes on the rest of the horizon.
    pub fn next_arrival_from_exp(&self, t: f64, multiplier: f64, unit_exp: f64) -> Option<f64> {
        if multiplier <= 0.0 || self.exhausted_after(t) {
            return None;
        }
        let mut remaining = unit_exp;
        let mut now = t.max(0.0);
        loop {
            let piece = self.piece(now)?;
            let rate = multiplier * piece.rate;
            if rate > 0.0 {
                let span = piece.end - now;
                let mass = rate * span;
                if remaining <= mass || !span.is_finite() {
                    return Some(now + remaining / rate);
                }
                remaining -= mass;
            } else if !piece.end.is_finite() {
                return None;
            }
            now = piece.end;
        }
    }

    /// Samples the next arrival after `t` for an `multiplier`-server network.
    pub fn next_arrival<R: Rng + ?Sized>(&self, t: f64, multiplier: f64, rng: &mut R) -> Option<f64> {
        let e = -log(open_unit(rng));
        self.next_arrival_from_exp(t, multiplier, e)
    }

    /// Mean rate over one period (or the constant rate). For one-shot
    /// schedules this is the average over the scheduled span.
    pub fn mean_rate(&self) -> f64 {
        match self {
            Self::Constant { rate } => *rate,
            Self::PeriodicSquare { mean_rate, .. } => *mean_rate,
            Self::Piecewise(s) => {
                if s.cycle.is_finite() {
                    s.cycle_mass / s.cycle
                } else {
                    s.segments.last().map_or(0.0, |l| l.rate)
                }
            }
        }
    }
}
