//! Pointwise comparison of a reference curve against an estimate.
//!
//! Only times present in both series are compared. A point passes when its
//! deviation is within the tolerance (scaled by the reference value when
//! relative) or within four standard errors of the estimate, whichever is
//! larger.

use sqdfluid_core::MetricSeries;

use crate::output::{num, Table};
use crate::Error;

/// Standard errors allowed on top of the tolerance.
pub const SE_MULTIPLIER: f64 = 4.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub metric: String,
    pub level: Option<usize>,
    pub points: usize,
    /// Largest absolute deviation over the common grid.
    pub max_deviation: f64,
    /// Largest deviation relative to the reference (0 where both are 0).
    pub max_relative: f64,
    /// Time of the point closest to failing.
    pub worst_time: f64,
    /// `4 · SE` at `worst_time`.
    pub envelope: f64,
    /// Allowance at `worst_time`.
    pub allowed: f64,
    pub tolerance: f64,
    pub relative: bool,
    pub failures: usize,
}

impl Comparison {
    pub fn pass(&self) -> bool {
        self.failures == 0
    }
}

fn same_time(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(1.0)
}

/// Compares `estimate` to `reference` on their common times at or after `from`.
pub fn compare(
    metric: &str,
    reference: &MetricSeries,
    estimate: &MetricSeries,
    tolerance: f64,
    relative: bool,
    from: f64,
) -> Result<Comparison, Error> {
    let mut c = Comparison {
        metric: metric.to_string(),
        level: reference.level.or(estimate.level),
        points: 0,
        max_deviation: 0.0,
        max_relative: 0.0,
        worst_time: f64::NAN,
        envelope: 0.0,
        allowed: 0.0,
        tolerance,
        relative,
        failures: 0,
    };
    let se = estimate.std_errors();
    let mut worst_ratio = f64::NEG_INFINITY;
    let (et, ev) = (estimate.times(), estimate.values());
    let mut j = 0;
    for (&t, &r) in reference.times().iter().zip(reference.values()) {
        if t < from - 1e-12 {
            continue;
        }
        while j < et.len() && et[j] < t && !same_time(et[j], t) {
            j += 1;
        }
        if j == et.len() || !same_time(et[j], t) {
            continue;
        }
        let dev = (ev[j] - r).abs();
        let envelope = SE_MULTIPLIER * se.map_or(0.0, |s| s[j]);
        let tol = if relative { tolerance * r.abs() } else { tolerance };
        let allowed = tol.max(envelope);
        c.points += 1;
        c.max_deviation = c.max_deviation.max(dev);
        if r != 0.0 {
            c.max_relative = c.max_relative.max(dev / r.abs());
        } else if dev > 0.0 {
            c.max_relative = f64::INFINITY;
        }
        if !(dev <= allowed) {
            c.failures += 1;
        }
        let ratio = if allowed > 0.0 { dev / allowed } else if dev > 0.0 { f64::INFINITY } else { 0.0 };
        if ratio > worst_ratio {
            worst_ratio = ratio;
            c.worst_time = t;
            c.envelope = envelope;
            c.allowed = allowed;
        }
    }
    if c.points == 0 {
        return Err(Error::Config(format!("{metric}: the two series share no times")));
    }
    Ok(c)
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    pub comparisons: Vec<Comparison>,
}

impl ValidationReport {
    pub fn pass(&self) -> bool {
        self.comparisons.iter().all(Comparison::pass)
    }

    pub fn find(&self, metric: &str, level: Option<usize>) -> Option<&Comparison> {
        self.comparisons.iter().find(|c| c.metric == metric && c.level == level)
    }

    pub fn to_table(&self) -> Table {
        let mut t = Table::new(&[
            "metric",
            "level",
            "points",
            "max_deviation",
            "max_relative",
            "worst_time",
            "envelope",
            "allowed",
            "tolerance",
            "relative",
            "failures",
            "pass",
        ]);
        for c in &self.comparisons {
            t.push(vec![
                c.metric.clone(),
                c.level.map(|l| l.to_string()).unwrap_or_default(),
                c.points.to_string(),
                num(c.max_deviation),
                num(c.max_relative),
                num(c.worst_time),
                num(c.envelope),
                num(c.allowed),
                num(c.tolerance),
                c.relative.to_string(),
                c.failures.to_string(),
                c.pass().to_string(),
            ]);
        }
        t
    }
}

impl std::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for c in &self.comparisons {
            let level = c.level.map(|l| format!("[{l}]")).unwrap_or_default();
            writeln!(
                f,
                "{} {}{}: max deviation {:.3e} (relative {:.3e}) over {} points, {} failing",
                if c.pass() { "PASS" } else { "FAIL" },
                c.metric,
                level,
                c.max_deviation,
                c.max_relative,
                c.points,
                c.failures
            )?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use sqdfluid_core::Provenance;

    fn series(t: &[f64], v: &[f64], se: Option<&[f64]>) -> MetricSeries {
        MetricSeries::new("x", Provenance::Mc, t.to_vec(), v.to_vec(), se.map(|s| s.to_vec())).unwrap()
    }

    #[test]
    fn identical_series_have_zero_deviation() {
        let a = series(&[0.0, 1.0], &[0.0, 0.0], None);
        let c = compare("w", &a, &a, 0.0, true, 0.0).unwrap();
        assert!(c.pass());
        assert_eq!((c.max_deviation, c.points), (0.0, 2));
    }

    #[test]
    fn envelope_can_rescue_a_point() {
        let r = series(&[1.0, 2.0], &[0.5, 0.5], None);
        let e = series(&[1.0, 2.0], &[0.56, 0.5], Some(&[0.02, 0.02]));
        assert!(compare("tail", &r, &e, 0.03, false, 0.0).unwrap().pass());
        let tight = series(&[1.0, 2.0], &[0.56, 0.5], Some(&[0.001, 0.001]));
        let c = compare("tail", &r, &tight, 0.03, false, 0.0).unwrap();
        assert_eq!(c.failures, 1);
        assert_eq!(c.worst_time, 1.0);
    }

    #[test]
    fn only_common_times_count() {
        let r = series(&[0.5, 1.0, 1.5, 2.0], &[1.0; 4], None);
        let e = series(&[1.0, 2.0, 3.0], &[1.0, 1.1, 9.0], None);
        let c = compare("w", &r, &e, 0.2, true, 0.0).unwrap();
        assert_eq!(c.points, 2);
        assert!(c.pass());
        assert!(compare("w", &r, &series(&[7.0], &[1.0], None), 0.1, false, 0.0).is_err());
    }

    #[test]
    fn start_time_skips_early_points() {
        let r = series(&[0.0, 1.0], &[0.01, 1.0], None);
        let e = series(&[0.0, 1.0], &[0.02, 1.0], None);
        assert!(!compare("w", &r, &e, 0.07, true, 0.0).unwrap().pass());
        assert!(compare("w", &r, &e, 0.07, true, 1.0).unwrap().pass());
    }
}
