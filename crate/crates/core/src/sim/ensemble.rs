//! Independent seeded replications and their aggregation.
//!
//! Replication `k` of master seed `s` draws from `ChaCha8Rng::seed_from_u64(s)`
//! with its stream set to `k`, so any replication can be recomputed alone
//! and the result does not depend on how replications are scheduled.
//! Aggregation always folds replications in index order.

use alloc::vec;
use alloc::vec::Vec;

use libm::sqrt;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::engine::{RunConfig, Simulation};
use super::{init_state, InitialCondition, SimError};
use crate::arrivals::ArrivalProfile;
use crate::service::ServiceDistribution;
use crate::stats::{Accumulator, Estimate};

/// Everything one Monte Carlo replication needs.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleSpec {
    pub servers: usize,
    pub choices: u32,
    pub dist: ServiceDistribution,
    pub profile: ArrivalProfile,
    pub initial: InitialCondition,
    pub horizon: f64,
    pub sample_times: Vec<f64>,
    /// Tail levels ℓ = 1..=levels recorded at each sample.
    pub levels: usize,
    /// Actual-wait bin width; `None` skips the wait log.
    pub wait_bin: Option<f64>,
}

/// Per-replication measurements, indexed by sample time.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationResult {
    /// `samples × levels`, fraction of servers with at least ℓ jobs.
    pub tails: Vec<f64>,
    pub virtual_wait: Vec<f64>,
    pub virtual_wait_probe: Vec<f64>,
    pub first_two: Vec<[usize; 2]>,
    pub wait_sum: Vec<f64>,
    pub wait_sum_sq: Vec<f64>,
    pub wait_count: Vec<u64>,
}

/// Pairwise independence statistics for servers 0 and 1 at one sample time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChaosEstimate {
    pub level: usize,
    /// P̂(X¹ ≥ ℓ, X² ≥ ℓ).
    pub joint: f64,
    pub first: f64,
    pub second: f64,
    /// joint − first · second.
    pub difference: f64,
    /// Delta-method standard error of `difference`.
    pub std_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleSummary {
    pub sample_times: Vec<f64>,
    pub levels: usize,
    pub replications: usize,
    /// `samples × levels` estimates of P(X ≥ ℓ).
    pub tails: Vec<Estimate>,
    pub virtual_wait: Vec<Estimate>,
    pub virtual_wait_probe: Vec<Estimate>,
    /// `(bin start, estimate)` for bins that saw at least one arrival.
    pub actual_wait: Vec<(f64, Estimate)>,
    /// Pairwise independence at level 1.
    pub chaos: Vec<ChaosEstimate>,
}

impl EnsembleSummary {
    pub fn tail(&self, sample: usize, level: usize) -> Estimate {
        self.tails[sample * self.levels + level - 1]
    }
}

pub fn replication_rng(seed: u64, replication: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replication);
    rng
}

pub fn run_replication(spec: &EnsembleSpec, seed: u64, replication: u64) -> Result<ReplicationResult, SimError> {
    let mut rng = replication_rng(seed, replication);
    let state = init_state(&spec.initial, spec.servers, spec.choices, &spec.dist, &mut rng)?;
    let mut sim = Simulation::new(state, &spec.profile, &spec.dist, spec.choices)?;
    let cfg = RunConfig {
        horizon: spec.horizon,
        sample_times: &spec.sample_times,
        r_grid: &[0.0],
        levels: spec.levels,
        wait_bin: spec.wait_bin,
        log_events: false,
    };
    let out = sim.run(&cfg, &mut rng)?;
    let mut tails = Vec::with_capacity(spec.sample_times.len() * spec.levels);
    for s in &out.snapshots {
        tails.extend_from_slice(s.descriptor.tails());
    }
    let (wait_sum, wait_sum_sq, wait_count) = match out.waits {
        Some(w) => (w.sum, w.sum_sq, w.count),
        None => (vec![], vec![], vec![]),
    };
    Ok(ReplicationResult {
        tails,
        virtual_wait: out.snapshots.iter().map(|s| s.virtual_wait).collect(),
        virtual_wait_probe: out.snapshots.iter().map(|s| s.virtual_wait_probe).collect(),
        first_two: out.snapshots.iter().map(|s| s.first_two).collect(),
        wait_sum,
        wait_sum_sq,
        wait_count,
    })
}

/// Folds replications (in slice order) into means and standard errors.
pub fn aggregate(spec: &EnsembleSpec, reps: &[ReplicationResult]) -> EnsembleSummary {
    let samples = spec.sample_times.len();
    let levels = spec.levels;
    let mut tails = vec![Accumulator::new(); samples * levels];
    let mut vw = vec![Accumulator::new(); samples];
    let mut probe = vec![Accumulator::new(); samples];
    let bins = reps.first().map_or(0, |r| r.wait_count.len());
    let mut w_sum = vec![0.0; bins];
    let mut w_sq = vec![0.0; bins];
    let mut w_n = vec![0u64; bins];
    for r in reps {
        for (acc, &x) in tails.iter_mut().zip(&r.tails) {
            acc.push(x);
        }
        for (acc, &x) in vw.iter_mut().zip(&r.virtual_wait) {
            acc.push(x);
        }
        for (acc, &x) in probe.iter_mut().zip(&r.virtual_wait_probe) {
            acc.push(x);
        }
        for b in 0..bins {
            w_sum[b] += r.wait_sum[b];
            w_sq[b] += r.wait_sum_sq[b];
            w_n[b] += r.wait_count[b];
        }
    }
    let width = spec.wait_bin.unwrap_or(0.0);
    let actual_wait = (0..bins)
        .filter(|&b| w_n[b] > 0)
        .map(|b| {
            let n = w_n[b] as f64;
            let mean = w_sum[b] / n;
            let var = if w_n[b] > 1 { ((w_sq[b] - n * mean * mean) / (n - 1.0)).max(0.0) } else { 0.0 };
            (b as f64 * width, Estimate { mean, std_error: sqrt(var / n), count: w_n[b] })
        })
        .collect();
    let chaos = (0..samples).map(|k| chaos_estimate(reps, k, 1)).collect();
    EnsembleSummary {
        sample_times: spec.sample_times.clone(),
        levels,
        replications: reps.len(),
        tails: tails.iter().map(Accumulator::estimate).collect(),
        virtual_wait: vw.iter().map(Accumulator::estimate).collect(),
        virtual_wait_probe: probe.iter().map(Accumulator::estimate).collect(),
        actual_wait,
        chaos,
    }
}

fn chaos_estimate(reps: &[ReplicationResult], sample: usize, level: usize) -> ChaosEstimate {
    let n = reps.len() as f64;
    let ind = |r: &ReplicationResult, k: usize| (r.first_two[sample][k] >= level) as u8 as f64;
    let (mut a, mut b, mut j) = (0.0, 0.0, 0.0);
    for r in reps {
        let (x, y) = (ind(r, 0), ind(r, 1));
        a += x;
        b += y;
        j += x * y;
    }
    let (a, b, j) = (a / n, b / n, j / n);
    // influence of each replication on J − A·B
    let mut acc = Accumulator::new();
    for r in reps {
        let (x, y) = (ind(r, 0), ind(r, 1));
        acc.push((x * y - j) - b * (x - a) - a * (y - b));
    }
    let std_error = if reps.len() > 1 { sqrt(acc.variance() / n) } else { 0.0 };
    ChaosEstimate { level, joint: j, first: a, second: b, difference: j - a * b, std_error }
}

/// Sequential ensemble. Parallel drivers must produce the same per-index
/// results and pass them to [`aggregate`] in index order.
pub fn ensemble(spec: &EnsembleSpec, replications: usize, seed: u64) -> Result<EnsembleSummary, SimError> {
    if replications == 0 {
        return Err(SimError::NoReplications);
    }
    let reps = (0..replications as u64)
        .map(|k| run_replication(spec, seed, k))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(aggregate(spec, &reps))
}
