use alloc::vec;
use alloc::vec::Vec;

use libm::exp;

use super::routing::routing_probability;
use super::state::NetworkState;
use crate::service::{ServiceDistribution, SURVIVAL_UNDERFLOW};

/// Scaled age-weighted descriptor at one instant:
/// `z(ℓ, r) = (1/N) Σ_{i : X_i ≥ ℓ} Ḡ(a_i + r) / Ḡ(a_i)` and `s(ℓ) = #{i : X_i ≥ ℓ} / N`.
#[derive(Debug, Clone, PartialEq)]
pub struct DescriptorSample {
    pub t: f64,
    pub levels: usize,
    pub r_grid: Vec<f64>,
    z: Vec<f64>,
    s: Vec<f64>,
    /// Terms dropped because the survival ratio could not be represented.
    pub excluded: usize,
}

impl DescriptorSample {
    /// `level` is 1-based.
    pub fn z(&self, level: usize, r_index: usize) -> f64 {
        self.z[(level - 1) * self.r_grid.len() + r_index]
    }

    pub fn s(&self, level: usize) -> f64 {
        self.s[level - 1]
    }

    pub fn tails(&self) -> &[f64] {
        &self.s
    }
}

/// Ḡ(a + r) / Ḡ(a), through log-survival differences once Ḡ(a) underflows.
fn survival_ratio(dist: &ServiceDistribution, age: f64, r: f64) -> f64 {
    if r == 0.0 {
        return 1.0;
    }
    let base = dist.sf(age);
    if base >= SURVIVAL_UNDERFLOW {
        dist.sf(age + r) / base
    } else {
        exp(dist.ln_sf(age + r) - dist.ln_sf(age))
    }
}

/// Evaluates the descriptor for `levels` queue levels on `r_grid`.
pub fn measure_descriptor(
    state: &NetworkState,
    dist: &ServiceDistribution,
    levels: usize,
    r_grid: &[f64],
) -> DescriptorSample {
    let nr = r_grid.len();
    let mut z = vec![0.0; levels * nr];
    let mut counts = vec![0usize; levels];
    let mut ratios = vec![0.0; nr];
    let mut excluded = 0;
    for (i, len) in state.queue_lengths().enumerate() {
        if len == 0 {
            continue;
        }
        let top = len.min(levels);
        for c in counts.iter_mut().take(top) {
            *c += 1;
        }
        let age = state.age(i).expect("busy server has an age");
        let mut usable = true;
        for (k, &r) in r_grid.iter().enumerate() {
            let q = survival_ratio(dist, age, r);
            if !q.is_finite() {
                usable = false;
                break;
            }
            ratios[k] = q;
        }
        if !usable {
            excluded += 1;
            continue;
        }
        for l in 0..top {
            let row = &mut z[l * nr..(l + 1) * nr];
            for (acc, q) in row.iter_mut().zip(&ratios) {
                *acc += q;
            }
        }
    }
    let n = state.servers() as f64;
    z.iter_mut().for_each(|v| *v /= n);
    let s = counts.iter().map(|&c| c as f64 / n).collect();
    DescriptorSample { t: state.clock(), levels, r_grid: r_grid.to_vec(), z, s, excluded }
}

/// Mean virtual waiting time conditional on the current state: the routing
/// law of SQ(d) averaged over the exact work ahead at every server.
pub fn expected_virtual_wait(state: &NetworkState, choices: u32) -> f64 {
    let n = state.servers();
    let max_len = state.queue_lengths().max().unwrap_or(0);
    if max_len == 0 {
        return 0.0;
    }
    let mut count = vec![0usize; max_len + 2];
    let mut work = vec![0.0; max_len + 2];
    for i in 0..n {
        let l = state.queue_len(i);
        count[l] += 1;
        if l > 0 {
            work[l] += state.work_ahead(i);
        }
    }
    // at_least[l] = #{X_i ≥ l}
    let mut at_least = vec![0usize; max_len + 2];
    for l in (0..=max_len).rev() {
        at_least[l] = at_least[l + 1] + count[l];
    }
    let nf = n as f64;
    (1..=max_len)
        .filter(|&l| count[l] > 0)
        .map(|l| {
            let p = routing_probability(at_least[l] as f64 / nf, at_least[l + 1] as f64 / nf, choices);
            p * work[l] / count[l] as f64
        })
        .sum()
}
