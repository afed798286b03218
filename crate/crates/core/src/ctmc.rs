//! Exact transient distribution of a small SQ(d) network with exponential
//! service, by uniformization of the queue-length chain truncated at a cap.

use alloc::vec;
use alloc::vec::Vec;

use libm::{exp, log};

use crate::special::ln_gamma;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CtmcError {
    #[error("state space of {0} states is too large")]
    TooLarge(usize),
    #[error("need at least one server and one choice")]
    Empty,
    #[error("arrival rate must be finite and non-negative, got {0}")]
    InvalidRate(f64),
    #[error("initial queue lengths must match the server count and stay below the cap")]
    InvalidInitial,
    #[error("times must be non-negative and non-decreasing")]
    UnsortedTimes,
    #[error("mass {mass:e} at the cap exceeds {limit:e}; raise the cap")]
    CapTooSmall { mass: f64, limit: f64 },
}

/// Queue-length marginals at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct CtmcMarginals {
    pub t: f64,
    /// `tails[s][ℓ-1] = P(X^s ≥ ℓ)` for `ℓ = 1..=cap`.
    pub tails: Vec<Vec<f64>>,
    /// Probability that some queue sits at the cap.
    pub boundary_mass: f64,
    /// Poisson mass dropped by truncating the uniformization series, summed
    /// over all time intervals so far.
    pub truncation: f64,
}

impl CtmcMarginals {
    /// Expected fraction of servers with at least `level` jobs.
    pub fn fraction_at_least(&self, level: usize) -> f64 {
        if level == 0 {
            return 1.0;
        }
        let n = self.tails.len() as f64;
        self.tails.iter().map(|t| t.get(level - 1).copied().unwrap_or(0.0)).sum::<f64>() / n
    }
}

/// Boundary mass tolerated before a cap is declared too small.
pub const BOUNDARY_LIMIT: f64 = 1e-8;
const MAX_STATES: usize = 1 << 20;

struct Chain {
    servers: usize,
    cap: usize,
    rate: f64,
    choices: u32,
    states: usize,
}

impl Chain {
    fn decode(&self, mut idx: usize, out: &mut [usize]) {
        for q in out.iter_mut() {
            *q = idx % (self.cap + 1);
            idx /= self.cap + 1;
        }
    }

    fn encode(&self, q: &[usize]) -> usize {
        q.iter().rev().fold(0, |acc, &x| acc * (self.cap + 1) + x)
    }

    /// Probability each server receives the next arrival.
    fn routing(&self, q: &[usize], out: &mut [f64]) {
        out.iter_mut().for_each(|p| *p = 0.0);
        let n = self.servers;
        let d = self.choices as usize;
        let tuples = n.pow(self.choices);
        let w = 1.0 / tuples as f64;
        let mut picks = vec![0usize; d];
        for mut t in 0..tuples {
            for p in picks.iter_mut() {
                *p = t % n;
                t /= n;
            }
            let best = picks.iter().map(|&s| q[s]).min().unwrap_or(0);
            let tied = picks.iter().filter(|&&s| q[s] == best).count() as f64;
            for &s in picks.iter().filter(|&&s| q[s] == best) {
                out[s] += w / tied;
            }
        }
    }

    /// One application of the uniformized kernel `P = I + Q/ν`.
    fn apply(&self, nu: f64, p: &[f64], out: &mut [f64], q: &mut [usize], route: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        let lambda = self.rate * self.servers as f64;
        for (i, &mass) in p.iter().enumerate() {
            if mass == 0.0 {
                continue;
            }
            self.decode(i, q);
            let mut stay = 1.0;
            for s in 0..self.servers {
                if q[s] > 0 {
                    q[s] -= 1;
                    out[self.encode(q)] += mass / nu;
                    q[s] += 1;
                    stay -= 1.0 / nu;
                }
            }
            if lambda > 0.0 {
                self.routing(q, route);
                for s in 0..self.servers {
                    // arrivals routed to a full queue are lost
                    if q[s] < self.cap && route[s] > 0.0 {
                        let r = lambda * route[s] / nu;
                        q[s] += 1;
                        out[self.encode(q)] += mass * r;
                        q[s] -= 1;
                        stay -= r;
                    }
                }
            }
            out[i] += mass * stay;
        }
    }
}

/// Transient queue-length marginals of `servers` exponential (rate 1) FIFO
/// queues fed at rate `servers · rate` under SQ(`choices`) routing.
pub fn transient(
    servers: usize,
    choices: u32,
    rate: f64,
    cap: usize,
    initial: &[usize],
    times: &[f64],
) -> Result<Vec<CtmcMarginals>, CtmcError> {
    if servers == 0 || choices == 0 || cap == 0 {
        return Err(CtmcError::Empty);
    }
    if !(rate.is_finite() && rate >= 0.0) {
        return Err(CtmcError::InvalidRate(rate));
    }
    if initial.len() != servers || initial.iter().any(|&x| x >= cap) {
        return Err(CtmcError::InvalidInitial);
    }
    if times.iter().any(|&t| !(t >= 0.0)) || times.windows(2).any(|w| w[1] < w[0]) {
        return Err(CtmcError::UnsortedTimes);
    }
    let states = (cap + 1).checked_pow(servers as u32).filter(|&s| s <= MAX_STATES).ok_or(CtmcError::TooLarge(usize::MAX))?;
    let chain = Chain { servers, cap, rate, choices, states };
    let nu = servers as f64 * (rate + 1.0);

    let mut p = vec![0.0; chain.states];
    p[chain.encode(initial)] = 1.0;
    let mut term = vec![0.0; chain.states];
    let mut next = vec![0.0; chain.states];
    let mut acc = vec![0.0; chain.states];
    let mut q = vec![0usize; servers];
    let mut route = vec![0.0; servers];
    let mut now = 0.0;
    let mut truncation = 0.0;
    let mut out = Vec::with_capacity(times.len());

    for &t in times {
        while t > now {
            // keep e^{-νΔt} representable
            let span = (t - now).min(500.0 / nu);
            let a = nu * span;
            let ln_a = log(a);
            acc.iter_mut().for_each(|v| *v = 0.0);
            term.copy_from_slice(&p);
            let mut weight_sum = 0.0;
            let mut k = 0usize;
            loop {
                let w = exp(-a + k as f64 * ln_a - ln_gamma(k as f64 + 1.0));
                for (x, y) in acc.iter_mut().zip(&term) {
                    *x += w * y;
                }
                weight_sum += w;
                if weight_sum >= 1.0 - 1e-12 && k as f64 > a {
                    break;
                }
                chain.apply(nu, &term, &mut next, &mut q, &mut route);
                core::mem::swap(&mut term, &mut next);
                k += 1;
            }
            truncation += (1.0 - weight_sum).max(0.0);
            p.copy_from_slice(&acc);
            now = if now + span >= t { t } else { now + span };
        }
        let mut tails = vec![vec![0.0; cap]; servers];
        let mut boundary = 0.0;
        for (i, &mass) in p.iter().enumerate() {
            chain.decode(i, &mut q);
            for s in 0..servers {
                for t in &mut tails[s][..q[s]] {
                    *t += mass;
                }
            }
            if q.contains(&cap) {
                boundary += mass;
            }
        }
        if boundary > BOUNDARY_LIMIT {
            return Err(CtmcError::CapTooSmall { mass: boundary, limit: BOUNDARY_LIMIT });
        }
        out.push(CtmcMarginals { t, tails, boundary_mass: boundary, truncation });
    }
    Ok(out)
}
