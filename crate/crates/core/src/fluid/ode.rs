use alloc::vec;
use alloc::vec::Vec;

use libm::round;

use crate::arrivals::ArrivalProfile;

/// Fixed-step RK4 solution of the exponential-service ODE.
#[derive(Debug, Clone, PartialEq)]
pub struct OdeTrajectory {
    pub step: f64,
    pub levels: usize,
    /// `(steps + 1) × levels`, row `k` at time `k · step`.
    pub values: Vec<f64>,
}

impl OdeTrajectory {
    pub fn len(&self) -> usize {
        self.values.len() / self.levels
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn at(&self, k: usize) -> &[f64] {
        &self.values[k * self.levels..(k + 1) * self.levels]
    }

    /// `S_level` at the step nearest to `t`.
    pub fn tail_at(&self, t: f64, level: usize) -> f64 {
        let k = (round(t / self.step) as usize).min(self.len() - 1);
        self.at(k)[level - 1]
    }
}

// dS_ℓ/dt = −(S_ℓ − S_{ℓ+1}) + λ(S_{ℓ−1}² − S_ℓ²), S_0 ≡ 1, S_{L+1} ≡ 0.
fn rhs(s: &[f64], rate: f64, out: &mut [f64]) {
    let l0 = s.len();
    for l in 0..l0 {
        let prev = if l == 0 { 1.0 } else { s[l - 1] };
        let next = if l + 1 < l0 { s[l + 1] } else { 0.0 };
        out[l] = -(s[l] - next) + rate * (prev * prev - s[l] * s[l]);
    }
}

/// Integrates the SQ(2) ODE for exponential service with classical RK4.
/// `initial[ℓ-1]` is `S_ℓ(0)`; the number of levels is `initial.len()`.
pub fn ode_solve_exponential(profile: &ArrivalProfile, initial: &[f64], horizon: f64, step: f64) -> OdeTrajectory {
    let levels = initial.len();
    let steps = round(horizon / step) as usize;
    let mut values = Vec::with_capacity((steps + 1) * levels);
    values.extend_from_slice(initial);
    let mut s = initial.to_vec();
    let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; levels], vec![0.0; levels], vec![0.0; levels], vec![0.0; levels]);
    let mut tmp = vec![0.0; levels];
    for k in 0..steps {
        let t = k as f64 * step;
        // rates sampled at the left end of each stage keep piecewise-constant
        // profiles exact within a step
        let r0 = profile.rate(t);
        let rm = profile.rate(t + 0.5 * step);
        let r1 = profile.rate(t + step);
        rhs(&s, r0, &mut k1);
        for i in 0..levels {
            tmp[i] = s[i] + 0.5 * step * k1[i];
        }
        rhs(&tmp, rm, &mut k2);
        for i in 0..levels {
            tmp[i] = s[i] + 0.5 * step * k2[i];
        }
        rhs(&tmp, rm, &mut k3);
        for i in 0..levels {
            tmp[i] = s[i] + step * k3[i];
        }
        rhs(&tmp, r1, &mut k4);
        for i in 0..levels {
            s[i] += step / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        values.extend_from_slice(&s);
    }
    OdeTrajectory { step, levels, values }
}
