use alloc::vec;
use alloc::vec::Vec;

/// One time slice `Ẑ_ℓ(t_m, r_n)` for `ℓ = 1..=levels`, `n = 0..=n_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct FluidGrid {
    levels: usize,
    points: usize,
    delta: f64,
    step: u64,
    // row-major by level
    values: Vec<f64>,
}

impl FluidGrid {
    pub fn zeros(levels: usize, points: usize, delta: f64) -> Self {
        Self { levels, points, delta, step: 0, values: vec![0.0; levels * points] }
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    /// Number of residual grid points, `⌊R0/δ⌋ + 1`.
    pub fn points(&self) -> usize {
        self.points
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn step_index(&self) -> u64 {
        self.step
    }

    pub fn time(&self) -> f64 {
        self.step as f64 * self.delta
    }

    pub(crate) fn set_step(&mut self, step: u64) {
        self.step = step;
    }

    /// `Ẑ_level(t, r_n)`; `level` is 1-based.
    #[inline]
    pub fn z(&self, level: usize, n: usize) -> f64 {
        self.values[(level - 1) * self.points + n]
    }

    /// `Ẑ_level(t, 0)`, the fraction of queues with at least `level` jobs.
    pub fn tail(&self, level: usize) -> f64 {
        self.z(level, 0)
    }

    pub fn row(&self, level: usize) -> &[f64] {
        &self.values[(level - 1) * self.points..level * self.points]
    }

    pub fn row_mut(&mut self, level: usize) -> &mut [f64] {
        &mut self.values[(level - 1) * self.points..level * self.points]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Largest violation of `0 ≤ Ẑ_{ℓ+1} ≤ Ẑ_ℓ ≤ 1`.
    pub fn level_violation(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for l in 1..=self.levels {
            let row = self.row(l);
            for (n, &v) in row.iter().enumerate() {
                let upper = if l == 1 { 1.0 } else { self.z(l - 1, n) };
                worst = worst.max(v - upper).max(-v);
            }
        }
        worst
    }

    /// Largest increase of any `Ẑ_ℓ(t, ·)` between neighbouring grid points.
    pub fn residual_violation(&self) -> f64 {
        (1..=self.levels)
            .flat_map(|l| self.row(l).windows(2).map(|w| w[1] - w[0]))
            .fold(0.0, f64::max)
    }

    /// Sup-norm distance to another grid of the same shape.
    pub fn sup_distance(&self, other: &Self) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}
