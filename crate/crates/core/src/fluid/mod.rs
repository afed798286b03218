//! Truncated hydrodynamic PDE: explicit forward Euler in time, upwind shift in
//! the residual-service axis `r`, both on the same step `δ`.
//!
//! Each step reads only the time-`t` slice. With `Λ = ∫_t^{t+δ} λ` and
//! `Ḡ_n = Ḡ(nδ)`:
//!
//! ```text
//! Z1(t+δ, n) = Z1(t, n+1) − Ḡ_n [Z2(t,1) − Z2(t,0)] + Ḡ_n (1 − Z1(t,0)^d) Λ
//! Zℓ(t+δ, n) = Zℓ(t, n+1) − Ḡ_n [Zℓ+1(t,1) − Zℓ+1(t,0)]
//!              + Σ_{i<d} Zℓ−1(t,0)^i Zℓ(t,0)^{d−1−i} · [Zℓ−1(t,n) − Zℓ(t,n)] Λ
//! ```
//!
//! with `Z_{L0+1} ≡ 0`. For `d = 2` the routing factor is `Zℓ−1(t,0) + Zℓ(t,0)`.

mod grid;
mod ode;
mod solver;

pub use grid::FluidGrid;
pub use ode::{ode_solve_exponential, OdeTrajectory};
pub use solver::{FluidParams, FluidSolver, StepDiagnostics, Trajectory};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FluidError {
    #[error("need at least two queue levels, got {0}")]
    TooFewLevels(usize),
    #[error("mesh step must be positive and finite, got {0}")]
    InvalidStep(f64),
    #[error("residual window {r_max} must span at least one mesh step {delta}")]
    InvalidWindow { r_max: f64, delta: f64 },
    #[error("SQ({0}) needs the generalized-d extension enabled")]
    ChoicesNeedExtension(u32),
    #[error("horizon {horizon} is not a multiple of the step {delta}")]
    HorizonOffGrid { horizon: f64, delta: f64 },
    #[error("non-finite value at t = {t}, level {level}, r index {r_index}")]
    NonFinite { t: f64, level: usize, r_index: usize },
    #[error("instability at t = {t}: clamp correction {correction:e} at level {level} exceeds {limit:e}")]
    Instability { t: f64, level: usize, correction: f64, limit: f64 },
    #[error("initial condition does not fit the solver grid")]
    GridMismatch,
    #[error(transparent)]
    Arrival(#[from] crate::arrivals::ArrivalError),
}
