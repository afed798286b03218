//! Mean-field analysis of SQ(d) load-balancing networks with general service
//! times.
//!
//! The crate has two independent routes to the same quantities:
//!
//! * [`sim`]: a discrete-event simulator of the `N`-server network, with
//!   per-job pre-sampled service times and age tracking, plus seeded ensembles.
//! * [`fluid`]: an explicit upwind solver for the hydrodynamic PDE describing
//!   the `N → ∞` limit of the age-weighted queue descriptor, and an RK4
//!   integrator for the exponential-service ODE it reduces to.
//!
//! [`metrics`] turns fluid solutions into queue tails, mean virtual waiting
//! times, relaxation times and effective arrival rates. [`ctmc`] solves small
//! exponential networks exactly by uniformization.
//!
//! The crate is `no_std` and only needs `alloc`.

#![cfg_attr(not(test), no_std)]
// NaN must fail range checks, so `!(x >= 0.0)` is deliberate throughout
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod arrivals;
pub mod initial;
pub mod ctmc;
pub mod fluid;
pub mod metrics;
pub mod service;
pub mod sim;
pub mod special;
pub mod stats;

pub use arrivals::{ArrivalError, ArrivalProfile, Schedule, Segment};
pub use fluid::{FluidError, FluidGrid, FluidParams, FluidSolver, Trajectory};
pub use metrics::{MetricError, MetricSeries, Provenance};
pub use service::{DistError, Family, ServiceDistribution};
pub use sim::{InitialCondition, NetworkState, SimError};
