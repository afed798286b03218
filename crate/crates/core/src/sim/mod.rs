//! Discrete-event simulation of the `N`-server SQ(d) network.
//!
//! Each job carries its service time from the moment it arrives, so the
//! virtual waiting time of a probe is an exact function of the state.

mod descriptor;
mod engine;
pub mod ensemble;
mod routing;
mod state;

pub use descriptor::{expected_virtual_wait, measure_descriptor, DescriptorSample};
pub use engine::{EventKind, EventRecord, RunConfig, RunOutput, Simulation, Snapshot, WaitBins};
pub use ensemble::{ChaosEstimate, EnsembleSpec, EnsembleSummary, ReplicationResult};
pub use routing::{route, routing_probability, shortest_of};
pub use state::{Job, NetworkState};

pub use crate::initial::InitialCondition;

use rand::Rng;

use crate::arrivals::{ArrivalProfile, Schedule};
use crate::service::ServiceDistribution;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error("network needs at least one server")]
    NoServers,
    #[error("routing needs at least one choice")]
    NoChoices,
    #[error("sample time {0} outside [0, horizon]")]
    SampleOutOfRange(f64),
    #[error("sample times must be strictly increasing")]
    UnsortedSamples,
    #[error("backlog history must be a finite one-shot schedule")]
    OpenHistory,
    #[error("replication count must be positive")]
    NoReplications,
    #[error("{0}")]
    Metric(#[from] crate::metrics::MetricError),
}

/// Builds the time-zero network for an initial condition. Backlog states are
/// produced by simulating the history from an empty network.
pub fn init_state<R: Rng + ?Sized>(
    kind: &InitialCondition,
    servers: usize,
    choices: u32,
    dist: &ServiceDistribution,
    rng: &mut R,
) -> Result<NetworkState, SimError> {
    if servers == 0 {
        return Err(SimError::NoServers);
    }
    match kind {
        InitialCondition::JobsPerQueue { jobs } => Ok(NetworkState::with_jobs(servers, *jobs, dist, rng)),
        InitialCondition::StationaryAge { jobs } => {
            Ok(NetworkState::with_stationary_ages(servers, *jobs, dist, rng))
        }
        InitialCondition::Backlog { history } => backlog_state(history, servers, choices, dist, rng),
    }
}

fn backlog_state<R: Rng + ?Sized>(
    history: &Schedule,
    servers: usize,
    choices: u32,
    dist: &ServiceDistribution,
    rng: &mut R,
) -> Result<NetworkState, SimError> {
    let span = history.cycle_length();
    if history.repeats() || !span.is_finite() {
        return Err(SimError::OpenHistory);
    }
    let profile = ArrivalProfile::Piecewise(history.clone());
    let mut sim = Simulation::new(NetworkState::empty(servers), &profile, dist, choices)?;
    sim.advance_to(span, rng, &mut engine::Recorder::silent());
    let mut state = sim.into_state();
    state.relabel_clock(span);
    Ok(state)
}
