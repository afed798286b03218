use crate::arrivals::Schedule;

/// How the network (or its fluid limit) is populated at time zero.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialCondition {
    /// `jobs` jobs in every queue, the head job just entering service (age 0).
    /// `jobs = 0` is the empty network.
    JobsPerQueue { jobs: u32 },
    /// `jobs` jobs in every queue; the in-service job has a stationary age,
    /// i.e. an age with density Ḡ(x).
    StationaryAge { jobs: u32 },
    /// Start empty, run through the one-shot `history` schedule, and relabel the
    /// end of the schedule as time zero.
    Backlog { history: Schedule },
}

impl InitialCondition {
    pub fn empty() -> Self {
        Self::JobsPerQueue { jobs: 0 }
    }
}
