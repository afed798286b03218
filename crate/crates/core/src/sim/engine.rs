use alloc::vec;
use alloc::vec::Vec;

use libm::floor;
use rand::Rng;

use super::descriptor::{expected_virtual_wait, measure_descriptor, DescriptorSample};
use super::routing::route;
use super::state::{Job, NetworkState};
use super::SimError;
use crate::arrivals::ArrivalProfile;
use crate::service::ServiceDistribution;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    Arrival,
    Departure,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventRecord {
    pub t: f64,
    pub kind: EventKind,
    pub server: usize,
    pub queue_len_after: usize,
}

/// Per-bin totals of actual waiting times (service entry minus arrival),
/// binned by arrival time.
#[derive(Debug, Clone, PartialEq)]
pub struct WaitBins {
    pub width: f64,
    pub sum: Vec<f64>,
    pub sum_sq: Vec<f64>,
    pub count: Vec<u64>,
}

impl WaitBins {
    pub fn new(width: f64, horizon: f64) -> Self {
        let bins = if width > 0.0 { (floor(horizon / width) as usize) + 1 } else { 0 };
        Self { width, sum: vec![0.0; bins], sum_sq: vec![0.0; bins], count: vec![0; bins] }
    }

    fn record(&mut self, arrival: f64, wait: f64) {
        if !(arrival >= 0.0) || self.count.is_empty() {
            return;
        }
        let b = floor(arrival / self.width) as usize;
        if b < self.count.len() {
            self.sum[b] += wait;
            self.sum_sq[b] += wait * wait;
            self.count[b] += 1;
        }
    }
}

pub(crate) struct Recorder {
    pub(crate) waits: Option<WaitBins>,
    pub(crate) events: Option<Vec<EventRecord>>,
    pub(crate) arrivals: u64,
    pub(crate) departures: u64,
}

impl Recorder {
    pub(crate) fn silent() -> Self {
        Self { waits: None, events: None, arrivals: 0, departures: 0 }
    }

    fn service_entry(&mut self, job: &Job, at: f64) {
        if let Some(w) = &mut self.waits {
            w.record(job.arrival, at - job.arrival);
        }
    }

    fn event(&mut self, t: f64, kind: EventKind, server: usize, len: usize) {
        if let Some(ev) = &mut self.events {
            ev.push(EventRecord { t, kind, server, queue_len_after: len });
        }
    }
}

/// What to measure during a run.
#[derive(Debug, Clone)]
pub struct RunConfig<'a> {
    pub horizon: f64,
    pub sample_times: &'a [f64],
    pub r_grid: &'a [f64],
    pub levels: usize,
    /// Bin width for actual waiting times; `None` disables the log.
    pub wait_bin: Option<f64>,
    pub log_events: bool,
}

/// Measurements at one sample time.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub descriptor: DescriptorSample,
    /// Mean virtual waiting time given the state (exact over the routing law).
    pub virtual_wait: f64,
    /// Waiting time of a single routed probe.
    pub virtual_wait_probe: f64,
    /// Queue lengths of servers 0 and 1, for the pairwise independence check.
    pub first_two: [usize; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub snapshots: Vec<Snapshot>,
    pub waits: Option<WaitBins>,
    pub events: Option<Vec<EventRecord>>,
    pub arrivals: u64,
    pub departures: u64,
}

/// Event loop over a [`NetworkState`]. Departures win ties against arrivals.
pub struct Simulation<'a> {
    state: NetworkState,
    profile: &'a ArrivalProfile,
    dist: &'a ServiceDistribution,
    choices: u32,
    next_arrival: Option<Option<f64>>,
}

impl<'a> Simulation<'a> {
    pub fn new(
        state: NetworkState,
        profile: &'a ArrivalProfile,
        dist: &'a ServiceDistribution,
        choices: u32,
    ) -> Result<Self, SimError> {
        if state.servers() == 0 {
            return Err(SimError::NoServers);
        }
        if choices == 0 {
            return Err(SimError::NoChoices);
        }
        Ok(Self { state, profile, dist, choices, next_arrival: None })
    }

    pub fn state(&self) -> &NetworkState {
        &self.state
    }

    pub fn into_state(self) -> NetworkState {
        self.state
    }

    /// Routes a virtual job without changing the state and returns its wait.
    pub fn virtual_wait_sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let st = &self.state;
        let target = route(st.servers(), self.choices, |i| st.queue_len(i), rng);
        st.work_ahead(target)
    }

    /// Processes every event with time ≤ `t`, then sets the clock to `t`.
    pub(crate) fn advance_to<R: Rng + ?Sized>(&mut self, t: f64, rng: &mut R, rec: &mut Recorder) {
        let n = self.state.servers() as f64;
        loop {
            let arrival = *self
                .next_arrival
                .get_or_insert_with(|| self.profile.next_arrival(self.state.clock, n, rng));
            let departure = self.state.departures.peek().map(|d| d.time);
            let take_departure = match (departure, arrival) {
                (Some(d), Some(a)) => d <= a,
                (Some(_), None) => true,
                (None, _) => false,
            };
            let next_time = if take_departure { departure } else { arrival };
            match next_time {
                Some(at) if at <= t => {
                    assert!(at >= self.state.clock, "event at {at} before clock {}", self.state.clock);
                    self.state.clock = at;
                    if take_departure {
                        self.depart(rng, rec);
                    } else {
                        self.arrive(at, rng, rec);
                        self.next_arrival = None;
                    }
                }
                _ => break,
            }
        }
        assert!(t >= self.state.clock, "advance_to({t}) behind clock {}", self.state.clock);
        self.state.clock = t;
    }

    fn arrive<R: Rng + ?Sized>(&mut self, at: f64, rng: &mut R, rec: &mut Recorder) {
        let job = Job { arrival: at, service: self.dist.sample(rng) };
        let st = &self.state;
        let i = route(st.servers(), self.choices, |k| st.queue_len(k), rng);
        let idle = self.state.servers[i].queue.is_empty();
        self.state.servers[i].queue.push_back(job);
        if idle {
            self.state.start_head(i, at);
            rec.service_entry(&job, at);
        }
        rec.arrivals += 1;
        rec.event(at, EventKind::Arrival, i, self.state.servers[i].queue.len());
    }

    fn depart<R: Rng + ?Sized>(&mut self, _rng: &mut R, rec: &mut Recorder) {
        let d = self.state.departures.pop().expect("departure pending");
        let at = d.time;
        let server = &mut self.state.servers[d.server];
        server.queue.pop_front().expect("departure from idle server");
        if let Some(&next) = server.queue.front() {
            self.state.start_head(d.server, at);
            rec.service_entry(&next, at);
        }
        rec.departures += 1;
        rec.event(at, EventKind::Departure, d.server, self.state.servers[d.server].queue.len());
    }

    /// Runs to `cfg.horizon`, measuring at each sample time.
    pub fn run<R: Rng + ?Sized>(&mut self, cfg: &RunConfig<'_>, rng: &mut R) -> Result<RunOutput, SimError> {
        let start = self.state.clock;
        let mut prev = f64::NEG_INFINITY;
        for &s in cfg.sample_times {
            if !(s >= start && s <= cfg.horizon) {
                return Err(SimError::SampleOutOfRange(s));
            }
            if s <= prev {
                return Err(SimError::UnsortedSamples);
            }
            prev = s;
        }
        let mut rec = Recorder {
            waits: cfg.wait_bin.map(|w| WaitBins::new(w, cfg.horizon)),
            events: cfg.log_events.then(Vec::new),
            arrivals: 0,
            departures: 0,
        };
        let mut snapshots = Vec::with_capacity(cfg.sample_times.len());
        for &s in cfg.sample_times {
            self.advance_to(s, rng, &mut rec);
            let descriptor = measure_descriptor(&self.state, self.dist, cfg.levels, cfg.r_grid);
            let virtual_wait = expected_virtual_wait(&self.state, self.choices);
            let virtual_wait_probe = self.virtual_wait_sample(rng);
            let first_two = [
                self.state.queue_len(0),
                if self.state.servers() > 1 { self.state.queue_len(1) } else { 0 },
            ];
            snapshots.push(Snapshot { descriptor, virtual_wait, virtual_wait_probe, first_two });
        }
        self.advance_to(cfg.horizon, rng, &mut rec);
        Ok(RunOutput {
            snapshots,
            waits: rec.waits,
            events: rec.events,
            arrivals: rec.arrivals,
            departures: rec.departures,
        })
    }
}
