use alloc::collections::{BinaryHeap, VecDeque};
use alloc::vec::Vec;
use core::cmp::Ordering;

use rand::Rng;

use crate::service::ServiceDistribution;

/// A job with its service requirement drawn on arrival.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Job {
    /// Arrival time; negative for jobs present before time zero.
    pub arrival: f64,
    pub service: f64,
}

#[derive(Debug, Clone, Default)]
pub(crate) struct Server {
    pub(crate) queue: VecDeque<Job>,
    // service-entry time of the head job; meaningless when idle
    pub(crate) service_start: f64,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Departure {
    pub(crate) time: f64,
    pub(crate) server: usize,
}

impl PartialEq for Departure {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Departure {}

impl PartialOrd for Departure {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

// Reversed so the max-heap pops the earliest departure.
impl Ord for Departure {
    fn cmp(&self, other: &Self) -> Ordering {
        other.time.total_cmp(&self.time).then_with(|| other.server.cmp(&self.server))
    }
}

/// Queues, head-of-line ages and pending departures of an `N`-server network.
#[derive(Debug, Clone)]
pub struct NetworkState {
    pub(crate) clock: f64,
    pub(crate) servers: Vec<Server>,
    pub(crate) departures: BinaryHeap<Departure>,
}

impl NetworkState {
    pub fn empty(servers: usize) -> Self {
        Self {
            clock: 0.0,
            servers: (0..servers).map(|_| Server::default()).collect(),
            departures: BinaryHeap::with_capacity(servers),
        }
    }

    /// `jobs` jobs per queue, every head job at age zero.
    pub fn with_jobs<R: Rng + ?Sized>(
        servers: usize,
        jobs: u32,
        dist: &ServiceDistribution,
        rng: &mut R,
    ) -> Self {
        let mut state = Self::empty(servers);
        for i in 0..servers {
            for _ in 0..jobs {
                let job = Job { arrival: f64::NEG_INFINITY, service: dist.sample(rng) };
                state.servers[i].queue.push_back(job);
            }
            if jobs > 0 {
                state.start_head(i, 0.0);
            }
        }
        state
    }

    /// `jobs` jobs per queue; each head job is found mid-service by a
    /// stationary observer (age density Ḡ, length-biased total).
    pub fn with_stationary_ages<R: Rng + ?Sized>(
        servers: usize,
        jobs: u32,
        dist: &ServiceDistribution,
        rng: &mut R,
    ) -> Self {
        let mut state = Self::empty(servers);
        if jobs == 0 {
            return state;
        }
        for i in 0..servers {
            let (age, total) = dist.sample_stationary_age(rng);
            state.servers[i].queue.push_back(Job { arrival: f64::NEG_INFINITY, service: total });
            for _ in 1..jobs {
                let job = Job { arrival: f64::NEG_INFINITY, service: dist.sample(rng) };
                state.servers[i].queue.push_back(job);
            }
            state.start_head(i, -age);
        }
        state
    }

    pub(crate) fn start_head(&mut self, server: usize, at: f64) {
        let s = &mut self.servers[server];
        let head = s.queue.front().expect("start_head on idle server");
        s.service_start = at;
        self.departures.push(Departure { time: at + head.service, server });
    }

    /// Shifts every stored time by `-offset`, so the current clock becomes `clock - offset`.
    pub fn relabel_clock(&mut self, offset: f64) {
        self.clock -= offset;
        for s in &mut self.servers {
            s.service_start -= offset;
            for j in &mut s.queue {
                j.arrival -= offset;
            }
        }
        let deps: Vec<Departure> = self
            .departures
            .drain()
            .map(|d| Departure { time: d.time - offset, server: d.server })
            .collect();
        self.departures.extend(deps);
    }

    pub fn clock(&self) -> f64 {
        self.clock
    }

    pub fn servers(&self) -> usize {
        self.servers.len()
    }

    pub fn queue_len(&self, server: usize) -> usize {
        self.servers[server].queue.len()
    }

    pub fn queue_lengths(&self) -> impl Iterator<Item = usize> + '_ {
        self.servers.iter().map(|s| s.queue.len())
    }

    pub fn total_jobs(&self) -> usize {
        self.queue_lengths().sum()
    }

    /// Number of servers holding at least `level` jobs.
    pub fn count_at_least(&self, level: usize) -> usize {
        self.queue_lengths().filter(|&l| l >= level).count()
    }

    /// Elapsed service time of the head job; `None` if the server is idle.
    pub fn age(&self, server: usize) -> Option<f64> {
        let s = &self.servers[server];
        (!s.queue.is_empty()).then_some(self.clock - s.service_start)
    }

    /// Work a new arrival at `server` would wait for: remaining service of
    /// the head job plus the service times of everyone queued behind it.
    pub fn work_ahead(&self, server: usize) -> f64 {
        let s = &self.servers[server];
        let mut it = s.queue.iter();
        match it.next() {
            None => 0.0,
            Some(head) => {
                let residual = (s.service_start + head.service - self.clock).max(0.0);
                residual + it.map(|j| j.service).sum::<f64>()
            }
        }
    }

    pub fn jobs(&self, server: usize) -> impl Iterator<Item = &Job> + '_ {
        self.servers[server].queue.iter()
    }

    /// Scheduled departure times, one per busy server.
    pub fn pending_departures(&self) -> usize {
        self.departures.len()
    }

    /// Checks the structural invariants: one pending departure per busy server,
    /// consistent with the head job's service start; ages non-negative.
    pub fn check_invariants(&self) -> Result<(), &'static str> {
        let busy = self.servers.iter().filter(|s| !s.queue.is_empty()).count();
        if busy != self.departures.len() {
            return Err("pending departures do not match busy servers");
        }
        for d in self.departures.iter() {
            let s = &self.servers[d.server];
            let Some(head) = s.queue.front() else {
                return Err("departure scheduled for an idle server");
            };
            if d.time != s.service_start + head.service {
                return Err("departure time inconsistent with head job");
            }
            if d.time < self.clock {
                return Err("departure scheduled in the past");
            }
        }
        for i in 0..self.servers.len() {
            if let Some(a) = self.age(i) {
                if a < 0.0 {
                    return Err("negative age");
                }
            }
        }
        Ok(())
    }
}
