use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sqdfluid_core::ctmc;
use sqdfluid_core::sim::ensemble::{ensemble, replication_rng};
use sqdfluid_core::sim::{route, routing_probability, EnsembleSpec, EventKind, RunConfig, Simulation};
use sqdfluid_core::stats::{ks_distance, Accumulator};
use sqdfluid_core::{ArrivalProfile, Family, InitialCondition, NetworkState, ServiceDistribution};

fn lomax(shape: f64) -> ServiceDistribution {
    ServiceDistribution::new(Family::Lomax { shape }).unwrap()
}

#[test]
fn drain_without_arrivals_follows_the_survival_function() {
    let dist = ServiceDistribution::new(Family::Gamma { shape: 2.0 }).unwrap();
    let spec = EnsembleSpec {
        servers: 200,
        choices: 2,
        dist,
        profile: ArrivalProfile::constant(0.0).unwrap(),
        initial: InitialCondition::JobsPerQueue { jobs: 1 },
        horizon: 3.0,
        sample_times: vec![0.5, 1.0, 2.0, 3.0],
        levels: 2,
        wait_bin: None,
    };
    let sum = ensemble(&spec, 100, 8).unwrap();
    for (k, &t) in spec.sample_times.iter().enumerate() {
        let e = sum.tail(k, 1);
        let g = dist.ccdf(t).unwrap();
        assert!((e.mean - g).abs() <= 4.0 * e.std_error, "t={t}: {} vs {g}", e.mean);
        assert_eq!(sum.tail(k, 2).mean, 0.0);
    }
}

#[test]
fn descriptor_invariants_along_a_run() {
    let dist = lomax(2.25);
    let profile = ArrivalProfile::periodic(0.8, 0.4, 2.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let state = NetworkState::with_stationary_ages(300, 2, &dist, &mut rng);
    let mut sim = Simulation::new(state, &profile, &dist, 2).unwrap();
    let times: Vec<f64> = (1..=30).map(|k| k as f64 * 0.25).collect();
    let r_grid: Vec<f64> = (0..40).map(|k| k as f64 * 0.25).collect();
    let cfg = RunConfig { horizon: 8.0, sample_times: &times, r_grid: &r_grid, levels: 5, wait_bin: Some(0.1), log_events: true };
    let out = sim.run(&cfg, &mut rng).unwrap();
    for snap in &out.snapshots {
        let d = &snap.descriptor;
        for l in 1..=5 {
            assert_eq!(d.z(l, 0), d.s(l));
            if l > 1 {
                assert!(d.s(l) <= d.s(l - 1));
            }
            for j in 1..r_grid.len() {
                assert!(d.z(l, j) <= d.z(l, j - 1));
            }
        }
    }
    // the event log is time-ordered and complete
    let events = out.events.unwrap();
    assert!(events.windows(2).all(|w| w[0].t <= w[1].t));
    assert_eq!(events.iter().filter(|e| e.kind == EventKind::Arrival).count() as u64, out.arrivals);
    sim.state().check_invariants().unwrap();
}

#[test]
fn routing_frequencies_match_the_power_law() {
    let dist = lomax(2.25);
    let profile = ArrivalProfile::constant(0.9).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let state = NetworkState::with_jobs(1000, 1, &dist, &mut rng);
    let mut sim = Simulation::new(state, &profile, &dist, 2).unwrap();
    let cfg = RunConfig { horizon: 6.0, sample_times: &[], r_grid: &[0.0], levels: 1, wait_bin: None, log_events: false };
    sim.run(&cfg, &mut rng).unwrap();
    let st = sim.state();
    let n = st.servers() as f64;
    let max_len = st.queue_lengths().max().unwrap();
    let trials = 200_000;
    let mut hits = vec![0u64; max_len + 1];
    for _ in 0..trials {
        hits[st.queue_len(route(st.servers(), 2, |i| st.queue_len(i), &mut rng))] += 1;
    }
    for (l, &h) in hits.iter().enumerate() {
        let p = routing_probability(st.count_at_least(l) as f64 / n, st.count_at_least(l + 1) as f64 / n, 2);
        let se = (p * (1.0 - p) / trials as f64).sqrt().max(1e-12);
        let f = h as f64 / trials as f64;
        assert!((f - p).abs() <= 4.0 * se + 1e-12, "length {l}: {f} vs {p}");
    }
}

#[test]
fn two_servers_match_the_exact_chain() {
    let dist = ServiceDistribution::exponential();
    let times = [0.5, 2.0];
    let spec = EnsembleSpec {
        servers: 2,
        choices: 2,
        dist,
        profile: ArrivalProfile::constant(0.5).unwrap(),
        initial: InitialCondition::JobsPerQueue { jobs: 1 },
        horizon: 2.0,
        sample_times: times.to_vec(),
        levels: 3,
        wait_bin: None,
    };
    let sum = ensemble(&spec, 20_000, 2024).unwrap();
    let exact = ctmc::transient(2, 2, 0.5, 20, &[1, 1], &times).unwrap();
    for (k, m) in exact.iter().enumerate() {
        for l in 1..=3 {
            let e = sum.tail(k, l);
            let p = m.fraction_at_least(l);
            assert!((e.mean - p).abs() <= 4.0 * e.std_error.max(1e-4), "t={} l={l}: {} vs {p}", m.t, e.mean);
        }
    }
}

#[test]
fn stationary_age_initial_state_has_the_right_ages() {
    let dist = ServiceDistribution::new(Family::Gamma { shape: 2.0 }).unwrap();
    let mut rng = replication_rng(9, 0);
    let st = NetworkState::with_stationary_ages(1000, 2, &dist, &mut rng);
    let ages: Vec<f64> = (0..1000).map(|i| st.age(i).unwrap()).collect();
    assert!(ks_distance(&ages, |r| 1.0 - dist.stationary_age_ccdf(r).unwrap()) <= 0.05);
    assert!(st.queue_lengths().all(|l| l == 2));
}

#[test]
fn actual_waits_are_recorded_for_a_busy_network() {
    let dist = lomax(3.0);
    let spec = EnsembleSpec {
        servers: 100,
        choices: 2,
        dist,
        profile: ArrivalProfile::constant(0.9).unwrap(),
        initial: InitialCondition::JobsPerQueue { jobs: 2 },
        horizon: 4.0,
        sample_times: vec![4.0],
        levels: 3,
        wait_bin: Some(0.5),
    };
    let sum = ensemble(&spec, 10, 3).unwrap();
    assert!(!sum.actual_wait.is_empty());
    assert!(sum.actual_wait.iter().all(|(_, e)| e.mean >= 0.0));
    let mut acc = Accumulator::new();
    sum.virtual_wait.iter().for_each(|e| acc.push(e.mean));
    assert!(acc.mean() > 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn job_count_balances(seed in any::<u64>(), rate in 0.0f64..1.5, jobs in 0u32..3, servers in 1usize..40) {
        let dist = lomax(2.5);
        let profile = ArrivalProfile::constant(rate).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let state = NetworkState::with_jobs(servers, jobs, &dist, &mut rng);
        let x0 = state.total_jobs() as i64;
        let mut sim = Simulation::new(state, &profile, &dist, 2).unwrap();
        let times = [1.0, 2.5];
        let cfg = RunConfig { horizon: 3.0, sample_times: &times, r_grid: &[0.0, 1.0], levels: 3, wait_bin: None, log_events: false };
        let out = sim.run(&cfg, &mut rng).unwrap();
        let x1 = sim.state().total_jobs() as i64;
        prop_assert_eq!(out.arrivals as i64 - out.departures as i64, x1 - x0);
        prop_assert!(sim.state().check_invariants().is_ok());
    }

    #[test]
    fn ensembles_are_deterministic(seed in any::<u64>()) {
        let spec = EnsembleSpec {
            servers: 10,
            choices: 2,
            dist: lomax(2.25),
            profile: ArrivalProfile::constant(0.7).unwrap(),
            initial: InitialCondition::JobsPerQueue { jobs: 1 },
            horizon: 2.0,
            sample_times: vec![1.0, 2.0],
            levels: 2,
            wait_bin: Some(0.5),
        };
        prop_assert_eq!(ensemble(&spec, 4, seed).unwrap(), ensemble(&spec, 4, seed).unwrap());
    }
}
