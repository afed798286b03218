use proptest::prelude::*;
use sqdfluid_core::fluid::{ode_solve_exponential, FluidGrid};
use sqdfluid_core::metrics::{mean_virtual_wait, periodic_average, LongRun};
use sqdfluid_core::{ArrivalProfile, Family, FluidParams, FluidSolver, InitialCondition, ServiceDistribution};

fn gamma2() -> ServiceDistribution {
    ServiceDistribution::new(Family::Gamma { shape: 2.0 }).unwrap()
}

fn one_job() -> InitialCondition {
    InitialCondition::JobsPerQueue { jobs: 1 }
}

fn tails_at(params: FluidParams, dist: &ServiceDistribution, rate: f64, t: f64) -> Vec<f64> {
    let mut s = FluidSolver::new(params, dist, ArrivalProfile::constant(rate).unwrap(), &one_job()).unwrap();
    s.advance(params.steps_to(t).unwrap()).unwrap();
    (1..=params.levels).map(|l| s.grid().tail(l)).collect()
}

fn sup(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn ordering_holds_at_every_step() {
    let dist = ServiceDistribution::new(Family::Lomax { shape: 2.25 }).unwrap();
    let p = FluidParams::new(6, 20.0, 0.01);
    let mut s = FluidSolver::new(p, &dist, ArrivalProfile::periodic(0.7, 0.3, 2.0).unwrap(), &one_job()).unwrap();
    let mut worst_r: f64 = 0.0;
    s.run_until(10.0, |g| {
        assert_eq!(g.level_violation(), 0.0);
        worst_r = worst_r.max(g.residual_violation());
    })
    .unwrap();
    assert!(worst_r <= 1e-6, "r-monotonicity violated by {worst_r}");
    assert!(s.diagnostics().max_correction <= 1e-6);
}

#[test]
fn first_order_mesh_convergence() {
    let dist = gamma2();
    let run = |delta| tails_at(FluidParams::new(6, 12.0, delta), &dist, 0.5, 2.0);
    let (a, b, c) = (run(0.04), run(0.02), run(0.01));
    let order = (sup(&a, &b) / sup(&b, &c)).log2();
    assert!(order >= 0.8, "observed order {order}");
}

#[test]
fn truncation_is_insensitive() {
    let dist = ServiceDistribution::new(Family::Lomax { shape: 2.25 }).unwrap();
    let base = tails_at(FluidParams::new(6, 20.0, 0.01), &dist, 0.5, 10.0);
    let more_levels = tails_at(FluidParams::new(8, 20.0, 0.01), &dist, 0.5, 10.0);
    let wider = tails_at(FluidParams::new(6, 30.0, 0.01), &dist, 0.5, 10.0);
    for other in [&more_levels[..6], &wider[..]] {
        assert!(sup(&base[..2], &other[..2]) <= 1e-4);
    }
}

#[test]
fn runs_are_reproducible_and_stable() {
    let dist = gamma2();
    let p = FluidParams::new(6, 10.0, 0.01);
    let prof = ArrivalProfile::constant(0.6).unwrap();
    let mut a = FluidSolver::new(p, &dist, prof.clone(), &one_job()).unwrap();
    let mut b = FluidSolver::new(p, &dist, prof.clone(), &one_job()).unwrap();
    let ta = a.solve(10.0, &[10.0]).unwrap();
    let tb = b.solve(10.0, &[10.0]).unwrap();
    assert_eq!(ta, tb);

    // an ε-perturbed start stays within a moderate multiple of ε
    let eps = 1e-6;
    let mut g: FluidGrid = FluidSolver::new(p, &dist, prof.clone(), &one_job()).unwrap().into_grid();
    let base = g.clone();
    let perturbed = FluidSolver::new(p, &dist, prof.clone(), &one_job())
        .unwrap()
        .grid()
        .values()
        .iter()
        .map(|v| (v - eps).max(0.0))
        .collect::<Vec<_>>();
    for l in 1..=6 {
        let row = &perturbed[(l - 1) * g.points()..l * g.points()];
        g.row_mut(l).copy_from_slice(row);
    }
    assert!(g.sup_distance(&base) <= eps * (1.0 + 1e-9));
    let mut c = FluidSolver::from_grid(p, &dist, prof, g).unwrap();
    let tc = c.solve(10.0, &[]).unwrap();
    let gap = sup(&ta.tails, &tc.tails);
    assert!(gap <= 20.0 * eps, "amplification {}", gap / eps);
}

#[test]
fn exponential_matches_ode_and_product_form() {
    let dist = ServiceDistribution::exponential();
    let p = FluidParams::new(8, 12.0, 0.005);
    let prof = ArrivalProfile::constant(0.5).unwrap();
    let mut s = FluidSolver::new(p, &dist, prof.clone(), &one_job()).unwrap();
    let tr = s.solve(5.0, &[1.0, 5.0]).unwrap();
    let mut init = vec![0.0; 8];
    init[0] = 1.0;
    let ode = ode_solve_exponential(&prof, &init, 5.0, 0.005);
    let mut worst: f64 = 0.0;
    for k in 0..tr.rows() {
        worst = worst.max(sup(&tr.tails[k * 8..k * 8 + 6], &ode.at(k)[..6]));
    }
    assert!(worst <= 2e-3, "{worst}");
    for g in &tr.slices {
        for l in 1..=8 {
            for n in 0..g.points() {
                let pf = (-(n as f64) * 0.005f64).exp() * g.tail(l);
                assert!((g.z(l, n) - pf).abs() <= 1e-2);
            }
        }
    }
}

#[test]
fn periodic_solution_settles_into_a_cycle() {
    let dist = ServiceDistribution::exponential();
    let p = FluidParams::new(8, 10.0, 0.01);
    let prof = ArrivalProfile::periodic(0.7, 0.3, 2.0).unwrap();
    let mut s = FluidSolver::new(p, &dist, prof, &InitialCondition::empty()).unwrap();
    s.advance(p.steps_to(60.0).unwrap()).unwrap();
    let a = s.grid().clone();
    s.advance(p.steps_to(2.0).unwrap()).unwrap();
    assert!(a.sup_distance(s.grid()) <= 1e-3);
}

#[test]
fn burstiness_raises_the_period_average() {
    let dist = ServiceDistribution::exponential();
    let p = FluidParams::new(10, 10.0, 0.02);
    let rule = LongRun::default();
    let calm = periodic_average(&p, &dist, ArrivalProfile::periodic(0.7, 0.0, 2.0).unwrap(), 2.0, &rule).unwrap();
    let bursty = periodic_average(&p, &dist, ArrivalProfile::periodic(0.7, 0.7, 2.0).unwrap(), 2.0, &rule).unwrap();
    assert!(bursty.value > calm.value);
    assert!((calm.value - calm.previous).abs() < 1e-3);
    assert!((bursty.value - bursty.previous).abs() < 1e-3);
}

#[test]
fn backlog_start_matches_the_history() {
    use sqdfluid_core::{Schedule, Segment};
    let dist = gamma2();
    let p = FluidParams::new(8, 10.0, 0.01);
    let hist = Schedule::new(vec![Segment { duration: 3.0, rate: 0.6 }, Segment { duration: 1.0, rate: 2.0 }], false).unwrap();
    let s = FluidSolver::new(p, &dist, ArrivalProfile::constant(0.6).unwrap(), &InitialCondition::Backlog { history: hist.clone() }).unwrap();
    assert_eq!(s.time(), 0.0);
    let mut manual = FluidSolver::new(p, &dist, ArrivalProfile::Piecewise(hist), &InitialCondition::empty()).unwrap();
    manual.advance(400).unwrap();
    assert_eq!(manual.grid().values(), s.grid().values());
    assert!(mean_virtual_wait(s.grid()) > 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn grids_stay_ordered(
        rate in 0.0f64..0.95,
        burst_frac in 0.0f64..1.0,
        jobs in 0u32..4,
        family in prop_oneof![
            Just(Family::Exponential),
            (1.2f64..4.0).prop_map(|shape| Family::Lomax { shape }),
            (0.2f64..1.2).prop_map(|sigma| Family::LogNormal { sigma }),
            (0.5f64..4.0).prop_map(|shape| Family::Weibull { shape }),
        ],
    ) {
        let dist = ServiceDistribution::new(family).unwrap();
        let p = FluidParams::new(5, 8.0, 0.02);
        let prof = ArrivalProfile::periodic(rate, rate * burst_frac, 1.0).unwrap();
        let mut s = FluidSolver::new(p, &dist, prof, &InitialCondition::StationaryAge { jobs }).unwrap();
        let mut ok = Ok(());
        s.run_until(3.0, |g| {
            if ok.is_ok() && (g.level_violation() > 0.0 || g.residual_violation() > 1e-6) {
                ok = Err(g.time());
            }
        }).unwrap();
        prop_assert_eq!(ok, Ok(()));
        prop_assert!(mean_virtual_wait(s.grid()) >= 0.0);
    }
}
