use proptest::prelude::*;
use sqdfluid::config::*;

fn service() -> impl Strategy<Value = ServiceConfig> {
    prop_oneof![
        Just(ServiceConfig::Exponential),
        (1.1f64..5.0).prop_map(|shape| ServiceConfig::Lomax { shape }),
        (0.1f64..1.5).prop_map(|sigma| ServiceConfig::LogNormal { sigma }),
        (0.5f64..6.0).prop_map(|shape| ServiceConfig::Gamma { shape }),
        (0.3f64..0.9).prop_map(|rate1| ServiceConfig::HyperExponential { rate1, rate2: 2.0 }),
        (0.5f64..4.0).prop_map(|shape| ServiceConfig::Weibull { shape }),
    ]
}

fn segments() -> impl Strategy<Value = Vec<SegmentConfig>> {
    prop::collection::vec((0.1f64..20.0, 0.0f64..5.0).prop_map(|(duration, rate)| SegmentConfig { duration, rate }), 1..4)
}

fn arrival() -> impl Strategy<Value = ArrivalConfig> {
    prop_oneof![
        (0.0f64..1.5).prop_map(|rate| ArrivalConfig::Constant { rate }),
        (0.1f64..1.0, 0.0f64..1.0, 0.5f64..5.0)
            .prop_map(|(mean, f, period)| ArrivalConfig::Periodic { mean, delta: mean * f, period }),
        (segments(), any::<bool>()).prop_map(|(segments, repeat)| ArrivalConfig::Piecewise { segments, repeat }),
    ]
}

fn initial() -> impl Strategy<Value = InitialConfig> {
    prop_oneof![
        (0u32..4).prop_map(|jobs| InitialConfig::Jobs { jobs }),
        (0u32..4).prop_map(|jobs| InitialConfig::StationaryAge { jobs }),
        segments().prop_map(|history| InitialConfig::Backlog { history }),
    ]
}

fn pde() -> impl Strategy<Value = Option<PdeConfig>> {
    prop::option::of((2usize..14, 1u32..40, 1u32..500, prop::option::of(1e-9f64..1.0)).prop_map(
        |(levels, r, h, correction_limit)| PdeConfig {
            levels,
            r_max: r as f64,
            delta: 0.01,
            horizon: h as f64 * 0.01,
            output_times: vec![0.0],
            correction_limit,
            record_step: Some(0.01),
        },
    ))
}

fn mc() -> impl Strategy<Value = Option<McConfig>> {
    prop::option::of(
        (1usize..2000, 1usize..1000, 0u64..i64::MAX as u64, prop::collection::vec(0.01f64..1.0, 1..5), 1usize..5, prop::option::of(0.01f64..1.0))
            .prop_map(|(servers, replications, seed, gaps, levels, wait_bin)| McConfig {
                servers,
                replications,
                seed: Some(seed),
                sample_times: gaps.iter().scan(0.0, |t, g| {
                    *t += g;
                    Some(*t)
                }).collect(),
                levels,
                wait_bin,
            }),
    )
}

fn scenario() -> impl Strategy<Value = Scenario> {
    (arrival(), service(), initial(), pde(), mc(), prop::option::of((0.0f64..0.1, 0.0f64..0.2, 0.0f64..3.0)), prop::option::of(service()))
        .prop_map(|(arrival, service, initial, pde, mc, val, extra)| Scenario {
            choices: 2,
            arrival,
            service,
            initial,
            pde,
            mc,
            validate: val.map(|(tolerance, wait_tolerance, wait_from)| ValidateConfig {
                tolerance,
                wait_tolerance,
                levels: vec![1, 2],
                wait_from,
            }),
            backlog: extra.map(|f| BacklogConfig {
                history: vec![SegmentConfig { duration: 10.0, rate: 0.6 }, SegmentConfig { duration: 2.0, rate: 5.0 }],
                nominal_rate: 0.6,
                horizon: 30.0,
                sample_step: 0.1,
                families: vec![f, service],
            }),
            periodic: extra.map(|f| PeriodicConfig {
                mean: 0.7,
                period: 2.0,
                deltas: vec![0.0, 0.35, 0.7],
                families: vec![f],
                max_rate: 0.999,
                rate_tolerance: 1e-3,
                warm_periods: 5,
                max_horizon: 2000.0,
            }),
            ctmc: extra.map(|_| CtmcConfig { servers: 2, rate: 0.5, cap: 20, initial: vec![1, 1], times: vec![1.0, 5.0] }),
        })
}

proptest! {
    #[test]
    fn render_then_parse_is_identity(s in scenario()) {
        s.check().unwrap();
        let text = s.render().unwrap();
        prop_assert_eq!(parse_scenario(&text).unwrap(), s);
    }
}

#[test]
fn rendered_documents_are_stable() {
    let text = "[arrival]\nkind = \"constant\"\nrate = 0.5\n\n[service]\nfamily = \"gamma\"\nshape = 2.0\n";
    let s = parse_scenario(text).unwrap();
    let once = s.render().unwrap();
    assert_eq!(parse_scenario(&once).unwrap().render().unwrap(), once);
}
