//! Scenario file parsing: round trips, stage lines and error reporting.

use proptest::prelude::*;
use sbr_core::config::{bundled, parse_stage_line, ScenarioConfig};
use sbr_core::discretization::Scheme;
use sbr_core::scenario::ModelKind;
use sbr_core::ConfigError;

fn finite() -> impl Strategy<Value = f64> {
    prop_oneof![0.0..1e4f64, 1e-12..1e-3f64, Just(0.0)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn serialize_then_parse_is_identity(
        which in 0usize..3,
        area in 1.0..5000.0f64,
        v0 in 1e-5..1e-2f64,
        mu_h in 0.1..10.0f64,
        cells in 4usize..5000,
        implicit in any::<bool>(),
        eps in 1e-14..1e-1f64,
        flows in prop::collection::vec((finite(), finite()), 1..6),
    ) {
        let text = [bundled::EXAMPLE1, bundled::EXAMPLE2, bundled::EXAMPLE3][which];
        let mut cfg = ScenarioConfig::parse(text).unwrap();
        cfg.geometry.area = area;
        cfg.constitutive.v0 = v0;
        cfg.kinetics.mu_h = mu_h;
        cfg.numerics.cells = cells;
        cfg.numerics.scheme = if implicit { Scheme::SemiImplicit } else { Scheme::Explicit };
        cfg.numerics.tolerance = eps;
        for (stage, (qu, xf)) in cfg.stages.iter_mut().zip(flows) {
            stage.q_under_m3ph = qu;
            stage.x_feed = if stage.q_feed_m3ph > 0.0 { xf } else { 0.0 };
        }
        let once = cfg.serialize();
        let back = ScenarioConfig::parse_unchecked(&once).unwrap();
        prop_assert_eq!(&back, &cfg);
        prop_assert_eq!(back.serialize(), once);
    }

    #[test]
    fn valid_stage_lines_parse_exactly(
        t0 in 0.0..100.0f64,
        dt in 1e-3..50.0f64,
        mix in any::<bool>(),
        qf in finite(),
        qu in finite(),
        qe in finite(),
        xf in finite(),
    ) {
        let qe = if qf > 0.0 { 0.0 } else { qe };
        let model = if mix { "mix" } else { "pde" };
        let line = format!("{t0}, {}, {model}, {qf}, {qu}, {qe}, {xf}", t0 + dt);
        let s = parse_stage_line(&line).unwrap();
        prop_assert_eq!(s.t_start_h, t0);
        prop_assert_eq!(s.t_end_h, t0 + dt);
        prop_assert_eq!(s.model, if mix { ModelKind::Mixing } else { ModelKind::Pde });
        prop_assert_eq!((s.q_feed_m3ph, s.q_under_m3ph, s.q_extract_m3ph, s.x_feed), (qf, qu, qe, xf));
    }

    #[test]
    fn arbitrary_stage_text_never_panics(text in "[-0-9a-z., eE+]{0,60}") {
        let _ = parse_stage_line(&text);
    }

    #[test]
    fn arbitrary_scenario_text_never_panics(text in "(\\[[a-z]{0,10}\\]\n|[a-z_0-9]{1,12} ?= ?[-0-9.e]{0,8}\n|[0-9., pdemix]{0,30}\n){0,20}") {
        let _ = ScenarioConfig::parse(&text);
    }
}

#[test]
fn feeding_while_drawing_is_rejected() {
    assert!(parse_stage_line("0, 1, pde, 10, 0, 5, 3").is_err());
}

#[test]
fn negative_and_non_finite_values_are_rejected() {
    for line in ["0, 1, pde, -1, 0, 0, 0", "0, 1, pde, 0, 0, 0, NaN", "0, inf, pde, 0, 0, 0, 0", "0, 1, pde, 0, 0, 0"] {
        assert!(parse_stage_line(line).is_err(), "{line}");
    }
}

#[test]
fn schedule_gaps_are_rejected() {
    let text = bundled::EXAMPLE2.replace("0.3, 0.85", "0.4, 0.85");
    assert!(matches!(ScenarioConfig::parse(&text), Err(ConfigError::Invalid { .. })));
}

#[test]
fn overfilling_schedules_are_rejected() {
    let text = bundled::EXAMPLE1.replace("0, 1, pde, 790", "0, 1, pde, 900");
    assert!(text != bundled::EXAMPLE1);
    assert!(ScenarioConfig::parse(&text).is_err());
}

#[test]
fn bundled_schedules_match_the_operating_tables() {
    let one = ScenarioConfig::parse(bundled::EXAMPLE1).unwrap();
    let rows: Vec<_> = one
        .stages
        .iter()
        .map(|s| (s.t_start_h, s.t_end_h, s.model, s.q_feed_m3ph, s.q_under_m3ph, s.q_extract_m3ph, s.x_feed))
        .collect();
    use ModelKind::{Mixing, Pde};
    assert_eq!(
        rows,
        vec![
            (0.0, 1.0, Pde, 790.0, 0.0, 0.0, 5.0),
            (1.0, 3.0, Mixing, 0.0, 0.0, 0.0, 0.0),
            (3.0, 5.0, Pde, 0.0, 0.0, 0.0, 0.0),
            (5.0, 5.5, Pde, 0.0, 0.0, 1570.0, 0.0),
            (5.5, 6.0, Pde, 0.0, 10.0, 0.0, 0.0),
        ]
    );
    let two = ScenarioConfig::parse(bundled::EXAMPLE2).unwrap();
    assert_eq!(two.stages.len(), 4);
    assert_eq!(two.stages[0].q_feed_m3ph, 2660.0);
    assert_eq!(two.stages[2].q_extract_m3ph, 6000.0);
    assert_eq!(two.stages[3].q_under_m3ph, 100.0);
    let three = ScenarioConfig::parse(bundled::EXAMPLE3).unwrap();
    let ends: Vec<f64> = three.stages.iter().map(|s| s.t_end_h).collect();
    assert_eq!(ends, vec![25.0, 35.0, 45.0, 60.0, 70.0]);
    assert_eq!(three.stages[1].q_extract_m3ph, 84.0);
    assert_eq!((three.stages[3].q_feed_m3ph, three.stages[3].x_feed), (40.0, 0.0));
}
