use nvsc_core::analysis;
use nvsc_core::config::{prepare, ScenarioConfig};
use nvsc_core::config::DosSpec;
use nvsc_core::engine::run_prepared;
use nvsc_core::trace::SimTrace;

fn short_attack() -> ScenarioConfig {
    let mut cfg = ScenarioConfig::platoon_attack_default();
    cfg.horizon = 1.5;
    if let Some(DosSpec::Generate(g)) = &mut cfg.dos {
        g.horizon = 1.5;
        g.start_after = 0.3;
    }
    cfg
}

#[test]
fn report_from_reread_csv_matches() {
    let cfg = short_attack();
    let pr = prepare(&cfg).unwrap();
    let trace = run_prepared(&pr).unwrap();
    trace.check().unwrap();
    let report = analysis::build_report(&pr, &trace).to_json().unwrap();
    let csv = trace.to_csv_string().unwrap();
    let back = SimTrace::read_csv(csv.as_bytes()).unwrap();
    assert_eq!(back, trace);
    assert_eq!(analysis::build_report(&pr, &back).to_json().unwrap(), report);
}

#[test]
fn realized_packet_log_respects_bounds() {
    let cfg = short_attack();
    let (trace, report) = analysis::run_and_report(&cfg).unwrap();
    assert!(!analysis::blocked_runs(&trace, 1).is_empty());
    let realized = report.realized_dos.expect("attack configured");
    assert!(realized.within_bounds, "{}", realized.detail);
    for i in 2..trace.agents {
        assert!(trace.series(i).all(|r| r.pkt), "only vehicle 1 is targeted");
    }
}

#[test]
fn zero_input_applies_nothing_while_blocked() {
    let mut cfg = short_attack();
    cfg.input_mechanism = nvsc_core::controller::InputMechanism::Zero;
    let (trace, _) = analysis::run_and_report(&cfg).unwrap();
    for (s, e) in analysis::blocked_runs(&trace, 1) {
        for k in s..e {
            assert_eq!(trace.row(k, 1).u, 0.0);
        }
    }
}

#[test]
fn attack_free_run_has_no_attack_artifacts() {
    let mut cfg = ScenarioConfig::platoon_default();
    cfg.horizon = 0.5;
    let (trace, report) = analysis::run_and_report(&cfg).unwrap();
    assert!(trace.rows.iter().all(|r| r.pkt && !r.eps && !r.held));
    assert!(report.held_deviation_intervals.is_empty());
    assert!(report.residual_bound.is_none());
    assert!(report.claims_for("observer_envelope").all(|c| c.applicable));
}
