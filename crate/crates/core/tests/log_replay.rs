//! Metrics recomputed from a persisted event log match the live run.

use choir_core::runner::{report_dir, run_scenario, write_outputs};
use choir_core::scenario::Scenario;

const SCENARIO: &str = r#"
duration_s = 5
warmup_s = 1
seed = 17
log_level = "full"

[trace]
kind = "square"
high = 28
low = 12
period_s = 1.0

[ran]
bler = 0.1

[[flows]]
replicas = 3
wired_nd_ms = 3

[[flows]]
controller = "oracle"
start_s = 1.5
stop_s = 4.0
"#;

#[test]
fn report_reproduces_live_metrics() {
    let scn = Scenario::parse(SCENARIO).unwrap();
    let live = run_scenario(&scn).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_outputs(&scn, &live, dir.path()).unwrap();
    let replayed = report_dir(dir.path()).unwrap();
    assert_eq!(replayed, live.metrics);
    assert_eq!(replayed.flows.len(), 4);
    // a flow that stops early still has frames only inside its on-period
    let late = live.frames.iter().filter(|f| f.flow_id == 3);
    assert!(late.clone().all(|f| (1_500_000..4_000_000).contains(&f.encode_us)));
    assert!(late.count() > 100);
}

#[test]
fn metrics_csv_matches_recomputed_file() {
    let scn = Scenario::parse(SCENARIO).unwrap();
    let live = run_scenario(&scn).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_outputs(&scn, &live, dir.path()).unwrap();
    let before = std::fs::read(dir.path().join("metrics.csv")).unwrap();
    let m = report_dir(dir.path()).unwrap();
    let mut again = Vec::new();
    m.write_csv(&mut again).unwrap();
    assert_eq!(before, again);
}
