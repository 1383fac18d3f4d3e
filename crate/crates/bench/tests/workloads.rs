//! The benchmark inputs are valid and exercise the paths they are meant to time.

use margin_risk::{
    build_decision_map, reference_rules, simulate_flight, DroneParams, IdwParams, PipelineConfig,
    RiskEstimator, RiskModel, RiskSource, WindScenario,
};

#[test]
fn streaming_workload_emits_every_frame() {
    let scenario = WindScenario::new(6.0, 9.0, 60.0, 1).with_gust(20.0, 30.0, 12.0);
    let frames = simulate_flight(&scenario, &DroneParams::default(), 10.0).unwrap();
    assert_eq!(frames.len(), 600);
    let rules = reference_rules();
    let map = build_decision_map(&rules, 101, 101, IdwParams::default()).unwrap();
    let mut est = RiskEstimator::new(
        PipelineConfig::default(),
        RiskModel::new(Some(rules), Some(map)).unwrap(),
    )
    .unwrap();
    let records: Vec<_> = frames.iter().filter_map(|f| est.push(f).unwrap()).collect();
    assert_eq!(records.len(), 600);
    // the gust drives the window into the corner no reference rule covers
    assert!(records.iter().any(|r| r.source == RiskSource::MapLookup));
    assert!(records.iter().any(|r| r.source == RiskSource::Inference));
}
