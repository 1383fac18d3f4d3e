//! Real-time external-disturbance risk estimation for multirotors.
//!
//! Motor commands are reduced to saturation margins, summarized over a sliding
//! window, mapped to an instantaneous risk by a fuzzy rule base learned from
//! data, and integrated into an elevated-risk index.
//!
//! ```
//! use margin_risk::{reference_rules, run_pipeline, MotorFrame, PipelineConfig, RiskModel};
//!
//! let frames: Vec<_> = (0..20)
//!     .map(|i| MotorFrame::new(i as f64 * 0.1, vec![1550.0, 1450.0, 1550.0, 1450.0]))
//!     .collect();
//! let model = RiskModel::from_rules(reference_rules()).unwrap();
//! let records = run_pipeline(&PipelineConfig::default(), &model, &frames).unwrap();
//! assert!(records.iter().all(|r| r.risk_acc < 25.0));
//! ```

pub mod accumulator;
pub mod error;
pub mod fuzzy;
pub mod io;
pub mod margin;
pub mod pipeline;
pub mod rules;
pub mod synth;

pub use accumulator::{erf, normal_cdf, AccumulatorParams, RiskState, StepOutcome};
pub use error::{Error, Result};
pub use fuzzy::{
    default_variables, defuzzify, infer, FuzzySet, LinguisticVariable, Variables, FIRING_EPSILON,
    OUTPUT_SAMPLES,
};
pub use margin::{
    attitude_rmse, frame_margin, motor_margin, normalize_command, window_stats, Attitude,
    MarginStats, MarginWindow, MotorFrame, NormalizationMode, RmseMode, SaturationLimits,
};
pub use pipeline::{
    run_pipeline, PipelineConfig, RiskEstimator, RiskModel, RiskRecord, RiskSource,
};
pub use rules::{
    build_decision_map, dedupe, learn_rule, learn_ruleset, reference_rules, risk_from_rmse,
    DataPair, DecisionMap, IdwParams, Provenance, Rule, RuleSet, TiePolicy,
};
pub use synth::{gen_dataset, simulate_flight, DroneParams, ScenarioGrid, WindScenario};
