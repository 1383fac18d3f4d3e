//! Streaming estimator: motor frames in, risk records out.
//!
//! Per emitted step: worst-motor margin -> sliding-window mean/std -> fuzzy
//! inference (decision-map lookup when no rule fires) -> accumulator.

use serde::{Deserialize, Serialize};

use crate::accumulator::{AccumulatorParams, RiskState};
use crate::error::{Error, Result};
use crate::fuzzy;
use crate::margin::{frame_margin, MarginWindow, MotorFrame, SaturationLimits};
use crate::rules::{DecisionMap, RuleSet};

/// Estimator settings shared by every stream.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub limits: SaturationLimits,
    /// Margin statistics window, seconds.
    pub window: f64,
    pub accumulator: AccumulatorParams,
    /// Records per second. `None` emits one record per input frame.
    pub emit_rate: Option<f64>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            limits: SaturationLimits::default(),
            window: 2.0,
            accumulator: AccumulatorParams::default(),
            emit_rate: None,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.limits.validate()?;
        self.accumulator.validate()?;
        if !(self.window.is_finite() && self.window > 0.0) {
            return Err(Error::Config(format!(
                "window {} must be positive",
                self.window
            )));
        }
        if let Some(rate) = self.emit_rate {
            if !(rate.is_finite() && rate > 0.0) {
                return Err(Error::Config(format!("emit rate {rate} must be positive")));
            }
        }
        Ok(())
    }
}

/// What maps margin statistics to instantaneous risk.
#[derive(Debug, Clone)]
pub struct RiskModel {
    rules: Option<RuleSet>,
    map: Option<DecisionMap>,
}

impl RiskModel {
    pub fn new(rules: Option<RuleSet>, map: Option<DecisionMap>) -> Result<Self> {
        if rules.is_none() && map.is_none() {
            return Err(Error::Config("need a rule set or a decision map".into()));
        }
        if rules.as_ref().is_some_and(RuleSet::is_empty) {
            return Err(Error::Config("rule set is empty".into()));
        }
        Ok(Self { rules, map })
    }

    pub fn from_rules(rules: RuleSet) -> Result<Self> {
        Self::new(Some(rules), None)
    }

    pub fn from_map(map: DecisionMap) -> Result<Self> {
        Self::new(None, Some(map))
    }

    pub fn rules(&self) -> Option<&RuleSet> {
        self.rules.as_ref()
    }

    pub fn map(&self) -> Option<&DecisionMap> {
        self.map.as_ref()
    }

    /// Instantaneous risk and how it was obtained; `None` when nothing covers the input.
    pub fn evaluate(&self, mean: f64, std: f64) -> Result<Option<(f64, RiskSource)>> {
        if let Some(rules) = &self.rules {
            match fuzzy::infer(rules, mean, std) {
                Ok(r) => return Ok(Some((r, RiskSource::Inference))),
                Err(Error::UncoveredInput { .. }) => {}
                Err(e) => return Err(e),
            }
        }
        Ok(self
            .map
            .as_ref()
            .map(|m| (m.lookup(mean, std), RiskSource::MapLookup)))
    }
}

/// How `risk_inst` of a record was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RiskSource {
    Inference,
    MapLookup,
    /// No rule fired and no map was available; the previous value was repeated.
    Held,
}

impl RiskSource {
    pub fn as_str(&self) -> &'static str {
        match self {
            RiskSource::Inference => "inference",
            RiskSource::MapLookup => "map",
            RiskSource::Held => "held",
        }
    }
}

/// One emitted estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiskRecord {
    pub t: f64,
    pub margin_mean: f64,
    pub margin_std: f64,
    /// Instantaneous fuzzy risk, %.
    pub risk_inst: f64,
    pub p_high: f64,
    pub p_low: f64,
    /// Accumulated risk, %.
    pub risk_acc: f64,
    pub source: RiskSource,
}

/// Per-stream estimator state. Feed frames in time order with [`push`](Self::push).
#[derive(Debug, Clone)]
pub struct RiskEstimator {
    config: PipelineConfig,
    model: RiskModel,
    window: MarginWindow,
    state: RiskState,
    motors: Option<usize>,
    last_t: Option<f64>,
    next_emit: Option<f64>,
    last_risk: Option<f64>,
}

impl RiskEstimator {
    pub fn new(config: PipelineConfig, model: RiskModel) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            window: MarginWindow::new(config.window)?,
            state: RiskState::new(config.accumulator)?,
            config,
            model,
            motors: None,
            last_t: None,
            next_emit: None,
            last_risk: None,
        })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn risk_acc(&self) -> f64 {
        self.state.risk_acc()
    }

    /// Consume one frame. Returns a record when this frame is an emission step.
    pub fn push(&mut self, frame: &MotorFrame) -> Result<Option<RiskRecord>> {
        if !frame.t.is_finite() {
            return Err(Error::Input(format!(
                "frame time {} is not finite",
                frame.t
            )));
        }
        if let Some(prev) = self.last_t {
            if frame.t < prev {
                return Err(Error::Input(format!(
                    "frame time {} precedes previous frame {prev}",
                    frame.t
                )));
            }
        }
        match self.motors {
            Some(n) if n != frame.motor_count() => {
                return Err(Error::Input(format!(
                    "frame at t={} has {} motors, expected {n}",
                    frame.t,
                    frame.motor_count()
                )));
            }
            _ => self.motors = Some(frame.motor_count()),
        }
        let margin = frame_margin(frame, &self.config.limits)?;
        self.last_t = Some(frame.t);
        self.window.push(frame.t, margin);

        if !self.is_emission(frame.t) {
            return Ok(None);
        }
        let stats = self.window.stats()?;
        let (risk_inst, source) = match self.model.evaluate(stats.mean, stats.std)? {
            Some(v) => v,
            None => match self.last_risk {
                Some(prev) => (prev, RiskSource::Held),
                None => {
                    log::warn!(
                        "t={}: no rule fires at ({}, {}) and there is no earlier estimate to hold",
                        frame.t,
                        stats.mean,
                        stats.std
                    );
                    return Ok(None);
                }
            },
        };
        self.last_risk = Some(risk_inst);
        let step = self.state.step(risk_inst)?;
        Ok(Some(RiskRecord {
            t: frame.t,
            margin_mean: stats.mean,
            margin_std: stats.std,
            risk_inst,
            p_high: step.p_high,
            p_low: step.p_low,
            risk_acc: step.risk_acc,
            source,
        }))
    }

    fn is_emission(&mut self, t: f64) -> bool {
        let Some(rate) = self.config.emit_rate else {
            return true;
        };
        let period = 1.0 / rate;
        match self.next_emit {
            None => {
                self.next_emit = Some(t + period);
                true
            }
            Some(next) if t >= next => {
                // skip whole periods when the log has gaps
                let missed = ((t - next) / period).floor();
                self.next_emit = Some(next + (missed + 1.0) * period);
                true
            }
            Some(_) => false,
        }
    }
}

/// Run a whole log through a fresh estimator.
pub fn run_pipeline(
    config: &PipelineConfig,
    model: &RiskModel,
    frames: &[MotorFrame],
) -> Result<Vec<RiskRecord>> {
    if frames.is_empty() {
        return Err(Error::Input("flight log has no frames".into()));
    }
    let mut est = RiskEstimator::new(*config, model.clone())?;
    let mut out = Vec::new();
    for f in frames {
        if let Some(r) = est.push(f)? {
            out.push(r);
        }
    }
    Ok(out)
}
