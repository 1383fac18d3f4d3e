//! Elevated-risk accumulator.
//!
//! The recent instantaneous risks are treated as a normal sample. Its upper
//! tail above `x_high` drives the accumulated index up, its lower tail below
//! `x_low` drives it down:
//!
//! `dR = k_i * P(r > x_high) - k_d * P(r <= x_low)`, clamped to `[0, 100]`.

use std::collections::VecDeque;
use std::f64::consts::FRAC_1_SQRT_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::margin::mean_std;

/// Error function.
pub fn erf(x: f64) -> f64 {
    libm::erf(x)
}

/// `P(X <= x)` for `X ~ N(mu, sigma)`. A zero `sigma` degenerates into a
/// right-continuous step at `mu`.
pub fn normal_cdf(x: f64, mu: f64, sigma: f64) -> Result<f64> {
    if !(sigma.is_finite() && sigma >= 0.0) {
        return Err(Error::Input(format!(
            "standard deviation {sigma} must be >= 0"
        )));
    }
    if sigma == 0.0 {
        return Ok(if x < mu { 0.0 } else { 1.0 });
    }
    let z = (x - mu) / sigma;
    Ok(0.5 * (1.0 + erf(z * FRAC_1_SQRT_2)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AccumulatorParams {
    /// History length in samples.
    pub window: usize,
    /// Instantaneous risk (%) above which a sample counts as high.
    pub x_high: f64,
    /// Instantaneous risk (%) at or below which a sample counts as low.
    pub x_low: f64,
    /// Accumulation gain, % per step.
    pub k_i: f64,
    /// Decay gain, % per step.
    pub k_d: f64,
}

impl Default for AccumulatorParams {
    fn default() -> Self {
        Self {
            window: 50,
            x_high: 75.0,
            x_low: 25.0,
            k_i: 2.0,
            k_d: 1.0,
        }
    }
}

impl AccumulatorParams {
    pub fn validate(&self) -> Result<()> {
        if self.window < 2 {
            return Err(Error::Config(format!(
                "accumulator window must hold at least 2 samples, got {}",
                self.window
            )));
        }
        if !(0.0 <= self.x_low && self.x_low < self.x_high && self.x_high <= 100.0) {
            return Err(Error::Config(format!(
                "need 0 <= x_low < x_high <= 100, got x_low={} x_high={}",
                self.x_low, self.x_high
            )));
        }
        if !(self.k_i >= 0.0 && self.k_d >= 0.0 && self.k_i.is_finite() && self.k_d.is_finite()) {
            return Err(Error::Config(format!(
                "gains must be finite and non-negative, got k_i={} k_d={}",
                self.k_i, self.k_d
            )));
        }
        Ok(())
    }
}

/// Result of one accumulator step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub p_high: f64,
    pub p_low: f64,
    /// Accumulated risk after the step.
    pub risk_acc: f64,
    /// The input had to be clamped into `[0, 100]`.
    pub clamped_input: bool,
}

/// Per-stream accumulator state.
#[derive(Debug, Clone)]
pub struct RiskState {
    params: AccumulatorParams,
    window: VecDeque<f64>,
    risk_acc: f64,
}

impl RiskState {
    pub fn new(params: AccumulatorParams) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            params,
            window: VecDeque::with_capacity(params.window),
            risk_acc: 0.0,
        })
    }

    pub fn params(&self) -> &AccumulatorParams {
        &self.params
    }

    pub fn risk_acc(&self) -> f64 {
        self.risk_acc
    }

    pub fn history(&self) -> impl Iterator<Item = f64> + '_ {
        self.window.iter().copied()
    }

    /// Tail probabilities `(P(r > x_high), P(r <= x_low))` of the current window.
    pub fn tail_probabilities(&self) -> Result<(f64, f64)> {
        let (mu, sigma) = mean_std(self.window.iter().copied())
            .ok_or(Error::InsufficientData("empty risk history"))?;
        let p_high = 1.0 - normal_cdf(self.params.x_high, mu, sigma)?;
        let p_low = normal_cdf(self.params.x_low, mu, sigma)?;
        Ok((p_high, p_low))
    }

    /// Push an instantaneous risk (%) and update the accumulated index.
    pub fn step(&mut self, r_inst: f64) -> Result<StepOutcome> {
        if !r_inst.is_finite() {
            return Err(Error::Input(format!(
                "instantaneous risk {r_inst} is not finite"
            )));
        }
        let clamped = r_inst.clamp(0.0, 100.0);
        if clamped != r_inst {
            log::warn!("instantaneous risk {r_inst} clamped into [0, 100]");
        }
        if self.window.len() == self.params.window {
            self.window.pop_front();
        }
        self.window.push_back(clamped);
        let (p_high, p_low) = self.tail_probabilities()?;
        self.apply(p_high, p_low);
        Ok(StepOutcome {
            p_high,
            p_low,
            risk_acc: self.risk_acc,
            clamped_input: clamped != r_inst,
        })
    }

    /// Apply one update with externally supplied tail probabilities.
    pub fn apply(&mut self, p_high: f64, p_low: f64) -> f64 {
        let delta = self.params.k_i * p_high - self.params.k_d * p_low;
        self.risk_acc = (self.risk_acc + delta).clamp(0.0, 100.0);
        self.risk_acc
    }
}
