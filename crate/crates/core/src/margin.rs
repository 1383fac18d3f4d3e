//! Motor saturation margins and their windowed statistics.
//!
//! Raw ESC commands are normalized against the saturation limits, turned into
//! a distance-to-nearest-limit margin, reduced to the worst motor per frame and
//! finally summarized as a windowed mean and standard deviation. Those two
//! numbers are the inputs of the fuzzy estimator.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Desired and measured roll/pitch, in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Attitude {
    pub roll_des: f64,
    pub roll: f64,
    pub pitch_des: f64,
    pub pitch: f64,
}

impl Attitude {
    /// Attitude with the given tracking errors and zero setpoints.
    pub fn from_errors(roll_err: f64, pitch_err: f64) -> Self {
        Self {
            roll_des: 0.0,
            roll: -roll_err,
            pitch_des: 0.0,
            pitch: -pitch_err,
        }
    }

    pub fn roll_error(&self) -> f64 {
        self.roll_des - self.roll
    }

    pub fn pitch_error(&self) -> f64 {
        self.pitch_des - self.pitch
    }
}

/// One timestamped sample of raw motor commands.
#[derive(Debug, Clone, PartialEq)]
pub struct MotorFrame {
    /// Seconds since log start.
    pub t: f64,
    /// Raw ESC commands, one per motor.
    pub commands: Vec<f64>,
    pub attitude: Option<Attitude>,
}

impl MotorFrame {
    pub fn new(t: f64, commands: Vec<f64>) -> Self {
        Self {
            t,
            commands,
            attitude: None,
        }
    }

    pub fn with_attitude(mut self, attitude: Attitude) -> Self {
        self.attitude = Some(attitude);
        self
    }

    pub fn motor_count(&self) -> usize {
        self.commands.len()
    }
}

/// How raw commands are mapped onto the normalized command axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormalizationMode {
    /// `(c - low) / (high - low)`, so saturation at either end gives zero margin.
    #[default]
    Linear,
    /// `(c - low) / sqrt(high² - low²)`, the literal quadrature denominator.
    /// Kept for fidelity experiments; a fully saturated motor keeps a nonzero margin.
    QuadratureDenominator,
}

/// ESC saturation limits in raw command counts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SaturationLimits {
    pub low: f64,
    pub high: f64,
    #[serde(default)]
    pub mode: NormalizationMode,
}

impl Default for SaturationLimits {
    fn default() -> Self {
        Self {
            low: 1000.0,
            high: 2000.0,
            mode: NormalizationMode::Linear,
        }
    }
}

impl SaturationLimits {
    pub fn new(low: f64, high: f64, mode: NormalizationMode) -> Result<Self> {
        let limits = Self { low, high, mode };
        limits.validate()?;
        Ok(limits)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.low.is_finite() && self.high.is_finite()) {
            return Err(Error::Config("saturation limits must be finite".into()));
        }
        if self.low <= 0.0 || self.high <= 0.0 {
            return Err(Error::Config(format!(
                "saturation limits must be positive (low={}, high={})",
                self.low, self.high
            )));
        }
        if self.low >= self.high {
            return Err(Error::Config(format!(
                "lower saturation limit {} must be below upper limit {}",
                self.low, self.high
            )));
        }
        Ok(())
    }

    /// Raw command corresponding to normalized command `u` in linear mode.
    pub fn denormalize(&self, u: f64) -> f64 {
        self.low + u * (self.high - self.low)
    }
}

/// Normalized command of a raw ESC value. The raw value is clamped into the
/// saturation range first.
pub fn normalize_command(c: f64, limits: &SaturationLimits) -> Result<f64> {
    limits.validate()?;
    if !c.is_finite() {
        return Err(Error::Input(format!("motor command {c} is not finite")));
    }
    let c = c.clamp(limits.low, limits.high);
    let offset = c - limits.low;
    Ok(match limits.mode {
        NormalizationMode::Linear => offset / (limits.high - limits.low),
        NormalizationMode::QuadratureDenominator => {
            offset / (limits.high * limits.high - limits.low * limits.low).sqrt()
        }
    })
}

/// Distance of a normalized command to its nearest saturation limit.
pub fn motor_margin(c_norm: f64) -> f64 {
    c_norm.min(1.0 - c_norm)
}

/// Margin of the worst (closest to saturation) motor in the frame.
pub fn frame_margin(frame: &MotorFrame, limits: &SaturationLimits) -> Result<f64> {
    if frame.commands.is_empty() {
        return Err(Error::Input(format!(
            "frame at t={} has no motor commands",
            frame.t
        )));
    }
    frame
        .commands
        .iter()
        .map(|&c| normalize_command(c, limits).map(motor_margin))
        .try_fold(f64::INFINITY, |acc, m| m.map(|m| acc.min(m)))
}

/// Windowed summary of per-frame margins.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarginStats {
    pub mean: f64,
    pub std: f64,
    pub window_start: f64,
    pub window_end: f64,
}

/// Population mean and standard deviation (two-pass). Constant inputs give
/// exactly their common value and zero spread.
pub fn mean_std(values: impl Iterator<Item = f64> + Clone) -> Option<(f64, f64)> {
    let mut it = values.clone();
    let first = it.next()?;
    if it.all(|v| v == first) {
        return Some((first, 0.0));
    }
    let (n, sum) = values
        .clone()
        .fold((0usize, 0.0), |(n, s), v| (n + 1, s + v));
    let mean = sum / n as f64;
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
    Some((mean, var.sqrt()))
}

/// Population mean/std of the margins whose timestamps fall in
/// `[t_now - window, t_now]`.
pub fn window_stats(margins: &[(f64, f64)], window: f64, t_now: f64) -> Result<MarginStats> {
    let start = t_now - window;
    let inside = margins
        .iter()
        .filter(move |(t, _)| *t >= start && *t <= t_now)
        .map(|&(_, m)| m);
    summarize(inside, start, t_now)
}

fn summarize(
    values: impl Iterator<Item = f64> + Clone,
    window_start: f64,
    window_end: f64,
) -> Result<MarginStats> {
    let (mean, std) = mean_std(values).ok_or(Error::InsufficientData("empty margin window"))?;
    Ok(MarginStats {
        mean,
        std,
        window_start,
        window_end,
    })
}

/// Sliding time window of per-frame margins for one stream.
#[derive(Debug, Clone)]
pub struct MarginWindow {
    length: f64,
    samples: VecDeque<(f64, f64)>,
}

impl MarginWindow {
    pub fn new(length: f64) -> Result<Self> {
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::Config(format!(
                "margin window must be positive, got {length}"
            )));
        }
        Ok(Self {
            length,
            samples: VecDeque::new(),
        })
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    /// Add a sample and drop anything older than the window.
    pub fn push(&mut self, t: f64, margin: f64) {
        self.samples.push_back((t, margin));
        let start = t - self.length;
        while let Some(&(front, _)) = self.samples.front() {
            if front < start {
                self.samples.pop_front();
            } else {
                break;
            }
        }
    }

    pub fn stats(&self) -> Result<MarginStats> {
        let end = self
            .samples
            .back()
            .map(|&(t, _)| t)
            .ok_or(Error::InsufficientData("empty margin window"))?;
        summarize(self.samples.iter().map(|&(_, m)| m), end - self.length, end)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// How roll and pitch errors are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RmseMode {
    /// `sqrt(roll_err² + pitch_err²)`.
    #[default]
    Sum,
    /// `sqrt(roll_err² - pitch_err²)`; fails when the radicand goes negative.
    Difference,
}

/// Root-mean-square attitude error over a window of frames, in degrees.
pub fn attitude_rmse(frames: &[MotorFrame], mode: RmseMode) -> Result<f64> {
    if frames.is_empty() {
        return Err(Error::InsufficientData("no frames for attitude error"));
    }
    let mut acc = 0.0;
    for frame in frames {
        let att = frame.attitude.as_ref().ok_or(Error::AttitudeUnavailable)?;
        let (dr, dp) = (att.roll_error(), att.pitch_error());
        acc += match mode {
            RmseMode::Sum => dr * dr + dp * dp,
            RmseMode::Difference => dr * dr - dp * dp,
        };
    }
    let mean_sq = acc / frames.len() as f64;
    if mean_sq < 0.0 {
        return Err(Error::NegativeRadicand(mean_sq));
    }
    Ok(mean_sq.sqrt())
}
