//! Synthetic flights and training datasets.
//!
//! This is a calibrated statistical surrogate, not a flight simulator. Wind
//! pushes half of the motors up and half down (differential thrust) and lifts
//! all of them a little (drag compensation). Whatever the ESC clips away is a
//! saturation deficit, and the attitude error integrates that deficit on top
//! of a small wind-proportional tracking error.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::margin::{
    attitude_rmse, frame_margin, mean_std, Attitude, MotorFrame, RmseMode, SaturationLimits,
};
use crate::rules::{risk_from_rmse, DataPair};

/// Extra wind added on `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gust {
    pub start: f64,
    pub end: f64,
    /// m/s added to the sampled wind.
    pub extra: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindScenario {
    /// Mean wind speed, m/s, in `[0, 20]`.
    pub wind_mean: f64,
    /// Wind variance, m²/s², in `[0, 40]`.
    pub wind_var: f64,
    /// Seconds.
    pub duration: f64,
    pub seed: u64,
    #[serde(default)]
    pub gusts: Vec<Gust>,
}

impl WindScenario {
    pub fn new(wind_mean: f64, wind_var: f64, duration: f64, seed: u64) -> Self {
        Self {
            wind_mean,
            wind_var,
            duration,
            seed,
            gusts: Vec::new(),
        }
    }

    pub fn with_gust(mut self, start: f64, end: f64, extra: f64) -> Self {
        self.gusts.push(Gust { start, end, extra });
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=20.0).contains(&self.wind_mean) {
            return Err(Error::Input(format!(
                "wind mean {} outside [0, 20] m/s",
                self.wind_mean
            )));
        }
        if !(0.0..=40.0).contains(&self.wind_var) {
            return Err(Error::Input(format!(
                "wind variance {} outside [0, 40] m²/s²",
                self.wind_var
            )));
        }
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return Err(Error::Input(format!(
                "duration {} must be positive",
                self.duration
            )));
        }
        for g in &self.gusts {
            if !(g.start.is_finite()
                && g.end.is_finite()
                && g.start <= g.end
                && g.extra.is_finite())
            {
                return Err(Error::Input(format!("malformed gust {g:?}")));
            }
        }
        Ok(())
    }

    fn gust_at(&self, t: f64) -> f64 {
        self.gusts
            .iter()
            .filter(|g| t >= g.start && t < g.end)
            .map(|g| g.extra)
            .sum()
    }
}

/// Surrogate airframe.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DroneParams {
    pub motors: usize,
    /// Hover command as a fraction of the ESC range; roughly 1 / (thrust-to-weight).
    pub hover: f64,
    /// Differential command per m/s of wind.
    pub disturbance_gain: f64,
    /// Common-mode command per m/s of wind.
    pub drag_gain: f64,
    /// Degrees of attitude error per unit of clipped command, per step.
    pub attitude_gain: f64,
    /// Degrees of tracking error per m/s of wind when unsaturated.
    pub tracking_gain: f64,
    /// Attitude error decay time constant, seconds.
    pub attitude_tau: f64,
    /// Standard deviation of per-motor command noise (normalized units).
    pub command_noise: f64,
    pub limits: SaturationLimits,
}

impl Default for DroneParams {
    fn default() -> Self {
        Self {
            motors: 4,
            hover: 0.6,
            disturbance_gain: 0.034,
            drag_gain: 0.006,
            attitude_gain: 10.0,
            tracking_gain: 0.1,
            attitude_tau: 1.0,
            command_noise: 0.01,
            limits: SaturationLimits::default(),
        }
    }
}

impl DroneParams {
    pub fn validate(&self) -> Result<()> {
        self.limits.validate()?;
        if self.motors == 0 {
            return Err(Error::Config("drone needs at least one motor".into()));
        }
        if !(self.hover > 0.0 && self.hover < 1.0) {
            return Err(Error::Config(format!(
                "hover fraction {} outside (0, 1)",
                self.hover
            )));
        }
        let gains = [
            self.disturbance_gain,
            self.drag_gain,
            self.attitude_gain,
            self.tracking_gain,
            self.command_noise,
        ];
        if gains.iter().any(|g| !(g.is_finite() && *g >= 0.0)) {
            return Err(Error::Config(
                "drone gains must be finite and non-negative".into(),
            ));
        }
        if !(self.attitude_tau.is_finite() && self.attitude_tau > 0.0) {
            return Err(Error::Config(
                "attitude time constant must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Simulate one flight sampled at `rate` Hz.
pub fn simulate_flight(
    scenario: &WindScenario,
    drone: &DroneParams,
    rate: f64,
) -> Result<Vec<MotorFrame>> {
    if !(rate.is_finite() && rate > 0.0) {
        return Err(Error::Input(format!("sample rate {rate} must be positive")));
    }
    scenario.validate()?;
    drone.validate()?;

    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    let bearing: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    let (sin_b, cos_b) = bearing.sin_cos();
    let wind_sd = scenario.wind_var.sqrt();
    let dt = 1.0 / rate;
    let decay = (-dt / drone.attitude_tau).exp();
    let steps = (scenario.duration * rate).floor() as usize;

    let mut error = 0.0;
    let mut frames = Vec::with_capacity(steps);
    for i in 0..steps {
        let t = i as f64 * dt;
        let gauss: f64 = rng.sample(StandardNormal);
        let wind = (scenario.wind_mean + wind_sd * gauss).max(0.0) + scenario.gust_at(t);
        let mut deficit = 0.0;
        let commands = (0..drone.motors)
            .map(|n| {
                let direction = if n % 2 == 0 { 1.0 } else { -1.0 };
                let noise: f64 = rng.sample(StandardNormal);
                let raw = drone.hover
                    + drone.drag_gain * wind
                    + direction * drone.disturbance_gain * wind
                    + drone.command_noise * noise;
                let u = raw.clamp(0.0, 1.0);
                deficit += (raw - u).abs();
                drone.limits.denormalize(u)
            })
            .collect();
        error = decay * error
            + (1.0 - decay) * drone.tracking_gain * wind
            + drone.attitude_gain * deficit;
        frames.push(
            MotorFrame::new(t, commands)
                .with_attitude(Attitude::from_errors(error * cos_b, error * sin_b)),
        );
    }
    Ok(frames)
}

/// Whole-flight margin statistics and attitude-derived risk of one flight.
pub fn flight_pair(frames: &[MotorFrame], limits: &SaturationLimits) -> Result<DataPair> {
    let margins = frames
        .iter()
        .map(|f| frame_margin(f, limits))
        .collect::<Result<Vec<_>>>()?;
    let (mean, std) =
        mean_std(margins.iter().copied()).ok_or(Error::InsufficientData("empty flight"))?;
    let rmse = attitude_rmse(frames, RmseMode::Sum)?;
    DataPair::new(mean.clamp(0.0, 0.5), std.min(0.5), risk_from_rmse(rmse))
}

/// One data pair per scenario. Scenarios run in parallel; output order
/// follows input order.
pub fn gen_dataset(
    scenarios: &[WindScenario],
    drone: &DroneParams,
    rate: f64,
) -> Result<Vec<DataPair>> {
    if scenarios.is_empty() {
        return Err(Error::Input("no scenarios to simulate".into()));
    }
    scenarios
        .par_iter()
        .map(|s| flight_pair(&simulate_flight(s, drone, rate)?, &drone.limits))
        .collect()
}

/// Regular grid of wind means over `[0, 20]` and variances over `[0, 40]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioGrid {
    pub mean_levels: usize,
    pub var_levels: usize,
    /// Seconds per scenario.
    pub duration: f64,
    pub seed: u64,
}

impl ScenarioGrid {
    pub fn new(mean_levels: usize, var_levels: usize, seed: u64) -> Self {
        Self {
            mean_levels,
            var_levels,
            duration: 60.0,
            seed,
        }
    }

    /// Scenarios in mean-major order, each with its own derived seed.
    pub fn scenarios(&self) -> Result<Vec<WindScenario>> {
        if self.mean_levels < 1 || self.var_levels < 1 {
            return Err(Error::Input(format!(
                "scenario grid {}x{} is empty",
                self.mean_levels, self.var_levels
            )));
        }
        let level = |n: usize, i: usize, hi: f64| {
            if n == 1 {
                0.0
            } else {
                hi * i as f64 / (n - 1) as f64
            }
        };
        let mut out = Vec::with_capacity(self.mean_levels * self.var_levels);
        for i in 0..self.mean_levels {
            for j in 0..self.var_levels {
                let index = (i * self.var_levels + j) as u64;
                out.push(WindScenario::new(
                    level(self.mean_levels, i, 20.0),
                    level(self.var_levels, j, 40.0),
                    self.duration,
                    derive_seed(self.seed, index),
                ));
            }
        }
        Ok(out)
    }
}

/// Independent per-item seed from a base seed (SplitMix64 finalizer).
pub fn derive_seed(base: u64, index: u64) -> u64 {
    let mut z = base.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
