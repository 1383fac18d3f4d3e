//! Trapezoidal fuzzy sets, linguistic variables and Mamdani inference.
//!
//! Inference uses the product t-norm for rule firing, product implication,
//! max aggregation and a discrete centroid over the output universe.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rules::RuleSet;

/// Number of evenly spaced points used to sample the output universe.
pub const OUTPUT_SAMPLES: usize = 201;

/// A rule whose firing strength does not exceed this is treated as silent.
pub const FIRING_EPSILON: f64 = 1e-9;

/// Trapezoid with corners `a <= b <= c <= d`. Triangles have `b == c`,
/// shoulders have `a == b` or `c == d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FuzzySet {
    pub label: String,
    pub corners: [f64; 4],
}

impl FuzzySet {
    pub fn trapezoid(label: impl Into<String>, a: f64, b: f64, c: f64, d: f64) -> Self {
        Self {
            label: label.into(),
            corners: [a, b, c, d],
        }
    }

    pub fn triangle(label: impl Into<String>, a: f64, peak: f64, d: f64) -> Self {
        Self::trapezoid(label, a, peak, peak, d)
    }

    /// Membership degree of `x`.
    pub fn degree(&self, x: f64) -> f64 {
        let [a, b, c, d] = self.corners;
        if x < a || x > d {
            0.0
        } else if x >= b && x <= c {
            1.0
        } else if x < b {
            (x - a) / (b - a)
        } else {
            (d - x) / (d - c)
        }
    }

    /// Center of the plateau.
    pub fn peak(&self) -> f64 {
        0.5 * (self.corners[1] + self.corners[2])
    }

    fn validate(&self, lo: f64, hi: f64) -> Result<()> {
        let [a, b, c, d] = self.corners;
        if self.corners.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config(format!(
                "set {} has non-finite corners",
                self.label
            )));
        }
        if !(a <= b && b <= c && c <= d) {
            return Err(Error::Config(format!(
                "set {} corners {:?} are not ordered",
                self.label, self.corners
            )));
        }
        if a < lo || d > hi {
            return Err(Error::Config(format!(
                "set {} corners {:?} leave universe [{lo}, {hi}]",
                self.label, self.corners
            )));
        }
        Ok(())
    }
}

/// Named variable with an ordered family of fuzzy sets over a bounded universe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawVariable")]
pub struct LinguisticVariable {
    pub name: String,
    pub universe: (f64, f64),
    pub sets: Vec<FuzzySet>,
}

#[derive(Deserialize)]
struct RawVariable {
    name: String,
    universe: (f64, f64),
    sets: Vec<FuzzySet>,
}

impl TryFrom<RawVariable> for LinguisticVariable {
    type Error = Error;

    fn try_from(raw: RawVariable) -> Result<Self> {
        Self::new(raw.name, raw.universe, raw.sets)
    }
}

impl LinguisticVariable {
    /// Checks corner ordering, universe bounds, label uniqueness and the
    /// partition of unity.
    pub fn new(name: impl Into<String>, universe: (f64, f64), sets: Vec<FuzzySet>) -> Result<Self> {
        let var = Self {
            name: name.into(),
            universe,
            sets,
        };
        let (lo, hi) = universe;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::Config(format!(
                "variable {} has invalid universe [{lo}, {hi}]",
                var.name
            )));
        }
        if var.sets.is_empty() {
            return Err(Error::Config(format!("variable {} has no sets", var.name)));
        }
        for (i, set) in var.sets.iter().enumerate() {
            set.validate(lo, hi)?;
            if var.sets[..i].iter().any(|s| s.label == set.label) {
                return Err(Error::Config(format!(
                    "variable {} repeats label {}",
                    var.name, set.label
                )));
            }
        }
        let dev = var.partition_deviation(1001);
        if dev > 1e-9 {
            return Err(Error::Config(format!(
                "sets of {} do not form a partition of unity (max deviation {dev:e})",
                var.name
            )));
        }
        Ok(var)
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    pub fn label(&self, idx: usize) -> &str {
        &self.sets[idx].label
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.sets.iter().position(|s| s.label == label)
    }

    pub fn clamp(&self, x: f64) -> f64 {
        x.clamp(self.universe.0, self.universe.1)
    }

    /// Membership of `x` (clamped into the universe) in set `idx`.
    pub fn membership(&self, idx: usize, x: f64) -> f64 {
        self.sets[idx].degree(self.clamp(x))
    }

    /// Degrees of every set at `x`, in set order.
    pub fn fuzzify(&self, x: f64) -> Vec<(&str, f64)> {
        let x = self.clamp(x);
        self.sets
            .iter()
            .map(|s| (s.label.as_str(), s.degree(x)))
            .collect()
    }

    /// Index and degree of the set `x` belongs to most. Ties go to the lower index.
    pub fn best_label(&self, x: f64) -> (usize, f64) {
        let x = self.clamp(x);
        let mut best = (0, self.sets[0].degree(x));
        for (i, set) in self.sets.iter().enumerate().skip(1) {
            let d = set.degree(x);
            if d > best.1 {
                best = (i, d);
            }
        }
        best
    }

    /// Evenly spaced sample points across the universe.
    pub fn sample_points(&self, n: usize) -> Vec<f64> {
        let (lo, hi) = self.universe;
        (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect()
    }

    /// Largest `|sum of memberships - 1|` over `n` evenly spaced points.
    pub fn partition_deviation(&self, n: usize) -> f64 {
        self.sample_points(n)
            .into_iter()
            .map(|x| (self.sets.iter().map(|s| s.degree(x)).sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

/// The two inputs and the output of the estimator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Variables {
    pub mean: LinguisticVariable,
    pub std: LinguisticVariable,
    pub risk: LinguisticVariable,
}

impl Default for Variables {
    fn default() -> Self {
        default_variables()
    }
}

pub const VERY_LOW: &str = "VERY_LOW";
pub const LOW: &str = "LOW";
pub const MEDIUM: &str = "MEDIUM";
pub const HIGH: &str = "HIGH";
pub const VERY_HIGH: &str = "VERY_HIGH";

/// Default layout. Both inputs live on `[0, 0.5]`; the top of each range is
/// HIGH and the rest is split evenly in steps of 0.1. Risk spans `[0, 100]`
/// with five triangles 25 points apart.
pub fn default_variables() -> Variables {
    let mean = LinguisticVariable::new(
        "margin_mean",
        (0.0, 0.5),
        vec![
            FuzzySet::triangle(VERY_LOW, 0.0, 0.0, 0.1),
            FuzzySet::triangle(LOW, 0.0, 0.1, 0.2),
            FuzzySet::triangle(MEDIUM, 0.1, 0.2, 0.3),
            FuzzySet::trapezoid(HIGH, 0.2, 0.3, 0.5, 0.5),
        ],
    );
    let std = LinguisticVariable::new(
        "margin_std",
        (0.0, 0.5),
        vec![
            FuzzySet::triangle(LOW, 0.0, 0.0, 0.1),
            FuzzySet::triangle(MEDIUM, 0.0, 0.1, 0.2),
            FuzzySet::trapezoid(HIGH, 0.1, 0.2, 0.5, 0.5),
        ],
    );
    let risk = LinguisticVariable::new(
        "risk",
        (0.0, 100.0),
        vec![
            FuzzySet::triangle(VERY_LOW, 0.0, 0.0, 25.0),
            FuzzySet::triangle(LOW, 0.0, 25.0, 50.0),
            FuzzySet::triangle(MEDIUM, 25.0, 50.0, 75.0),
            FuzzySet::triangle(HIGH, 50.0, 75.0, 100.0),
            FuzzySet::triangle(VERY_HIGH, 75.0, 100.0, 100.0),
        ],
    );
    Variables {
        mean: mean.expect("default mean layout"),
        std: std.expect("default std layout"),
        risk: risk.expect("default risk layout"),
    }
}

/// Discrete centroid `sum(x * mu) / sum(mu)`.
pub fn defuzzify(xs: &[f64], mu: &[f64]) -> Result<f64> {
    if xs.len() < 2 || xs.len() != mu.len() {
        return Err(Error::Input(format!(
            "need at least two matching samples to defuzzify, got {} points and {} degrees",
            xs.len(),
            mu.len()
        )));
    }
    let (num, den) = xs
        .iter()
        .zip(mu)
        .fold((0.0, 0.0), |(n, d), (&x, &m)| (n + x * m, d + m));
    if den <= 0.0 {
        return Err(Error::ZeroAggregate);
    }
    Ok(num / den)
}

/// Crisp risk for the given margin statistics.
pub fn infer(rules: &RuleSet, mean: f64, std: f64) -> Result<f64> {
    infer_detailed(rules, mean, std).map(|inf| inf.risk)
}

/// Output of one inference call.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Inference {
    pub risk: f64,
    /// Strongest firing strength among the rules.
    pub max_strength: f64,
}

/// Mamdani inference: product firing, product implication, max aggregation,
/// centroid over [`OUTPUT_SAMPLES`] points.
pub fn infer_detailed(rules: &RuleSet, mean: f64, std: f64) -> Result<Inference> {
    if !(mean.is_finite() && std.is_finite()) {
        return Err(Error::Input(format!(
            "non-finite inference inputs ({mean}, {std})"
        )));
    }
    if rules.is_empty() {
        return Err(Error::Config("rule set is empty".into()));
    }
    let vars = rules.variables();
    let firing: Vec<(usize, f64)> = rules
        .rules()
        .iter()
        .map(|r| {
            let s = vars.mean.membership(r.mean, mean) * vars.std.membership(r.std, std);
            (r.risk, s)
        })
        .filter(|&(_, s)| s > 0.0)
        .collect();
    let max_strength = firing.iter().map(|&(_, s)| s).fold(0.0, f64::max);
    if max_strength <= FIRING_EPSILON {
        return Err(Error::UncoveredInput { mean, std });
    }

    let xs = vars.risk.sample_points(OUTPUT_SAMPLES);
    let aggregated: Vec<f64> = xs
        .iter()
        .map(|&x| {
            firing
                .iter()
                .map(|&(set, s)| s * vars.risk.sets[set].degree(x))
                .fold(0.0, f64::max)
        })
        .collect();
    let risk = defuzzify(&xs, &aggregated)?;
    let (lo, hi) = vars.risk.universe;
    Ok(Inference {
        risk: risk.clamp(lo, hi),
        max_strength,
    })
}
