//! Rule learning from numerical data pairs and the precomputed decision map.
//!
//! Each data pair is labeled with its strongest set on every variable and
//! turned into one rule whose degree is the product of the three winning
//! memberships. Conflicting rules (same antecedents) are resolved by keeping
//! the one with the highest degree.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fuzzy::{self, Variables, FIRING_EPSILON};

/// One training example: windowed margin statistics and the observed risk.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DataPair {
    pub margin_mean: f64,
    pub margin_std: f64,
    pub risk: f64,
}

impl DataPair {
    pub fn new(margin_mean: f64, margin_std: f64, risk: f64) -> Result<Self> {
        let pair = Self {
            margin_mean,
            margin_std,
            risk,
        };
        pair.validate()?;
        Ok(pair)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64, hi: f64| v.is_finite() && (0.0..=hi).contains(&v);
        if ok(self.margin_mean, 0.5) && ok(self.margin_std, 0.5) && ok(self.risk, 100.0) {
            Ok(())
        } else {
            Err(Error::Input(format!("data pair out of range: {self:?}")))
        }
    }
}

/// Risk (%) assigned to a flight with the given attitude RMSE in degrees.
/// Linear, 15 %/°, so a 5° RMSE lands on the HIGH peak (75 %). Saturates at 100 %.
pub fn risk_from_rmse(rmse_deg: f64) -> f64 {
    (15.0 * rmse_deg).clamp(0.0, 100.0)
}

/// `IF mean is A AND std is B THEN risk is C`, with indices into [`Variables`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rule {
    pub mean: usize,
    pub std: usize,
    pub risk: usize,
    pub degree: f64,
}

impl Rule {
    pub fn new(mean: usize, std: usize, risk: usize, degree: f64) -> Self {
        Self {
            mean,
            std,
            risk,
            degree,
        }
    }

    pub fn antecedent(&self) -> (usize, usize) {
        (self.mean, self.std)
    }
}

/// Where a rule set came from.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    /// Number of data pairs the rules were learned from.
    pub pairs: usize,
    /// Seconds since the Unix epoch at learning time.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub created_unix: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
}

/// Rules with unique antecedent pairs, sorted by antecedent, plus the
/// variables they refer to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RuleSetFile", into = "RuleSetFile")]
pub struct RuleSet {
    variables: Variables,
    rules: Vec<Rule>,
    pub provenance: Provenance,
}

impl RuleSet {
    pub fn new(variables: Variables, mut rules: Vec<Rule>) -> Result<Self> {
        for r in &rules {
            if r.mean >= variables.mean.len()
                || r.std >= variables.std.len()
                || r.risk >= variables.risk.len()
            {
                return Err(Error::Config(format!(
                    "rule {r:?} refers to a missing label"
                )));
            }
            if !(r.degree > 0.0 && r.degree <= 1.0) {
                return Err(Error::Config(format!(
                    "rule degree {} outside (0, 1]",
                    r.degree
                )));
            }
        }
        rules.sort_by_key(Rule::antecedent);
        if let Some(w) = rules
            .windows(2)
            .find(|w| w[0].antecedent() == w[1].antecedent())
        {
            return Err(Error::Config(format!(
                "duplicate antecedent ({}, {})",
                variables.mean.label(w[0].mean),
                variables.std.label(w[0].std)
            )));
        }
        Ok(Self {
            variables,
            rules,
            provenance: Provenance::default(),
        })
    }

    pub fn with_provenance(mut self, provenance: Provenance) -> Self {
        self.provenance = provenance;
        self
    }

    pub fn variables(&self) -> &Variables {
        &self.variables
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    /// Rule for the given antecedent labels, if any.
    pub fn get(&self, mean: &str, std: &str) -> Option<&Rule> {
        let m = self.variables.mean.index_of(mean)?;
        let s = self.variables.std.index_of(std)?;
        self.rules.iter().find(|r| r.antecedent() == (m, s))
    }

    /// `(mean, std, risk)` labels of a rule.
    pub fn labels(&self, rule: &Rule) -> (&str, &str, &str) {
        (
            self.variables.mean.label(rule.mean),
            self.variables.std.label(rule.std),
            self.variables.risk.label(rule.risk),
        )
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

#[derive(Serialize, Deserialize)]
struct RuleSetFile {
    variables: Variables,
    rules: Vec<RuleEntry>,
    #[serde(default)]
    provenance: Provenance,
}

#[derive(Serialize, Deserialize)]
struct RuleEntry {
    mean: String,
    std: String,
    risk: String,
    degree: f64,
}

impl From<RuleSet> for RuleSetFile {
    fn from(set: RuleSet) -> Self {
        let rules = set
            .rules
            .iter()
            .map(|r| {
                let (mean, std, risk) = set.labels(r);
                RuleEntry {
                    mean: mean.to_owned(),
                    std: std.to_owned(),
                    risk: risk.to_owned(),
                    degree: r.degree,
                }
            })
            .collect();
        RuleSetFile {
            variables: set.variables,
            rules,
            provenance: set.provenance,
        }
    }
}

impl TryFrom<RuleSetFile> for RuleSet {
    type Error = Error;

    fn try_from(file: RuleSetFile) -> Result<Self> {
        let vars = &file.variables;
        let find = |var: &fuzzy::LinguisticVariable, label: &str| {
            var.index_of(label).ok_or_else(|| {
                Error::Config(format!("unknown label {label} for variable {}", var.name))
            })
        };
        let rules = file
            .rules
            .iter()
            .map(|e| {
                Ok(Rule::new(
                    find(&vars.mean, &e.mean)?,
                    find(&vars.std, &e.std)?,
                    find(&vars.risk, &e.risk)?,
                    e.degree,
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(RuleSet::new(file.variables, rules)?.with_provenance(file.provenance))
    }
}

/// Winning `(set index, membership)` for mean, std and risk of a pair.
/// Membership ties go to the lower-index label.
pub fn label_pair(pair: &DataPair, vars: &Variables) -> [(usize, f64); 3] {
    [
        vars.mean.best_label(pair.margin_mean),
        vars.std.best_label(pair.margin_std),
        vars.risk.best_label(pair.risk),
    ]
}

/// One rule from one data pair; its degree is the product of the winning memberships.
pub fn learn_rule(pair: &DataPair, vars: &Variables) -> Rule {
    let [(m, dm), (s, ds), (r, dr)] = label_pair(pair, vars);
    Rule::new(m, s, r, dm * ds * dr)
}

/// How to choose between conflicting rules of equal degree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TiePolicy {
    /// Keep the lower-risk consequent.
    #[default]
    LowerRisk,
    HigherRisk,
    /// Keep whichever rule appeared first. Not order-invariant.
    FirstSeen,
}

/// Keep the highest-degree rule for every antecedent pair. Output is sorted by antecedent.
pub fn dedupe(rules: &[Rule], ties: TiePolicy) -> Vec<Rule> {
    let mut best: BTreeMap<(usize, usize), Rule> = BTreeMap::new();
    for rule in rules {
        best.entry(rule.antecedent())
            .and_modify(|kept| {
                let replace = if rule.degree != kept.degree {
                    rule.degree > kept.degree
                } else {
                    match ties {
                        TiePolicy::LowerRisk => rule.risk < kept.risk,
                        TiePolicy::HigherRisk => rule.risk > kept.risk,
                        TiePolicy::FirstSeen => false,
                    }
                };
                if replace {
                    *kept = *rule;
                }
            })
            .or_insert(*rule);
    }
    best.into_values().collect()
}

/// Learn a rule set from data pairs.
pub fn learn_ruleset(pairs: &[DataPair], vars: &Variables, ties: TiePolicy) -> Result<RuleSet> {
    if pairs.is_empty() {
        return Err(Error::InsufficientData("no data pairs to learn from"));
    }
    for p in pairs {
        p.validate()?;
    }
    let raw: Vec<Rule> = pairs.iter().map(|p| learn_rule(p, vars)).collect();
    let set = RuleSet::new(vars.clone(), dedupe(&raw, ties))?;
    Ok(set.with_provenance(Provenance {
        pairs: pairs.len(),
        ..Provenance::default()
    }))
}

/// Rule table obtained from the original simulation campaign, over the
/// default variables. It has no rules for (LOW, LOW) or (VERY_LOW, LOW).
pub fn reference_rules() -> RuleSet {
    use fuzzy::{HIGH, LOW, MEDIUM, VERY_HIGH, VERY_LOW};
    let vars = fuzzy::default_variables();
    let table = [
        (HIGH, HIGH, VERY_LOW, 0.23),
        (HIGH, LOW, VERY_LOW, 0.88),
        (HIGH, MEDIUM, VERY_LOW, 0.76),
        (MEDIUM, HIGH, VERY_LOW, 0.63),
        (MEDIUM, LOW, VERY_LOW, 0.41),
        (MEDIUM, MEDIUM, LOW, 0.73),
        (LOW, HIGH, VERY_HIGH, 0.84),
        (LOW, MEDIUM, MEDIUM, 0.64),
        (VERY_LOW, HIGH, VERY_HIGH, 1.0),
        (VERY_LOW, MEDIUM, VERY_HIGH, 0.35),
    ];
    let rules = table
        .iter()
        .map(|&(m, s, r, d)| {
            Rule::new(
                vars.mean.index_of(m).unwrap(),
                vars.std.index_of(s).unwrap(),
                vars.risk.index_of(r).unwrap(),
                d,
            )
        })
        .collect();
    RuleSet::new(vars, rules).expect("reference rule table is well formed")
}

/// Inverse-distance weighting parameters for filling uncovered cells.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IdwParams {
    pub power: f64,
    pub neighbors: usize,
}

impl Default for IdwParams {
    fn default() -> Self {
        Self {
            power: 2.0,
            neighbors: 8,
        }
    }
}

/// Grid of precomputed risk over the (mean, std) plane. Rows run along std,
/// columns along mean; storage is row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DecisionMapFile", into = "DecisionMapFile")]
pub struct DecisionMap {
    rows: usize,
    cols: usize,
    mean_bounds: (f64, f64),
    std_bounds: (f64, f64),
    values: Vec<f64>,
    covered: Vec<bool>,
}

#[derive(Serialize, Deserialize)]
struct DecisionMapFile {
    rows: usize,
    cols: usize,
    mean_bounds: (f64, f64),
    std_bounds: (f64, f64),
    values: Vec<f64>,
    covered: Vec<bool>,
}

impl From<DecisionMap> for DecisionMapFile {
    fn from(m: DecisionMap) -> Self {
        Self {
            rows: m.rows,
            cols: m.cols,
            mean_bounds: m.mean_bounds,
            std_bounds: m.std_bounds,
            values: m.values,
            covered: m.covered,
        }
    }
}

impl TryFrom<DecisionMapFile> for DecisionMap {
    type Error = Error;

    fn try_from(f: DecisionMapFile) -> Result<Self> {
        DecisionMap::from_parts(
            f.rows,
            f.cols,
            f.mean_bounds,
            f.std_bounds,
            f.values,
            f.covered,
        )
    }
}

impl DecisionMap {
    pub fn from_parts(
        rows: usize,
        cols: usize,
        mean_bounds: (f64, f64),
        std_bounds: (f64, f64),
        values: Vec<f64>,
        covered: Vec<bool>,
    ) -> Result<Self> {
        if rows < 2 || cols < 2 {
            return Err(Error::Config(format!(
                "decision map needs at least 2x2 cells, got {rows}x{cols}"
            )));
        }
        if values.len() != rows * cols || covered.len() != values.len() {
            return Err(Error::Config(format!(
                "decision map {rows}x{cols} has {} values and {} mask entries",
                values.len(),
                covered.len()
            )));
        }
        for (lo, hi) in [mean_bounds, std_bounds] {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::Config(format!("invalid map bounds [{lo}, {hi}]")));
            }
        }
        if let Some(v) = values
            .iter()
            .find(|v| !(v.is_finite() && (0.0..=100.0).contains(*v)))
        {
            return Err(Error::Config(format!(
                "decision map value {v} outside [0, 100]"
            )));
        }
        Ok(Self {
            rows,
            cols,
            mean_bounds,
            std_bounds,
            values,
            covered,
        })
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn covered(&self) -> &[bool] {
        &self.covered
    }

    pub fn mean_at(&self, col: usize) -> f64 {
        grid_coord(self.mean_bounds, self.cols, col)
    }

    pub fn std_at(&self, row: usize) -> f64 {
        grid_coord(self.std_bounds, self.rows, row)
    }

    pub fn value(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.cols + col]
    }

    pub fn is_covered(&self, row: usize, col: usize) -> bool {
        self.covered[row * self.cols + col]
    }

    /// Bilinear interpolation between the four nodes around the (clamped) query.
    pub fn lookup(&self, mean: f64, std: f64) -> f64 {
        let (c0, tx) = cell_of(self.mean_bounds, self.cols, mean);
        let (r0, ty) = cell_of(self.std_bounds, self.rows, std);
        let v = |r, c| self.value(r, c);
        let top = v(r0, c0) * (1.0 - tx) + v(r0, c0 + 1) * tx;
        let bottom = v(r0 + 1, c0) * (1.0 - tx) + v(r0 + 1, c0 + 1) * tx;
        top * (1.0 - ty) + bottom * ty
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    /// `mean,std,risk,covered` rows for plotting.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["mean", "std", "risk", "covered"])?;
        for r in 0..self.rows {
            for c in 0..self.cols {
                w.write_record([
                    self.mean_at(c).to_string(),
                    self.std_at(r).to_string(),
                    self.value(r, c).to_string(),
                    (self.is_covered(r, c) as u8).to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

fn grid_coord((lo, hi): (f64, f64), n: usize, i: usize) -> f64 {
    lo + (hi - lo) * i as f64 / (n - 1) as f64
}

/// Lower node index and fractional offset of `x` along one grid axis.
fn cell_of((lo, hi): (f64, f64), n: usize, x: f64) -> (usize, f64) {
    let x = if x.is_nan() { lo } else { x.clamp(lo, hi) };
    let f = (x - lo) / (hi - lo) * (n - 1) as f64;
    let i = (f.floor() as usize).min(n - 2);
    (i, f - i as f64)
}

/// Evaluate the rule set on a `rows x cols` grid spanning the input universes
/// and fill cells where no rule fires by inverse-distance weighting.
pub fn build_decision_map(
    rules: &RuleSet,
    rows: usize,
    cols: usize,
    idw: IdwParams,
) -> Result<DecisionMap> {
    if rules.is_empty() {
        return Err(Error::Config(
            "cannot build a decision map from an empty rule set".into(),
        ));
    }
    if rows < 2 || cols < 2 {
        return Err(Error::Config(format!(
            "decision map needs at least 2x2 cells, got {rows}x{cols}"
        )));
    }
    if idw.neighbors == 0 || !(idw.power.is_finite() && idw.power > 0.0) {
        return Err(Error::Config(format!(
            "invalid interpolation parameters {idw:?}"
        )));
    }
    let vars = rules.variables();
    let mean_bounds = vars.mean.universe;
    let std_bounds = vars.std.universe;

    let cells: Vec<Option<f64>> = (0..rows * cols)
        .into_par_iter()
        .map(|i| {
            let mean = grid_coord(mean_bounds, cols, i % cols);
            let std = grid_coord(std_bounds, rows, i / cols);
            match fuzzy::infer(rules, mean, std) {
                Ok(v) => Ok(Some(v)),
                Err(Error::UncoveredInput { .. }) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<_>>()?;

    let sources: Vec<(f64, f64, f64)> = cells
        .iter()
        .enumerate()
        .filter_map(|(i, v)| {
            v.map(|v| {
                (
                    grid_coord(mean_bounds, cols, i % cols),
                    grid_coord(std_bounds, rows, i / cols),
                    v,
                )
            })
        })
        .collect();
    if sources.is_empty() {
        return Err(Error::Config(format!(
            "no rule fires anywhere on the {rows}x{cols} grid (firing threshold {FIRING_EPSILON})"
        )));
    }
    let covered: Vec<bool> = cells.iter().map(Option::is_some).collect();
    let values: Vec<f64> = cells
        .par_iter()
        .enumerate()
        .map(|(i, v)| match v {
            Some(v) => *v,
            None => idw_value(
                &sources,
                grid_coord(mean_bounds, cols, i % cols),
                grid_coord(std_bounds, rows, i / cols),
                idw,
            ),
        })
        .collect();
    DecisionMap::from_parts(rows, cols, mean_bounds, std_bounds, values, covered)
}

/// IDW estimate at `(x, y)` from the `k` nearest sources.
fn idw_value(sources: &[(f64, f64, f64)], x: f64, y: f64, idw: IdwParams) -> f64 {
    let mut dist: Vec<(f64, usize)> = sources
        .iter()
        .enumerate()
        .map(|(i, &(sx, sy, _))| ((sx - x).powi(2) + (sy - y).powi(2), i))
        .collect();
    let k = idw.neighbors.min(dist.len());
    let by_dist = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    if k < dist.len() {
        dist.select_nth_unstable_by(k - 1, by_dist);
        dist.truncate(k);
    }
    dist.sort_by(by_dist);
    if let Some(&(d2, i)) = dist.first() {
        if d2 == 0.0 {
            return sources[i].2;
        }
    }
    let (num, den) = dist.iter().fold((0.0, 0.0), |(n, d), &(d2, i)| {
        let w = d2.powf(-idw.power / 2.0);
        (n + w * sources[i].2, d + w)
    });
    // convex combination, but rounding can still step just outside the source range
    let (lo, hi) = dist
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &(_, i)| {
            (lo.min(sources[i].2), hi.max(sources[i].2))
        });
    (num / den).clamp(lo, hi)
}
