//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::process::ExitCode;
use std::time::Instant;

use margin_risk::rules::label_pair;
use margin_risk::{
    build_decision_map, dedupe, default_variables, erf, gen_dataset, infer, learn_rule,
    learn_ruleset, normal_cdf, reference_rules, run_pipeline, simulate_flight, AccumulatorParams,
    DataPair, DroneParams, IdwParams, MotorFrame, PipelineConfig, RiskModel, RiskRecord, RiskState,
    Rule, RuleSet, ScenarioGrid, TiePolicy, WindScenario,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// Tolerances and sizes, pinned.
const SINGLE_RULE_TOL: f64 = 1e-5;
const CALM_RULE_DEGREE: f64 = 0.746;
const CALM_RULE_TOL: f64 = 0.02;
const DEDUPE_TRIALS: u64 = 100;
const DEDUPE_RULES: usize = 1000;
const ERF_TOL: f64 = 1e-6;
const SERIES_TERMS: usize = 200;
const CDF_INPUTS: usize = 1000;
const RAMP_STEPS: usize = 10;
const RAMP_TARGET: f64 = 20.0;
const PARTITION_POINTS: usize = 10_001;
const PARTITION_TOL: f64 = 1e-9;
const MAP_SIZE: usize = 101;
const LOOKUP_QUERIES: usize = 500;
const LOOKUP_TOL: f64 = 1.0;
const MONO_SIZE: usize = 51;
const MONO_TOL: f64 = 2.0;
const E2E_SEEDS: u64 = 20;
const E2E_GRID: (usize, usize) = (19, 11);
const SAMPLE_RATE: f64 = 10.0;
const ACC_HIGH: f64 = 75.0;
const ACC_LOW: f64 = 25.0;
const RISE_WITHIN: f64 = 10.0;
const FALL_WITHIN: f64 = 30.0;
const E2E_BUDGET_S: f64 = 120.0;
const GUST_LEN: f64 = 3.0;
const GUST_EXTRA: f64 = 12.0;
const GUST_INST: f64 = 50.0;
const GUST_WITHIN: f64 = 1.0;

type Check = fn() -> Outcome;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn main() -> ExitCode {
    let criteria: [(&str, Check); 10] = [
        ("single-pair rule degree", single_pair_rule),
        ("calm-pair rule degree", calm_pair_rule),
        ("dedupe oracle", dedupe_oracle),
        ("erf and normal cdf accuracy", erf_cdf_accuracy),
        ("accumulator arithmetic", accumulator_arithmetic),
        ("partition of unity", partition_of_unity),
        ("decision map consistency", decision_map_consistency),
        ("map monotonicity", map_monotonicity),
        ("end-to-end behaviour", end_to_end),
        ("brief gust sensitivity", brief_gust),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let out = check();
        let secs = start.elapsed().as_secs_f64();
        let verdict = if out.pass { "PASS" } else { "FAIL" };
        println!(
            "[{verdict}] {:>2}. {name} ({secs:.2} s): {}",
            i + 1,
            out.detail
        );
        failed += usize::from(!out.pass);
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn single_pair_rule() -> Outcome {
    let v = default_variables();
    let pair = DataPair::new(0.007969, 0.226310, 65.679063).unwrap();
    let [(m, dm), (s, ds), (r, dr)] = label_pair(&pair, &v);
    let rule = learn_rule(&pair, &v);
    let labels = (v.mean.label(m), v.std.label(s), v.risk.label(r));
    let pass = labels == ("VERY_LOW", "HIGH", "HIGH")
        && (dm - 0.920312).abs() <= SINGLE_RULE_TOL
        && (ds - 1.0).abs() <= SINGLE_RULE_TOL
        && (dr - 0.627163).abs() <= SINGLE_RULE_TOL
        && (rule.degree - 0.577186).abs() <= SINGLE_RULE_TOL;
    outcome(
        pass,
        format!(
            "{labels:?} memberships ({dm:.6}, {ds:.6}, {dr:.6}) degree {:.6}",
            rule.degree
        ),
    )
}

fn calm_pair_rule() -> Outcome {
    let v = default_variables();
    let rule = learn_rule(&DataPair::new(0.351094, 0.092301, 4.798570).unwrap(), &v);
    let labels = (
        v.mean.label(rule.mean),
        v.std.label(rule.std),
        v.risk.label(rule.risk),
    );
    let pass = labels == ("HIGH", "MEDIUM", "VERY_LOW")
        && (rule.degree - CALM_RULE_DEGREE).abs() <= CALM_RULE_TOL;
    outcome(pass, format!("{labels:?} degree {:.6}", rule.degree))
}

/// Highest degree per antecedent; equal degrees keep the lower risk.
fn scan_max(rules: &[Rule]) -> Vec<Rule> {
    let mut out = Vec::new();
    for m in 0..4 {
        for s in 0..3 {
            let mut best: Option<Rule> = None;
            for r in rules.iter().filter(|r| (r.mean, r.std) == (m, s)) {
                best = match best {
                    Some(b) if b.degree > r.degree => Some(b),
                    Some(b) if b.degree == r.degree && b.risk <= r.risk => Some(b),
                    _ => Some(*r),
                };
            }
            out.extend(best);
        }
    }
    out
}

fn dedupe_oracle() -> Outcome {
    let mut mismatches = 0;
    for trial in 0..DEDUPE_TRIALS {
        let mut rng = ChaCha8Rng::seed_from_u64(trial);
        let rules: Vec<Rule> = (0..DEDUPE_RULES)
            .map(|_| {
                // coarse degrees force some exact ties
                let degree = rng.random_range(1..=1000) as f64 / 1000.0;
                Rule::new(
                    rng.random_range(0..4),
                    rng.random_range(0..3),
                    rng.random_range(0..5),
                    degree,
                )
            })
            .collect();
        if dedupe(&rules, TiePolicy::LowerRisk) != scan_max(&rules) {
            mismatches += 1;
        }
    }
    outcome(
        mismatches == 0,
        format!("{mismatches}/{DEDUPE_TRIALS} trials differ ({DEDUPE_RULES} rules each)"),
    )
}

fn erf_series(x: f64) -> f64 {
    let mut term = x;
    let mut sum = x;
    for n in 1..SERIES_TERMS {
        term *= -x * x / n as f64;
        sum += term / (2 * n + 1) as f64;
    }
    2.0 / std::f64::consts::PI.sqrt() * sum
}

fn erf_cdf_accuracy() -> Outcome {
    let e1 = erf(1.0);
    let phi1 = normal_cdf(1.0, 0.0, 1.0).unwrap();
    let oracle_e1 = erf_series(1.0);
    let oracle_phi1 = 0.5 * (1.0 + erf_series(std::f64::consts::FRAC_1_SQRT_2));

    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut xs: Vec<f64> = (0..CDF_INPUTS)
        .map(|_| rng.random_range(-8.0..8.0))
        .collect();
    xs.sort_by(f64::total_cmp);
    let phis: Vec<f64> = xs
        .iter()
        .map(|&x| normal_cdf(x, 0.0, 1.0).unwrap())
        .collect();
    let monotone = phis.windows(2).all(|w| w[0] <= w[1]);

    let pass = (e1 - oracle_e1).abs() <= ERF_TOL
        && (phi1 - oracle_phi1).abs() <= ERF_TOL
        && (e1 - 0.842701).abs() <= ERF_TOL
        && (phi1 - 0.841345).abs() <= ERF_TOL
        && monotone;
    outcome(
        pass,
        format!("erf(1)={e1:.9} cdf(1)={phi1:.9} monotone on {CDF_INPUTS} inputs: {monotone}"),
    )
}

fn accumulator_arithmetic() -> Outcome {
    let params = AccumulatorParams::default();
    let mut state = RiskState::new(params).unwrap();
    let ramp: Vec<f64> = (0..RAMP_STEPS).map(|_| state.apply(1.0, 0.0)).collect();
    let exact_ramp = ramp
        .iter()
        .enumerate()
        .all(|(i, &r)| r == params.k_i * (i + 1) as f64);
    let reached = ramp[RAMP_STEPS - 1] == RAMP_TARGET;
    let top = (0..100).map(|_| state.apply(1.0, 0.0)).fold(0.0, f64::max);
    let clamps_high = top == 100.0 && state.risk_acc() == 100.0;
    let bottom = (0..200)
        .map(|_| state.apply(0.0, 1.0))
        .fold(100.0, f64::min);
    let clamps_low = bottom == 0.0 && state.risk_acc() == 0.0;
    outcome(
        exact_ramp && reached && clamps_high && clamps_low,
        format!(
            "ramp {:?}, max {top}, min {bottom}",
            ramp.iter().map(|r| *r as i64).collect::<Vec<_>>()
        ),
    )
}

fn partition_of_unity() -> Outcome {
    let v = default_variables();
    let devs = [
        v.mean.partition_deviation(PARTITION_POINTS),
        v.std.partition_deviation(PARTITION_POINTS),
        v.risk.partition_deviation(PARTITION_POINTS),
    ];
    outcome(
        devs.iter().all(|&d| d <= PARTITION_TOL),
        format!(
            "max deviation mean {:.1e} std {:.1e} risk {:.1e}",
            devs[0], devs[1], devs[2]
        ),
    )
}

/// Every antecedent cell, risk rising as the margin shrinks.
fn full_cover() -> RuleSet {
    let mut rules = Vec::new();
    for m in 0..4 {
        for s in 0..3 {
            rules.push(Rule::new(m, s, (4 - m + s).min(4), 1.0));
        }
    }
    RuleSet::new(default_variables(), rules).unwrap()
}

fn decision_map_consistency() -> Outcome {
    let set = full_cover();
    let map = build_decision_map(&set, MAP_SIZE, MAP_SIZE, IdwParams::default()).unwrap();
    let mut inexact = 0;
    for r in 0..MAP_SIZE {
        for c in 0..MAP_SIZE {
            let direct = infer(&set, map.mean_at(c), map.std_at(r)).unwrap();
            if !map.is_covered(r, c) || map.value(r, c).to_bits() != direct.to_bits() {
                inexact += 1;
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let worst = (0..LOOKUP_QUERIES)
        .map(|_| {
            let (m, s) = (rng.random_range(0.0..=0.5), rng.random_range(0.0..=0.5));
            (map.lookup(m, s) - infer(&set, m, s).unwrap()).abs()
        })
        .fold(0.0, f64::max);
    outcome(
        inexact == 0 && worst <= LOOKUP_TOL,
        format!("{inexact} cells differ from inference; worst lookup error {worst:.4}"),
    )
}

fn map_monotonicity() -> Outcome {
    let map = build_decision_map(
        &reference_rules(),
        MONO_SIZE,
        MONO_SIZE,
        IdwParams::default(),
    )
    .unwrap();
    let mut worst_rise = f64::NEG_INFINITY;
    for r in 0..MONO_SIZE {
        for c in 1..MONO_SIZE {
            worst_rise = worst_rise.max(map.value(r, c) - map.value(r, c - 1));
        }
    }
    outcome(
        worst_rise <= MONO_TOL,
        format!("largest rise along mean {worst_rise:.4}"),
    )
}

fn learned_model(seed: u64) -> RiskModel {
    let grid = ScenarioGrid::new(E2E_GRID.0, E2E_GRID.1, seed);
    let pairs = gen_dataset(
        &grid.scenarios().unwrap(),
        &DroneParams::default(),
        SAMPLE_RATE,
    )
    .unwrap();
    let rules = learn_ruleset(&pairs, &default_variables(), TiePolicy::LowerRisk).unwrap();
    let map = build_decision_map(&rules, MAP_SIZE, MAP_SIZE, IdwParams::default()).unwrap();
    RiskModel::new(Some(rules), Some(map)).unwrap()
}

fn fly(model: &RiskModel, scenario: &WindScenario) -> (Vec<MotorFrame>, Vec<RiskRecord>) {
    let frames = simulate_flight(scenario, &DroneParams::default(), SAMPLE_RATE).unwrap();
    let records = run_pipeline(&PipelineConfig::default(), model, &frames).unwrap();
    (frames, records)
}

fn end_to_end() -> Outcome {
    let start = Instant::now();
    let (onset, end) = (20.0, 60.0);
    let mut failures = Vec::new();
    let mut worst_rise: f64 = 0.0;
    let mut worst_fall: f64 = 0.0;
    let mut calm_peak: f64 = 0.0;
    for seed in 0..E2E_SEEDS {
        let model = learned_model(seed);
        let (_, calm) = fly(&model, &WindScenario::new(1.0, 1.0, 120.0, 1000 + seed));
        let peak = calm.iter().map(|r| r.risk_acc).fold(0.0, f64::max);
        calm_peak = calm_peak.max(peak);

        let storm = WindScenario::new(1.0, 1.0, 120.0, 2000 + seed).with_gust(onset, end, 19.0);
        let (_, sat) = fly(&model, &storm);
        let rise = sat
            .iter()
            .find(|r| r.t >= onset && r.risk_acc > ACC_HIGH)
            .map(|r| r.t - onset);
        let held = rise.is_some_and(|d| {
            sat.iter()
                .filter(|r| r.t >= onset + d && r.t < end)
                .all(|r| r.risk_acc > ACC_HIGH)
        });
        let fall = sat
            .iter()
            .find(|r| r.t >= end && r.risk_acc < ACC_LOW)
            .map(|r| r.t - end);
        worst_rise = worst_rise.max(rise.unwrap_or(f64::INFINITY));
        worst_fall = worst_fall.max(fall.unwrap_or(f64::INFINITY));

        let ok = peak < ACC_LOW
            && rise.is_some_and(|d| d <= RISE_WITHIN)
            && held
            && fall.is_some_and(|d| d <= FALL_WITHIN);
        if !ok {
            failures.push(seed);
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        failures.is_empty() && secs < E2E_BUDGET_S,
        format!(
            "{}/{E2E_SEEDS} seeds pass; calm peak {calm_peak:.2}, slowest rise {worst_rise:.1} s, \
             slowest fall {worst_fall:.1} s, failing seeds {failures:?}",
            E2E_SEEDS as usize - failures.len()
        ),
    )
}

fn brief_gust() -> Outcome {
    let onset = 20.0;
    let model = learned_model(7);
    let mut misses = Vec::new();
    let mut weakest = f64::INFINITY;
    for seed in 0..E2E_SEEDS {
        let scenario = WindScenario::new(1.0, 1.0, 40.0, 3000 + seed).with_gust(
            onset,
            onset + GUST_LEN,
            GUST_EXTRA,
        );
        let (frames, records) = fly(&model, &scenario);
        let high = DroneParams::default().limits.high;
        let saturates = frames
            .iter()
            .filter(|f| f.t >= onset && f.t < onset + GUST_LEN)
            .any(|f| f.commands.iter().any(|&c| c >= high));
        let peak = records
            .iter()
            .filter(|r| r.t >= onset && r.t <= onset + GUST_WITHIN)
            .map(|r| r.risk_inst)
            .fold(0.0, f64::max);
        weakest = weakest.min(peak);
        if !(saturates && peak > GUST_INST) {
            misses.push(seed);
        }
    }
    outcome(
        misses.is_empty(),
        format!(
            "weakest risk_inst within {GUST_WITHIN} s of onset {weakest:.2} over {E2E_SEEDS} gusts; \
             misses {misses:?}"
        ),
    )
}
