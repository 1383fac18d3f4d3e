use margin_risk::io::{read_dataset, write_dataset};
use margin_risk::{gen_dataset, DataPair, DroneParams, ScenarioGrid, WindScenario};

fn pearson(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let cov: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let vx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let vy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}

fn grid_pairs(seed: u64) -> Vec<DataPair> {
    let scenarios = ScenarioGrid::new(19, 11, seed).scenarios().unwrap();
    gen_dataset(&scenarios, &DroneParams::default(), 10.0).unwrap()
}

#[test]
fn margin_and_risk_are_anticorrelated() {
    let pairs = grid_pairs(7);
    let means: Vec<f64> = pairs.iter().map(|p| p.margin_mean).collect();
    let risks: Vec<f64> = pairs.iter().map(|p| p.risk).collect();
    let r = pearson(&means, &risks);
    assert!(r <= -0.5, "pearson {r}");
}

#[test]
fn seed_averaged_trend_is_monotone_in_wind() {
    let drone = DroneParams::default();
    let levels: Vec<f64> = (0..=10).map(|i| 2.0 * i as f64).collect();
    let mut prev: Option<(f64, f64)> = None;
    for &w in &levels {
        let scenarios: Vec<_> = (0..20)
            .map(|s| WindScenario::new(w, 4.0, 30.0, 100 * s + 1))
            .collect();
        let pairs = gen_dataset(&scenarios, &drone, 10.0).unwrap();
        let mean = pairs.iter().map(|p| p.margin_mean).sum::<f64>() / 20.0;
        let risk = pairs.iter().map(|p| p.risk).sum::<f64>() / 20.0;
        if let Some((pm, pr)) = prev {
            assert!(mean <= pm + 1e-12, "wind {w}: mean {mean} > {pm}");
            assert!(risk >= pr - 1e-12, "wind {w}: risk {risk} < {pr}");
        }
        prev = Some((mean, risk));
    }
}

#[test]
fn regeneration_is_bit_stable() {
    let a = grid_pairs(11);
    let b = grid_pairs(11);
    assert_eq!(a, b);
    let mut csv_a = Vec::new();
    let mut csv_b = Vec::new();
    write_dataset(&mut csv_a, &a).unwrap();
    write_dataset(&mut csv_b, &b).unwrap();
    assert_eq!(csv_a, csv_b);
    assert_eq!(read_dataset(csv_a.as_slice(), "pairs.csv").unwrap(), a);
    assert_ne!(grid_pairs(12), a);
}

#[test]
fn large_grid_schema() {
    let scenarios = ScenarioGrid::new(25, 14, 3).scenarios().unwrap();
    assert_eq!(scenarios.len(), 350);
    let pairs = gen_dataset(&scenarios, &DroneParams::default(), 10.0).unwrap();
    assert_eq!(pairs.len(), 350);
    for p in &pairs {
        assert!((0.0..=0.5).contains(&p.margin_mean));
        assert!((0.0..=0.5).contains(&p.margin_std));
        assert!((0.0..=100.0).contains(&p.risk));
    }
}

#[test]
fn calm_and_stormy_extremes() {
    let drone = DroneParams::default();
    let calm = gen_dataset(&[WindScenario::new(0.0, 0.0, 60.0, 1)], &drone, 10.0).unwrap()[0];
    assert!(
        calm.margin_mean >= 0.35 && calm.margin_std < 0.02 && calm.risk < 5.0,
        "{calm:?}"
    );
    let storm = gen_dataset(&[WindScenario::new(20.0, 0.0, 60.0, 1)], &drone, 10.0).unwrap()[0];
    assert!(storm.margin_mean < 0.02 && storm.risk >= 75.0, "{storm:?}");
}
