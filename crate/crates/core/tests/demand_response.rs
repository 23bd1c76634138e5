mod support;

use mgsched_core::dr::{build_user_lp, solve_user, DrConfig, UserPlan};
use mgsched_core::lp::IpmConfig;
use rand::rngs::SmallRng;
use rand::{Rng, SeedableRng};
use support::vertex_min;

fn ipm() -> IpmConfig {
    IpmConfig::default()
}

#[test]
fn two_period_shift_matches_enumeration() {
    let el = [50.0, 50.0];
    let prices = [1.0, 0.5];
    let cfg = DrConfig::new(0.2);
    let lp = build_user_lp(&el, &prices, &cfg).unwrap();
    let (oracle, x) = vertex_min(&lp).unwrap();
    assert_eq!(x, vec![0.0, 20.0]);
    let plan = solve_user(&el, &prices, &cfg, &ipm()).unwrap();
    assert!((plan.p_cn[1] - 20.0).abs() < 1e-5);
    // the oracle objective excludes the fixed non-shiftable bill
    let fixed: f64 = el.iter().zip(&prices).map(|(e, p)| 0.8 * e * p).sum();
    assert!((plan.f2 - (oracle + fixed)).abs() < 1e-5);
}

#[test]
fn peak_period_goes_to_lower_bound() {
    let el = [40.0, 80.0, 60.0];
    let prices = [0.6, 0.83, 0.62];
    let cfg = DrConfig::new(0.2);
    let plan = solve_user(&el, &prices, &cfg, &ipm()).unwrap();
    let (_, x) = vertex_min(&build_user_lp(&el, &prices, &cfg).unwrap()).unwrap();
    assert!(plan.p_cn[1].abs() < 1e-5);
    for (a, b) in plan.p_cn.iter().zip(&x) {
        assert!((a - b).abs() < 1e-4);
    }
}

#[test]
fn random_small_instances_match_enumeration() {
    let mut rng = SmallRng::seed_from_u64(13);
    for _ in 0..200 {
        let t = rng.random_range(1..=4);
        let el: Vec<f64> = (0..t).map(|_| rng.random_range(-20.0..150.0)).collect();
        let prices: Vec<f64> = (0..t).map(|_| rng.random_range(0.1..1.5)).collect();
        let ratio = rng.random_range(0.05..0.5);
        let cfg = DrConfig::new(ratio);
        let lp = build_user_lp(&el, &prices, &cfg).unwrap();
        let (oracle, _) = vertex_min(&lp).unwrap();
        let plan = solve_user(&el, &prices, &cfg, &ipm()).unwrap();
        let fixed: f64 = el
            .iter()
            .zip(&prices)
            .map(|(e, p)| (1.0 - ratio) * e * p)
            .sum();
        assert!((plan.f2 - fixed - oracle).abs() < 1e-5);

        let served: f64 = plan.served().iter().sum();
        assert!((served - el.iter().sum::<f64>()).abs() < 1e-6);
        assert!(plan.p_move.iter().sum::<f64>().abs() < 1e-6);
        let baseline = UserPlan::baseline(&el, &prices, ratio).unwrap();
        assert!(plan.f2 <= baseline.f2 + 1e-6);
        for (u, e) in plan.p_un.iter().zip(&el) {
            assert!((u - (1.0 - ratio) * e).abs() < 1e-12);
        }
    }
}

#[test]
fn flat_prices_cost_the_total() {
    let el = [30.0, 90.0, 55.0, 70.0];
    let plan = solve_user(&el, &[0.6; 4], &DrConfig::new(0.3), &ipm()).unwrap();
    assert!((plan.f2 - 0.6 * 245.0).abs() < 1e-6);
}

#[test]
fn price_scaling_keeps_the_plan() {
    let el = [30.0, 90.0, 55.0, 70.0];
    let prices = [0.4, 0.9, 0.55, 0.7];
    let doubled: Vec<f64> = prices.iter().map(|p| 2.0 * p).collect();
    let a = solve_user(&el, &prices, &DrConfig::new(0.2), &ipm()).unwrap();
    let b = solve_user(&el, &doubled, &DrConfig::new(0.2), &ipm()).unwrap();
    assert!((b.f2 - 2.0 * a.f2).abs() < 1e-5);
    for (x, y) in a.p_cn.iter().zip(&b.p_cn) {
        assert!((x - y).abs() < 1e-4);
    }
}

#[test]
fn no_shiftable_load() {
    let el = [30.0, 90.0];
    let plan = solve_user(&el, &[0.2, 0.9], &DrConfig::new(0.0), &ipm()).unwrap();
    assert!((plan.f2 - (0.2 * 30.0 + 0.9 * 90.0)).abs() < 1e-9);
    assert!(plan.p_move.iter().all(|m| *m == 0.0));
}
