mod support;

use mgsched_core::lp::{solve_lp, IpmConfig, LinearProgram};
use rand::rngs::SmallRng;
use rand::SeedableRng;
use support::{random_lp, vertex_min};

#[test]
fn random_lps_match_vertex_enumeration() {
    let mut rng = SmallRng::seed_from_u64(20240611);
    let cfg = IpmConfig::default();
    for case in 0..100 {
        let lp = random_lp(&mut rng);
        let (oracle, _) = vertex_min(&lp).expect("generator builds feasible LPs");
        let sol = solve_lp(&lp, &cfg).unwrap_or_else(|e| panic!("case {case}: {e}"));
        assert!(
            (sol.objective - oracle).abs() < 1e-5,
            "case {case}: ipm {} vs oracle {oracle}",
            sol.objective
        );
        assert!(
            lp.max_violation(&sol.x) < 1e-8,
            "case {case}: violation {}",
            lp.max_violation(&sol.x)
        );
        assert!(sol.gap < cfg.gap_tolerance);
        assert!(sol.primal_residual < 1e-5 && sol.dual_residual < 1e-5);
    }
}

#[test]
fn gap_trace_is_monotone() {
    let mut rng = SmallRng::seed_from_u64(7);
    let cfg = IpmConfig::default();
    for _ in 0..100 {
        let lp = random_lp(&mut rng);
        let sol = solve_lp(&lp, &cfg).unwrap();
        for w in sol.gap_trace.windows(2) {
            if w[0] >= 10.0 * cfg.gap_tolerance {
                assert!(w[1] < w[0], "{:?}", sol.gap_trace);
            } else {
                assert!(w[1] <= w[0] + 1e-12, "{:?}", sol.gap_trace);
            }
        }
    }
}

#[test]
fn tighter_tolerance_is_honored() {
    let mut rng = SmallRng::seed_from_u64(99);
    let cfg = IpmConfig {
        gap_tolerance: 1e-9,
        ..IpmConfig::default()
    };
    for _ in 0..20 {
        let lp = random_lp(&mut rng);
        let (oracle, _) = vertex_min(&lp).unwrap();
        let sol = solve_lp(&lp, &cfg).unwrap();
        assert!(sol.gap < 1e-9);
        assert!((sol.objective - oracle).abs() < 1e-8);
    }
}

#[test]
fn simplex_facet_and_box() {
    let mut lp = LinearProgram::new(vec![-1.0, -1.0]);
    lp.add_ub(&[1.0, 1.0], 1.0);
    let sol = solve_lp(&lp, &IpmConfig::default()).unwrap();
    assert!((sol.objective + 1.0).abs() < 1e-5);
    assert!((sol.x[0] + sol.x[1] - 1.0).abs() < 1e-5);

    let lp = LinearProgram::new(vec![1.0]).with_bounds(vec![1.0], vec![2.0]);
    let sol = solve_lp(&lp, &IpmConfig::default()).unwrap();
    assert!((sol.x[0] - 1.0).abs() < 1e-5);
}

#[test]
fn iteration_limit() {
    let mut rng = SmallRng::seed_from_u64(3);
    let lp = random_lp(&mut rng);
    let cfg = IpmConfig {
        max_iterations: 1,
        ..IpmConfig::default()
    };
    assert!(matches!(
        solve_lp(&lp, &cfg),
        Err(mgsched_core::Error::LpIterationLimit { .. })
    ));
}
