mod support;

use mgsched_core::chance::{achieved_confidence, min_reserve, ChanceCheck};
use mgsched_core::seq::{el_sequence, ProbSeq};
use rand::rngs::SmallRng;
use rand::{Rng, SeedableRng};
use support::{joint_confidence, random_probs};

const Q: f64 = 2.5;

#[test]
fn confidence_matches_joint_enumeration() {
    let mut rng = SmallRng::seed_from_u64(5);
    for _ in 0..300 {
        let lens: [usize; 3] = [
            rng.random_range(1..=20),
            rng.random_range(1..=20),
            rng.random_range(1..=20),
        ];
        let load = random_probs(&mut rng, lens[0]);
        let pv = random_probs(&mut rng, lens[1]);
        let wind = random_probs(&mut rng, lens[2]);
        let el = el_sequence(
            &ProbSeq::new(load.clone(), Q).unwrap(),
            &ProbSeq::new(pv.clone(), Q).unwrap(),
            &ProbSeq::new(wind.clone(), Q).unwrap(),
        )
        .unwrap();
        let gamma = rng.random_range(0.05..1.0);
        let check = ChanceCheck::new(gamma, el.seq.clone(), el.expected).unwrap();
        for r in [0.0, 1.0, 7.3, 12.5, 30.0, min_reserve(&check)] {
            let got = achieved_confidence(&check, r);
            let want = joint_confidence(&load, &pv, &wind, Q, el.expected, r);
            assert!((got - want).abs() < 1e-12, "r={r}: {got} vs {want}");
        }
    }
}

#[test]
fn min_reserve_is_smallest_sufficient_level() {
    let mut rng = SmallRng::seed_from_u64(6);
    for _ in 0..500 {
        let len = rng.random_range(1..=20);
        let probs = random_probs(&mut rng, len);
        let seq = ProbSeq::new(probs, Q).unwrap();
        let expected = rng.random_range(0.0..(len as f64 * Q));
        let gamma = rng.random_range(0.05..1.0);
        let check = ChanceCheck::new(gamma, seq, expected).unwrap();
        let r = min_reserve(&check);
        assert!(r >= 0.0);
        // scanning a fine grid from zero finds no cheaper sufficient reserve
        let first = (0..=200_000)
            .map(|k| k as f64 * 1e-3)
            .find(|r| achieved_confidence(&check, *r) >= gamma)
            .unwrap();
        assert!(achieved_confidence(&check, r) >= gamma);
        assert!(r <= first + 1e-9 && first <= r + 1e-3, "{r} vs {first}");
    }
}

#[test]
fn confidence_grows_with_reserve() {
    let mut rng = SmallRng::seed_from_u64(8);
    let probs = random_probs(&mut rng, 20);
    let check = ChanceCheck::new(0.9, ProbSeq::new(probs, Q).unwrap(), 20.0).unwrap();
    let mut last = 0.0;
    for k in 0..100 {
        let c = achieved_confidence(&check, k as f64 * 0.5);
        assert!(c >= last);
        last = c;
    }
    assert!((last - 1.0).abs() < 1e-12);
}
