//! Jaya population heuristic for the upper-level schedule.
//!
//! Candidates use the [`GeneLayout`] coding and are scored on the schedule
//! that [`repair`](crate::grid::repair) maps them to. Every population slot
//! owns a random stream derived from the seed and its index, so results do
//! not depend on how slots are spread over workers.

use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use rand::rngs::SmallRng;
use rand::{Rng, SeedableRng};

use crate::grid::{repair_into, GeneLayout, Schedule, UpperProblem};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct JayaParams {
    pub population: usize,
    /// Iterations including the initial population.
    pub max_iters: usize,
    pub seed: u64,
    /// Replace accepted genes with the coding of their repaired schedule.
    pub lamarckian: bool,
}

impl JayaParams {
    pub fn new(population: usize, max_iters: usize, seed: u64) -> Self {
        Self {
            population,
            max_iters,
            seed,
            lamarckian: true,
        }
    }

    pub fn validated(self) -> Result<Self> {
        if self.population < 2 {
            return Err(Error::InvalidArgument("population must be at least 2"));
        }
        if self.max_iters < 1 {
            return Err(Error::InvalidArgument("iteration count must be at least 1"));
        }
        Ok(self)
    }
}

/// Lexicographic score: reserve shortfall first, then cost. Unrepairable
/// candidates have infinite shortfall.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fitness {
    pub violation: f64,
    pub cost: f64,
}

impl Fitness {
    pub const UNREPAIRABLE: Fitness = Fitness {
        violation: f64::INFINITY,
        cost: f64::INFINITY,
    };

    pub fn is_feasible(&self) -> bool {
        self.violation == 0.0
    }

    pub fn compare(&self, other: &Fitness) -> Ordering {
        self.violation
            .total_cmp(&other.violation)
            .then(self.cost.total_cmp(&other.cost))
    }

    pub fn better_than(&self, other: &Fitness) -> bool {
        self.compare(other) == Ordering::Less
    }
}

/// One Jaya move with given uniform draws:
/// `x + r1 (best - |x|) - r2 (worst - |x|)`, clamped to the bounds.
#[allow(clippy::too_many_arguments)]
pub fn jaya_update(
    x: &[f64],
    best: &[f64],
    worst: &[f64],
    lower: &[f64],
    upper: &[f64],
    r1: &[f64],
    r2: &[f64],
    out: &mut [f64],
) -> Result<()> {
    let n = x.len();
    for (what, len) in [
        ("best genes", best.len()),
        ("worst genes", worst.len()),
        ("lower bounds", lower.len()),
        ("upper bounds", upper.len()),
        ("r1 draws", r1.len()),
        ("r2 draws", r2.len()),
        ("output genes", out.len()),
    ] {
        if len != n {
            return Err(Error::DimensionMismatch {
                what,
                expected: n,
                found: len,
            });
        }
    }
    for j in 0..n {
        let a = x[j].abs();
        let v = x[j] + r1[j] * (best[j] - a) - r2[j] * (worst[j] - a);
        out[j] = v.clamp(lower[j], upper[j]);
    }
    Ok(())
}

/// [`jaya_update`] drawing `r1`, `r2` per gene from `rng`.
pub fn jaya_step<R: Rng + ?Sized>(
    x: &[f64],
    best: &[f64],
    worst: &[f64],
    lower: &[f64],
    upper: &[f64],
    rng: &mut R,
    out: &mut [f64],
) -> Result<()> {
    let n = x.len();
    if [best.len(), worst.len(), lower.len(), upper.len(), out.len()]
        .iter()
        .any(|l| *l != n)
    {
        return Err(Error::DimensionMismatch {
            what: "jaya operands",
            expected: n,
            found: out.len(),
        });
    }
    for j in 0..n {
        let (r1, r2): (f64, f64) = (rng.random(), rng.random());
        let a = x[j].abs();
        let v = x[j] + r1 * (best[j] - a) - r2 * (worst[j] - a);
        out[j] = v.clamp(lower[j], upper[j]);
    }
    Ok(())
}

/// Runs `f` on every item; implementations may do so concurrently.
pub trait Executor: Sync {
    fn for_each_mut<T, F>(&self, items: &mut [T], f: F)
    where
        T: Send,
        F: Fn(usize, &mut T) + Sync + Send;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl Executor for Sequential {
    fn for_each_mut<T, F>(&self, items: &mut [T], f: F)
    where
        T: Send,
        F: Fn(usize, &mut T) + Sync + Send,
    {
        for (i, item) in items.iter_mut().enumerate() {
            f(i, item);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TracePoint {
    /// 1-based; iteration 1 is the initial population.
    pub iteration: usize,
    pub best: Fitness,
    pub feasible_fraction: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UpperSolution {
    pub schedule: Schedule,
    pub cost: f64,
    /// Reserve missing in the returned schedule (zero unless the
    /// requirement could not be met by any candidate).
    pub reserve_shortfall: f64,
    pub trace: Vec<TracePoint>,
    pub evaluations: usize,
}

struct Slot {
    genes: Vec<f64>,
    trial: Vec<f64>,
    scratch: Schedule,
    fitness: Fitness,
    rng: SmallRng,
}

/// Per-slot seed: splitmix64 of the run seed and slot index.
pub fn slot_seed(seed: u64, slot: usize) -> u64 {
    let mut z = seed
        ^ (slot as u64)
            .wrapping_add(1)
            .wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn evaluate(genes: &[f64], ctx: &UpperProblem, scratch: &mut Schedule) -> Fitness {
    match repair_into(genes, None, ctx, scratch) {
        Ok(short) => Fitness {
            violation: short,
            cost: ctx.cost_of_repaired(scratch),
        },
        Err(_) => Fitness::UNREPAIRABLE,
    }
}

fn extremes(slots: &[Slot]) -> (usize, usize) {
    let mut best = 0;
    let mut worst = 0;
    for (i, s) in slots.iter().enumerate().skip(1) {
        if s.fitness.better_than(&slots[best].fitness) {
            best = i;
        }
        if slots[worst].fitness.better_than(&s.fitness) {
            worst = i;
        }
    }
    (best, worst)
}

pub fn solve_upper(ctx: &UpperProblem, params: &JayaParams) -> Result<UpperSolution> {
    solve_upper_with(ctx, params, &Sequential)
}

/// Evaluates exactly `population × max_iters` candidates.
pub fn solve_upper_with<E: Executor>(
    ctx: &UpperProblem,
    params: &JayaParams,
    exec: &E,
) -> Result<UpperSolution> {
    let params = params.validated()?;
    let layout: GeneLayout = ctx.layout();
    let (lower, upper) = ctx.gene_bounds();
    let idle = Schedule::idle(layout.periods, layout.units, ctx.ess.soc_init);
    let mut slots: Vec<Slot> = (0..params.population)
        .map(|i| Slot {
            genes: vec![0.0; layout.len()],
            trial: vec![0.0; layout.len()],
            scratch: idle.clone(),
            fitness: Fitness::UNREPAIRABLE,
            rng: SmallRng::seed_from_u64(slot_seed(params.seed, i)),
        })
        .collect();

    exec.for_each_mut(&mut slots, |_, slot| {
        for j in 0..slot.genes.len() {
            let r: f64 = slot.rng.random();
            slot.genes[j] = lower[j] + r * (upper[j] - lower[j]);
        }
        slot.fitness = evaluate(&slot.genes, ctx, &mut slot.scratch);
        if params.lamarckian && slot.fitness.violation.is_finite() {
            layout.encode_into(&slot.scratch, &mut slot.genes);
        }
    });
    let mut evaluations = params.population;
    let mut trace = Vec::with_capacity(params.max_iters);
    let record = |slots: &[Slot], iteration: usize, trace: &mut Vec<TracePoint>| {
        let (b, _) = extremes(slots);
        let feasible = slots.iter().filter(|s| s.fitness.is_feasible()).count();
        trace.push(TracePoint {
            iteration,
            best: slots[b].fitness,
            feasible_fraction: feasible as f64 / slots.len() as f64,
        });
    };
    record(&slots, 1, &mut trace);

    let mut best_genes = vec![0.0; layout.len()];
    let mut worst_genes = vec![0.0; layout.len()];
    for iteration in 2..=params.max_iters {
        let (b, w) = extremes(&slots);
        best_genes.copy_from_slice(&slots[b].genes);
        worst_genes.copy_from_slice(&slots[w].genes);
        let (best_genes, worst_genes) = (&best_genes, &worst_genes);
        exec.for_each_mut(&mut slots, |_, slot| {
            let Slot {
                genes,
                trial,
                scratch,
                fitness,
                rng,
            } = slot;
            for j in 0..genes.len() {
                let (r1, r2): (f64, f64) = (rng.random(), rng.random());
                let a = genes[j].abs();
                let v = genes[j] + r1 * (best_genes[j] - a) - r2 * (worst_genes[j] - a);
                trial[j] = v.clamp(lower[j], upper[j]);
            }
            let f = evaluate(trial, ctx, scratch);
            if f.better_than(fitness) {
                *fitness = f;
                if params.lamarckian {
                    layout.encode_into(scratch, genes);
                } else {
                    genes.copy_from_slice(trial);
                }
            }
        });
        evaluations += params.population;
        record(&slots, iteration, &mut trace);
    }

    let (b, _) = extremes(&slots);
    let best = &slots[b];
    if !best.fitness.violation.is_finite() {
        return Err(Error::NoFeasibleCandidate);
    }
    let mut schedule = idle;
    let shortfall = repair_into(&best.genes, None, ctx, &mut schedule)?;
    let cost = ctx.cost_of_repaired(&schedule);
    Ok(UpperSolution {
        schedule,
        cost,
        reserve_shortfall: shortfall,
        trace,
        evaluations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::SmallRng;

    #[test]
    fn stationary_point() {
        let x = [1.0, 2.0, 0.0];
        let mut out = [0.0; 3];
        jaya_update(
            &x, &x, &x, &[0.0; 3], &[5.0; 3], &[0.3; 3], &[0.9; 3], &mut out,
        )
        .unwrap();
        assert_eq!(out, x);
    }

    #[test]
    fn pure_attraction() {
        let x = [1.0, 2.0, 0.5];
        let best = [3.0, 0.0, 4.0];
        let worst = [0.0, 5.0, 1.0];
        let mut out = [0.0; 3];
        jaya_update(
            &x, &best, &worst, &[0.0; 3], &[5.0; 3], &[1.0; 3], &[0.0; 3], &mut out,
        )
        .unwrap();
        assert_eq!(out, best);
    }

    #[test]
    fn clamps_and_checks_dims() {
        let mut out = [0.0; 1];
        jaya_update(
            &[1.0],
            &[10.0],
            &[0.0],
            &[0.0],
            &[2.0],
            &[1.0],
            &[0.0],
            &mut out,
        )
        .unwrap();
        assert_eq!(out, [2.0]);
        assert!(jaya_update(
            &[1.0],
            &[1.0, 2.0],
            &[0.0],
            &[0.0],
            &[2.0],
            &[1.0],
            &[0.0],
            &mut out
        )
        .is_err());
        let mut rng = SmallRng::seed_from_u64(1);
        assert!(jaya_step(
            &[1.0],
            &[1.0],
            &[0.0, 1.0],
            &[0.0],
            &[2.0],
            &mut rng,
            &mut out
        )
        .is_err());
    }

    #[test]
    fn fitness_order() {
        let feasible = Fitness {
            violation: 0.0,
            cost: 100.0,
        };
        let cheap_short = Fitness {
            violation: 1.0,
            cost: -50.0,
        };
        assert!(feasible.better_than(&cheap_short));
        assert!(cheap_short.better_than(&Fitness::UNREPAIRABLE));
        assert!(!feasible.better_than(&feasible));
    }

    #[test]
    fn params_validation() {
        assert!(JayaParams::new(1, 10, 0).validated().is_err());
        assert!(JayaParams::new(2, 0, 0).validated().is_err());
        assert!(JayaParams::new(2, 1, 0).validated().is_ok());
    }

    #[test]
    fn slot_seeds_differ() {
        assert_ne!(slot_seed(7, 0), slot_seed(7, 1));
        assert_ne!(slot_seed(7, 0), slot_seed(8, 0));
    }
}
