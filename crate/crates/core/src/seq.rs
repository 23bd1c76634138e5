//! Discrete probabilistic sequences over equally spaced power levels.
//!
//! A [`ProbSeq`] with step `q` assigns probability `probs[i]` to the power
//! `i * q`. Independent quantities are combined with [`add_convolve`]
//! (sum) and [`sub_convolve`] (difference truncated at zero).

use alloc::vec;
use alloc::vec::Vec;

use libm::{ceil, floor};

use crate::models::PowerDistribution;
use crate::quad::integrate;
use crate::{Error, Result};

const MASS_TOL: f64 = 1e-9;
const BIN_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct ProbSeq {
    probs: Vec<f64>,
    step: f64,
}

impl ProbSeq {
    /// Wraps a probability vector, checking non-negativity and unit mass.
    pub fn new(probs: Vec<f64>, step: f64) -> Result<Self> {
        if !(step > 0.0) {
            return Err(Error::InvalidArgument("sequence step must be positive"));
        }
        if probs.is_empty() {
            return Err(Error::InvalidArgument(
                "sequence must have at least one entry",
            ));
        }
        if probs.iter().any(|p| !(*p >= 0.0)) {
            return Err(Error::InvalidArgument(
                "sequence entries must be non-negative",
            ));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(Error::InvalidArgument("sequence entries must sum to one"));
        }
        Ok(Self { probs, step })
    }

    /// Scales non-negative weights to unit mass.
    pub fn normalized(mut weights: Vec<f64>, step: f64) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) || !total.is_finite() {
            return Err(Error::InvalidArgument("weights carry no probability mass"));
        }
        for w in &mut weights {
            *w /= total;
        }
        Self::new(weights, step)
    }

    /// Certain zero.
    pub fn point_zero(step: f64) -> Result<Self> {
        Self::new(vec![1.0], step)
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    /// Largest index `N`; the sequence has `N + 1` entries.
    pub fn max_index(&self) -> usize {
        self.probs.len() - 1
    }

    pub fn power_at(&self, i: usize) -> f64 {
        i as f64 * self.step
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.probs
            .iter()
            .enumerate()
            .map(move |(i, p)| (i as f64 * self.step, *p))
    }
}

fn check_steps(a: &ProbSeq, b: &ProbSeq) -> Result<()> {
    if a.step != b.step {
        return Err(Error::StepMismatch {
            left: a.step,
            right: b.step,
        });
    }
    Ok(())
}

/// Number of intervals for support `[0, p_max]` at step `q`.
pub fn sequence_length(p_max: f64, q: f64) -> usize {
    let ratio = p_max / q;
    // tolerate representation noise such as 120 / 2.5 = 48.000000000000004
    let r = floor(ratio + 1e-9);
    if (ratio - r).abs() <= 1e-9 {
        r as usize
    } else {
        ceil(ratio) as usize
    }
}

/// Discretizes a continuous power distribution at step `q`.
///
/// Bin 0 collects `[0, q/2]`, bin `i` collects `[iq - q/2, iq + q/2]` and
/// the last bin `[Nq - q/2, p_max]`. Point masses go to the bin containing
/// them and the result is renormalized.
pub fn discretize<D: PowerDistribution + ?Sized>(dist: &D, q: f64) -> Result<ProbSeq> {
    if !(q > 0.0) {
        return Err(Error::InvalidArgument(
            "discretization step must be positive",
        ));
    }
    let p_max = dist.support_max();
    if !(p_max >= 0.0) {
        return Err(Error::InvalidArgument(
            "support maximum must be non-negative",
        ));
    }
    let n = sequence_length(p_max, q);
    let mut weights = vec![0.0; n + 1];
    let density = |p: f64| dist.density(p);
    for (i, w) in weights.iter_mut().enumerate() {
        let lo = if i == 0 { 0.0 } else { i as f64 * q - 0.5 * q };
        let hi = if i == n {
            p_max
        } else {
            i as f64 * q + 0.5 * q
        };
        *w = integrate(&density, lo.max(0.0), hi.min(p_max), BIN_TOL);
    }
    for (power, mass) in dist.atoms() {
        if mass > 0.0 {
            let idx = libm::round(power / q).max(0.0) as usize;
            weights[idx.min(n)] += mass;
        }
    }
    ProbSeq::normalized(weights, q)
}

/// `sum_i i * q * probs[i]`, in kW.
pub fn expectation(s: &ProbSeq) -> f64 {
    s.probs
        .iter()
        .enumerate()
        .map(|(i, p)| i as f64 * p)
        .sum::<f64>()
        * s.step
}

/// Distribution of the sum of two independent sequences.
pub fn add_convolve(a: &ProbSeq, b: &ProbSeq) -> Result<ProbSeq> {
    check_steps(a, b)?;
    let mut out = vec![0.0; a.probs.len() + b.probs.len() - 1];
    for (i, pa) in a.probs.iter().enumerate() {
        if *pa == 0.0 {
            continue;
        }
        for (j, pb) in b.probs.iter().enumerate() {
            out[i + j] += pa * pb;
        }
    }
    Ok(ProbSeq {
        probs: out,
        step: a.step,
    })
}

/// Distribution of `max(d - c, 0)` for independent `d` and `c`. The output
/// has the length of the minuend; every non-positive difference lands in
/// index 0.
pub fn sub_convolve(d: &ProbSeq, c: &ProbSeq) -> Result<ProbSeq> {
    check_steps(d, c)?;
    let mut out = vec![0.0; d.probs.len()];
    for (i, pd) in d.probs.iter().enumerate() {
        if *pd == 0.0 {
            continue;
        }
        for (j, pc) in c.probs.iter().enumerate() {
            out[i.saturating_sub(j)] += pd * pc;
        }
    }
    Ok(ProbSeq {
        probs: out,
        step: d.step,
    })
}

/// Equivalent-load sequence together with its two expectations.
#[derive(Debug, Clone, PartialEq)]
pub struct ElSequence {
    pub seq: ProbSeq,
    /// `E(load) - E(pv) - E(wind)`; used by the balance and reserve
    /// constraints.
    pub expected: f64,
    /// Expectation of the zero-truncated sequence; `>= expected`.
    pub truncated_expected: f64,
}

/// `e = load ⊖ (pv ⊕ wind)`.
pub fn el_sequence(load: &ProbSeq, pv: &ProbSeq, wind: &ProbSeq) -> Result<ElSequence> {
    let renewables = add_convolve(pv, wind)?;
    let seq = sub_convolve(load, &renewables)?;
    let expected = expectation(load) - (expectation(pv) + expectation(wind));
    let truncated_expected = expectation(&seq);
    Ok(ElSequence {
        seq,
        expected,
        truncated_expected,
    })
}
