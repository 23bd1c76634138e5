//! Spinning-reserve chance constraint in deterministic form.
//!
//! The reserve `r` covers equivalent-load outcome `u` when
//! `r >= u*q - E(EL)`. The constraint holds when the covered outcomes carry
//! at least probability `gamma`, so the reserve requirement is a quantile
//! query on the equivalent-load sequence rather than a set of binaries.

use crate::seq::ProbSeq;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ChanceCheck {
    pub gamma: f64,
    pub el_seq: ProbSeq,
    /// Expected equivalent load (kW) the deviations are measured from.
    pub expected_el: f64,
}

impl ChanceCheck {
    pub fn new(gamma: f64, el_seq: ProbSeq, expected_el: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(Error::InvalidArgument(
                "confidence level must lie in (0, 1]",
            ));
        }
        Ok(Self {
            gamma,
            el_seq,
            expected_el,
        })
    }

    fn threshold(&self, u: usize) -> f64 {
        u as f64 * self.el_seq.step() - self.expected_el
    }
}

/// Probability mass of all equivalent-load outcomes covered by
/// `total_reserve`.
pub fn achieved_confidence(check: &ChanceCheck, total_reserve: f64) -> f64 {
    check
        .el_seq
        .probs()
        .iter()
        .enumerate()
        .filter(|(u, _)| total_reserve >= check.threshold(*u))
        .map(|(_, p)| *p)
        .sum()
}

/// Smallest non-negative reserve whose achieved confidence reaches `gamma`.
pub fn min_reserve(check: &ChanceCheck) -> f64 {
    let probs = check.el_seq.probs();
    let mut cumulative = 0.0;
    let mut index = probs.len() - 1;
    for (u, p) in probs.iter().enumerate() {
        cumulative += p;
        if cumulative >= check.gamma {
            index = u;
            break;
        }
    }
    check.threshold(index).max(0.0)
}
