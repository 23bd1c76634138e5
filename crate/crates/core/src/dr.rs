//! Lower-level user problem: a fraction of the expected equivalent load is
//! time-shiftable and is moved to minimize the users' bill, keeping the
//! shiftable energy over the horizon unchanged.

use alloc::vec::Vec;

use crate::lp::{solve_lp, IpmConfig, LinearProgram};
use crate::{Error, Result, DT_HOURS};

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DrConfig {
    /// Shiftable fraction of the equivalent load, in `[0, 1)`.
    pub ratio: f64,
    /// Per-period shiftable-load bounds (kW). Defaults to
    /// `[0, 2 · ratio · E]` (swapped where `E < 0`).
    pub bounds: Option<(Vec<f64>, Vec<f64>)>,
    /// Per-period total load the microgrid can serve (kW); tightens the
    /// upper bound so no plan exceeds it.
    pub supply_cap: Option<Vec<f64>>,
}

impl DrConfig {
    pub fn new(ratio: f64) -> Self {
        Self {
            ratio,
            bounds: None,
            supply_cap: None,
        }
    }

    /// Effective per-period bounds of the shiftable load.
    pub fn effective_bounds(&self, el_expected: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        if !(0.0..1.0).contains(&self.ratio) {
            return Err(Error::InvalidArgument("shiftable ratio must lie in [0, 1)"));
        }
        let t = el_expected.len();
        let (lo, mut hi) = match &self.bounds {
            Some((lo, hi)) => {
                if lo.len() != t || hi.len() != t {
                    return Err(Error::DimensionMismatch {
                        what: "shiftable-load bounds",
                        expected: t,
                        found: lo.len().min(hi.len()),
                    });
                }
                if lo.iter().zip(hi).any(|(l, h)| !(l <= h)) {
                    return Err(Error::InvalidArgument(
                        "shiftable-load bounds must be ordered",
                    ));
                }
                (lo.clone(), hi.clone())
            }
            None => el_expected
                .iter()
                .map(|e| {
                    let far = 2.0 * self.ratio * e;
                    (far.min(0.0), far.max(0.0))
                })
                .unzip(),
        };
        if let Some(cap) = &self.supply_cap {
            if cap.len() != t {
                return Err(Error::DimensionMismatch {
                    what: "supply cap",
                    expected: t,
                    found: cap.len(),
                });
            }
            for i in 0..t {
                hi[i] = hi[i].min(cap[i] - (1.0 - self.ratio) * el_expected[i]);
                if hi[i] < lo[i] {
                    return Err(Error::InfeasibleBounds);
                }
            }
        }
        // collapse widths at rounding level so degenerate periods are fixed
        for i in 0..t {
            if hi[i] - lo[i] < 1e-12 {
                hi[i] = lo[i];
            }
        }
        Ok((lo, hi))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UserPlan {
    pub p_cn: Vec<f64>,
    pub p_un: Vec<f64>,
    /// Shift relative to the baseline `ratio · E`.
    pub p_move: Vec<f64>,
    pub prices: Vec<f64>,
    /// Users' bill ($).
    pub f2: f64,
}

impl UserPlan {
    fn from_shiftable(el_expected: &[f64], prices: &[f64], ratio: f64, p_cn: Vec<f64>) -> Self {
        let p_un: Vec<f64> = el_expected.iter().map(|e| (1.0 - ratio) * e).collect();
        let p_move = el_expected
            .iter()
            .zip(&p_cn)
            .map(|(e, c)| c - ratio * e)
            .collect();
        let f2 = (0..p_cn.len())
            .map(|t| prices[t] * (p_un[t] + p_cn[t]) * DT_HOURS)
            .sum();
        Self {
            p_cn,
            p_un,
            p_move,
            prices: prices.to_vec(),
            f2,
        }
    }

    /// The plan that shifts nothing.
    pub fn baseline(el_expected: &[f64], prices: &[f64], ratio: f64) -> Result<Self> {
        check_lengths(el_expected, prices)?;
        let p_cn = el_expected.iter().map(|e| ratio * e).collect();
        Ok(Self::from_shiftable(el_expected, prices, ratio, p_cn))
    }

    /// Load the microgrid sees after the shift.
    pub fn served(&self) -> Vec<f64> {
        self.p_un
            .iter()
            .zip(&self.p_cn)
            .map(|(u, c)| u + c)
            .collect()
    }
}

fn check_lengths(el_expected: &[f64], prices: &[f64]) -> Result<()> {
    if prices.len() != el_expected.len() {
        return Err(Error::DimensionMismatch {
            what: "prices",
            expected: el_expected.len(),
            found: prices.len(),
        });
    }
    if el_expected.is_empty() {
        return Err(Error::InvalidArgument(
            "horizon must have at least one period",
        ));
    }
    Ok(())
}

/// LP over the shiftable load `p_cn,t`. The objective omits the constant
/// bill of the non-shiftable part.
pub fn build_user_lp(el_expected: &[f64], prices: &[f64], cfg: &DrConfig) -> Result<LinearProgram> {
    check_lengths(el_expected, prices)?;
    let (lo, hi) = cfg.effective_bounds(el_expected)?;
    let target = cfg.ratio * el_expected.iter().sum::<f64>();
    let slack = 1e-9 * (1.0 + target.abs());
    if hi.iter().sum::<f64>() < target - slack || lo.iter().sum::<f64>() > target + slack {
        return Err(Error::InfeasibleBounds);
    }
    let t = el_expected.len();
    let c = prices.iter().map(|p| p * DT_HOURS).collect();
    let mut lp = LinearProgram::new(c).with_bounds(lo, hi);
    lp.add_eq(&alloc::vec![1.0; t], target);
    Ok(lp)
}

pub fn solve_user(
    el_expected: &[f64],
    prices: &[f64],
    cfg: &DrConfig,
    ipm: &IpmConfig,
) -> Result<UserPlan> {
    let lp = build_user_lp(el_expected, prices, cfg)?;
    let sol = solve_lp(&lp, ipm)?;
    Ok(UserPlan::from_shiftable(
        el_expected,
        prices,
        cfg.ratio,
        sol.x,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn flat_prices() {
        let el = [40.0, 60.0, 80.0];
        let plan = solve_user(&el, &[0.6; 3], &DrConfig::new(0.2), &IpmConfig::default()).unwrap();
        assert!((plan.f2 - 0.6 * 180.0).abs() < 1e-6);
    }

    #[test]
    fn moves_to_cheap_period() {
        let el = [50.0, 50.0];
        let plan =
            solve_user(&el, &[1.0, 0.5], &DrConfig::new(0.2), &IpmConfig::default()).unwrap();
        assert!(plan.p_cn[0].abs() < 1e-5);
        assert!((plan.p_cn[1] - 20.0).abs() < 1e-5);
        assert!(plan.p_move.iter().sum::<f64>().abs() < 1e-6);
    }

    #[test]
    fn zero_ratio_is_baseline() {
        let el = [40.0, 60.0];
        let plan =
            solve_user(&el, &[0.3, 0.9], &DrConfig::new(0.0), &IpmConfig::default()).unwrap();
        assert_eq!(plan.p_cn, vec![0.0, 0.0]);
        assert!((plan.f2 - (0.3 * 40.0 + 0.9 * 60.0)).abs() < 1e-12);
    }

    #[test]
    fn infeasible_bounds() {
        let cfg = DrConfig {
            ratio: 0.5,
            bounds: Some((vec![0.0; 2], vec![1.0; 2])),
            supply_cap: None,
        };
        assert_eq!(
            build_user_lp(&[10.0, 10.0], &[1.0; 2], &cfg).unwrap_err(),
            Error::InfeasibleBounds
        );
    }

    #[test]
    fn supply_cap_limits_shift_in() {
        let cfg = DrConfig {
            ratio: 0.2,
            bounds: None,
            supply_cap: Some(vec![200.0, 45.0]),
        };
        let plan = solve_user(&[100.0, 50.0], &[1.0, 0.5], &cfg, &IpmConfig::default()).unwrap();
        // at most 45 - 40 = 5 kW of shiftable load in the cheap period
        assert!((plan.p_cn[1] - 5.0).abs() < 1e-5);
        assert!((plan.served()[1] - 45.0).abs() < 1e-5);
    }

    #[test]
    fn negative_equivalent_load() {
        let cfg = DrConfig::new(0.2);
        let (lo, hi) = cfg.effective_bounds(&[-10.0, 30.0]).unwrap();
        assert_eq!(lo, vec![-4.0, 0.0]);
        assert_eq!(hi, vec![0.0, 12.0]);
    }
}
