//! Bi-level coordination: real-time pricing, the alternation between the
//! microgrid and user levels, the three strategies and the final-scheme
//! selection.

use alloc::vec::Vec;

use crate::chance::{min_reserve, ChanceCheck};
use crate::dr::{solve_user, DrConfig, UserPlan};
use crate::grid::{EssConfig, MtUnit, Schedule, UpperProblem};
use crate::jaya::{solve_upper_with, Executor, JayaParams, Sequential, TracePoint};
use crate::lp::IpmConfig;
use crate::models::{LoadModel, PvModel, WtModel, ZeroOutput};
use crate::seq::{discretize, el_sequence, ElSequence, ProbSeq};
use crate::{Error, Result};

/// Uncertainty of one period. `pv: None` means no irradiance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodUncertainty {
    pub load: LoadModel,
    pub pv: Option<PvModel>,
    pub wind: WtModel,
}

/// Fully validated problem data.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub periods: Vec<PeriodUncertainty>,
    /// Upper truncation of the load distribution (kW).
    pub load_cap: f64,
    pub units: Vec<MtUnit>,
    pub ess: EssConfig,
    pub dr: DrConfig,
    pub tou: Vec<f64>,
    pub ref_price: f64,
    pub ref_el: f64,
    pub gamma: f64,
    /// Discretization step (kW).
    pub step: f64,
    pub shed_penalty: f64,
    pub max_pricing_iterations: usize,
    /// Pricing stops early once no price moves by more than this; zero
    /// disables the early exit.
    pub price_tolerance: f64,
    pub jaya: JayaParams,
    pub ipm: IpmConfig,
}

impl Scenario {
    pub fn horizon(&self) -> usize {
        self.periods.len()
    }

    pub fn validate(&self) -> Result<()> {
        let t = self.horizon();
        if t == 0 {
            return Err(Error::InvalidArgument(
                "horizon must have at least one period",
            ));
        }
        if self.tou.len() != t {
            return Err(Error::DimensionMismatch {
                what: "TOU prices",
                expected: t,
                found: self.tou.len(),
            });
        }
        if !(self.step > 0.0) {
            return Err(Error::InvalidArgument(
                "discretization step must be positive",
            ));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::InvalidArgument(
                "confidence level must lie in (0, 1]",
            ));
        }
        if !(self.ref_el > 0.0) || !(self.ref_price >= 0.0) {
            return Err(Error::InvalidArgument(
                "reference load must be positive and reference price non-negative",
            ));
        }
        if self.max_pricing_iterations < 1 {
            return Err(Error::InvalidArgument(
                "at least one pricing iteration is required",
            ));
        }
        if !(self.price_tolerance >= 0.0) {
            return Err(Error::InvalidArgument(
                "price tolerance must be non-negative",
            ));
        }
        if !(0.0..1.0).contains(&self.dr.ratio) {
            return Err(Error::InvalidArgument("shiftable ratio must lie in [0, 1)"));
        }
        for u in &self.units {
            u.validated()?;
        }
        self.ess.validated()?;
        self.jaya.validated()?;
        Ok(())
    }
}

/// Discretized uncertainty and derived requirements of one period.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodSequences {
    pub load: ProbSeq,
    pub pv: ProbSeq,
    pub wind: ProbSeq,
    pub el: ElSequence,
    /// Reserve that meets the confidence level (kW).
    pub reserve_req: f64,
}

/// Scenario plus everything that does not depend on prices.
#[derive(Debug, Clone, PartialEq)]
pub struct Prepared {
    pub scenario: Scenario,
    pub sequences: Vec<PeriodSequences>,
    /// Expected equivalent load per period (kW).
    pub el_expected: Vec<f64>,
    pub reserve_req: Vec<f64>,
}

impl Prepared {
    pub fn new(scenario: Scenario) -> Result<Self> {
        scenario.validate()?;
        let q = scenario.step;
        let mut sequences = Vec::with_capacity(scenario.horizon());
        for p in &scenario.periods {
            let load = discretize(&p.load.truncated(scenario.load_cap), q)?;
            let pv = match &p.pv {
                Some(m) => discretize(m, q)?,
                None => discretize(&ZeroOutput, q)?,
            };
            let wind = discretize(&p.wind, q)?;
            let el = el_sequence(&load, &pv, &wind)?;
            let check = ChanceCheck::new(scenario.gamma, el.seq.clone(), el.expected)?;
            let reserve_req = min_reserve(&check);
            sequences.push(PeriodSequences {
                load,
                pv,
                wind,
                el,
                reserve_req,
            });
        }
        let el_expected = sequences.iter().map(|s| s.el.expected).collect();
        let reserve_req = sequences.iter().map(|s| s.reserve_req).collect();
        Ok(Self {
            scenario,
            sequences,
            el_expected,
            reserve_req,
        })
    }

    /// Largest load the microgrid can serve in each period while holding
    /// the required reserve.
    pub fn supply_cap(&self) -> Vec<f64> {
        let s = &self.scenario;
        let capacity: f64 = s.units.iter().map(|u| u.p_max).sum::<f64>() + s.ess.p_dc_max;
        self.reserve_req.iter().map(|r| capacity - r).collect()
    }

    fn dr_config(&self) -> DrConfig {
        DrConfig {
            supply_cap: Some(self.supply_cap()),
            ..self.scenario.dr.clone()
        }
    }

    pub fn upper_problem(&self, demand: Vec<f64>, prices: Vec<f64>) -> Result<UpperProblem> {
        let s = &self.scenario;
        UpperProblem::new(
            s.units.clone(),
            s.ess,
            demand,
            self.reserve_req.clone(),
            prices,
            s.shed_penalty,
        )
    }

    pub fn user_plan(&self, prices: &[f64]) -> Result<UserPlan> {
        solve_user(
            &self.el_expected,
            prices,
            &self.dr_config(),
            &self.scenario.ipm,
        )
    }
}

/// Real-time price rule: TOU in the first iteration, afterwards the
/// reference price scaled by planned load over the reference load.
pub fn update_price(
    el_plus_move: &[f64],
    ref_el: f64,
    ref_price: f64,
    tou: &[f64],
    iter: usize,
) -> Result<Vec<f64>> {
    if !(ref_el > 0.0) {
        return Err(Error::InvalidArgument("reference load must be positive"));
    }
    if iter == 0 {
        return Err(Error::InvalidArgument("pricing iterations count from 1"));
    }
    if iter == 1 {
        return Ok(tou.to_vec());
    }
    Ok(el_plus_move
        .iter()
        .map(|p| (p / ref_el * ref_price).max(0.0))
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    /// 1-based.
    pub iter: usize,
    pub prices: Vec<f64>,
    pub schedule: Schedule,
    pub plan: UserPlan,
    pub f1_jo: f64,
    pub f2_jo: f64,
    pub reserve_shortfall: f64,
    pub trace: Vec<TracePoint>,
}

impl IterationRecord {
    pub fn distance(&self, f1_io: f64, f2_io: f64) -> f64 {
        libm::hypot(self.f1_jo - f1_io, self.f2_jo - f2_io)
    }
}

/// Record closest to the single-level optima; ties go to the earlier
/// iteration.
pub fn select_final(
    records: &[IterationRecord],
    f1_io: f64,
    f2_io: f64,
) -> Result<&IterationRecord> {
    let mut best: Option<(&IterationRecord, f64)> = None;
    for r in records {
        let d = r.distance(f1_io, f2_io);
        let closer = match best {
            None => true,
            Some((b, bd)) => d < bd || (d == bd && r.iter < b.iter),
        };
        if closer {
            best = Some((r, d));
        }
    }
    best.map(|(r, _)| r).ok_or(Error::EmptyRecords)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    MgOnly,
    Bilevel,
    UserOnly,
}

impl Strategy {
    pub fn name(&self) -> &'static str {
        match self {
            Strategy::MgOnly => "mg_only",
            Strategy::Bilevel => "bilevel",
            Strategy::UserOnly => "user_only",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StrategyResult {
    pub mode: Strategy,
    /// Microgrid cost of the reported scheme (negative: net revenue).
    pub f1: f64,
    /// Users' bill of the reported scheme.
    pub f2: f64,
    pub schedule: Schedule,
    pub plan: UserPlan,
    pub prices: Vec<f64>,
    pub reserve_shortfall: f64,
    /// Jaya trace of the reported schedule.
    pub trace: Vec<TracePoint>,
    /// Every pricing iteration (bilevel only).
    pub records: Vec<IterationRecord>,
    /// Index into `records` of the selected scheme (bilevel only).
    pub chosen: Option<usize>,
    pub f1_io: f64,
    pub f2_io: f64,
}

/// One pricing iteration at `prices`: users respond, the microgrid
/// schedules the resulting load.
fn iterate<E: Executor>(
    prep: &Prepared,
    iter: usize,
    prices: Vec<f64>,
    plan: UserPlan,
    exec: &E,
) -> Result<IterationRecord> {
    let ctx = prep.upper_problem(plan.served(), prices.clone())?;
    let sol = solve_upper_with(&ctx, &prep.scenario.jaya, exec)?;
    let f2_jo = plan.f2;
    Ok(IterationRecord {
        iter,
        prices,
        schedule: sol.schedule,
        plan,
        f1_jo: sol.cost,
        f2_jo,
        reserve_shortfall: sol.reserve_shortfall,
        trace: sol.trace,
    })
}

fn single(mode: Strategy, rec: IterationRecord, f1_io: f64, f2_io: f64) -> StrategyResult {
    StrategyResult {
        mode,
        f1: rec.f1_jo,
        f2: rec.f2_jo,
        schedule: rec.schedule,
        plan: rec.plan,
        prices: rec.prices,
        reserve_shortfall: rec.reserve_shortfall,
        trace: rec.trace,
        records: Vec::new(),
        chosen: None,
        f1_io,
        f2_io,
    }
}

/// Microgrid alone under TOU prices; users do not shift.
pub fn run_mg_only<E: Executor>(prep: &Prepared, exec: &E) -> Result<StrategyResult> {
    let s = &prep.scenario;
    let plan = UserPlan::baseline(&prep.el_expected, &s.tou, s.dr.ratio)?;
    let rec = iterate(prep, 1, s.tou.clone(), plan, exec)?;
    let f1 = rec.f1_jo;
    Ok(single(Strategy::MgOnly, rec, f1, f64::NAN))
}

/// Users alone under TOU prices; the microgrid serves whatever results.
pub fn run_user_only<E: Executor>(prep: &Prepared, exec: &E) -> Result<StrategyResult> {
    let s = &prep.scenario;
    let plan = prep.user_plan(&s.tou)?;
    let rec = iterate(prep, 1, s.tou.clone(), plan, exec)?;
    let f2 = rec.f2_jo;
    Ok(single(Strategy::UserOnly, rec, f64::NAN, f2))
}

/// Pricing loop between both levels, anchored at the single-level optima
/// `f1_io`, `f2_io`. Each iteration prices the previous plan, lets the users
/// respond and schedules the microgrid for the resulting load.
pub fn run_bilevel<E: Executor>(
    prep: &Prepared,
    f1_io: f64,
    f2_io: f64,
    exec: &E,
) -> Result<StrategyResult> {
    let s = &prep.scenario;
    let mut records: Vec<IterationRecord> = Vec::new();
    let mut profile = prep.el_expected.clone();
    let mut prev_prices: Option<Vec<f64>> = None;
    for iter in 1..=s.max_pricing_iterations {
        let prices = update_price(&profile, s.ref_el, s.ref_price, &s.tou, iter)?;
        if let Some(prev) = &prev_prices {
            let change = prices
                .iter()
                .zip(prev)
                .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            if change < s.price_tolerance {
                break;
            }
        }
        let plan = prep.user_plan(&prices)?;
        profile = plan.served();
        let rec = iterate(prep, iter, prices.clone(), plan, exec)?;
        records.push(rec);
        prev_prices = Some(prices);
    }
    // the TOU iteration reproduces the single-level strategies, so the
    // scheme is chosen among the real-time price iterations when any ran
    let candidates = if records.len() > 1 {
        &records[1..]
    } else {
        &records[..]
    };
    let chosen = select_final(candidates, f1_io, f2_io)?.iter - 1;
    let rec = records[chosen].clone();
    Ok(StrategyResult {
        mode: Strategy::Bilevel,
        f1: rec.f1_jo,
        f2: rec.f2_jo,
        schedule: rec.schedule,
        plan: rec.plan,
        prices: rec.prices,
        reserve_shortfall: rec.reserve_shortfall,
        trace: rec.trace,
        records,
        chosen: Some(chosen),
        f1_io,
        f2_io,
    })
}

/// All three strategies; the single-level runs provide the anchors of the
/// bilevel selection.
#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub mg_only: StrategyResult,
    pub bilevel: StrategyResult,
    pub user_only: StrategyResult,
}

pub fn run_all<E: Executor>(prep: &Prepared, exec: &E) -> Result<Comparison> {
    let mut mg_only = run_mg_only(prep, exec)?;
    let mut user_only = run_user_only(prep, exec)?;
    let (f1_io, f2_io) = (mg_only.f1, user_only.f2);
    for r in [&mut mg_only, &mut user_only] {
        r.f1_io = f1_io;
        r.f2_io = f2_io;
    }
    let bilevel = run_bilevel(prep, f1_io, f2_io, exec)?;
    Ok(Comparison {
        mg_only,
        bilevel,
        user_only,
    })
}

/// Runs one strategy, computing the anchors it needs.
pub fn run_strategy<E: Executor>(
    mode: Strategy,
    prep: &Prepared,
    exec: &E,
) -> Result<StrategyResult> {
    match mode {
        Strategy::MgOnly => run_mg_only(prep, exec),
        Strategy::UserOnly => run_user_only(prep, exec),
        Strategy::Bilevel => {
            let f1_io = run_mg_only(prep, exec)?.f1;
            let f2_io = prep.user_plan(&prep.scenario.tou)?.f2;
            run_bilevel(prep, f1_io, f2_io, exec)
        }
    }
}

pub fn run_strategy_sequential(mode: Strategy, prep: &Prepared) -> Result<StrategyResult> {
    run_strategy(mode, prep, &Sequential)
}

/// Per-period spread of a load profile, used to compare profiles before and
/// after demand response.
pub fn profile_spread(profile: &[f64]) -> f64 {
    crate::models::std_dev(profile)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn price_rule() {
        let tou = [0.62, 0.83];
        assert_eq!(
            update_price(&[10.0, 20.0], 51.5, 0.6, &tou, 1).unwrap(),
            tou.to_vec()
        );
        let p = update_price(&[51.5, 103.0, -5.0], 51.5, 0.6, &[0.0; 3], 2).unwrap();
        assert!((p[0] - 0.6).abs() < 1e-15);
        assert!((p[1] - 1.2).abs() < 1e-15);
        assert_eq!(p[2], 0.0);
        assert!(update_price(&[1.0], 0.0, 0.6, &[0.5], 2).is_err());
    }

    fn record(iter: usize, f1: f64, f2: f64) -> IterationRecord {
        let plan = UserPlan::baseline(&[1.0], &[1.0], 0.0).unwrap();
        IterationRecord {
            iter,
            prices: vec![1.0],
            schedule: Schedule::idle(1, 0, 0.0),
            plan,
            f1_jo: f1,
            f2_jo: f2,
            reserve_shortfall: 0.0,
            trace: Vec::new(),
        }
    }

    #[test]
    fn selection() {
        assert_eq!(
            select_final(&[], 0.0, 0.0).unwrap_err(),
            Error::EmptyRecords
        );
        let recs = [
            record(1, 5.0, 0.0),
            record(2, 0.0, 3.0),
            record(3, 7.0, 0.0),
        ];
        assert_eq!(select_final(&recs, 0.0, 0.0).unwrap().iter, 2);
        let recs = [
            record(1, 3.0, 4.0),
            record(2, 0.0, 0.0),
            record(3, 0.0, 0.0),
        ];
        assert_eq!(select_final(&recs, 0.0, 0.0).unwrap().iter, 2);
        let recs = [record(1, 3.0, 4.0), record(2, 4.0, 3.0)];
        assert_eq!(select_final(&recs, 0.0, 0.0).unwrap().iter, 1);
    }
}
