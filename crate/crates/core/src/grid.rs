//! Upper-level microgrid model: micro-turbines, storage, power balance,
//! spinning reserve and the operating cost.
//!
//! Periods are indexed from 0 in code. Per-unit arrays of a [`Schedule`] are
//! period-major (`t * units + n`).

use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Result, DT_HOURS};

/// Balance residual below which a period counts as balanced during repair.
const BALANCE_EPS: f64 = 1e-9;
/// Tolerance of [`check_feasible`], in kW / kWh.
pub const FEASIBILITY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MtUnit {
    /// $ per committed hour.
    pub fixed_cost: f64,
    /// $ per start.
    pub startup_cost: f64,
    /// $ per kWh produced.
    pub fuel_slope: f64,
    /// $ per kWh of reserve held.
    pub reserve_cost: f64,
    pub p_min: f64,
    pub p_max: f64,
}

impl MtUnit {
    pub fn validated(self) -> Result<Self> {
        if !(0.0 <= self.p_min && self.p_min <= self.p_max) {
            return Err(Error::InvalidArgument(
                "micro-turbine limits must satisfy 0 <= p_min <= p_max",
            ));
        }
        let costs = [
            self.fixed_cost,
            self.startup_cost,
            self.fuel_slope,
            self.reserve_cost,
        ];
        if costs.iter().any(|c| !(*c >= 0.0)) {
            return Err(Error::InvalidArgument(
                "micro-turbine costs must be non-negative",
            ));
        }
        Ok(self)
    }
}

/// Battery storage. Reactive-power and voltage limits are carried for
/// completeness but not enforced: no network data backs them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EssConfig {
    pub p_ch_max: f64,
    pub p_dc_max: f64,
    pub eta_ch: f64,
    pub eta_dc: f64,
    pub soc_min: f64,
    pub soc_max: f64,
    /// Initial energy, which must also be the final energy.
    pub soc_init: f64,
    /// $ per kWh credited to the microgrid when charging.
    pub charge_price: f64,
    /// $ per kWh paid by the microgrid when discharging.
    pub discharge_price: f64,
    /// $ per kWh of reserve held in storage.
    pub reserve_price: f64,
    pub q_ch_max: f64,
    pub q_dc_max: f64,
    pub v_min: f64,
    pub v_max: f64,
}

impl EssConfig {
    pub fn validated(self) -> Result<Self> {
        if !(self.eta_ch > 0.0 && self.eta_ch <= 1.0 && self.eta_dc > 0.0 && self.eta_dc <= 1.0) {
            return Err(Error::InvalidArgument(
                "storage efficiencies must lie in (0, 1]",
            ));
        }
        if !(self.soc_min <= self.soc_init && self.soc_init <= self.soc_max) {
            return Err(Error::InvalidArgument(
                "storage energies must satisfy soc_min <= soc_init <= soc_max",
            ));
        }
        if !(self.p_ch_max >= 0.0 && self.p_dc_max >= 0.0) {
            return Err(Error::InvalidArgument(
                "storage power limits must be non-negative",
            ));
        }
        let prices = [self.charge_price, self.discharge_price, self.reserve_price];
        if prices.iter().any(|p| !(*p >= 0.0)) {
            return Err(Error::InvalidArgument(
                "storage prices must be non-negative",
            ));
        }
        Ok(self)
    }
}

/// Time-of-use tariff, the current real-time prices and the reference
/// point of the pricing rule.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceTrack {
    pub tou: Vec<f64>,
    pub rt: Vec<f64>,
    pub ref_price: f64,
    pub ref_el: f64,
}

/// One upper-level decision.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    pub periods: usize,
    pub units: usize,
    pub on: Vec<bool>,
    pub start: Vec<bool>,
    pub p_mt: Vec<f64>,
    pub r_mt: Vec<f64>,
    pub p_ch: Vec<f64>,
    pub p_dc: Vec<f64>,
    pub p_res: Vec<f64>,
    pub p_ls: Vec<f64>,
    /// Stored energy at the start of each period plus the final value
    /// (`periods + 1` entries).
    pub soc: Vec<f64>,
}

impl Schedule {
    /// Everything off and idle.
    pub fn idle(periods: usize, units: usize, soc_init: f64) -> Self {
        Self {
            periods,
            units,
            on: vec![false; periods * units],
            start: vec![false; periods * units],
            p_mt: vec![0.0; periods * units],
            r_mt: vec![0.0; periods * units],
            p_ch: vec![0.0; periods],
            p_dc: vec![0.0; periods],
            p_res: vec![0.0; periods],
            p_ls: vec![0.0; periods],
            soc: vec![soc_init; periods + 1],
        }
    }

    #[inline]
    pub fn idx(&self, t: usize, n: usize) -> usize {
        t * self.units + n
    }

    pub fn total_mt_reserve(&self, t: usize) -> f64 {
        self.r_mt[t * self.units..(t + 1) * self.units].iter().sum()
    }

    pub fn total_mt_output(&self, t: usize) -> f64 {
        self.p_mt[t * self.units..(t + 1) * self.units].iter().sum()
    }

    pub fn shed_energy(&self) -> f64 {
        self.p_ls.iter().sum::<f64>() * DT_HOURS
    }

    /// Recomputes start flags from the commitment pattern (all units off
    /// before the first period).
    pub fn derive_starts(&mut self) {
        for t in 0..self.periods {
            for n in 0..self.units {
                let i = self.idx(t, n);
                let prev = t > 0 && self.on[i - self.units];
                self.start[i] = self.on[i] && !prev;
            }
        }
    }

    fn check_dims(&self, periods: usize, units: usize) -> Result<()> {
        let dim = |what, expected: usize, found: usize| {
            if expected == found {
                Ok(())
            } else {
                Err(Error::DimensionMismatch {
                    what,
                    expected,
                    found,
                })
            }
        };
        dim("schedule periods", periods, self.periods)?;
        dim("schedule units", units, self.units)?;
        for v in [&self.p_mt, &self.r_mt] {
            dim("per-unit schedule arrays", periods * units, v.len())?;
        }
        dim("commitments", periods * units, self.on.len())?;
        dim("start flags", periods * units, self.start.len())?;
        for v in [&self.p_ch, &self.p_dc, &self.p_res, &self.p_ls] {
            dim("per-period schedule arrays", periods, v.len())?;
        }
        dim("state of charge trajectory", periods + 1, self.soc.len())
    }
}

/// Microgrid operating cost (negative when revenue exceeds cost).
///
/// `demand` is the expected equivalent load served in each period (with
/// any demand-response shift applied) and `prices` the price it is sold at.
pub fn evaluate_cost(
    s: &Schedule,
    prices: &[f64],
    demand: &[f64],
    units: &[MtUnit],
    ess: &EssConfig,
    shed_penalty: f64,
) -> Result<f64> {
    s.check_dims(demand.len(), units.len())?;
    if prices.len() != demand.len() {
        return Err(Error::DimensionMismatch {
            what: "prices",
            expected: demand.len(),
            found: prices.len(),
        });
    }
    Ok(cost_unchecked(s, prices, demand, units, ess, shed_penalty))
}

fn cost_unchecked(
    s: &Schedule,
    prices: &[f64],
    demand: &[f64],
    units: &[MtUnit],
    ess: &EssConfig,
    shed_penalty: f64,
) -> f64 {
    let mut total = 0.0;
    for t in 0..s.periods {
        total -= demand[t] * prices[t] * DT_HOURS;
        total += (ess.discharge_price * s.p_dc[t] - ess.charge_price * s.p_ch[t]) * DT_HOURS;
        for (n, u) in units.iter().enumerate() {
            let i = t * s.units + n;
            total += u.reserve_cost * s.r_mt[i] * DT_HOURS;
            if s.start[i] {
                total += u.startup_cost;
            }
            if s.on[i] {
                total += u.fixed_cost + u.fuel_slope * s.p_mt[i] * DT_HOURS;
            }
        }
        total += ess.reserve_price * s.p_res[t] * DT_HOURS;
        total += shed_penalty * s.p_ls[t] * DT_HOURS;
    }
    total
}

/// Stored energy after one period.
pub fn soc_step(soc: f64, p_ch: f64, p_dc: f64, ess: &EssConfig) -> Result<f64> {
    if p_ch > 0.0 && p_dc > 0.0 {
        return Err(Error::SimultaneousChargeDischarge { period: 0 });
    }
    Ok(soc_step_unchecked(soc, p_ch, p_dc, ess))
}

#[inline]
fn soc_step_unchecked(soc: f64, p_ch: f64, p_dc: f64, ess: &EssConfig) -> f64 {
    if p_ch > 0.0 {
        soc + ess.eta_ch * p_ch * DT_HOURS
    } else if p_dc > 0.0 {
        soc - p_dc * DT_HOURS / ess.eta_dc
    } else {
        soc
    }
}

/// Largest reserve the storage can offer at energy `soc` while
/// discharging `p_dc`.
pub fn ess_reserve_limit(soc: f64, p_dc: f64, ess: &EssConfig) -> f64 {
    let energy = ess.eta_dc * (soc - ess.soc_min) / DT_HOURS;
    energy.min(ess.p_dc_max - p_dc).max(0.0)
}

/// Stored energy drawn by net output `x` over one period.
fn energy_of(x: f64, ess: &EssConfig) -> f64 {
    if x >= 0.0 {
        x * DT_HOURS / ess.eta_dc
    } else {
        x * DT_HOURS * ess.eta_ch
    }
}

/// Net output that draws `energy` over one period.
fn net_of(energy: f64, ess: &EssConfig) -> f64 {
    if energy >= 0.0 {
        energy * ess.eta_dc / DT_HOURS
    } else {
        energy / (ess.eta_ch * DT_HOURS)
    }
}

/// Everything the upper level needs for one solve.
#[derive(Debug, Clone, PartialEq)]
pub struct UpperProblem {
    pub units: Vec<MtUnit>,
    pub ess: EssConfig,
    /// Expected equivalent load to serve, per period (kW).
    pub demand: Vec<f64>,
    /// Reserve needed to meet the confidence level, per period (kW).
    pub reserve_req: Vec<f64>,
    /// Selling price, per period ($/kWh).
    pub prices: Vec<f64>,
    pub shed_penalty: f64,
    by_capacity: Vec<usize>,
    by_reserve_cost: Vec<usize>,
    /// Storage net output (discharge minus charge) each period can absorb.
    net_bounds: Vec<(f64, f64)>,
    /// Energies at the start of each period (and at the end) from which
    /// the initial energy can be restored under `net_bounds`.
    soc_windows: Vec<(f64, f64)>,
}

impl UpperProblem {
    pub fn new(
        units: Vec<MtUnit>,
        ess: EssConfig,
        demand: Vec<f64>,
        reserve_req: Vec<f64>,
        prices: Vec<f64>,
        shed_penalty: f64,
    ) -> Result<Self> {
        let t = demand.len();
        if t == 0 {
            return Err(Error::InvalidArgument(
                "horizon must have at least one period",
            ));
        }
        if reserve_req.len() != t {
            return Err(Error::DimensionMismatch {
                what: "reserve requirement",
                expected: t,
                found: reserve_req.len(),
            });
        }
        if prices.len() != t {
            return Err(Error::DimensionMismatch {
                what: "prices",
                expected: t,
                found: prices.len(),
            });
        }
        if !(shed_penalty >= 0.0) {
            return Err(Error::InvalidArgument(
                "shedding penalty must be non-negative",
            ));
        }
        let mut by_capacity: Vec<usize> = (0..units.len()).collect();
        by_capacity.sort_by(|&a, &b| units[b].p_max.total_cmp(&units[a].p_max).then(a.cmp(&b)));
        let mut by_reserve_cost = by_capacity.clone();
        by_reserve_cost.sort_by(|&a, &b| units[a].reserve_cost.total_cmp(&units[b].reserve_cost));
        let ess = ess.validated()?;
        let capacity: f64 = units.iter().map(|u| u.p_max).sum();
        // storage cannot export beyond the load, nor charge beyond what the
        // turbines can supply on top of it
        let net_bounds: Vec<(f64, f64)> = demand
            .iter()
            .map(|d| {
                let hi = ess.p_dc_max.min(*d);
                let lo = (-ess.p_ch_max).max(d - capacity - d.max(0.0));
                (lo, hi)
            })
            .collect();
        let mut soc_windows = vec![(ess.soc_init, ess.soc_init); t + 1];
        for k in (0..t).rev() {
            let (lo, hi) = net_bounds[k];
            let (next_lo, next_hi) = soc_windows[k + 1];
            soc_windows[k] = (
                (next_lo + energy_of(lo, &ess)).max(ess.soc_min),
                (next_hi + energy_of(hi, &ess)).min(ess.soc_max),
            );
        }
        Ok(Self {
            units,
            ess,
            demand,
            reserve_req,
            prices,
            shed_penalty,
            by_capacity,
            by_reserve_cost,
            net_bounds,
            soc_windows,
        })
    }

    pub fn periods(&self) -> usize {
        self.demand.len()
    }

    pub fn cost(&self, s: &Schedule) -> Result<f64> {
        evaluate_cost(
            s,
            &self.prices,
            &self.demand,
            &self.units,
            &self.ess,
            self.shed_penalty,
        )
    }

    pub(crate) fn cost_of_repaired(&self, s: &Schedule) -> f64 {
        cost_unchecked(
            s,
            &self.prices,
            &self.demand,
            &self.units,
            &self.ess,
            self.shed_penalty,
        )
    }

    pub fn layout(&self) -> GeneLayout {
        GeneLayout {
            periods: self.periods(),
            units: self.units.len(),
        }
    }

    /// Per-gene lower and upper bounds of the heuristic's coding.
    pub fn gene_bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let layout = self.layout();
        let lower = vec![0.0; layout.len()];
        let mut upper = vec![0.0; layout.len()];
        for t in 0..layout.periods {
            for (n, u) in self.units.iter().enumerate() {
                upper[layout.commit(t, n)] = 1.0;
                upper[layout.output(t, n)] = u.p_max;
                upper[layout.reserve(t, n)] = u.p_max;
            }
            upper[layout.charge(t)] = self.ess.p_ch_max;
            upper[layout.discharge(t)] = self.ess.p_dc_max;
            upper[layout.ess_reserve(t)] = self.ess.p_dc_max;
        }
        (lower, upper)
    }
}

/// Flat real coding of a schedule. Each period holds
/// `[commit_1..commit_M, output_1..output_M, reserve_1..reserve_M,
/// charge, discharge, storage_reserve]`; commitments are relaxed to `[0, 1]`
/// and decoded with threshold 0.5.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GeneLayout {
    pub periods: usize,
    pub units: usize,
}

impl GeneLayout {
    pub fn width(&self) -> usize {
        3 * self.units + 3
    }
    pub fn len(&self) -> usize {
        self.periods * self.width()
    }
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
    pub fn commit(&self, t: usize, n: usize) -> usize {
        t * self.width() + n
    }
    pub fn output(&self, t: usize, n: usize) -> usize {
        t * self.width() + self.units + n
    }
    pub fn reserve(&self, t: usize, n: usize) -> usize {
        t * self.width() + 2 * self.units + n
    }
    pub fn charge(&self, t: usize) -> usize {
        t * self.width() + 3 * self.units
    }
    pub fn discharge(&self, t: usize) -> usize {
        self.charge(t) + 1
    }
    pub fn ess_reserve(&self, t: usize) -> usize {
        self.charge(t) + 2
    }

    /// Writes the coding of `s` into `genes`.
    pub fn encode_into(&self, s: &Schedule, genes: &mut [f64]) {
        for t in 0..self.periods {
            for n in 0..self.units {
                let i = s.idx(t, n);
                genes[self.commit(t, n)] = if s.on[i] { 1.0 } else { 0.0 };
                genes[self.output(t, n)] = s.p_mt[i];
                genes[self.reserve(t, n)] = s.r_mt[i];
            }
            genes[self.charge(t)] = s.p_ch[t];
            genes[self.discharge(t)] = s.p_dc[t];
            genes[self.ess_reserve(t)] = s.p_res[t];
        }
    }
}

/// An unrepaired candidate: the gene coding plus per-period shedding.
#[derive(Debug, Clone, PartialEq)]
pub struct RawSchedule {
    pub genes: Vec<f64>,
    pub shed: Vec<f64>,
}

impl RawSchedule {
    pub fn from_schedule(s: &Schedule) -> Self {
        let layout = GeneLayout {
            periods: s.periods,
            units: s.units,
        };
        let mut genes = vec![0.0; layout.len()];
        layout.encode_into(s, &mut genes);
        Self {
            genes,
            shed: s.p_ls.clone(),
        }
    }
}

/// Result of [`repair`]: a schedule meeting every hard constraint except,
/// possibly, the reserve requirement.
#[derive(Debug, Clone, PartialEq)]
pub struct Repaired {
    pub schedule: Schedule,
    /// Total reserve missing across periods (kW); zero when the chance
    /// constraint holds everywhere.
    pub reserve_shortfall: f64,
}

/// Deterministic projection of a raw candidate onto the constraint set.
///
/// Per period, in order: box clamps; the smaller of charge/discharge is
/// zeroed; storage power is limited so the energy stays within bounds and
/// can still return to its initial value; committed turbines are held in
/// `[p_min, p_max]` and uncommitted ones at zero; the power balance is
/// restored by the largest committed turbines, then storage, then
/// shedding (surpluses are absorbed in the same order and finally by
/// decommitting); reserve offers are clamped to headroom and raised
/// (storage first) to the requirement, committing idle turbines at minimum
/// output when headroom runs out.
pub fn repair(raw: &RawSchedule, ctx: &UpperProblem) -> Result<Repaired> {
    let layout = ctx.layout();
    if raw.genes.len() != layout.len() {
        return Err(Error::DimensionMismatch {
            what: "candidate genes",
            expected: layout.len(),
            found: raw.genes.len(),
        });
    }
    if raw.shed.len() != layout.periods {
        return Err(Error::DimensionMismatch {
            what: "candidate shedding",
            expected: layout.periods,
            found: raw.shed.len(),
        });
    }
    let mut schedule = Schedule::idle(layout.periods, layout.units, ctx.ess.soc_init);
    let reserve_shortfall = repair_into(&raw.genes, Some(&raw.shed), ctx, &mut schedule)?;
    Ok(Repaired {
        schedule,
        reserve_shortfall,
    })
}

/// Allocation-free core of [`repair`]; `out` must be sized for `ctx`.
pub(crate) fn repair_into(
    genes: &[f64],
    shed: Option<&[f64]>,
    ctx: &UpperProblem,
    out: &mut Schedule,
) -> Result<f64> {
    let layout = ctx.layout();
    let mut soc = ctx.ess.soc_init;
    out.soc[0] = soc;
    let mut shortfall = 0.0;
    for t in 0..layout.periods {
        let w = layout.width();
        let block = &genes[t * w..(t + 1) * w];
        let raw_shed = shed.map_or(0.0, |s| s[t]);
        let (next, short) = repair_period(t, block, raw_shed, soc, ctx, out)?;
        soc = next;
        out.soc[t + 1] = soc;
        shortfall += short;
    }
    out.derive_starts();
    Ok(shortfall)
}

/// Raises `v` by up to `want` without passing `cap`; returns the change.
/// The result lands exactly on `cap` when it binds.
fn push_up(v: &mut f64, want: f64, cap: f64) -> f64 {
    let old = *v;
    *v = (old + want.max(0.0)).min(cap).max(old);
    *v - old
}

/// Lowers `v` by up to `want` without passing `floor`; returns the change.
fn push_down(v: &mut f64, want: f64, floor: f64) -> f64 {
    let old = *v;
    *v = (old - want.max(0.0)).max(floor).min(old);
    old - *v
}

struct PeriodState<'a> {
    ctx: &'a UpperProblem,
    on: &'a mut [bool],
    p: &'a mut [f64],
    x: f64,
    x_lo: f64,
    x_hi: f64,
    ess_changed: bool,
    ls: f64,
    ls_cap: f64,
}

impl PeriodState<'_> {
    fn supply(&self) -> f64 {
        self.p.iter().sum::<f64>() + self.x + self.ls
    }

    /// Raises supply by up to `gap`; returns what is left uncovered.
    fn fill_deficit(&mut self, mut gap: f64) -> f64 {
        for &n in &self.ctx.by_capacity {
            if gap <= 0.0 {
                break;
            }
            if self.on[n] {
                gap -= push_up(&mut self.p[n], gap, self.ctx.units[n].p_max);
            }
        }
        if gap > 0.0 && self.x < self.x_hi {
            gap -= push_up(&mut self.x, gap, self.x_hi);
            self.ess_changed = true;
        }
        for &n in &self.ctx.by_capacity {
            if gap <= BALANCE_EPS {
                break;
            }
            let u = &self.ctx.units[n];
            if self.on[n] {
                continue;
            }
            let take = gap.min(u.p_max);
            let excess = u.p_min - take;
            if excess > 0.0 {
                if self.absorbable() + BALANCE_EPS < excess {
                    continue;
                }
                self.absorb_surplus(excess);
            }
            self.on[n] = true;
            self.p[n] = take.max(u.p_min);
            gap -= take;
        }
        if gap > 0.0 && self.ls < self.ls_cap {
            gap -= push_up(&mut self.ls, gap, self.ls_cap);
        }
        gap
    }

    /// Lowers supply by up to `surplus` without decommitting; returns the
    /// remainder.
    fn absorb_surplus(&mut self, mut surplus: f64) -> f64 {
        surplus -= push_down(&mut self.ls, surplus, 0.0);
        for &n in &self.ctx.by_capacity {
            if surplus <= 0.0 {
                break;
            }
            if self.on[n] {
                surplus -= push_down(&mut self.p[n], surplus, self.ctx.units[n].p_min);
            }
        }
        if surplus > 0.0 && self.x > self.x_lo {
            surplus -= push_down(&mut self.x, surplus, self.x_lo);
            self.ess_changed = true;
        }
        surplus
    }

    fn absorbable(&self) -> f64 {
        let units: f64 = (0..self.p.len())
            .filter(|&n| self.on[n])
            .map(|n| self.p[n] - self.ctx.units[n].p_min)
            .sum();
        units + (self.x - self.x_lo).max(0.0) + self.ls
    }
}

fn repair_period(
    t: usize,
    block: &[f64],
    raw_shed: f64,
    soc: f64,
    ctx: &UpperProblem,
    out: &mut Schedule,
) -> Result<(f64, f64)> {
    let m = ctx.units.len();
    let ess = &ctx.ess;
    let periods = ctx.periods();
    let last = t + 1 == periods;

    // storage window: the initial energy must stay restorable
    let (next_lo, next_hi) = ctx.soc_windows[t + 1];
    let (net_lo, net_hi) = ctx.net_bounds[t];
    let x_lo = net_of(soc - next_hi, ess).max(net_lo);
    let x_hi = net_of(soc - next_lo, ess).min(net_hi).max(x_lo);

    let mut ch = block[3 * m].clamp(0.0, ess.p_ch_max);
    let mut dc = block[3 * m + 1].clamp(0.0, ess.p_dc_max);
    if ch > 0.0 && dc > 0.0 {
        if dc <= ch {
            dc = 0.0;
        } else {
            ch = 0.0;
        }
    }
    let mut x = dc - ch;
    let mut ess_changed = false;
    if x < x_lo - BALANCE_EPS || x > x_hi + BALANCE_EPS {
        x = x.clamp(x_lo, x_hi);
        ess_changed = true;
    }

    let base = t * m;
    let (on, p) = (&mut out.on[base..base + m], &mut out.p_mt[base..base + m]);
    for n in 0..m {
        let u = &ctx.units[n];
        on[n] = block[n] >= 0.5;
        p[n] = if on[n] {
            block[m + n].clamp(u.p_min, u.p_max)
        } else {
            0.0
        };
    }
    let demand = ctx.demand[t];
    let ls_cap = demand.max(0.0);
    let mut st = PeriodState {
        ctx,
        on,
        p,
        x,
        x_lo,
        x_hi,
        ess_changed,
        ls: raw_shed.clamp(0.0, ls_cap),
        ls_cap,
    };

    let gap = demand - st.supply();
    if gap > BALANCE_EPS {
        if st.fill_deficit(gap) > BALANCE_EPS {
            return Err(Error::Unrepairable { period: t });
        }
    } else if gap < -BALANCE_EPS {
        let mut surplus = st.absorb_surplus(-gap);
        while surplus > BALANCE_EPS {
            // decommit the committed unit with the largest minimum output
            let victim = (0..m).filter(|&n| st.on[n]).max_by(|&a, &b| {
                ctx.units[a]
                    .p_min
                    .total_cmp(&ctx.units[b].p_min)
                    .then(b.cmp(&a))
            });
            let Some(n) = victim else {
                return Err(Error::Unrepairable { period: t });
            };
            st.on[n] = false;
            let freed = st.p[n];
            st.p[n] = 0.0;
            if freed >= surplus {
                if st.fill_deficit(freed - surplus) > BALANCE_EPS {
                    return Err(Error::Unrepairable { period: t });
                }
                surplus = 0.0;
            } else {
                surplus -= freed;
            }
        }
    }

    // reserves
    let req = ctx.reserve_req[t];
    let dc_now = |x: f64| if x > 0.0 { x } else { 0.0 };
    let r = &mut out.r_mt[base..base + m];
    let mut res_lim = ess_reserve_limit(soc, dc_now(st.x), ess);
    let mut res = block[3 * m + 2].clamp(0.0, res_lim);
    for n in 0..m {
        r[n] = if st.on[n] {
            block[2 * m + n].clamp(0.0, (ctx.units[n].p_max - st.p[n]).max(0.0))
        } else {
            0.0
        };
    }
    let mut short = req - (r.iter().sum::<f64>() + res);
    if short > BALANCE_EPS {
        short = raise_reserves(short, &mut res, res_lim, r, &st);
        if short > BALANCE_EPS {
            for &n in &ctx.by_capacity {
                if st.on[n] {
                    continue;
                }
                let u = &ctx.units[n];
                if st.absorbable() + BALANCE_EPS < u.p_min {
                    continue;
                }
                let left = st.absorb_surplus(u.p_min);
                st.on[n] = true;
                debug_assert!(left <= BALANCE_EPS);
                st.p[n] = u.p_min;
                res_lim = ess_reserve_limit(soc, dc_now(st.x), ess);
                short = req - (r.iter().sum::<f64>() + res);
                short = raise_reserves(short, &mut res, res_lim, r, &st);
                if short <= BALANCE_EPS {
                    break;
                }
            }
        }
    }
    if short > BALANCE_EPS {
        // last resort: shed load to free turbine headroom
        short = shed_for_reserve(short, BALANCE_EPS, r, &mut st);
    }
    // rounding can leave the total a few ulps under the requirement, which
    // is enough to drop a whole step of the confidence curve
    for _ in 0..4 {
        let gap = req - (r.iter().sum::<f64>() + res);
        if gap <= 0.0 || gap > BALANCE_EPS {
            break;
        }
        let bump = gap.max(req.abs() * f64::EPSILON);
        let left = raise_reserves(bump, &mut res, res_lim, r, &st);
        if left > 0.0 && shed_for_reserve(left, 0.0, r, &mut st) >= left {
            break;
        }
    }
    let short = if short > BALANCE_EPS { short } else { 0.0 };

    if st.ess_changed {
        if st.x >= 0.0 {
            dc = st.x;
            ch = 0.0;
        } else {
            ch = -st.x;
            dc = 0.0;
        }
    }
    let ls = st.ls;
    out.p_ch[t] = ch;
    out.p_dc[t] = dc;
    out.p_res[t] = res;
    out.p_ls[t] = ls;
    let next = if last {
        ess.soc_init
    } else {
        soc_step_unchecked(soc, ch, dc, ess)
    };
    Ok((next, short))
}

fn shed_for_reserve(mut short: f64, done: f64, r: &mut [f64], st: &mut PeriodState<'_>) -> f64 {
    let ctx = st.ctx;
    for &n in &ctx.by_reserve_cost {
        if short <= done {
            break;
        }
        if st.on[n] {
            let dec = short
                .min(st.p[n] - ctx.units[n].p_min)
                .min(st.ls_cap - st.ls)
                .max(0.0);
            st.p[n] -= dec;
            st.ls += dec;
            let raised = (r[n] + dec).min(ctx.units[n].p_max - st.p[n]);
            short -= raised - r[n];
            r[n] = raised;
        }
    }
    short
}

fn raise_reserves(
    mut short: f64,
    res: &mut f64,
    res_lim: f64,
    r: &mut [f64],
    st: &PeriodState<'_>,
) -> f64 {
    if short <= 0.0 {
        return short;
    }
    short -= push_up(res, short, res_lim);
    for &n in &st.ctx.by_reserve_cost {
        if short <= 0.0 {
            break;
        }
        if st.on[n] {
            let head = (st.ctx.units[n].p_max - st.p[n]).max(0.0);
            short -= push_up(&mut r[n], short, head);
        }
    }
    short
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstraintId {
    Dimensions,
    PowerBalance,
    MtOutputLimits,
    SocDynamics,
    SocBounds,
    EssPowerLimits,
    ChargeDischargeExclusive,
    TerminalSoc,
    MtReserveHeadroom,
    EssReserveLimit,
    ReserveChance,
    StartupLogic,
    Shedding,
}

impl ConstraintId {
    pub fn name(&self) -> &'static str {
        match self {
            ConstraintId::Dimensions => "dimensions",
            ConstraintId::PowerBalance => "power_balance",
            ConstraintId::MtOutputLimits => "mt_output_limits",
            ConstraintId::SocDynamics => "soc_dynamics",
            ConstraintId::SocBounds => "soc_bounds",
            ConstraintId::EssPowerLimits => "ess_power_limits",
            ConstraintId::ChargeDischargeExclusive => "charge_discharge_exclusive",
            ConstraintId::TerminalSoc => "terminal_soc",
            ConstraintId::MtReserveHeadroom => "mt_reserve_headroom",
            ConstraintId::EssReserveLimit => "ess_reserve_limit",
            ConstraintId::ReserveChance => "reserve_chance",
            ConstraintId::StartupLogic => "startup_logic",
            ConstraintId::Shedding => "shedding",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Violation {
    /// Zero-based period; `None` for schedule-wide constraints.
    pub period: Option<usize>,
    pub unit: Option<usize>,
    pub constraint: ConstraintId,
    pub magnitude: f64,
}

/// Lists every violated constraint; an empty list means feasible.
///
/// Continuous constraints use [`FEASIBILITY_TOL`]; the terminal energy
/// must equal the initial energy exactly.
pub fn check_feasible(s: &Schedule, ctx: &UpperProblem) -> Vec<Violation> {
    let mut out = Vec::new();
    if s.check_dims(ctx.periods(), ctx.units.len()).is_err() {
        out.push(Violation {
            period: None,
            unit: None,
            constraint: ConstraintId::Dimensions,
            magnitude: f64::NAN,
        });
        return out;
    }
    let tol = FEASIBILITY_TOL;
    let ess = &ctx.ess;
    let mut flag = |period: Option<usize>, unit: Option<usize>, constraint, magnitude: f64| {
        out.push(Violation {
            period,
            unit,
            constraint,
            magnitude,
        });
    };
    for t in 0..s.periods {
        let pt = Some(t);
        let (ch, dc) = (s.p_ch[t], s.p_dc[t]);
        let balance = s.total_mt_output(t) + dc - ch + s.p_ls[t] - ctx.demand[t];
        if balance.abs() > tol {
            flag(pt, None, ConstraintId::PowerBalance, balance.abs());
        }
        for (n, u) in ctx.units.iter().enumerate() {
            let i = s.idx(t, n);
            let p = s.p_mt[i];
            let excess = if s.on[i] {
                (u.p_min - p).max(p - u.p_max)
            } else {
                p.abs()
            };
            if excess > tol {
                flag(pt, Some(n), ConstraintId::MtOutputLimits, excess);
            }
            let headroom = if s.on[i] { (u.p_max - p).max(0.0) } else { 0.0 };
            let r = s.r_mt[i];
            if r > headroom + tol || r < -tol {
                flag(
                    pt,
                    Some(n),
                    ConstraintId::MtReserveHeadroom,
                    (r - headroom).max(-r),
                );
            }
            let started = s.on[i] && !(t > 0 && s.on[i - s.units]);
            if s.start[i] != started {
                flag(pt, Some(n), ConstraintId::StartupLogic, 1.0);
            }
        }
        let power_excess = (ch - ess.p_ch_max).max(dc - ess.p_dc_max).max(-ch).max(-dc);
        if power_excess > tol {
            flag(pt, None, ConstraintId::EssPowerLimits, power_excess);
        }
        if ch > tol && dc > tol {
            flag(pt, None, ConstraintId::ChargeDischargeExclusive, ch.min(dc));
        }
        let predicted = soc_step_unchecked(
            s.soc[t],
            ch.max(0.0),
            if ch > 0.0 { 0.0 } else { dc.max(0.0) },
            ess,
        );
        let drift = (s.soc[t + 1] - predicted).abs();
        if drift > tol {
            flag(pt, None, ConstraintId::SocDynamics, drift);
        }
        let limit = ess_reserve_limit(s.soc[t], dc, ess);
        if s.p_res[t] > limit + tol || s.p_res[t] < -tol {
            flag(
                pt,
                None,
                ConstraintId::EssReserveLimit,
                (s.p_res[t] - limit).max(-s.p_res[t]),
            );
        }
        let missing = ctx.reserve_req[t] - (s.total_mt_reserve(t) + s.p_res[t]);
        if missing > tol {
            flag(pt, None, ConstraintId::ReserveChance, missing);
        }
        let ls = s.p_ls[t];
        if ls < -tol || ls > ctx.demand[t].max(0.0) + tol {
            flag(pt, None, ConstraintId::Shedding, ls.abs());
        }
    }
    for (t, soc) in s.soc.iter().enumerate() {
        let excess = (ess.soc_min - soc).max(soc - ess.soc_max);
        if excess > tol {
            flag(Some(t), None, ConstraintId::SocBounds, excess);
        }
    }
    let end = s.soc[s.periods];
    if s.soc[0] != ess.soc_init || end != ess.soc_init {
        let gap = (s.soc[0] - ess.soc_init)
            .abs()
            .max((end - ess.soc_init).abs());
        flag(None, None, ConstraintId::TerminalSoc, gap);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn table_units() -> Vec<MtUnit> {
        vec![
            MtUnit {
                fixed_cost: 1.2,
                startup_cost: 1.6,
                fuel_slope: 0.35,
                reserve_cost: 0.04,
                p_min: 5.0,
                p_max: 35.0,
            },
            MtUnit {
                fixed_cost: 1.2,
                startup_cost: 1.6,
                fuel_slope: 0.35,
                reserve_cost: 0.04,
                p_min: 5.0,
                p_max: 30.0,
            },
            MtUnit {
                fixed_cost: 1.0,
                startup_cost: 3.5,
                fuel_slope: 0.26,
                reserve_cost: 0.04,
                p_min: 10.0,
                p_max: 65.0,
            },
        ]
    }

    pub(crate) fn ess() -> EssConfig {
        EssConfig {
            p_ch_max: 40.0,
            p_dc_max: 40.0,
            eta_ch: 0.95,
            eta_dc: 0.95,
            soc_min: 32.0,
            soc_max: 160.0,
            soc_init: 96.0,
            charge_price: 0.3,
            discharge_price: 0.5,
            reserve_price: 0.02,
            q_ch_max: 0.0,
            q_dc_max: 0.0,
            v_min: 0.0,
            v_max: 0.0,
        }
    }

    fn ctx(demand: Vec<f64>, req: Vec<f64>) -> UpperProblem {
        let prices = vec![0.6; demand.len()];
        UpperProblem::new(table_units(), ess(), demand, req, prices, 10.0).unwrap()
    }

    #[test]
    fn single_period_cost() {
        let units = [table_units()[0]];
        let mut s = Schedule::idle(1, 1, 96.0);
        s.on[0] = true;
        s.start[0] = true;
        s.p_mt[0] = 10.0;
        s.r_mt[0] = 5.0;
        let f1 = evaluate_cost(&s, &[0.6], &[10.0], &units, &ess(), 10.0).unwrap();
        assert!((f1 - 0.50).abs() < 1e-12, "{f1}");
    }

    #[test]
    fn idle_schedule_costs_nothing() {
        let s = Schedule::idle(3, 3, 96.0);
        let f1 = evaluate_cost(&s, &[0.6; 3], &[0.0; 3], &table_units(), &ess(), 10.0).unwrap();
        assert_eq!(f1, 0.0);
    }

    #[test]
    fn revenue_is_linear_in_price() {
        let mut s = Schedule::idle(1, 3, 96.0);
        s.on[2] = true;
        s.start[2] = true;
        s.p_mt[2] = 40.0;
        let base = evaluate_cost(&s, &[0.5], &[40.0], &table_units(), &ess(), 10.0).unwrap();
        let doubled = evaluate_cost(&s, &[1.0], &[40.0], &table_units(), &ess(), 10.0).unwrap();
        // only the revenue term (40 kWh * 0.5 $) moves
        assert!((base - doubled - 20.0).abs() < 1e-12);
    }

    #[test]
    fn cost_dimension_mismatch() {
        let s = Schedule::idle(2, 3, 96.0);
        assert!(matches!(
            evaluate_cost(&s, &[0.6], &[1.0], &table_units(), &ess(), 10.0),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn soc_steps() {
        assert!((soc_step(100.0, 10.0, 0.0, &ess()).unwrap() - 109.5).abs() < 1e-12);
        assert!((soc_step(100.0, 0.0, 9.5, &ess()).unwrap() - 90.0).abs() < 1e-12);
        assert_eq!(soc_step(100.0, 0.0, 0.0, &ess()).unwrap(), 100.0);
        assert!(matches!(
            soc_step(100.0, 1.0, 1.0, &ess()),
            Err(Error::SimultaneousChargeDischarge { .. })
        ));
    }

    #[test]
    fn storage_reserve() {
        assert!((ess_reserve_limit(160.0, 0.0, &ess()) - 40.0).abs() < 1e-12);
        assert_eq!(ess_reserve_limit(32.0, 0.0, &ess()), 0.0);
        assert_eq!(ess_reserve_limit(160.0, 40.0, &ess()), 0.0);
        assert!((ess_reserve_limit(50.0, 0.0, &ess()) - 0.95 * 18.0).abs() < 1e-12);
    }

    fn raw_from(ctx: &UpperProblem, f: impl Fn(&GeneLayout, &mut [f64])) -> RawSchedule {
        let layout = ctx.layout();
        let mut genes = vec![0.0; layout.len()];
        f(&layout, &mut genes);
        RawSchedule {
            genes,
            shed: vec![0.0; layout.periods],
        }
    }

    #[test]
    fn repair_balances_with_largest_unit() {
        let c = ctx(vec![57.0, 50.0], vec![0.0, 0.0]);
        let raw = raw_from(&c, |l, g| {
            for t in 0..2 {
                g[l.commit(t, 2)] = 1.0;
                g[l.output(t, 2)] = 50.0;
            }
        });
        let rep = repair(&raw, &c).unwrap();
        assert_eq!(rep.schedule.p_mt[2], 57.0);
        assert_eq!(rep.schedule.p_mt[5], 50.0);
        assert!(check_feasible(&rep.schedule, &c).is_empty());
    }

    #[test]
    fn repair_zeroes_smaller_storage_power() {
        let c = ctx(vec![40.0, 40.0, 40.0], vec![0.0; 3]);
        let raw = raw_from(&c, |l, g| {
            for t in 0..3 {
                g[l.commit(t, 2)] = 1.0;
                g[l.output(t, 2)] = 40.0;
            }
            g[l.charge(0)] = 5.0;
            g[l.discharge(0)] = 3.0;
        });
        let rep = repair(&raw, &c).unwrap();
        let s = &rep.schedule;
        assert_eq!(s.p_ch[0], 5.0);
        assert_eq!(s.p_dc[0], 0.0);
        // the extra 5 kW of charging is covered by the turbine
        assert_eq!(s.p_mt[2], 45.0);
        assert!(
            check_feasible(s, &c).is_empty(),
            "{:?}",
            check_feasible(s, &c)
        );
        assert_eq!(s.soc[3], 96.0);
    }

    #[test]
    fn repair_is_a_projection() {
        let c = ctx(vec![30.0, 80.0, 120.0, 60.0], vec![10.0, 15.0, 20.0, 12.0]);
        let raw = raw_from(&c, |l, g| {
            for t in 0..4 {
                for n in 0..3 {
                    g[l.commit(t, n)] = 0.3 + 0.2 * n as f64 + 0.05 * t as f64;
                    g[l.output(t, n)] = 12.0 * (n + 1) as f64;
                    g[l.reserve(t, n)] = 3.0;
                }
                g[l.charge(t)] = 10.0 * t as f64;
                g[l.discharge(t)] = 25.0;
                g[l.ess_reserve(t)] = 4.0;
            }
        });
        let first = repair(&raw, &c).unwrap();
        assert_eq!(first.reserve_shortfall, 0.0);
        assert!(
            check_feasible(&first.schedule, &c).is_empty(),
            "{:?}",
            check_feasible(&first.schedule, &c)
        );
        let again = repair(&RawSchedule::from_schedule(&first.schedule), &c).unwrap();
        assert_eq!(again, first);
    }

    #[test]
    fn repair_commits_for_reserve() {
        let c = ctx(vec![20.0], vec![60.0]);
        let raw = raw_from(&c, |l, g| {
            g[l.commit(0, 0)] = 1.0;
            g[l.output(0, 0)] = 20.0;
        });
        let rep = repair(&raw, &c).unwrap();
        assert_eq!(rep.reserve_shortfall, 0.0);
        assert!(check_feasible(&rep.schedule, &c).is_empty());
        assert!(rep.schedule.on.iter().filter(|o| **o).count() >= 2);
    }

    #[test]
    fn repair_sheds_as_last_resort() {
        let c = ctx(vec![250.0], vec![0.0]);
        let raw = raw_from(&c, |l, g| {
            for n in 0..3 {
                g[l.commit(0, n)] = 1.0;
            }
        });
        let rep = repair(&raw, &c).unwrap();
        // single period: storage must end where it started, so it cannot help
        assert!((rep.schedule.p_ls[0] - 120.0).abs() < 1e-9);
        assert!(check_feasible(&rep.schedule, &c).is_empty());
    }

    #[test]
    fn repair_decommits_on_surplus() {
        let c = ctx(vec![8.0], vec![0.0]);
        let raw = raw_from(&c, |l, g| {
            for n in 0..3 {
                g[l.commit(0, n)] = 1.0;
            }
        });
        let rep = repair(&raw, &c).unwrap();
        assert!(check_feasible(&rep.schedule, &c).is_empty());
        assert!((rep.schedule.total_mt_output(0) - 8.0).abs() < 1e-9);
    }

    #[test]
    fn unrepairable_surplus() {
        // negative demand in the last period: storage is pinned, no unit to drop
        let c = ctx(vec![-5.0], vec![0.0]);
        let raw = raw_from(&c, |_, _| {});
        assert!(matches!(
            repair(&raw, &c),
            Err(Error::Unrepairable { period: 0 })
        ));
    }

    #[test]
    fn constructed_violations() {
        let c = ctx(vec![36.0], vec![0.0]);
        let mut s = Schedule::idle(1, 3, 96.0);
        s.on[0] = true;
        s.start[0] = true;
        s.p_mt[0] = 36.0;
        let v = check_feasible(&s, &c);
        assert_eq!(v.len(), 1, "{v:?}");
        assert_eq!(v[0].constraint, ConstraintId::MtOutputLimits);
        assert_eq!(v[0].unit, Some(0));

        let c = ctx(vec![30.0, 30.0], vec![0.0, 0.0]);
        let raw = raw_from(&c, |l, g| {
            for t in 0..2 {
                g[l.commit(t, 2)] = 1.0;
            }
        });
        let mut s = repair(&raw, &c).unwrap().schedule;
        assert!(check_feasible(&s, &c).is_empty());
        s.soc[2] = 95.0;
        let v = check_feasible(&s, &c);
        assert!(v.iter().any(|v| v.constraint == ConstraintId::TerminalSoc));
    }

    #[test]
    fn cost_monotone_in_reserve_and_shedding() {
        let c = ctx(vec![40.0], vec![0.0]);
        let raw = raw_from(&c, |l, g| {
            g[l.commit(0, 2)] = 1.0;
        });
        let s = repair(&raw, &c).unwrap().schedule;
        let base = c.cost(&s).unwrap();
        for bump in 0..3 {
            let mut t = s.clone();
            match bump {
                0 => t.r_mt[2] += 1.0,
                1 => t.p_res[0] += 1.0,
                _ => t.p_ls[0] += 1.0,
            }
            assert!(c.cost(&t).unwrap() >= base);
        }
    }
}
