//! Primal-dual interior point method (Mehrotra predictor-corrector) for
//! dense linear programs.
//!
//! Problems are given as
//!
//! ```text
//! minimize   cᵀx
//! subject to A_eq x  = b_eq
//!            A_ub x <= b_ub
//!            lower <= x <= upper
//! ```
//!
//! and internally shifted to standard form `min ĉᵀz, Âz = b̂, z >= 0`
//! with slack variables for inequality rows and finite upper bounds.

use alloc::vec;
use alloc::vec::Vec;

use crate::linalg::{dot, mat_t_vec, mat_vec, norm_inf, Lu};
use crate::{Error, Result};

const STEP_DAMPING: f64 = 0.995;
const FIXED_TOL: f64 = 1e-12;
const FEAS_TOL: f64 = 1e-9;
const DIVERGENCE: f64 = 1e12;

/// Constraint matrices are row-major with `c.len()` columns.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    pub c: Vec<f64>,
    pub a_eq: Vec<f64>,
    pub b_eq: Vec<f64>,
    pub a_ub: Vec<f64>,
    pub b_ub: Vec<f64>,
    /// Must be finite.
    pub lower: Vec<f64>,
    /// May be `f64::INFINITY`.
    pub upper: Vec<f64>,
}

impl LinearProgram {
    /// `min cᵀx` over `0 <= x`, no rows yet.
    pub fn new(c: Vec<f64>) -> Self {
        let n = c.len();
        Self {
            c,
            a_eq: Vec::new(),
            b_eq: Vec::new(),
            a_ub: Vec::new(),
            b_ub: Vec::new(),
            lower: vec![0.0; n],
            upper: vec![f64::INFINITY; n],
        }
    }

    pub fn vars(&self) -> usize {
        self.c.len()
    }

    pub fn with_bounds(mut self, lower: Vec<f64>, upper: Vec<f64>) -> Self {
        self.lower = lower;
        self.upper = upper;
        self
    }

    pub fn add_eq(&mut self, row: &[f64], rhs: f64) {
        self.a_eq.extend_from_slice(row);
        self.b_eq.push(rhs);
    }

    pub fn add_ub(&mut self, row: &[f64], rhs: f64) {
        self.a_ub.extend_from_slice(row);
        self.b_ub.push(rhs);
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.vars();
        let dims = [
            ("equality matrix", self.b_eq.len() * n, self.a_eq.len()),
            ("inequality matrix", self.b_ub.len() * n, self.a_ub.len()),
            ("lower bounds", n, self.lower.len()),
            ("upper bounds", n, self.upper.len()),
        ];
        for (what, expected, found) in dims {
            if expected != found {
                return Err(Error::DimensionMismatch {
                    what,
                    expected,
                    found,
                });
            }
        }
        let finite = self
            .c
            .iter()
            .chain(&self.a_eq)
            .chain(&self.b_eq)
            .chain(&self.a_ub)
            .chain(&self.b_ub);
        if finite.chain(&self.lower).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(
                "LP data and lower bounds must be finite",
            ));
        }
        if self.lower.iter().zip(&self.upper).any(|(l, u)| !(l <= u)) {
            return Err(Error::InvalidArgument(
                "LP bounds must satisfy lower <= upper",
            ));
        }
        Ok(())
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        dot(&self.c, x)
    }

    /// Largest violation of any constraint or bound at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let n = self.vars();
        let eq = mat_vec(&self.a_eq, self.b_eq.len(), x);
        let ub = mat_vec(&self.a_ub, self.b_ub.len(), x);
        let mut worst: f64 = 0.0;
        for (v, b) in eq.iter().zip(&self.b_eq) {
            worst = worst.max((v - b).abs());
        }
        for (v, b) in ub.iter().zip(&self.b_ub) {
            worst = worst.max(v - b);
        }
        for j in 0..n {
            worst = worst.max(self.lower[j] - x[j]).max(x[j] - self.upper[j]);
        }
        worst
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IpmConfig {
    /// Termination threshold on the duality gap.
    pub gap_tolerance: f64,
    pub max_iterations: usize,
    /// Minimum shift applied to the starting point.
    pub initial_point_margin: f64,
}

impl Default for IpmConfig {
    fn default() -> Self {
        Self {
            gap_tolerance: 1e-5,
            max_iterations: 200,
            initial_point_margin: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    /// Final duality gap `zᵀs` of the standard form.
    pub gap: f64,
    pub iterations: usize,
    /// Infinity norm of the standard-form primal residual.
    pub primal_residual: f64,
    /// Infinity norm of the standard-form dual residual.
    pub dual_residual: f64,
    /// Duality gap at the start point and after every iteration.
    pub gap_trace: Vec<f64>,
}

/// Standard-form problem plus the map back to the caller's variables.
struct Standard {
    a: Vec<f64>,
    b: Vec<f64>,
    c: Vec<f64>,
    rows: usize,
    cols: usize,
    /// Column of each free original variable, or `None` if fixed.
    column: Vec<Option<usize>>,
}

fn standardize(lp: &LinearProgram) -> Result<Standard> {
    let n = lp.vars();
    let m_eq = lp.b_eq.len();
    let m_ub = lp.b_ub.len();
    let mut column = vec![None; n];
    let mut free = Vec::new();
    let mut boxed = Vec::new();
    for j in 0..n {
        let width = lp.upper[j] - lp.lower[j];
        if width > FIXED_TOL {
            column[j] = Some(free.len());
            free.push(j);
            if width.is_finite() {
                boxed.push(j);
            }
        }
    }
    let nf = free.len();
    let cols = nf + m_ub + boxed.len();
    let base_eq = mat_vec(&lp.a_eq, m_eq, &lp.lower);
    let base_ub = mat_vec(&lp.a_ub, m_ub, &lp.lower);

    let mut rows_a: Vec<Vec<f64>> = Vec::new();
    let mut b = Vec::new();
    for i in 0..m_eq {
        let mut row = vec![0.0; cols];
        for (k, &j) in free.iter().enumerate() {
            row[k] = lp.a_eq[i * n + j];
        }
        let rhs = lp.b_eq[i] - base_eq[i];
        if row.iter().all(|v| *v == 0.0) {
            if rhs.abs() > FEAS_TOL * (1.0 + lp.b_eq[i].abs()) {
                return Err(Error::LpInfeasible);
            }
            continue;
        }
        rows_a.push(row);
        b.push(rhs);
    }
    for i in 0..m_ub {
        let mut row = vec![0.0; cols];
        for (k, &j) in free.iter().enumerate() {
            row[k] = lp.a_ub[i * n + j];
        }
        row[nf + i] = 1.0;
        rows_a.push(row);
        b.push(lp.b_ub[i] - base_ub[i]);
    }
    for (k, &j) in boxed.iter().enumerate() {
        let mut row = vec![0.0; cols];
        row[column[j].unwrap()] = 1.0;
        row[nf + m_ub + k] = 1.0;
        rows_a.push(row);
        b.push(lp.upper[j] - lp.lower[j]);
    }
    let mut c = vec![0.0; cols];
    for (k, &j) in free.iter().enumerate() {
        c[k] = lp.c[j];
    }
    let rows = rows_a.len();
    Ok(Standard {
        a: rows_a.concat(),
        b,
        c,
        rows,
        cols,
        column,
    })
}

fn factor_normal(a: &[f64], rows: usize, cols: usize, d: &[f64]) -> Result<Lu> {
    let mut m = vec![0.0; rows * rows];
    for i in 0..rows {
        let ai = &a[i * cols..(i + 1) * cols];
        for k in i..rows {
            let ak = &a[k * cols..(k + 1) * cols];
            let v: f64 = (0..cols).map(|j| ai[j] * d[j] * ak[j]).sum();
            m[i * rows + k] = v;
            m[k * rows + i] = v;
        }
    }
    match Lu::factor(m.clone(), rows) {
        Ok(lu) => Ok(lu),
        Err(Error::SingularSystem) => {
            let scale = (0..rows).fold(0.0f64, |s, i| s.max(m[i * rows + i]));
            for i in 0..rows {
                m[i * rows + i] += 1e-10 * scale.max(1.0);
            }
            Lu::factor(m, rows)
        }
        Err(e) => Err(e),
    }
}

struct Newton<'a> {
    a: &'a [f64],
    rows: usize,
    cols: usize,
    lu: Lu,
    x: &'a [f64],
    s: &'a [f64],
    rp: &'a [f64],
    rd: &'a [f64],
}

impl Newton<'_> {
    /// Direction for complementarity target `rc` (`S dx + X ds = rc`).
    fn direction(&self, rc: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let n = self.cols;
        // A D Aᵀ dy = rp - A S⁻¹ rc + A D rd
        let mut v = vec![0.0; n];
        for j in 0..n {
            v[j] = (self.x[j] * self.rd[j] - rc[j]) / self.s[j];
        }
        let av = mat_vec(self.a, self.rows, &v);
        let rhs: Vec<f64> = self.rp.iter().zip(&av).map(|(p, q)| p + q).collect();
        let dy = self.lu.solve(&rhs);
        let aty = mat_t_vec(self.a, n, &dy);
        let ds: Vec<f64> = (0..n).map(|j| self.rd[j] - aty[j]).collect();
        let dx: Vec<f64> = (0..n)
            .map(|j| (rc[j] - self.x[j] * ds[j]) / self.s[j])
            .collect();
        (dx, dy, ds)
    }
}

fn max_step(v: &[f64], dv: &[f64]) -> f64 {
    v.iter()
        .zip(dv)
        .filter(|(_, d)| **d < 0.0)
        .fold(f64::INFINITY, |a, (v, d)| a.min(-v / d))
}

fn gap_after(x: &[f64], dx: &[f64], ap: f64, s: &[f64], ds: &[f64], ad: f64) -> f64 {
    x.iter()
        .zip(dx)
        .zip(s.iter().zip(ds))
        .map(|((x, dx), (s, ds))| (x + ap * dx) * (s + ad * ds))
        .sum()
}

/// Solves `lp` to duality gap `cfg.gap_tolerance`.
///
/// The gap `zᵀs` decreases strictly at every iteration: when the
/// predictor-corrector step fails to reduce it, a damped centering step
/// with backtracking is taken instead.
pub fn solve_lp(lp: &LinearProgram, cfg: &IpmConfig) -> Result<LpSolution> {
    lp.validate()?;
    if !(cfg.gap_tolerance > 0.0) {
        return Err(Error::InvalidArgument("gap tolerance must be positive"));
    }
    let st = standardize(lp)?;
    let (rows, cols) = (st.rows, st.cols);
    let finish = |z: &[f64], gap: f64, iterations: usize, rp: f64, rd: f64, trace: Vec<f64>| {
        let x: Vec<f64> = (0..lp.vars())
            .map(|j| match st.column[j] {
                Some(k) => lp.lower[j] + z[k],
                None => lp.lower[j],
            })
            .collect();
        let objective = lp.objective(&x);
        LpSolution {
            x,
            objective,
            gap,
            iterations,
            primal_residual: rp,
            dual_residual: rd,
            gap_trace: trace,
        }
    };
    if cols == 0 {
        return Ok(finish(&[], 0.0, 0, 0.0, 0.0, vec![0.0]));
    }
    if rows == 0 {
        // only sign constraints on shifted variables
        if st.c.iter().any(|c| *c < 0.0) {
            return Err(Error::LpUnbounded);
        }
        return Ok(finish(&vec![0.0; cols], 0.0, 0, 0.0, 0.0, vec![0.0]));
    }
    let (a, b, c) = (&st.a, &st.b, &st.c);
    let (mut x, mut y, mut s) = start_point(a, b, c, rows, cols, cfg.initial_point_margin)?;
    let tol_p = FEAS_TOL * (1.0 + norm_inf(b));
    let tol_d = FEAS_TOL * (1.0 + norm_inf(c));
    let mut gap = dot(&x, &s);
    let mut trace = vec![gap];
    for iter in 0..=cfg.max_iterations {
        let ax = mat_vec(a, rows, &x);
        let rp: Vec<f64> = b.iter().zip(&ax).map(|(b, v)| b - v).collect();
        let aty = mat_t_vec(a, cols, &y);
        let rd: Vec<f64> = (0..cols).map(|j| c[j] - aty[j] - s[j]).collect();
        let (rp_n, rd_n) = (norm_inf(&rp), norm_inf(&rd));
        let dual_obj = dot(b, &y);
        let primal_obj = dot(c, &x);
        if gap < cfg.gap_tolerance
            && (primal_obj - dual_obj).abs() < cfg.gap_tolerance
            && rp_n <= tol_p
            && rd_n <= tol_d
        {
            return Ok(finish(&x, gap, iter, rp_n, rd_n, trace));
        }
        if iter == cfg.max_iterations {
            break;
        }
        if norm_inf(&x) > DIVERGENCE {
            return Err(Error::LpUnbounded);
        }
        if norm_inf(&y) > DIVERGENCE || norm_inf(&s) > DIVERGENCE {
            return Err(Error::LpInfeasible);
        }

        let d: Vec<f64> = x.iter().zip(&s).map(|(x, s)| x / s).collect();
        let lu = match factor_normal(a, rows, cols, &d) {
            Ok(lu) => lu,
            // the scaling collapses when iterates chase an infeasibility certificate
            Err(Error::SingularSystem) if rp_n > tol_p || rd_n > tol_d => {
                return Err(stalled(rp_n > tol_p, rd_n > tol_d, iter))
            }
            Err(e) => return Err(e),
        };
        let newton = Newton {
            a,
            rows,
            cols,
            lu,
            x: &x,
            s: &s,
            rp: &rp,
            rd: &rd,
        };
        let mu = gap / cols as f64;

        let rc_aff: Vec<f64> = x.iter().zip(&s).map(|(x, s)| -x * s).collect();
        let (dx_a, _, ds_a) = newton.direction(&rc_aff);
        let ap_a = max_step(&x, &dx_a).min(1.0);
        let ad_a = max_step(&s, &ds_a).min(1.0);
        let mu_aff = gap_after(&x, &dx_a, ap_a, &s, &ds_a, ad_a) / cols as f64;
        let ratio = (mu_aff / mu).clamp(0.0, 1.0);
        let sigma = ratio * ratio * ratio;

        let rc: Vec<f64> = (0..cols)
            .map(|j| sigma * mu - x[j] * s[j] - dx_a[j] * ds_a[j])
            .collect();
        let (mut dx, mut dy, mut ds) = newton.direction(&rc);
        let mut ap = (STEP_DAMPING * max_step(&x, &dx)).min(1.0);
        let mut ad = (STEP_DAMPING * max_step(&s, &ds)).min(1.0);
        let mut next_gap = gap_after(&x, &dx, ap, &s, &ds, ad);
        if !(next_gap < gap) {
            let rc: Vec<f64> = x.iter().zip(&s).map(|(x, s)| 0.1 * mu - x * s).collect();
            (dx, dy, ds) = newton.direction(&rc);
            let mut alpha = (STEP_DAMPING * max_step(&x, &dx).min(max_step(&s, &ds))).min(1.0);
            loop {
                next_gap = gap_after(&x, &dx, alpha, &s, &ds, alpha);
                if next_gap < gap || alpha < 1e-16 {
                    break;
                }
                alpha *= 0.5;
            }
            if !(next_gap < gap) {
                return Err(stalled(rp_n > tol_p, rd_n > tol_d, iter + 1));
            }
            ap = alpha;
            ad = alpha;
        }
        for j in 0..cols {
            x[j] += ap * dx[j];
            s[j] += ad * ds[j];
        }
        for (y, dy) in y.iter_mut().zip(&dy) {
            *y += ad * dy;
        }
        gap = dot(&x, &s);
        trace.push(gap);
    }
    Err(Error::LpIterationLimit {
        iterations: cfg.max_iterations,
    })
}

/// Classifies a run that cannot make further progress.
fn stalled(primal_infeasible: bool, dual_infeasible: bool, iterations: usize) -> Error {
    if primal_infeasible {
        Error::LpInfeasible
    } else if dual_infeasible {
        Error::LpUnbounded
    } else {
        Error::LpIterationLimit { iterations }
    }
}

/// Mehrotra's least-squares starting point, shifted into the interior by
/// at least `margin`.
fn start_point(
    a: &[f64],
    b: &[f64],
    c: &[f64],
    rows: usize,
    cols: usize,
    margin: f64,
) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let lu = factor_normal(a, rows, cols, &vec![1.0; cols])?;
    let w = lu.solve(b);
    let x0 = mat_t_vec(a, cols, &w);
    let ac = mat_vec(a, rows, c);
    let y = lu.solve(&ac);
    let aty = mat_t_vec(a, cols, &y);
    let s0: Vec<f64> = (0..cols).map(|j| c[j] - aty[j]).collect();
    let shift = |v: &[f64]| {
        let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
        (-1.5 * lo).max(margin)
    };
    let (dx, ds) = (shift(&x0), shift(&s0));
    let xh: Vec<f64> = x0.iter().map(|v| v + dx).collect();
    let sh: Vec<f64> = s0.iter().map(|v| v + ds).collect();
    let xs = dot(&xh, &sh);
    let ex = 0.5 * xs / sh.iter().sum::<f64>();
    let es = 0.5 * xs / xh.iter().sum::<f64>();
    let x = xh.iter().map(|v| v + ex).collect();
    let s = sh.iter().map(|v| v + es).collect();
    Ok((x, y, s))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_variable_box() {
        let lp = LinearProgram::new(vec![1.0]).with_bounds(vec![1.0], vec![2.0]);
        let sol = solve_lp(&lp, &IpmConfig::default()).unwrap();
        assert!((sol.x[0] - 1.0).abs() < 1e-5);
        assert!((sol.objective - 1.0).abs() < 1e-5);
    }

    #[test]
    fn simplex_facet() {
        let mut lp = LinearProgram::new(vec![-1.0, -1.0]);
        lp.add_ub(&[1.0, 1.0], 1.0);
        let sol = solve_lp(&lp, &IpmConfig::default()).unwrap();
        assert!((sol.objective + 1.0).abs() < 1e-5);
        assert!(lp.max_violation(&sol.x) < 1e-8);
    }

    #[test]
    fn fixed_variable() {
        let mut lp =
            LinearProgram::new(vec![1.0, 2.0]).with_bounds(vec![3.0, 0.0], vec![3.0, 10.0]);
        lp.add_eq(&[1.0, 1.0], 5.0);
        let sol = solve_lp(&lp, &IpmConfig::default()).unwrap();
        assert_eq!(sol.x[0], 3.0);
        assert!((sol.x[1] - 2.0).abs() < 1e-6);
    }

    #[test]
    fn unbounded_and_infeasible() {
        let lp = LinearProgram::new(vec![-1.0]);
        assert_eq!(
            solve_lp(&lp, &IpmConfig::default()).unwrap_err(),
            Error::LpUnbounded
        );

        let mut lp = LinearProgram::new(vec![1.0, 1.0]).with_bounds(vec![0.0; 2], vec![1.0; 2]);
        lp.add_eq(&[1.0, 1.0], 5.0);
        assert_eq!(
            solve_lp(&lp, &IpmConfig::default()).unwrap_err(),
            Error::LpInfeasible
        );

        let mut lp = LinearProgram::new(vec![-1.0, 0.0]);
        lp.add_ub(&[1.0, -1.0], 0.0);
        assert_eq!(
            solve_lp(&lp, &IpmConfig::default()).unwrap_err(),
            Error::LpUnbounded
        );
    }

    #[test]
    fn rejects_inverted_bounds() {
        let lp = LinearProgram::new(vec![1.0]).with_bounds(vec![2.0], vec![1.0]);
        assert!(matches!(
            solve_lp(&lp, &IpmConfig::default()),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn gap_trace_decreases() {
        let mut lp =
            LinearProgram::new(vec![1.0, -2.0, 0.5]).with_bounds(vec![0.0; 3], vec![4.0, 3.0, 5.0]);
        lp.add_ub(&[1.0, 1.0, 1.0], 6.0);
        lp.add_eq(&[1.0, -1.0, 2.0], 1.0);
        let sol = solve_lp(&lp, &IpmConfig::default()).unwrap();
        assert!(sol.gap_trace.windows(2).all(|w| w[1] < w[0]));
        assert!(sol.gap < 1e-5);
    }
}
