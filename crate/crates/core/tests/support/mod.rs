//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use mgsched_core::grid::{EssConfig, MtUnit};
use mgsched_core::lp::LinearProgram;
use rand::Rng;

/// Gaussian elimination with partial pivoting on a copy; `None` when the
/// system is (numerically) singular.
pub fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for k in 0..n {
        let p = (k..n).max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs()))?;
        if a[p][k].abs() < 1e-10 {
            return None;
        }
        a.swap(k, p);
        b.swap(k, p);
        for i in k + 1..n {
            let f = a[i][k] / a[k][k];
            for j in k..n {
                a[i][j] -= f * a[k][j];
            }
            b[i] -= f * b[k];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|j| a[i][j] * x[j]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    Some(x)
}

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::new(), &mut out);
    out
}

/// Minimum objective over all basic feasible solutions of a boxed LP
/// (every bound finite). Returns `None` when no vertex is feasible.
pub fn vertex_min(lp: &LinearProgram) -> Option<(f64, Vec<f64>)> {
    let n = lp.c.len();
    let m_eq = lp.b_eq.len();
    let m_ub = lp.b_ub.len();
    let row = |a: &[f64], i: usize| a[i * n..(i + 1) * n].to_vec();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for mask in 0..(1usize << m_ub) {
        let active: Vec<usize> = (0..m_ub).filter(|i| mask >> i & 1 == 1).collect();
        let rows = m_eq + active.len();
        if rows > n {
            continue;
        }
        let k = n - rows;
        for fixed in subsets(n, k) {
            for sides in 0..(1usize << k) {
                let mut x = vec![0.0; n];
                for (b, &j) in fixed.iter().enumerate() {
                    x[j] = if sides >> b & 1 == 1 {
                        lp.upper[j]
                    } else {
                        lp.lower[j]
                    };
                }
                let free: Vec<usize> = (0..n).filter(|j| !fixed.contains(j)).collect();
                let mut a = Vec::new();
                let mut rhs = Vec::new();
                let eq_rows = (0..m_eq).map(|i| (row(&lp.a_eq, i), lp.b_eq[i]));
                let ub_rows = active.iter().map(|&i| (row(&lp.a_ub, i), lp.b_ub[i]));
                for (r, b) in eq_rows.chain(ub_rows) {
                    let fixed_part: f64 = fixed.iter().map(|&j| r[j] * x[j]).sum();
                    a.push(free.iter().map(|&j| r[j]).collect::<Vec<_>>());
                    rhs.push(b - fixed_part);
                }
                if !free.is_empty() {
                    let Some(sol) = gauss_solve(a, rhs) else {
                        continue;
                    };
                    for (v, &j) in sol.iter().zip(&free) {
                        x[j] = *v;
                    }
                }
                if lp.max_violation(&x) > 1e-9 {
                    continue;
                }
                let obj = lp.objective(&x);
                if best.as_ref().is_none_or(|(b, _)| obj < *b) {
                    best = Some((obj, x));
                }
            }
        }
    }
    best
}

/// Random boxed LP with `<= 10` variables, `<= 3` inequality rows and
/// `<= 1` equality row, feasible by construction around an interior point.
pub fn random_lp<R: Rng>(rng: &mut R) -> LinearProgram {
    let n = rng.random_range(1..=10);
    let lower: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..0.0)).collect();
    let upper: Vec<f64> = (0..n).map(|_| rng.random_range(1.0..3.0)).collect();
    let x0: Vec<f64> = (0..n)
        .map(|j| lower[j] + rng.random_range(0.2..0.8) * (upper[j] - lower[j]))
        .collect();
    let c = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
    let mut lp = LinearProgram::new(c).with_bounds(lower, upper);
    for _ in 0..rng.random_range(0..=3) {
        let r: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        let b = r.iter().zip(&x0).map(|(a, x)| a * x).sum::<f64>() + rng.random_range(0.1..1.0);
        lp.add_ub(&r, b);
    }
    if n > 1 && rng.random_bool(0.5) {
        let r: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        let b = r.iter().zip(&x0).map(|(a, x)| a * x).sum::<f64>();
        lp.add_eq(&r, b);
    }
    lp
}

/// Confidence of reserve `r` by enumerating every joint outcome of
/// independent load, PV and wind sequences (all on step `q`).
pub fn joint_confidence(
    load: &[f64],
    pv: &[f64],
    wind: &[f64],
    q: f64,
    expected: f64,
    r: f64,
) -> f64 {
    let mut covered = 0.0;
    for (i, pl) in load.iter().enumerate() {
        for (j, pp) in pv.iter().enumerate() {
            for (k, pw) in wind.iter().enumerate() {
                let el = (i as f64 - j as f64 - k as f64).max(0.0) * q;
                if r >= el - expected {
                    covered += pl * pp * pw;
                }
            }
        }
    }
    covered
}

/// Standard normal CDF.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * (1.0 + libm::erf(z / std::f64::consts::SQRT_2))
}

/// Random probability weights of the given length.
pub fn random_probs<R: Rng>(rng: &mut R, len: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..len).map(|_| rng.random::<f64>()).collect();
    let s: f64 = w.iter().sum();
    w.iter().map(|v| v / s).collect()
}

/// The first of the three bundled turbines.
pub fn mt1() -> MtUnit {
    MtUnit {
        fixed_cost: 1.2,
        startup_cost: 1.6,
        fuel_slope: 0.35,
        reserve_cost: 0.04,
        p_min: 5.0,
        p_max: 35.0,
    }
}

pub fn units() -> Vec<MtUnit> {
    vec![
        mt1(),
        MtUnit {
            p_max: 30.0,
            ..mt1()
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

pub fn ess() -> EssConfig {
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

/// Exhaustive search over output, turbine reserve and storage reserve on a
/// 0.25 kW grid for one period with one turbine. Storage power must be
/// zero because the energy has to return to its initial value.
pub fn grid_search(
    d: f64,
    req: f64,
    price: f64,
    u: &MtUnit,
    e: &EssConfig,
    shed_penalty: f64,
) -> f64 {
    let step = 0.25;
    let res_max = (e.eta_dc * (e.soc_init - e.soc_min)).min(e.p_dc_max);
    let levels = |hi: f64| (0..=(hi / step).round() as usize).map(move |k| k as f64 * step);
    let mut best = f64::INFINITY;
    for on in [false, true] {
        let outputs: Vec<f64> = if on {
            levels(u.p_max).filter(|p| *p >= u.p_min).collect()
        } else {
            vec![0.0]
        };
        for &p in &outputs {
            let shed = d - p;
            if shed < 0.0 || shed > d.max(0.0) {
                continue;
            }
            let r_levels: Vec<f64> = if on {
                levels(u.p_max - p).collect()
            } else {
                vec![0.0]
            };
            for &r in &r_levels {
                for res in levels(res_max) {
                    if r + res < req {
                        continue;
                    }
                    let mut cost = -d * price
                        + u.reserve_cost * r
                        + e.reserve_price * res
                        + shed_penalty * shed;
                    if on {
                        cost += u.fixed_cost + u.startup_cost + u.fuel_slope * p;
                    }
                    best = best.min(cost);
                }
            }
        }
    }
    best
}
