//! Small dense linear algebra: LU factorization with partial pivoting.

use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Result};

/// LU factors of a square matrix, `P A = L U`, stored row-major in place.
#[derive(Debug, Clone)]
pub struct Lu {
    n: usize,
    lu: Vec<f64>,
    perm: Vec<usize>,
}

impl Lu {
    /// Factors the row-major `n × n` matrix `a`.
    ///
    /// Fails with [`Error::SingularSystem`] when a pivot falls below
    /// `1e-14` times the largest entry of `a`.
    pub fn factor(mut a: Vec<f64>, n: usize) -> Result<Self> {
        if a.len() != n * n {
            return Err(Error::DimensionMismatch {
                what: "square matrix",
                expected: n * n,
                found: a.len(),
            });
        }
        let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let tiny = 1e-14 * scale.max(f64::MIN_POSITIVE);
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (p, pivot) =
                (k..n)
                    .map(|i| (i, a[i * n + k].abs()))
                    .fold(
                        (k, -1.0),
                        |best, cur| if cur.1 > best.1 { cur } else { best },
                    );
            if !(pivot > tiny) {
                return Err(Error::SingularSystem);
            }
            if p != k {
                for j in 0..n {
                    a.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
            }
            let d = a[k * n + k];
            for i in k + 1..n {
                let f = a[i * n + k] / d;
                a[i * n + k] = f;
                if f != 0.0 {
                    for j in k + 1..n {
                        a[i * n + j] -= f * a[k * n + j];
                    }
                }
            }
        }
        Ok(Self { n, lu: a, perm })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let row = &self.lu[i * n..i * n + i];
            let s: f64 = row.iter().zip(&x[..i]).map(|(l, v)| l * v).sum();
            x[i] -= s;
        }
        for i in (0..n).rev() {
            let row = &self.lu[i * n + i + 1..(i + 1) * n];
            let s: f64 = row.iter().zip(&x[i + 1..]).map(|(u, v)| u * v).sum();
            x[i] = (x[i] - s) / self.lu[i * n + i];
        }
        x
    }
}

/// Solves `A x = b` for a row-major `n × n` matrix.
pub fn solve(a: &[f64], n: usize, b: &[f64]) -> Result<Vec<f64>> {
    if b.len() != n {
        return Err(Error::DimensionMismatch {
            what: "right-hand side",
            expected: n,
            found: b.len(),
        });
    }
    Ok(Lu::factor(a.to_vec(), n)?.solve(b))
}

/// `A x` for a row-major `rows × x.len()` matrix.
pub fn mat_vec(a: &[f64], rows: usize, x: &[f64]) -> Vec<f64> {
    let cols = x.len();
    let mut out = vec![0.0; rows];
    for (i, o) in out.iter_mut().enumerate() {
        *o = a[i * cols..(i + 1) * cols]
            .iter()
            .zip(x)
            .map(|(a, x)| a * x)
            .sum();
    }
    out
}

/// `Aᵀ y` for a row-major `y.len() × cols` matrix.
pub fn mat_t_vec(a: &[f64], cols: usize, y: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; cols];
    for (i, yi) in y.iter().enumerate() {
        if *yi != 0.0 {
            for (o, a) in out.iter_mut().zip(&a[i * cols..(i + 1) * cols]) {
                *o += a * yi;
            }
        }
    }
    out
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}
