//! Dense helpers for the small matrices that appear in this crate.

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

pub fn from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let n = rows.len();
    if n == 0 {
        return Err(Error::Structural("matrix has no rows".into()));
    }
    let m = rows[0].len();
    if rows.iter().any(|r| r.len() != m) {
        return Err(Error::Structural("ragged matrix rows".into()));
    }
    if rows.iter().flatten().any(|x| !x.is_finite()) {
        return Err(Error::Structural("matrix contains a non-finite entry".into()));
    }
    Ok(DMatrix::from_fn(n, m, |i, j| rows[i][j]))
}

pub fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

/// Infinity norm (max absolute row sum).
pub fn norm_inf(m: &DMatrix<f64>) -> f64 {
    m.row_iter()
        .map(|r| r.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn vec_norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

/// Smallest `K` (a power of two) with `||P^K||_inf < tol`, found by repeated
/// squaring. `None` when the powers do not decay, i.e. spectral radius >= 1
/// up to the resolution of `max_doublings`.
pub fn power_decay_exponent(p: &DMatrix<f64>, tol: f64, max_doublings: u32) -> Option<u64> {
    let mut power = p.clone();
    let mut k: u64 = 1;
    for _ in 0..=max_doublings {
        let norm = norm_inf(&power);
        if !norm.is_finite() {
            return None;
        }
        if norm < tol {
            return Some(k);
        }
        power = &power * &power;
        k = k.saturating_mul(2);
    }
    None
}

/// Truncated Neumann series `I + A + ... + A^k` applied to `x`.
pub fn neumann_apply(a: &DMatrix<f64>, x: &DVector<f64>, terms: usize) -> DVector<f64> {
    let mut term = x.clone();
    let mut acc = x.clone();
    for _ in 1..terms {
        term = a * term;
        acc += &term;
    }
    acc
}

/// Lower Cholesky factor; on failure reports the first leading minor that is
/// not positive.
pub fn cholesky_lower(sigma: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = sigma.nrows();
    let mut l = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let mut diag = sigma[(j, j)];
        for k in 0..j {
            diag -= l[(j, k)] * l[(j, k)];
        }
        let scale = sigma[(j, j)].abs().max(1.0);
        if !(diag > 1e-14 * scale) {
            // diag is the ratio of leading minors j+1 and j
            let minor = leading_minor(sigma, j + 1);
            return Err(Error::NotPositiveDefinite { minor: j + 1, value: minor });
        }
        let d = diag.sqrt();
        l[(j, j)] = d;
        for i in (j + 1)..n {
            let mut s = sigma[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / d;
        }
    }
    Ok(l)
}

pub fn leading_minor(m: &DMatrix<f64>, k: usize) -> f64 {
    m.view((0, 0), (k, k)).into_owned().determinant()
}

pub fn principal_submatrix(m: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(idx.len(), idx.len(), |a, b| m[(idx[a], idx[b])])
}
