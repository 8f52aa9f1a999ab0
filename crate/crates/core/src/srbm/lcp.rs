use nalgebra::DMatrix;

use crate::{Error, Result};

pub const MAX_SWEEPS: usize = 10_000;
pub const LCP_TOL: f64 = 1e-12;

/// Row-major copy of a reflection matrix for the inner loop.
#[derive(Debug, Clone)]
pub struct Reflector {
    d: usize,
    r: Vec<f64>,
}

impl Reflector {
    pub fn new(r: &DMatrix<f64>) -> Result<Self> {
        if !r.is_square() {
            return Err(Error::Dimension(format!("reflection matrix is {}x{}", r.nrows(), r.ncols())));
        }
        let d = r.nrows();
        if let Some(j) = (0..d).find(|&j| !(r[(j, j)] > 0.0)) {
            return Err(Error::Parameter(format!("reflection matrix has nonpositive diagonal at {j}")));
        }
        Ok(Reflector { d, r: (0..d).flat_map(|i| (0..d).map(move |j| (i, j))).map(|ij| r[ij]).collect() })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    fn at(&self, i: usize, j: usize) -> f64 {
        self.r[i * self.d + j]
    }

    /// Solves `z = w + R y`, `z, y >= 0`, `<z, y> = 0` by projected
    /// Gauss–Seidel started from `y = 0`. Writes into `z` and `y`.
    pub fn solve(&self, w: &[f64], z: &mut [f64], y: &mut [f64]) -> Result<()> {
        let d = self.d;
        z.copy_from_slice(w);
        y.iter_mut().for_each(|x| *x = 0.0);
        if w.iter().all(|&x| x >= 0.0) {
            return Ok(());
        }
        let scale = 1.0 + w.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let mut last_change = f64::INFINITY;
        for sweep in 1..=MAX_SWEEPS {
            let mut change = 0.0f64;
            for j in 0..d {
                let next = (y[j] - z[j] / self.at(j, j)).max(0.0);
                let delta = next - y[j];
                if delta != 0.0 {
                    y[j] = next;
                    for (k, zk) in z.iter_mut().enumerate() {
                        *zk += self.at(k, j) * delta;
                    }
                    change = change.max(delta.abs());
                }
            }
            last_change = change;
            if !change.is_finite() {
                return Err(Error::NonConvergence { sweeps: sweep, residual: change });
            }
            if change <= LCP_TOL * scale {
                // recompute z from scratch to shed accumulated rounding
                for k in 0..d {
                    z[k] = w[k] + (0..d).map(|j| self.at(k, j) * y[j]).sum::<f64>();
                    if y[k] > 0.0 && z[k].abs() <= 1e-10 * scale {
                        z[k] = 0.0;
                    }
                }
                return Ok(());
            }
        }
        Err(Error::NonConvergence { sweeps: MAX_SWEEPS, residual: last_change })
    }
}

/// One-step reflection of `w` into the orthant: returns `(z, y)`.
pub fn lcp_reflect(w: &[f64], r: &DMatrix<f64>) -> Result<(Vec<f64>, Vec<f64>)> {
    let refl = Reflector::new(r)?;
    if w.len() != refl.d() {
        return Err(Error::Dimension(format!("state has length {}, R is {}x{}", w.len(), refl.d(), refl.d())));
    }
    let mut z = vec![0.0; w.len()];
    let mut y = vec![0.0; w.len()];
    refl.solve(w, &mut z, &mut y)?;
    Ok((z, y))
}
