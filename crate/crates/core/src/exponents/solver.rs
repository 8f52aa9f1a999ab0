use nalgebra::DMatrix;
use serde::Serialize;

use super::mgf::truncated_mgf_with_derivative;
use crate::model::DistributionSpec;
use crate::{Error, Result};

pub const RESIDUAL_TOL: f64 = 1e-12;
pub const BRACKET_LIMIT: f64 = 1e6;
const NEWTON_STEPS: usize = 5;
const MAX_BISECTIONS: usize = 400;

/// A solved implicit exponent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExponentSolution {
    pub value: f64,
    /// `e^x G(value) - 1`
    pub residual: f64,
    pub iterations: usize,
    pub bracket: (f64, f64),
    /// Derivative of the root with respect to `x`, `-G / G'`.
    pub slope: f64,
}

/// Root `chi(x)` of `e^x E[e^{chi min(T,c)}] = 1`.
///
/// `G` is increasing, so the root is unique. It is bracketed by doubling
/// away from zero, bisected to a small relative width and then polished by
/// at most five Newton steps that are kept inside the bracket.
pub fn chi(dist: &DistributionSpec, x: f64, c: f64) -> Result<ExponentSolution> {
    let eval = |eta: f64| {
        let (g, dg) = truncated_mgf_with_derivative(dist, eta, c);
        (x.exp() * g - 1.0, g, dg)
    };
    if x == 0.0 {
        let (_, g, dg) = eval(0.0);
        return Ok(ExponentSolution { value: 0.0, residual: 0.0, iterations: 0, bracket: (0.0, 0.0), slope: -g / dg });
    }
    // x < 0 needs G > 1, hence a positive root
    let dir = if x < 0.0 { 1.0 } else { -1.0 };
    let mut near = 0.0;
    let mut far = dir;
    let mut iterations = 0;
    loop {
        let f = eval(far).0;
        iterations += 1;
        if (dir > 0.0 && f >= 0.0) || (dir < 0.0 && f <= 0.0) {
            break;
        }
        near = far;
        far *= 2.0;
        if far.abs() > BRACKET_LIMIT {
            return Err(Error::BracketExplosion {
                limit: BRACKET_LIMIT,
                context: format!("{} at x={x}, c={c}", dist.family()),
            });
        }
    }
    let (mut lo, mut hi) = if dir > 0.0 { (near, far) } else { (far, near) };
    let bracket = (lo, hi);

    let mut eta = 0.5 * (lo + hi);
    for _ in 0..MAX_BISECTIONS {
        iterations += 1;
        let (f, ..) = eval(eta);
        if f == 0.0 {
            lo = eta;
            hi = eta;
            break;
        }
        if f > 0.0 {
            hi = eta;
        } else {
            lo = eta;
        }
        if hi - lo <= 1e-6 * eta.abs().max(1e-3) {
            break;
        }
        eta = 0.5 * (lo + hi);
    }

    eta = 0.5 * (lo + hi);
    let mut best = eval(eta);
    for _ in 0..NEWTON_STEPS {
        if best.0.abs() <= 0.25 * RESIDUAL_TOL {
            break;
        }
        iterations += 1;
        let step = best.0 / (x.exp() * best.2);
        let mut next = eta - step;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        let trial = eval(next);
        if trial.0 > 0.0 {
            hi = next;
        } else {
            lo = next;
        }
        if trial.0.abs() <= best.0.abs() {
            eta = next;
            best = trial;
        }
    }
    // last resort: bisect to machine resolution
    while best.0.abs() > RESIDUAL_TOL && hi - lo > 4.0 * f64::EPSILON * eta.abs().max(f64::MIN_POSITIVE) {
        iterations += 1;
        let mid = 0.5 * (lo + hi);
        let trial = eval(mid);
        if trial.0 > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
        if trial.0.abs() < best.0.abs() {
            eta = mid;
            best = trial;
        }
        if iterations > MAX_BISECTIONS * 2 {
            break;
        }
    }
    if !(best.0.abs() <= RESIDUAL_TOL) {
        return Err(Error::RootNotConverged {
            residual: best.0,
            context: format!("{} at x={x}, c={c}", dist.family()),
        });
    }
    Ok(ExponentSolution { value: eta, residual: best.0, iterations, bracket, slope: -best.1 / best.2 })
}

/// Arrival exponent: `e^{theta} E[e^{eta g(T)}] = 1` with `g(t) = min(t, 1/r_n)`.
pub fn solve_eta(dist_e: &DistributionSpec, theta: f64, r_n: f64) -> Result<ExponentSolution> {
    chi(dist_e, theta, 1.0 / r_n)
}

/// `log t_j(theta) = -theta_j + log(sum_k p_jk e^{theta_k} + p_j0)`.
pub fn log_t(p: &DMatrix<f64>, j: usize, theta: &[f64]) -> f64 {
    if theta.iter().all(|&t| t == 0.0) {
        return 0.0;
    }
    // shifted by theta_j so that t_j = 1 is reproduced exactly when the row
    // only routes to stations with the same theta
    let row_sum: f64 = p.row(j).iter().sum();
    let exit = (1.0 - row_sum).max(0.0);
    let tj = theta[j];
    let routed: f64 = p.row(j).iter().zip(theta).map(|(pk, t)| pk * (t - tj).exp()).sum();
    let out = if exit > 0.0 { exit * (-tj).exp() } else { 0.0 };
    (routed + out).ln()
}

/// Gradient of [`log_t`] in `theta`.
pub fn log_t_gradient(p: &DMatrix<f64>, j: usize, theta: &[f64]) -> Vec<f64> {
    let row_sum: f64 = p.row(j).iter().sum();
    let exit = (1.0 - row_sum).max(0.0);
    let weights: Vec<f64> = p.row(j).iter().zip(theta).map(|(pk, t)| pk * t.exp()).collect();
    let inner = weights.iter().sum::<f64>() + exit;
    let mut g: Vec<f64> = weights.iter().map(|w| w / inner).collect();
    g[j] -= 1.0;
    g
}

/// Service exponent `zeta_j(theta) = chi_j(log t_j(theta))`.
pub fn solve_zeta(
    dist_s: &DistributionSpec,
    p: &DMatrix<f64>,
    j: usize,
    theta: &[f64],
    r_n: f64,
) -> Result<ExponentSolution> {
    chi(dist_s, log_t(p, j, theta), 1.0 / r_n)
}
