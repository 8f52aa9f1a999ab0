use serde::Serialize;

use super::mgf::{truncated_moments, TruncatedMoments};
use super::solver::{solve_eta, solve_zeta, ExponentSolution};
use crate::linalg::vec_norm_inf;
use crate::model::{HeavyTrafficSequence, NetworkSpec};
use crate::Result;

/// All exponents of one network at one argument `x` (the already scaled
/// `r_n theta`). Non-external stations carry `eta = 0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Exponents {
    pub eta: Vec<f64>,
    pub zeta: Vec<f64>,
    pub max_residual: f64,
}

impl Exponents {
    pub fn zero(d: usize) -> Self {
        Exponents { eta: vec![0.0; d], zeta: vec![0.0; d], max_residual: 0.0 }
    }
}

/// Full solutions, for callers that need slopes or brackets.
pub fn solve_all(network: &NetworkSpec, x: &[f64], r_n: f64) -> Result<(Vec<Option<ExponentSolution>>, Vec<ExponentSolution>)> {
    let p = network.routing_matrix()?;
    let eta = network
        .arrivals
        .iter()
        .zip(x)
        .map(|(a, &xi)| a.as_ref().map(|d| solve_eta(d, xi, r_n)).transpose())
        .collect::<Result<Vec<_>>>()?;
    let zeta = (0..network.d())
        .map(|j| solve_zeta(&network.services[j], &p, j, x, r_n))
        .collect::<Result<Vec<_>>>()?;
    Ok((eta, zeta))
}

pub fn network_exponents(network: &NetworkSpec, x: &[f64], r_n: f64) -> Result<Exponents> {
    if x.iter().all(|&v| v == 0.0) {
        return Ok(Exponents::zero(network.d()));
    }
    let (eta, zeta) = solve_all(network, x, r_n)?;
    let max_residual = eta
        .iter()
        .flatten()
        .chain(zeta.iter())
        .fold(0.0f64, |m, s| m.max(s.residual.abs()));
    Ok(Exponents {
        eta: eta.iter().map(|s| s.map_or(0.0, |s| s.value)).collect(),
        zeta: zeta.iter().map(|s| s.value).collect(),
        max_residual,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuadraticExponents {
    /// `None` off the external set.
    pub eta: Vec<Option<f64>>,
    pub zeta: Vec<f64>,
}

fn quad_eta(m: &TruncatedMoments, x: f64) -> f64 {
    let l = m.rate;
    -l * x - 0.5 * l.powi(3) * m.variance * x * x
}

fn quad_zeta(m: &TruncatedMoments, row: &[f64], j: usize, x: &[f64]) -> f64 {
    let l = m.rate;
    let first: f64 = row.iter().zip(x).map(|(p, t)| p * t).sum();
    let second: f64 = row.iter().zip(x).map(|(p, t)| p * t * t).sum();
    let drift = -x[j] + first;
    -l * drift - 0.5 * l * (second - first * first) - 0.5 * l.powi(3) * m.variance * drift * drift
}

/// Second-order approximations of the exponents of the `n`-th network,
/// evaluated at the argument `x` (no extra scaling applied).
pub fn quadratic_exponents(seq: &HeavyTrafficSequence, n: u64, x: &[f64]) -> Result<QuadraticExponents> {
    let nth = seq.nth_network(n)?;
    let c = 1.0 / nth.r_n;
    let net = &nth.network;
    let eta = net
        .arrivals
        .iter()
        .zip(x)
        .map(|(a, &xi)| a.as_ref().map(|d| quad_eta(&truncated_moments(d, c), xi)))
        .collect();
    let zeta = (0..net.d())
        .map(|j| quad_zeta(&truncated_moments(&net.services[j], c), &net.routing[j], j, x))
        .collect();
    Ok(QuadraticExponents { eta, zeta })
}

#[derive(Debug, Clone, Serialize)]
pub struct ExpansionPoint {
    pub theta: Vec<f64>,
    pub eta_exact: Vec<Option<f64>>,
    pub eta_quad: Vec<Option<f64>>,
    pub zeta_exact: Vec<f64>,
    pub zeta_quad: Vec<f64>,
    /// `max_i |eta_i - quad| / (r_n theta_i)^2`, zero where `theta_i = 0`.
    pub eta_error: f64,
    /// `max_j |zeta_j - quad| / (r_n ||theta||)^2`.
    pub zeta_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExpansionTable {
    pub n: u64,
    pub r_n: f64,
    pub points: Vec<ExpansionPoint>,
    pub eta_sup: f64,
    pub zeta_sup: f64,
}

/// Normalized distance between exact and quadratic exponents at `r_n theta`
/// over a grid of nonzero `theta`.
pub fn expansion_error(seq: &HeavyTrafficSequence, n: u64, grid: &[Vec<f64>]) -> Result<ExpansionTable> {
    let nth = seq.nth_network(n)?;
    let r_n = nth.r_n;
    let mut points = Vec::with_capacity(grid.len());
    for theta in grid {
        let x: Vec<f64> = theta.iter().map(|t| r_n * t).collect();
        let (eta, zeta) = solve_all(&nth.network, &x, r_n)?;
        let quad = quadratic_exponents(seq, n, &x)?;
        let eta_exact: Vec<Option<f64>> = eta.iter().map(|s| s.map(|s| s.value)).collect();
        let mut eta_error = 0.0f64;
        for i in 0..x.len() {
            if let (Some(e), Some(q)) = (eta_exact[i], quad.eta[i]) {
                if x[i] != 0.0 {
                    eta_error = eta_error.max((e - q).abs() / (x[i] * x[i]));
                }
            }
        }
        let zeta_exact: Vec<f64> = zeta.iter().map(|s| s.value).collect();
        let norm = vec_norm_inf(&x);
        let zeta_error = zeta_exact
            .iter()
            .zip(&quad.zeta)
            .map(|(e, q)| (e - q).abs() / (norm * norm))
            .fold(0.0f64, f64::max);
        points.push(ExpansionPoint {
            theta: theta.clone(),
            eta_exact,
            eta_quad: quad.eta,
            zeta_exact,
            zeta_quad: quad.zeta,
            eta_error,
            zeta_error,
        });
    }
    let eta_sup = points.iter().map(|p| p.eta_error).fold(0.0, f64::max);
    let zeta_sup = points.iter().map(|p| p.zeta_error).fold(0.0, f64::max);
    Ok(ExpansionTable { n, r_n, points, eta_sup, zeta_sup })
}
