use serde::Serialize;

use super::path::SrbmSample;
use crate::bar::{gamma, gamma_j};
use crate::model::SrbmParams;
use crate::stats::BatchEstimate;
use crate::{Error, Result};

/// Stationary law of a one-dimensional SRBM: exponential with rate
/// `alpha = 2 R b / Sigma`; its boundary measure is a point mass at 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Analytic1d {
    pub alpha: f64,
}

impl Analytic1d {
    /// `E[e^{theta Z}]` for `theta < alpha`.
    pub fn phi(&self, theta: f64) -> f64 {
        self.alpha / (self.alpha - theta)
    }

    pub fn phi_boundary(&self, _theta: f64) -> f64 {
        1.0
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            0.0
        } else {
            -(-self.alpha * x).exp_m1()
        }
    }

    /// Left side of the MGF adjoint relation with this pair plugged in.
    pub fn bar_residual(&self, params: &SrbmParams, theta: f64) -> f64 {
        gamma(params, &[theta]) * self.phi(theta) + params.b[0] * gamma_j(params, 0, &[theta]) * self.phi_boundary(theta)
    }
}

pub fn analytic_1d(params: &SrbmParams) -> Result<Analytic1d> {
    if params.d() != 1 {
        return Err(Error::Dimension(format!("closed form needs d = 1, got {}", params.d())));
    }
    Ok(Analytic1d { alpha: 2.0 * params.r[(0, 0)] * params.b[0] / params.sigma[(0, 0)] })
}

#[derive(Debug, Clone, Serialize)]
pub struct SrbmBarResidual {
    pub theta: Vec<f64>,
    pub residual: BatchEstimate,
    pub phi: BatchEstimate,
    pub phi_boundary: Vec<BatchEstimate>,
    /// `sum dy_j / window`, which should match `b_j`.
    pub regulator_rate: Vec<BatchEstimate>,
}

/// Regulator rates `Y_j(1)` estimated from the path.
pub fn regulator_rates(sample: &SrbmSample) -> Vec<BatchEstimate> {
    let len = sample.batch_length();
    (0..sample.d)
        .map(|j| {
            BatchEstimate::from_batches(
                (0..sample.batches())
                    .map(|b| sample.boundary_range(b).map(|k| sample.boundary(k).1[j]).sum::<f64>() / len)
                    .collect(),
            )
        })
        .collect()
}

/// `gamma(theta) phi(theta) + sum_j b_j gamma_j(theta) phi_j(theta)` with
/// `phi` the time average of `e^{<theta,Z>}` and `phi_j` its `dY_j`-weighted
/// average.
pub fn srbm_bar_residual(sample: &SrbmSample, params: &SrbmParams, theta: &[f64]) -> Result<SrbmBarResidual> {
    let d = sample.d;
    if theta.len() != d || params.d() != d {
        return Err(Error::Dimension("theta, parameters and sample disagree in dimension".into()));
    }
    if let Some(j) = (0..d).find(|&j| !(sample.total_dy[j] > 0.0)) {
        return Err(Error::ZeroRegulator { station: j });
    }
    let dot = |s: &[f64]| s.iter().zip(theta).map(|(a, b)| a * b).sum::<f64>();
    let bsz = sample.batches();
    let phi_batches: Vec<f64> = (0..bsz)
        .map(|b| {
            let r = sample.state_range(b);
            let n = r.len().max(1) as f64;
            r.map(|k| dot(sample.state(k)).exp()).sum::<f64>() / n
        })
        .collect();
    let phi = BatchEstimate::from_batches(phi_batches);

    let mut phi_boundary = Vec::with_capacity(d);
    for j in 0..d {
        let mut num = vec![0.0; bsz];
        let mut den = vec![0.0; bsz];
        for b in 0..bsz {
            for k in sample.boundary_range(b) {
                let (s, dy) = sample.boundary(k);
                num[b] += dot(s).exp() * dy[j];
                den[b] += dy[j];
            }
        }
        phi_boundary.push(BatchEstimate::ratio(&num, &den).ok_or(Error::ZeroRegulator { station: j })?);
    }

    let g = gamma(params, theta);
    let mut terms: Vec<(f64, &BatchEstimate)> = vec![(g, &phi)];
    let coefs: Vec<f64> = (0..d).map(|j| params.b[j] * gamma_j(params, j, theta)).collect();
    for j in 0..d {
        terms.push((coefs[j], &phi_boundary[j]));
    }
    let residual = BatchEstimate::combine(&terms);
    Ok(SrbmBarResidual { theta: theta.to_vec(), residual, phi, phi_boundary, regulator_rate: regulator_rates(sample) })
}
