use std::collections::BTreeMap;

use serde::Serialize;

use crate::linalg::vec_norm_inf;
use crate::model::SrbmParams;
use crate::sim::StationaryEstimate;
use crate::stats::BatchEstimate;
use crate::{Error, Result};

/// `1/2 <theta, Sigma theta> - <R b, theta>`.
pub fn gamma(params: &SrbmParams, theta: &[f64]) -> f64 {
    let d = params.d();
    let mut quad = 0.0;
    for i in 0..d {
        for j in 0..d {
            quad += theta[i] * params.sigma[(i, j)] * theta[j];
        }
    }
    0.5 * quad + params.mu.iter().zip(theta).map(|(m, t)| m * t).sum::<f64>()
}

/// `<R^(j), theta>` with `R^(j)` the `j`-th column of `R`.
pub fn gamma_j(params: &SrbmParams, j: usize, theta: &[f64]) -> f64 {
    params.r.column(j).iter().zip(theta).map(|(r, t)| r * t).sum()
}

/// Time spent in each queue-length vector, per batch. Keys are ordered so
/// every sum over the table has a fixed order.
#[derive(Debug, Clone)]
pub struct Occupation {
    pub d: usize,
    pub batch_length: f64,
    states: Vec<Vec<u32>>,
    /// `[state][batch]`
    times: Vec<Vec<f64>>,
    /// Idle time of each station, `[station][batch]`.
    idle: Vec<Vec<f64>>,
}

impl Occupation {
    pub fn from_estimate(est: &StationaryEstimate) -> Self {
        let records = (0..est.batches()).flat_map(|b| {
            est.batch_range(b).map(move |k| {
                let s = est.snapshot(k);
                (b, s.l, s.dwell)
            })
        });
        Self::from_records(est.d, est.batches(), est.batch_length, records)
    }

    /// Builds the table from `(batch, queue vector, dwell)` records.
    pub fn from_records<'a, I>(d: usize, batches: usize, batch_length: f64, records: I) -> Self
    where
        I: IntoIterator<Item = (usize, &'a [u32], f64)>,
    {
        let mut table: BTreeMap<Vec<u32>, Vec<f64>> = BTreeMap::new();
        for (b, l, dwell) in records {
            table.entry(l.to_vec()).or_insert_with(|| vec![0.0; batches])[b] += dwell;
        }
        let (states, times): (Vec<_>, Vec<_>) = table.into_iter().unzip();
        let mut idle = vec![vec![0.0; batches]; d];
        for (l, t) in states.iter().zip(&times) {
            for j in 0..d {
                if l[j] == 0 {
                    for b in 0..batches {
                        idle[j][b] += t[b];
                    }
                }
            }
        }
        Occupation { d, batch_length, states, times, idle }
    }

    pub fn batches(&self) -> usize {
        self.idle.first().map_or(0, |v| v.len())
    }

    /// `(phi, phi_j)` at `theta` for the queue scaled by `r_n`.
    pub fn mgfs(&self, r_n: f64, theta: &[f64]) -> Result<EmpiricalMgfs> {
        let nb = self.batches();
        for j in 0..self.d {
            if !(self.idle[j].iter().sum::<f64>() > 0.0) {
                return Err(Error::EmptyConditioning { station: j });
            }
        }
        if theta.iter().all(|&t| t == 0.0) {
            let one = BatchEstimate { mean: 1.0, se: 0.0, batch_values: vec![1.0; nb] };
            return Ok(EmpiricalMgfs { phi: one.clone(), phi_boundary: vec![one; self.d] });
        }
        let mut phi = vec![0.0; nb];
        let mut num = vec![vec![0.0; nb]; self.d];
        for (l, t) in self.states.iter().zip(&self.times) {
            let e = (r_n * l.iter().zip(theta).map(|(&q, th)| q as f64 * th).sum::<f64>()).exp();
            for b in 0..nb {
                phi[b] += e * t[b];
            }
            for j in 0..self.d {
                if l[j] == 0 {
                    for b in 0..nb {
                        num[j][b] += e * t[b];
                    }
                }
            }
        }
        let phi = BatchEstimate::from_batches(phi.into_iter().map(|x| x / self.batch_length).collect());
        let phi_boundary = (0..self.d)
            .map(|j| BatchEstimate::ratio(&num[j], &self.idle[j]).ok_or(Error::EmptyConditioning { station: j }))
            .collect::<Result<Vec<_>>>()?;
        Ok(EmpiricalMgfs { phi, phi_boundary })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EmpiricalMgfs {
    pub phi: BatchEstimate,
    /// Conditioned on `l_j = 0`.
    pub phi_boundary: Vec<BatchEstimate>,
}

/// `phi(theta) = E[e^{<theta, r_n L>}]` and `phi_j(theta)` conditioned on
/// `L_j = 0`, from the dwell-weighted sample.
pub fn empirical_mgfs(est: &StationaryEstimate, r_n: f64, theta: &[f64]) -> Result<EmpiricalMgfs> {
    Occupation::from_estimate(est).mgfs(r_n, theta)
}

#[derive(Debug, Clone, Serialize)]
pub struct AsymptoticResidual {
    pub theta: Vec<f64>,
    pub epsilon: BatchEstimate,
    /// `|epsilon| / ||theta||_inf`
    pub normalized: f64,
    pub mgfs: EmpiricalMgfs,
}

/// `epsilon(theta) = gamma phi + sum_j b_j gamma_j phi_j`, with the
/// standard error from the delta method over batches.
pub fn asymptotic_residual_from(occ: &Occupation, params: &SrbmParams, r_n: f64, theta: &[f64]) -> Result<AsymptoticResidual> {
    let mgfs = occ.mgfs(r_n, theta)?;
    let g = gamma(params, theta);
    let coefs: Vec<f64> = (0..params.d()).map(|j| params.b[j] * gamma_j(params, j, theta)).collect();
    let mut terms: Vec<(f64, &BatchEstimate)> = vec![(g, &mgfs.phi)];
    terms.extend(coefs.iter().copied().zip(&mgfs.phi_boundary));
    let epsilon = BatchEstimate::combine(&terms);
    let norm = vec_norm_inf(theta);
    let normalized = if norm > 0.0 { epsilon.mean.abs() / norm } else { 0.0 };
    Ok(AsymptoticResidual { theta: theta.to_vec(), epsilon, normalized, mgfs })
}

pub fn asymptotic_residual(est: &StationaryEstimate, params: &SrbmParams, r_n: f64, theta: &[f64]) -> Result<AsymptoticResidual> {
    asymptotic_residual_from(&Occupation::from_estimate(est), params, r_n, theta)
}

/// Independent evaluation of `epsilon` straight from the records:
/// `(1/T) sum_k w_k e^{<theta, r l_k>} [gamma + sum_j b_j gamma_j 1(l_kj = 0) / p_j]`
/// with `p_j` the overall idle fraction.
pub fn asymptotic_residual_raw(est: &StationaryEstimate, params: &SrbmParams, r_n: f64, theta: &[f64]) -> Result<f64> {
    let d = est.d;
    let total = est.total_weight();
    let mut idle = vec![0.0; d];
    for k in 0..est.len() {
        let s = est.snapshot(k);
        for j in 0..d {
            if s.l[j] == 0 {
                idle[j] += s.dwell;
            }
        }
    }
    if let Some(j) = (0..d).find(|&j| !(idle[j] > 0.0)) {
        return Err(Error::EmptyConditioning { station: j });
    }
    let g = gamma(params, theta);
    let coefs: Vec<f64> = (0..d).map(|j| params.b[j] * gamma_j(params, j, theta) / (idle[j] / total)).collect();
    let mut acc = 0.0;
    for k in 0..est.len() {
        let s = est.snapshot(k);
        let e = (r_n * s.l.iter().zip(theta).map(|(&q, t)| q as f64 * t).sum::<f64>()).exp();
        let mut weight = g;
        for j in 0..d {
            if s.l[j] == 0 {
                weight += coefs[j];
            }
        }
        acc += s.dwell * e * weight;
    }
    Ok(acc / total)
}
