use serde::Serialize;

use crate::exponents::{network_exponents, Exponents};
use crate::model::NetworkSpec;
use crate::sim::{Snapshot, StationaryEstimate};
use crate::stats::BatchEstimate;
use crate::Result;

/// Jump-free adjoint relation for the exponential test function
/// `f = exp(<r theta, l> + sum_i eta_i g(u_i) + sum_j zeta_j g(v_j))`.
#[derive(Debug, Clone, Serialize)]
pub struct PrelimitResidual {
    pub theta: Vec<f64>,
    /// `sum_i eta_i E[1(u_i<c) f] + sum_j zeta_j E[1(v_j<c) f] - sum_j zeta_j E[1(v_j<c, l_j=0) f]`
    pub residual: BatchEstimate,
    pub arrival_term: f64,
    pub service_term: f64,
    pub idle_term: f64,
    /// The same quantity from `sum (f(start) - f(end-))` over records; agrees
    /// with `residual.mean` up to rounding.
    pub telescoped: f64,
    pub exponents: Exponents,
}

fn expm1_ratio(z: f64) -> f64 {
    if z == 0.0 {
        1.0
    } else {
        -(-z).exp_m1() / z
    }
}

struct Accumulator {
    arrival: Vec<Vec<f64>>,
    service: Vec<Vec<f64>>,
    idle: Vec<Vec<f64>>,
    telescoped: Vec<f64>,
    /// Scratch space for breakpoints.
    cuts: Vec<f64>,
}

/// Integrates the three indicator terms exactly over one record. Within a
/// record `log f` decreases at rate `kappa(s)`, piecewise constant between
/// the times where a running clock crosses `c`.
fn integrate_record(s: &Snapshot, external: &[bool], exps: &Exponents, x: &[f64], c: f64, b: usize, acc: &mut Accumulator) {
    let d = s.l.len();
    let tau = s.dwell;
    if tau <= 0.0 {
        return;
    }
    let running_v = |j: usize| s.l[j] > 0;
    let mut log_f: f64 = s.l.iter().zip(x).map(|(&q, t)| q as f64 * t).sum();
    for j in 0..d {
        if external[j] {
            log_f += exps.eta[j] * s.u[j].min(c);
        }
        log_f += exps.zeta[j] * s.v[j].min(c);
    }
    let f_start = log_f.exp();

    let points = &mut acc.cuts;
    points.clear();
    for j in 0..d {
        for (on, clock) in [(external[j], s.u[j]), (running_v(j), s.v[j])] {
            let t = clock - c;
            if on && t > 0.0 && t < tau {
                points.push(t);
            }
        }
    }
    points.push(tau);
    points.sort_by(f64::total_cmp);

    let mut s0 = 0.0;
    for p in 0..acc.cuts.len() {
        let s1 = acc.cuts[p];
        let delta = s1 - s0;
        if delta <= 0.0 {
            continue;
        }
        let mid = 0.5 * (s0 + s1);
        let mut kappa = 0.0;
        for j in 0..d {
            if external[j] && s.u[j] - mid < c {
                kappa += exps.eta[j];
            }
            if running_v(j) && s.v[j] - mid < c {
                kappa += exps.zeta[j];
            }
        }
        let base = log_f.exp() * delta * expm1_ratio(kappa * delta);
        for j in 0..d {
            if external[j] && s.u[j] - mid < c {
                acc.arrival[j][b] += base;
            }
            let v_now = if running_v(j) { s.v[j] - mid } else { s.v[j] };
            if v_now < c {
                acc.service[j][b] += base;
                if !running_v(j) {
                    acc.idle[j][b] += base;
                }
            }
        }
        log_f -= kappa * delta;
        s0 = s1;
    }
    acc.telescoped[b] += f_start - log_f.exp();
}

/// Residual with exponents already solved at `x = r_n theta`.
pub fn prelimit_with_exponents(est: &StationaryEstimate, exps: &Exponents, r_n: f64, theta: &[f64]) -> PrelimitResidual {
    let d = est.d;
    let nb = est.batches();
    let c = 1.0 / r_n;
    let x: Vec<f64> = theta.iter().map(|t| r_n * t).collect();
    let mut acc = Accumulator {
        arrival: vec![vec![0.0; nb]; d],
        service: vec![vec![0.0; nb]; d],
        idle: vec![vec![0.0; nb]; d],
        telescoped: vec![0.0; nb],
        cuts: Vec::new(),
    };
    for b in 0..nb {
        for k in est.batch_range(b) {
            integrate_record(&est.snapshot(k), &est.external, exps, &x, c, b, &mut acc);
        }
    }
    let len = est.batch_length;
    let per_batch: Vec<f64> = (0..nb)
        .map(|b| {
            (0..d)
                .map(|j| exps.eta[j] * acc.arrival[j][b] + exps.zeta[j] * (acc.service[j][b] - acc.idle[j][b]))
                .sum::<f64>()
                / len
        })
        .collect();
    let total = len * nb as f64;
    let term = |m: &Vec<Vec<f64>>, w: &[f64]| (0..d).map(|j| w[j] * m[j].iter().sum::<f64>()).sum::<f64>() / total;
    PrelimitResidual {
        theta: theta.to_vec(),
        residual: BatchEstimate::from_batches(per_batch),
        arrival_term: term(&acc.arrival, &exps.eta),
        service_term: term(&acc.service, &exps.zeta),
        idle_term: term(&acc.idle, &exps.zeta),
        telescoped: acc.telescoped.iter().sum::<f64>() / total,
        exponents: exps.clone(),
    }
}

/// Solves the exponents of `network` at `r_n theta` and evaluates the
/// residual on the sample.
pub fn prelimit_bar_residual(est: &StationaryEstimate, network: &NetworkSpec, r_n: f64, theta: &[f64]) -> Result<PrelimitResidual> {
    let x: Vec<f64> = theta.iter().map(|t| r_n * t).collect();
    let exps = network_exponents(network, &x, r_n)?;
    Ok(prelimit_with_exponents(est, &exps, r_n, theta))
}
