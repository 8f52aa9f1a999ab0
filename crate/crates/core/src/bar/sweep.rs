use rayon::prelude::*;
use serde::Serialize;

use super::asymptotic::{asymptotic_residual_from, asymptotic_residual_raw, Occupation};
use super::grid::ThetaGrid;
use super::prelimit::prelimit_bar_residual;
use crate::model::HeavyTrafficSequence;
use crate::sim::{simulate, SimOptions, StationaryEstimate};
use crate::srbm::{analytic_1d, simulate_srbm, SrbmOptions, SrbmSample};
use crate::stats::{BatchEstimate, WeightedSample};
use crate::{Error, Result};

#[derive(Debug, Clone, Serialize)]
pub struct EpsilonRow {
    pub theta: Vec<f64>,
    pub epsilon: f64,
    pub se: f64,
    pub normalized: f64,
    /// `epsilon` recomputed directly from the records.
    pub raw: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PrelimitRow {
    pub theta: Vec<f64>,
    pub residual: f64,
    pub se: f64,
    pub telescoped: f64,
    pub max_exponent_residual: f64,
}

impl PrelimitRow {
    pub fn z(&self) -> f64 {
        BatchEstimate { mean: self.residual, se: self.se, batch_values: vec![] }.z_score(0.0)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DistanceRow {
    pub n: u64,
    pub station: usize,
    /// `"srbm"` for the simulated SRBM marginal, `"exponential"` for the
    /// closed-form one-dimensional law.
    pub reference: &'static str,
    pub ks: f64,
    pub w1: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct NReport {
    pub n: u64,
    pub r_n: f64,
    pub epsilon: Vec<EpsilonRow>,
    pub prelimit: Vec<PrelimitRow>,
    pub sup_normalized: f64,
    /// Largest `|epsilon - raw|` over the grid.
    pub consistency_gap: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RayRow {
    pub subset: Vec<usize>,
    pub station: usize,
    pub alpha: f64,
    /// `phi(-alpha 1_A) - phi_j(-alpha 1_A)`
    pub difference: f64,
    pub se: f64,
    /// `difference >= -3 se`
    pub finite_ok: bool,
}

/// Quadratic extrapolation of the three smallest-`alpha` rows to `alpha = 0`.
#[derive(Debug, Clone, Serialize)]
pub struct RayLimit {
    pub subset: Vec<usize>,
    pub station: usize,
    pub limit: f64,
    pub se: f64,
    /// Gap to the linear extrapolation, a bound on the truncation error.
    pub truncation: f64,
    pub limit_ok: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct RayTable {
    pub n: u64,
    pub rows: Vec<RayRow>,
    pub limits: Vec<RayLimit>,
}

#[derive(Debug, Clone, Serialize)]
pub struct BarReport {
    pub grid: ThetaGrid,
    pub per_n: Vec<NReport>,
    pub distances: Vec<DistanceRow>,
    pub rays: Option<RayTable>,
}

impl BarReport {
    pub fn sup_normalized(&self, n: u64) -> Option<f64> {
        self.per_n.iter().find(|r| r.n == n).map(|r| r.sup_normalized)
    }
}

#[derive(Debug, Clone)]
pub struct SweepOptions {
    pub sim: SimOptions,
    /// SRBM reference for the marginal distances; skipped when `None`.
    pub srbm: Option<SrbmOptions>,
    pub prelimit: bool,
    /// Decreasing `alpha` values for the ray table at the largest `n`.
    pub ray_alphas: Vec<f64>,
}

pub const DEFAULT_RAY_ALPHAS: [f64; 9] = [1.0, 0.5, 0.25, 0.125, 0.0625, 0.03125, 0.015625, 0.0078125, 0.00390625];

/// `epsilon` and, optionally, the prelimit residual over a grid for one
/// simulated network.
pub fn evaluate_n(
    seq: &HeavyTrafficSequence,
    n: u64,
    est: &StationaryEstimate,
    grid: &ThetaGrid,
    prelimit: bool,
) -> Result<NReport> {
    let nth = seq.nth_network(n)?;
    let r_n = nth.r_n;
    let params = seq.srbm_params()?;
    let occ = Occupation::from_estimate(est);
    let epsilon = grid
        .points
        .par_iter()
        .map(|theta| {
            let a = asymptotic_residual_from(&occ, &params, r_n, theta)?;
            let raw = asymptotic_residual_raw(est, &params, r_n, theta)?;
            Ok(EpsilonRow { theta: theta.clone(), epsilon: a.epsilon.mean, se: a.epsilon.se, normalized: a.normalized, raw })
        })
        .collect::<Result<Vec<_>>>()?;
    let prelimit = if prelimit {
        grid.points
            .par_iter()
            .map(|theta| {
                let p = prelimit_bar_residual(est, &nth.network, r_n, theta)?;
                Ok(PrelimitRow {
                    theta: theta.clone(),
                    residual: p.residual.mean,
                    se: p.residual.se,
                    telescoped: p.telescoped,
                    max_exponent_residual: p.exponents.max_residual,
                })
            })
            .collect::<Result<Vec<_>>>()?
    } else {
        Vec::new()
    };
    let sup_normalized = epsilon.iter().map(|r| r.normalized).fold(0.0, f64::max);
    let consistency_gap = epsilon.iter().map(|r| (r.epsilon - r.raw).abs()).fold(0.0, f64::max);
    Ok(NReport { n, r_n, epsilon, prelimit, sup_normalized, consistency_gap })
}

/// Subsets used for the ray table: all of them up to `d = 10`, otherwise
/// singletons and the full set.
fn ray_subsets(d: usize) -> Vec<Vec<usize>> {
    if d <= 10 {
        (1u64..(1 << d)).map(|mask| (0..d).filter(|&i| mask >> i & 1 == 1).collect()).collect()
    } else {
        let mut s: Vec<Vec<usize>> = (0..d).map(|i| vec![i]).collect();
        s.push((0..d).collect());
        s
    }
}

/// Finite-`n` table of `phi - phi_j` along rays `-alpha 1_A`. A heuristic
/// diagnostic: the limit inequality concerns `alpha -> 0` of limit laws and
/// finite-`alpha` values may be negative.
pub fn ray_diagnostic(occ: &Occupation, n: u64, r_n: f64, alphas: &[f64]) -> Result<RayTable> {
    let mut alphas = alphas.to_vec();
    alphas.sort_by(|a, b| b.total_cmp(a));
    if alphas.iter().any(|&a| !(a > 0.0)) {
        return Err(Error::Parameter("ray alphas must be positive".into()));
    }
    let mut rows = Vec::new();
    let mut limits = Vec::new();
    for subset in ray_subsets(occ.d) {
        let mut diffs: Vec<Vec<(f64, BatchEstimate)>> = vec![Vec::new(); subset.len()];
        for &alpha in &alphas {
            let mut theta = vec![0.0; occ.d];
            for &i in &subset {
                theta[i] = -alpha;
            }
            let m = occ.mgfs(r_n, &theta)?;
            for (slot, &j) in subset.iter().enumerate() {
                let diff = BatchEstimate::combine(&[(1.0, &m.phi), (-1.0, &m.phi_boundary[j])]);
                rows.push(RayRow {
                    subset: subset.clone(),
                    station: j,
                    alpha,
                    difference: diff.mean,
                    se: diff.se,
                    finite_ok: diff.mean >= -3.0 * diff.se,
                });
                diffs[slot].push((alpha, diff));
            }
        }
        if alphas.len() >= 3 {
            for (slot, &j) in subset.iter().enumerate() {
                let tail = &diffs[slot][diffs[slot].len() - 3..];
                // Lagrange weights at 0 through the three nodes
                let w: Vec<f64> = (0..3)
                    .map(|i| {
                        (0..3).filter(|&k| k != i).map(|k| tail[k].0 / (tail[k].0 - tail[i].0)).product()
                    })
                    .collect();
                let lim = BatchEstimate::combine(&[(w[0], &tail[0].1), (w[1], &tail[1].1), (w[2], &tail[2].1)]);
                let (a1, a2) = (tail[2].0, tail[1].0);
                let linear = (a2 * tail[2].1.mean - a1 * tail[1].1.mean) / (a2 - a1);
                let truncation = (lim.mean - linear).abs();
                limits.push(RayLimit {
                    subset: subset.clone(),
                    station: j,
                    limit: lim.mean,
                    se: lim.se,
                    truncation,
                    limit_ok: lim.mean >= -3.0 * lim.se - truncation,
                });
            }
        }
    }
    Ok(RayTable { n, rows, limits })
}

/// Marginal distances of `r_n L_j` to the SRBM reference and, for `d = 1`,
/// to the closed-form exponential law.
pub fn marginal_distances(
    seq: &HeavyTrafficSequence,
    n: u64,
    est: &StationaryEstimate,
    srbm: Option<&SrbmSample>,
) -> Result<Vec<DistanceRow>> {
    let r_n = seq.r(n);
    let mut rows = Vec::new();
    for j in 0..est.d {
        let sample: WeightedSample = est.scaled_queue_sample(j, r_n);
        if let Some(s) = srbm {
            let reference = s.marginal(j);
            rows.push(DistanceRow {
                n,
                station: j,
                reference: "srbm",
                ks: sample.ks_between(&reference),
                w1: sample.w1_between(&reference),
            });
        }
    }
    if est.d == 1 {
        let a = analytic_1d(&seq.srbm_params()?)?;
        let sample = est.scaled_queue_sample(0, r_n);
        rows.push(DistanceRow {
            n,
            station: 0,
            reference: "exponential",
            ks: sample.ks_to(|x| a.cdf(x)),
            w1: sample.w1_to_exponential(a.alpha),
        });
    }
    Ok(rows)
}

/// Simulates every `n` with the same seed (common random numbers) and
/// collects residuals, distances and, at the largest `n`, the ray table.
pub fn residual_sweep(seq: &HeavyTrafficSequence, n_list: &[u64], grid: &ThetaGrid, opts: &SweepOptions) -> Result<BarReport> {
    if n_list.is_empty() {
        return Err(Error::Parameter("n-list is empty".into()));
    }
    if grid.d() != seq.base().d() {
        return Err(Error::Dimension("grid dimension differs from the network".into()));
    }
    let srbm = match &opts.srbm {
        Some(o) => Some(simulate_srbm(&seq.srbm_params()?, o)?),
        None => None,
    };
    let n_max = *n_list.iter().max().expect("nonempty");
    let mut per_n = Vec::new();
    let mut distances = Vec::new();
    let mut rays = None;
    for &n in n_list {
        let nth = seq.nth_network(n)?;
        let (est, _) = simulate(&nth.network, &opts.sim)?;
        per_n.push(evaluate_n(seq, n, &est, grid, opts.prelimit)?);
        distances.extend(marginal_distances(seq, n, &est, srbm.as_ref())?);
        if n == n_max && !opts.ray_alphas.is_empty() && rays.is_none() {
            rays = Some(ray_diagnostic(&Occupation::from_estimate(&est), n, nth.r_n, &opts.ray_alphas)?);
        }
    }
    Ok(BarReport { grid: grid.clone(), per_n, distances, rays })
}
