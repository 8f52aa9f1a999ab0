use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::DistributionSpec;
use crate::linalg;
use crate::{Error, Result};

/// One generalized Jackson network. Stations are 0-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub stations: usize,
    /// `Some` for stations with an external arrival stream.
    pub arrivals: Vec<Option<DistributionSpec>>,
    pub services: Vec<DistributionSpec>,
    /// Row-major routing matrix; `routing[j][k]` is the probability a
    /// customer leaving `j` joins `k`.
    pub routing: Vec<Vec<f64>>,
}

impl NetworkSpec {
    pub fn d(&self) -> usize {
        self.stations
    }

    /// Stations with external arrivals, ascending.
    pub fn external(&self) -> Vec<usize> {
        (0..self.stations).filter(|&i| self.arrivals[i].is_some()).collect()
    }

    /// External arrival rates, zero off the external set.
    pub fn external_rates(&self) -> DVector<f64> {
        DVector::from_iterator(
            self.stations,
            self.arrivals.iter().map(|a| a.as_ref().map_or(0.0, |d| d.rate())),
        )
    }

    pub fn exit_probability(&self, j: usize) -> f64 {
        (1.0 - self.routing[j].iter().sum::<f64>()).max(0.0)
    }

    pub fn routing_matrix(&self) -> Result<DMatrix<f64>> {
        self.check_shape()?;
        linalg::from_rows(&self.routing)
    }

    /// Shape and finiteness only; everything else is reported by
    /// [`validate_network`].
    pub fn check_shape(&self) -> Result<()> {
        let d = self.stations;
        if d == 0 {
            return Err(Error::Structural("network has no stations".into()));
        }
        if self.arrivals.len() != d || self.services.len() != d {
            return Err(Error::Structural(format!(
                "expected {d} arrival and service entries, got {} and {}",
                self.arrivals.len(),
                self.services.len()
            )));
        }
        if self.routing.len() != d || self.routing.iter().any(|r| r.len() != d) {
            return Err(Error::Structural(format!("routing matrix must be {d}x{d}")));
        }
        if self.routing.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::Structural("routing matrix has non-finite entries".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    fn push(&mut self, name: &str, passed: bool, detail: String) {
        self.checks.push(Check { name: name.to_string(), passed, detail });
    }

    /// Turns a failed report into a parameter error naming the failures.
    pub fn into_result(self) -> Result<()> {
        if self.passed() {
            return Ok(());
        }
        let failed: Vec<String> =
            self.checks.iter().filter(|c| !c.passed).map(|c| format!("{}: {}", c.name, c.detail)).collect();
        Err(Error::Parameter(failed.join("; ")))
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(f, "[{}] {}: {}", if c.passed { "ok" } else { "FAIL" }, c.name, c.detail)?;
        }
        write!(f, "{}", if self.passed() { "network valid" } else { "network invalid" })
    }
}

const NEUMANN_TOL: f64 = 1e-12;
const MAX_DOUBLINGS: u32 = 40;

/// Runs the structural checks on a network. Only malformed input (wrong
/// shapes, NaN) is an error; failed checks are reported.
pub fn validate_network(spec: &NetworkSpec) -> Result<ValidationReport> {
    let p = spec.routing_matrix()?;
    let mut report = ValidationReport { checks: Vec::new() };

    let mut bad_rows = Vec::new();
    for (j, row) in spec.routing.iter().enumerate() {
        let sum: f64 = row.iter().sum();
        if row.iter().any(|&x| x < 0.0) || sum > 1.0 + 1e-12 {
            bad_rows.push(j);
        }
    }
    report.push(
        "substochastic",
        bad_rows.is_empty(),
        if bad_rows.is_empty() { "all rows nonnegative with sum <= 1".into() } else { format!("bad rows {bad_rows:?}") },
    );

    match linalg::power_decay_exponent(&p, NEUMANN_TOL, MAX_DOUBLINGS) {
        Some(k) => report.push("open", true, format!("||P^{k}||_inf < {NEUMANN_TOL:e}")),
        None => report.push("open", false, "powers of P do not decay (spectral radius >= 1)".into()),
    }

    let ext = spec.external();
    report.push("external", !ext.is_empty(), format!("external stations {ext:?}"));

    let mut dist_errors = Vec::new();
    for (i, a) in spec.arrivals.iter().enumerate() {
        if let Some(Err(e)) = a.as_ref().map(|d| d.check()) {
            dist_errors.push(format!("arrival {i}: {e}"));
        }
    }
    for (j, s) in spec.services.iter().enumerate() {
        if let Err(e) = s.check() {
            dist_errors.push(format!("service {j}: {e}"));
        }
    }
    report.push(
        "distributions",
        dist_errors.is_empty(),
        if dist_errors.is_empty() { "all parameters valid".into() } else { dist_errors.join("; ") },
    );
    Ok(report)
}

/// Unique solution of `lambda_a = lambda_e + P^T lambda_a`.
pub fn solve_traffic_equation(lambda_e: &DVector<f64>, p: &DMatrix<f64>) -> Result<DVector<f64>> {
    let d = p.nrows();
    if !p.is_square() || lambda_e.len() != d {
        return Err(Error::Dimension(format!(
            "routing {}x{} incompatible with rate vector of length {}",
            p.nrows(),
            p.ncols(),
            lambda_e.len()
        )));
    }
    if linalg::power_decay_exponent(p, NEUMANN_TOL, MAX_DOUBLINGS).is_none() {
        return Err(Error::Singular("I - P^T is singular or has a non-Neumann inverse: network is not open".into()));
    }
    let r = DMatrix::identity(d, d) - p.transpose();
    r.lu()
        .solve(lambda_e)
        .ok_or_else(|| Error::Singular("I - P^T is singular".into()))
}

#[derive(Debug, Clone, Serialize)]
pub struct SubsetCertificate {
    pub subset: Vec<usize>,
    pub invertible: bool,
    /// Smallest entry of the inverse of the principal submatrix.
    pub min_inverse_entry: f64,
}

impl SubsetCertificate {
    pub fn holds(&self) -> bool {
        self.invertible && self.min_inverse_entry >= -MMATRIX_TOL
    }
}

#[derive(Debug, Clone)]
pub struct MMatrixReport {
    pub r: DMatrix<f64>,
    pub is_m: bool,
    pub certificates: Vec<SubsetCertificate>,
}

const MMATRIX_TOL: f64 = 1e-12;
const MAX_ENUMERATED_DIM: usize = 10;
const SAMPLED_SUBSETS: usize = 1023;

/// `R = I - P^T` and its M-matrix certificates: sign pattern, nonnegative
/// inverse, and a nonnegative inverse for every principal submatrix (all
/// subsets when `d <= 10`, a fixed pseudo-random sample otherwise).
pub fn reflection_and_mmatrix(p: &DMatrix<f64>) -> Result<MMatrixReport> {
    if !p.is_square() {
        return Err(Error::Dimension(format!("routing matrix is {}x{}", p.nrows(), p.ncols())));
    }
    let d = p.nrows();
    let r = DMatrix::identity(d, d) - p.transpose();

    let subsets: Vec<Vec<usize>> = if d <= MAX_ENUMERATED_DIM {
        (1u64..(1 << d)).map(|mask| (0..d).filter(|&i| mask >> i & 1 == 1).collect()).collect()
    } else {
        sampled_subsets(d)
    };
    let certificates: Vec<SubsetCertificate> = subsets
        .into_iter()
        .map(|subset| {
            let sub = linalg::principal_submatrix(&r, &subset);
            match sub.try_inverse() {
                Some(inv) if inv.iter().all(|x| x.is_finite()) => SubsetCertificate {
                    subset,
                    invertible: true,
                    min_inverse_entry: inv.min(),
                },
                _ => SubsetCertificate { subset, invertible: false, min_inverse_entry: f64::NAN },
            }
        })
        .collect();

    let sign_ok = (0..d).all(|i| r[(i, i)] >= 0.0) && (0..d).all(|i| (0..d).all(|j| i == j || r[(i, j)] <= 0.0));
    let full_ok = match r.clone().try_inverse() {
        Some(inv) => inv.iter().all(|x| x.is_finite() && *x >= -MMATRIX_TOL),
        None => false,
    };
    Ok(MMatrixReport { r, is_m: sign_ok && full_ok, certificates })
}

fn sampled_subsets(d: usize) -> Vec<Vec<usize>> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x5eed_5b5e);
    let mut out = vec![(0..d).collect::<Vec<_>>()];
    out.extend((0..d).map(|i| vec![i]));
    while out.len() < SAMPLED_SUBSETS {
        let s: Vec<usize> = (0..d).filter(|_| rng.random::<bool>()).collect();
        if !s.is_empty() {
            out.push(s);
        }
    }
    out
}
