use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{solve_traffic_equation, validate_network, NetworkSpec};
use crate::linalg;
use crate::{Error, Result};

/// Rule `n -> r_n` for the heavy-traffic scaling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RRule {
    /// `r_n = 1/sqrt(n)`
    #[default]
    InvSqrt,
    /// `r_n = 1/n`
    Inv,
}

impl RRule {
    pub fn r(self, n: u64) -> f64 {
        match self {
            RRule::InvSqrt => 1.0 / (n as f64).sqrt(),
            RRule::Inv => 1.0 / n as f64,
        }
    }
}

/// A base network plus the sequence data. External rates and routing are
/// fixed in `n`; service laws keep their family and scv and are rescaled so
/// that `lambda_s(n) = lambda_a + b r_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct HeavyTrafficSequence {
    base: NetworkSpec,
    b: DVector<f64>,
    r_rule: RRule,
    lambda_a: DVector<f64>,
}

#[derive(Debug, Clone)]
pub struct NthNetwork {
    pub network: NetworkSpec,
    pub n: u64,
    pub r_n: f64,
    pub service_rates: DVector<f64>,
    pub rho: DVector<f64>,
}

impl HeavyTrafficSequence {
    pub fn new(base: NetworkSpec, b: Vec<f64>, r_rule: RRule) -> Result<Self> {
        validate_network(&base)?.into_result()?;
        if b.len() != base.d() {
            return Err(Error::Dimension(format!("b has length {}, network has {} stations", b.len(), base.d())));
        }
        if let Some(x) = b.iter().find(|x| !(x.is_finite() && **x > 0.0)) {
            return Err(Error::Parameter(format!("b must be positive, found {x}")));
        }
        let lambda_a = solve_traffic_equation(&base.external_rates(), &base.routing_matrix()?)?;
        Ok(HeavyTrafficSequence { base, b: DVector::from_vec(b), r_rule, lambda_a })
    }

    pub fn base(&self) -> &NetworkSpec {
        &self.base
    }

    pub fn b(&self) -> &DVector<f64> {
        &self.b
    }

    pub fn r_rule(&self) -> RRule {
        self.r_rule
    }

    pub fn lambda_a(&self) -> &DVector<f64> {
        &self.lambda_a
    }

    pub fn r(&self, n: u64) -> f64 {
        self.r_rule.r(n)
    }

    pub fn nth_network(&self, n: u64) -> Result<NthNetwork> {
        if n == 0 {
            return Err(Error::Parameter("n must be >= 1".into()));
        }
        let r_n = self.r(n);
        let rates = &self.lambda_a + &self.b * r_n;
        if let Some(j) = rates.iter().position(|x| !(*x > 0.0)) {
            return Err(Error::Parameter(format!("service rate at station {j} is not positive")));
        }
        let mut network = self.base.clone();
        for (svc, rate) in network.services.iter_mut().zip(rates.iter()) {
            *svc = svc.with_mean(1.0 / rate);
        }
        let rho = self.lambda_a.component_div(&rates);
        Ok(NthNetwork { network, n, r_n, service_rates: rates, rho })
    }

    /// Data of the limiting SRBM.
    pub fn srbm_params(&self) -> Result<SrbmParams> {
        let net = &self.base;
        let d = net.d();
        let p = net.routing_matrix()?;
        // lambda_k^3 sigma_k^2 = lambda_k * scv_k, which stays finite at rate 0
        let lam_s = &self.lambda_a;
        let scv_s: Vec<f64> = net.services.iter().map(|s| s.scv()).collect();
        let arr: Vec<f64> = net.arrivals.iter().map(|a| a.as_ref().map_or(0.0, |x| x.rate() * x.scv())).collect();
        let delta = |i: usize, j: usize| if i == j { 1.0 } else { 0.0 };
        let mut sigma = DMatrix::zeros(d, d);
        for i in 0..d {
            for j in i..d {
                let mut s = 0.0;
                for k in 0..d {
                    let routing = p[(k, i)] * (delta(i, j) - p[(k, j)]);
                    let service = scv_s[k] * (p[(k, i)] - delta(k, i)) * (p[(k, j)] - delta(k, j));
                    s += lam_s[k] * (routing + service);
                }
                s += arr[i] * delta(i, j);
                sigma[(i, j)] = s;
                sigma[(j, i)] = s;
            }
        }
        let r = DMatrix::identity(d, d) - p.transpose();
        SrbmParams::new(sigma, r, self.b.clone())
    }
}

/// `(mu, Sigma, R, b)` of an SRBM with `mu = -R b`.
#[derive(Debug, Clone, PartialEq)]
pub struct SrbmParams {
    pub mu: DVector<f64>,
    pub sigma: DMatrix<f64>,
    pub r: DMatrix<f64>,
    pub b: DVector<f64>,
    /// Lower Cholesky factor of `sigma`.
    pub chol: DMatrix<f64>,
}

impl SrbmParams {
    /// Checks dimensions, symmetry and positive definiteness of `sigma`.
    pub fn new(sigma: DMatrix<f64>, r: DMatrix<f64>, b: DVector<f64>) -> Result<Self> {
        let d = b.len();
        if sigma.shape() != (d, d) || r.shape() != (d, d) {
            return Err(Error::Dimension(format!("SRBM data must be {d}x{d}")));
        }
        if (&sigma - sigma.transpose()).amax() > 1e-12 {
            return Err(Error::Parameter("covariance matrix is not symmetric".into()));
        }
        let chol = linalg::cholesky_lower(&sigma)?;
        let mu = -(&r * &b);
        Ok(SrbmParams { mu, sigma, r, b, chol })
    }

    pub fn d(&self) -> usize {
        self.b.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::DistributionSpec;

    fn mm1() -> NetworkSpec {
        NetworkSpec {
            stations: 1,
            arrivals: vec![Some(DistributionSpec::exponential(1.0))],
            services: vec![DistributionSpec::exponential(2.0)],
            routing: vec![vec![0.0]],
        }
    }

    fn tandem() -> NetworkSpec {
        NetworkSpec {
            stations: 2,
            arrivals: vec![Some(DistributionSpec::exponential(1.0)), None],
            services: vec![DistributionSpec::exponential(2.0); 2],
            routing: vec![vec![0.0, 1.0], vec![0.0, 0.0]],
        }
    }

    #[test]
    fn mm1_sequence() {
        let seq = HeavyTrafficSequence::new(mm1(), vec![1.0], RRule::InvSqrt).unwrap();
        let one = seq.nth_network(1).unwrap();
        assert!((one.service_rates[0] - 2.0).abs() < 1e-15);
        assert!((one.rho[0] - 0.5).abs() < 1e-15);
        let hundred = seq.nth_network(100).unwrap();
        assert!((hundred.service_rates[0] - 1.1).abs() < 1e-15);
        assert!((hundred.rho[0] - 10.0 / 11.0).abs() < 1e-15);
        assert!((hundred.network.services[0].mean() - 1.0 / 1.1).abs() < 1e-15);
        assert!(seq.nth_network(0).is_err());
    }

    #[test]
    fn tandem_rates() {
        let seq = HeavyTrafficSequence::new(tandem(), vec![1.0, 2.0], RRule::InvSqrt).unwrap();
        let n = seq.nth_network(25).unwrap();
        assert!((n.service_rates[0] - 1.2).abs() < 1e-14);
        assert!((n.service_rates[1] - 1.4).abs() < 1e-14);
    }

    #[test]
    fn inverse_rule() {
        assert_eq!(RRule::Inv.r(4), 0.25);
        assert_eq!(RRule::InvSqrt.r(4), 0.5);
    }

    #[test]
    fn mm1_srbm_data() {
        let p = HeavyTrafficSequence::new(mm1(), vec![1.0], RRule::InvSqrt).unwrap().srbm_params().unwrap();
        assert!((p.sigma[(0, 0)] - 2.0).abs() < 1e-15);
        assert!((p.mu[0] + 1.0).abs() < 1e-15);
        assert_eq!(p.r[(0, 0)], 1.0);
    }

    #[test]
    fn tandem_srbm_data() {
        let p = HeavyTrafficSequence::new(tandem(), vec![1.0, 1.0], RRule::InvSqrt).unwrap().srbm_params().unwrap();
        assert_eq!(linalg::to_rows(&p.sigma), vec![vec![2.0, -1.0], vec![-1.0, 2.0]]);
        assert_eq!(p.mu.as_slice(), &[-1.0, 0.0]);
    }

    #[test]
    fn deterministic_single_station_is_degenerate() {
        let mut net = mm1();
        net.arrivals[0] = Some(DistributionSpec::deterministic(1.0));
        net.services[0] = DistributionSpec::deterministic(0.5);
        let err = HeavyTrafficSequence::new(net, vec![1.0], RRule::InvSqrt).unwrap().srbm_params().unwrap_err();
        assert!(matches!(err, Error::NotPositiveDefinite { minor: 1, .. }), "{err:?}");
    }

    #[test]
    fn rejects_bad_b() {
        assert!(HeavyTrafficSequence::new(mm1(), vec![0.0], RRule::InvSqrt).is_err());
        assert!(HeavyTrafficSequence::new(mm1(), vec![1.0, 1.0], RRule::InvSqrt).is_err());
    }
}
