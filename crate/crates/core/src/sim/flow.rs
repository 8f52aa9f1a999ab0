use serde::Serialize;

use super::estimate::{PathCounters, StationaryEstimate};
use crate::model::{solve_traffic_equation, NetworkSpec};
use crate::stats::BatchEstimate;
use crate::Result;

#[derive(Debug, Clone, Serialize)]
pub struct FlowItem {
    pub station: usize,
    pub estimate: f64,
    pub se: f64,
    pub target: f64,
    /// `|estimate - target| / se`
    pub z: f64,
}

impl FlowItem {
    fn new(station: usize, est: &BatchEstimate, target: f64) -> Self {
        FlowItem { station, estimate: est.mean, se: est.se, target, z: est.z_score(target) }
    }
}

/// Flow identities checked against a finished run.
#[derive(Debug, Clone, Serialize)]
pub struct FlowReport {
    /// External arrival rates against `lambda_e`.
    pub arrival: Vec<FlowItem>,
    /// Departure rates against `lambda_a`.
    pub departure: Vec<FlowItem>,
    /// Idle fractions against `1 - lambda_a / lambda_s`.
    pub idle: Vec<FlowItem>,
    /// Exact replay of the queue-length identity; always 0 for a correct run.
    pub replay_residual: i64,
    /// Largest `|busy + idle - window|` over stations.
    pub time_balance_error: f64,
}

impl FlowReport {
    pub fn max_z(&self) -> f64 {
        self.arrival.iter().chain(&self.departure).chain(&self.idle).map(|i| i.z).fold(0.0, f64::max)
    }

    pub fn passes(&self, k_se: f64) -> bool {
        self.replay_residual == 0 && self.time_balance_error < 1e-6 && self.max_z() <= k_se
    }
}

pub fn flow_checks(est: &StationaryEstimate, counters: &PathCounters, network: &NetworkSpec) -> Result<FlowReport> {
    let lambda_e = network.external_rates();
    let lambda_a = solve_traffic_equation(&lambda_e, &network.routing_matrix()?)?;
    let d = network.d();
    let window = est.opts.horizon - est.opts.warmup;
    let arrival = network.external().into_iter().map(|i| FlowItem::new(i, &est.arrival_rate(i), lambda_e[i])).collect();
    let departure = (0..d).map(|j| FlowItem::new(j, &est.departure_rate(j), lambda_a[j])).collect();
    let idle = (0..d)
        .map(|j| {
            let rho = lambda_a[j] * network.services[j].mean();
            FlowItem::new(j, &est.idle_fraction(j), 1.0 - rho)
        })
        .collect();
    let time_balance_error = (0..d)
        .map(|j| (counters.busy[j] + counters.idle[j] - window).abs())
        .fold(0.0, f64::max);
    Ok(FlowReport { arrival, departure, idle, replay_residual: counters.replay_max, time_balance_error })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::DistributionSpec;
    use crate::sim::{simulate, SimOptions};

    #[test]
    fn tandem_flows_balance() {
        let net = NetworkSpec {
            stations: 2,
            arrivals: vec![Some(DistributionSpec::exponential(1.0)), None],
            services: vec![DistributionSpec::exponential(1.5), DistributionSpec::exponential(1.3)],
            routing: vec![vec![0.0, 1.0], vec![0.0, 0.0]],
        };
        let (est, c) = simulate(&net, &SimOptions::new(1e5, 3)).unwrap();
        let r = flow_checks(&est, &c, &net).unwrap();
        assert_eq!(r.replay_residual, 0);
        assert!(r.passes(4.0), "{r:?}");
    }

    #[test]
    fn mm1_heavy_idle_fraction() {
        let net = NetworkSpec {
            stations: 1,
            arrivals: vec![Some(DistributionSpec::exponential(0.9))],
            services: vec![DistributionSpec::exponential(1.0)],
            routing: vec![vec![0.0]],
        };
        let (est, c) = simulate(&net, &SimOptions::new(1e6, 8)).unwrap();
        let r = flow_checks(&est, &c, &net).unwrap();
        assert!((r.idle[0].target - 0.1).abs() < 1e-12);
        assert!(r.idle[0].z <= 3.0, "{:?}", r.idle[0]);
    }
}
