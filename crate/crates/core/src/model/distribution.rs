use rand::distr::Open01;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Law of an interarrival or service time.
///
/// Every family is a scale family, so rescaling to a new mean keeps the
/// family and the squared coefficient of variation fixed. Samplers consume a
/// fixed number of uniforms per draw, which keeps common random numbers
/// aligned across rescaled networks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum DistributionSpec {
    Exponential { rate: f64 },
    Deterministic { value: f64 },
    /// Sum of `k` exponential phases, each with the given rate.
    Erlang { k: u32, rate: f64 },
    /// With probability `p` rate `rate1`, otherwise rate `rate2`.
    Hyperexponential2 { p: f64, rate1: f64, rate2: f64 },
    Uniform { a: f64, b: f64 },
}

impl DistributionSpec {
    pub fn exponential(rate: f64) -> Self {
        DistributionSpec::Exponential { rate }
    }

    pub fn deterministic(value: f64) -> Self {
        DistributionSpec::Deterministic { value }
    }

    pub fn erlang(k: u32, rate: f64) -> Self {
        DistributionSpec::Erlang { k, rate }
    }

    pub fn family(&self) -> &'static str {
        match self {
            DistributionSpec::Exponential { .. } => "exponential",
            DistributionSpec::Deterministic { .. } => "deterministic",
            DistributionSpec::Erlang { .. } => "erlang",
            DistributionSpec::Hyperexponential2 { .. } => "hyperexponential2",
            DistributionSpec::Uniform { .. } => "uniform",
        }
    }

    /// Checks the parameter domain: finite positive mean, finite variance,
    /// nonnegative support and no atom at zero.
    pub fn check(&self) -> Result<()> {
        let pos = |name: &str, x: f64| {
            if x.is_finite() && x > 0.0 {
                Ok(())
            } else {
                Err(Error::Parameter(format!("{}: {name} must be finite and > 0, got {x}", self.family())))
            }
        };
        match *self {
            DistributionSpec::Exponential { rate } => pos("rate", rate),
            DistributionSpec::Deterministic { value } => pos("value", value),
            DistributionSpec::Erlang { k, rate } => {
                if k == 0 {
                    return Err(Error::Parameter("erlang: k must be >= 1".into()));
                }
                pos("rate", rate)
            }
            DistributionSpec::Hyperexponential2 { p, rate1, rate2 } => {
                if !(0.0..=1.0).contains(&p) {
                    return Err(Error::Parameter(format!("hyperexponential2: p must lie in [0,1], got {p}")));
                }
                pos("rate1", rate1)?;
                pos("rate2", rate2)
            }
            DistributionSpec::Uniform { a, b } => {
                if !(a.is_finite() && b.is_finite() && a >= 0.0 && b > a) {
                    return Err(Error::Parameter(format!("uniform: need 0 <= a < b, got [{a}, {b}]")));
                }
                Ok(())
            }
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            DistributionSpec::Exponential { rate } => 1.0 / rate,
            DistributionSpec::Deterministic { value } => value,
            DistributionSpec::Erlang { k, rate } => k as f64 / rate,
            DistributionSpec::Hyperexponential2 { p, rate1, rate2 } => p / rate1 + (1.0 - p) / rate2,
            DistributionSpec::Uniform { a, b } => 0.5 * (a + b),
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            DistributionSpec::Exponential { rate } => 1.0 / (rate * rate),
            DistributionSpec::Deterministic { .. } => 0.0,
            DistributionSpec::Erlang { k, rate } => k as f64 / (rate * rate),
            DistributionSpec::Hyperexponential2 { p, rate1, rate2 } => {
                let second = 2.0 * (p / (rate1 * rate1) + (1.0 - p) / (rate2 * rate2));
                let m = self.mean();
                second - m * m
            }
            DistributionSpec::Uniform { a, b } => (b - a) * (b - a) / 12.0,
        }
    }

    /// Squared coefficient of variation.
    pub fn scv(&self) -> f64 {
        match *self {
            DistributionSpec::Exponential { .. } => 1.0,
            DistributionSpec::Deterministic { .. } => 0.0,
            DistributionSpec::Erlang { k, .. } => 1.0 / k as f64,
            _ => {
                let m = self.mean();
                self.variance() / (m * m)
            }
        }
    }

    pub fn rate(&self) -> f64 {
        1.0 / self.mean()
    }

    /// Same family and shape, rescaled to the given mean.
    pub fn with_mean(&self, mean: f64) -> Self {
        let s = mean / self.mean();
        match *self {
            DistributionSpec::Exponential { .. } => DistributionSpec::Exponential { rate: 1.0 / mean },
            DistributionSpec::Deterministic { .. } => DistributionSpec::Deterministic { value: mean },
            DistributionSpec::Erlang { k, .. } => DistributionSpec::Erlang { k, rate: k as f64 / mean },
            DistributionSpec::Hyperexponential2 { p, rate1, rate2 } => {
                DistributionSpec::Hyperexponential2 { p, rate1: rate1 / s, rate2: rate2 / s }
            }
            DistributionSpec::Uniform { a, b } => DistributionSpec::Uniform { a: a * s, b: b * s },
        }
    }

    /// Draws one strictly positive value.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let mut u = || -> f64 { rng.sample(Open01) };
        match *self {
            DistributionSpec::Exponential { rate } => -u().ln() / rate,
            DistributionSpec::Deterministic { value } => value,
            DistributionSpec::Erlang { k, rate } => -(0..k).map(|_| u().ln()).sum::<f64>() / rate,
            DistributionSpec::Hyperexponential2 { p, rate1, rate2 } => {
                let branch = u();
                let e = -u().ln();
                if branch < p {
                    e / rate1
                } else {
                    e / rate2
                }
            }
            DistributionSpec::Uniform { a, b } => a + (b - a) * u(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn all() -> Vec<DistributionSpec> {
        vec![
            DistributionSpec::exponential(2.0),
            DistributionSpec::deterministic(0.7),
            DistributionSpec::erlang(3, 1.5),
            DistributionSpec::Hyperexponential2 { p: 0.3, rate1: 0.5, rate2: 4.0 },
            DistributionSpec::Uniform { a: 0.0, b: 2.0 },
        ]
    }

    #[test]
    fn rescaling_keeps_scv() {
        for d in all() {
            let r = d.with_mean(3.3);
            assert!((r.mean() - 3.3).abs() < 1e-12, "{d:?}");
            assert!((r.scv() - d.scv()).abs() < 1e-12, "{d:?}");
        }
    }

    #[test]
    fn sample_moments_match() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for d in all() {
            let n = 200_000;
            let xs: Vec<f64> = (0..n).map(|_| d.sample(&mut rng)).collect();
            assert!(xs.iter().all(|&x| x > 0.0));
            let m = xs.iter().sum::<f64>() / n as f64;
            let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64;
            let se = (d.variance() / n as f64).sqrt();
            assert!((m - d.mean()).abs() <= 5.0 * se + 1e-9, "{d:?}: mean {m}");
            assert!((v - d.variance()).abs() <= 0.05 * d.variance() + 1e-12, "{d:?}: var {v}");
        }
    }

    #[test]
    fn bad_parameters_rejected() {
        assert!(DistributionSpec::exponential(0.0).check().is_err());
        assert!(DistributionSpec::erlang(0, 1.0).check().is_err());
        assert!(DistributionSpec::Uniform { a: 1.0, b: 1.0 }.check().is_err());
        assert!(DistributionSpec::Hyperexponential2 { p: 1.5, rate1: 1.0, rate2: 1.0 }.check().is_err());
        assert!(DistributionSpec::deterministic(f64::NAN).check().is_err());
    }

    #[test]
    fn json_form() {
        let d: DistributionSpec = serde_json::from_str(r#"{"family":"erlang","k":2,"rate":4.0}"#).unwrap();
        assert_eq!(d, DistributionSpec::erlang(2, 4.0));
    }
}
