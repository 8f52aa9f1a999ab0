use rand::distr::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::linalg::vec_norm_inf;
use crate::{Error, Result};

/// Counts per point class for a grid in `[-m, 0)^d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub m: f64,
    /// Points per coordinate axis: `-m k / axis` along `e_i`.
    pub axis: usize,
    /// Points `-m k / diagonal` along the all-ones direction.
    pub diagonal: usize,
    /// Uniform interior points.
    pub random: usize,
    pub seed: u64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { m: 1.0, axis: 8, diagonal: 8, random: 32, seed: 7 }
    }
}

/// Finite set of nonzero `theta <= 0` with `||theta||_inf <= m`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThetaGrid {
    pub m: f64,
    pub points: Vec<Vec<f64>>,
}

impl ThetaGrid {
    pub fn generate(d: usize, spec: &GridSpec) -> Result<Self> {
        if !(spec.m > 0.0 && spec.m.is_finite()) {
            return Err(Error::Parameter(format!("grid bound M must be positive, got {}", spec.m)));
        }
        let mut points: Vec<Vec<f64>> = Vec::new();
        for i in 0..d {
            for k in 1..=spec.axis {
                let mut p = vec![0.0; d];
                p[i] = -spec.m * k as f64 / spec.axis as f64;
                points.push(p);
            }
        }
        for k in 1..=spec.diagonal {
            points.push(vec![-spec.m * k as f64 / spec.diagonal as f64; d]);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        for _ in 0..spec.random {
            points.push((0..d).map(|_| -spec.m * rng.sample::<f64, _>(Open01)).collect());
        }
        // axis and diagonal rays coincide when d = 1
        let mut unique: Vec<Vec<f64>> = Vec::with_capacity(points.len());
        for p in points {
            if !unique.contains(&p) {
                unique.push(p);
            }
        }
        Self::from_points(spec.m, unique)
    }

    pub fn from_points(m: f64, points: Vec<Vec<f64>>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Parameter("theta grid is empty".into()));
        }
        let d = points[0].len();
        for p in &points {
            if p.len() != d {
                return Err(Error::Dimension("grid points differ in dimension".into()));
            }
            if p.iter().any(|&x| !(x <= 0.0)) {
                return Err(Error::Parameter(format!("grid point {p:?} has a positive or NaN coordinate")));
            }
            let norm = vec_norm_inf(p);
            if norm == 0.0 || norm > m * (1.0 + 1e-12) {
                return Err(Error::Parameter(format!("grid point {p:?} must satisfy 0 < ||theta|| <= {m}")));
            }
        }
        Ok(ThetaGrid { m, points })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn d(&self) -> usize {
        self.points[0].len()
    }
}
