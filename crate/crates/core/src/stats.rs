//! Batch-means estimators and distribution distances.

use serde::Serialize;

/// A point estimate with its batch-means standard error.
///
/// `batch_values` are the per-batch estimates (or, for ratio estimators,
/// their delta-method linearisations) whose average equals `mean`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BatchEstimate {
    pub mean: f64,
    pub se: f64,
    #[serde(skip)]
    pub batch_values: Vec<f64>,
}

impl BatchEstimate {
    /// Equal-weight batches.
    pub fn from_batches(values: Vec<f64>) -> Self {
        let b = values.len();
        assert!(b > 0, "batch means need at least one batch");
        let mean = values.iter().sum::<f64>() / b as f64;
        let se = if b < 2 {
            0.0
        } else {
            let var = values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (b - 1) as f64;
            (var / b as f64).sqrt()
        };
        BatchEstimate { mean, se, batch_values: values }
    }

    /// Deterministic value with zero error (e.g. an analytic quantity).
    pub fn exact(value: f64) -> Self {
        BatchEstimate { mean: value, se: 0.0, batch_values: vec![value] }
    }

    /// Ratio `mean(num) / mean(den)` with delta-method batch linearisation.
    /// `None` if the denominator vanishes.
    pub fn ratio(num: &[f64], den: &[f64]) -> Option<Self> {
        assert_eq!(num.len(), den.len());
        let b = num.len() as f64;
        let num_bar = num.iter().sum::<f64>() / b;
        let den_bar = den.iter().sum::<f64>() / b;
        if !(den_bar > 0.0) {
            return None;
        }
        let r = num_bar / den_bar;
        let lin = num
            .iter()
            .zip(den)
            .map(|(n, d)| r + (n - r * d) / den_bar)
            .collect::<Vec<_>>();
        let mut est = Self::from_batches(lin);
        est.mean = r;
        Some(est)
    }

    /// `sum_k coef_k * est_k`, combining batch values elementwise.
    pub fn combine(terms: &[(f64, &BatchEstimate)]) -> Self {
        let b = terms[0].1.batch_values.len();
        let mut values = vec![0.0; b];
        let mut mean = 0.0;
        for (c, est) in terms {
            assert_eq!(est.batch_values.len(), b);
            mean += c * est.mean;
            for (v, x) in values.iter_mut().zip(&est.batch_values) {
                *v += c * x;
            }
        }
        let mut est = Self::from_batches(values);
        est.mean = mean;
        est
    }

    /// `|mean - target|` in standard-error units; infinite when se = 0 and
    /// the values differ.
    pub fn z_score(&self, target: f64) -> f64 {
        let gap = (self.mean - target).abs();
        if gap == 0.0 {
            0.0
        } else if self.se > 0.0 {
            gap / self.se
        } else {
            f64::INFINITY
        }
    }

    pub fn within(&self, target: f64, k_se: f64) -> bool {
        self.z_score(target) <= k_se
    }
}

/// Weighted empirical distribution on the real line.
#[derive(Debug, Clone)]
pub struct WeightedSample {
    /// Sorted distinct values with their normalised masses.
    atoms: Vec<(f64, f64)>,
}

impl WeightedSample {
    pub fn new(mut points: Vec<(f64, f64)>) -> Self {
        points.retain(|(_, w)| *w > 0.0);
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        let total: f64 = points.iter().map(|p| p.1).sum();
        let mut atoms: Vec<(f64, f64)> = Vec::with_capacity(points.len());
        for (x, w) in points {
            match atoms.last_mut() {
                Some(last) if last.0 == x => last.1 += w,
                _ => atoms.push((x, w)),
            }
        }
        for a in &mut atoms {
            a.1 /= total;
        }
        WeightedSample { atoms }
    }

    pub fn unweighted(values: &[f64]) -> Self {
        Self::new(values.iter().map(|&x| (x, 1.0)).collect())
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    pub fn mean(&self) -> f64 {
        self.atoms.iter().map(|(x, w)| x * w).sum()
    }

    pub fn cdf(&self, x: f64) -> f64 {
        self.atoms.iter().take_while(|a| a.0 <= x).map(|a| a.1).sum()
    }

    /// Kolmogorov–Smirnov distance to a continuous CDF.
    pub fn ks_to<F: Fn(f64) -> f64>(&self, cdf: F) -> f64 {
        let mut below = 0.0;
        let mut worst = 0.0f64;
        for &(x, w) in &self.atoms {
            let f = cdf(x);
            let above = below + w;
            worst = worst.max((below - f).abs()).max((above - f).abs());
            below = above;
        }
        worst
    }

    /// Two-sample Kolmogorov–Smirnov distance.
    pub fn ks_between(&self, other: &WeightedSample) -> f64 {
        let (mut i, mut j) = (0, 0);
        let (mut fa, mut fb) = (0.0f64, 0.0f64);
        let mut worst = 0.0f64;
        while i < self.atoms.len() || j < other.atoms.len() {
            let xa = self.atoms.get(i).map_or(f64::INFINITY, |a| a.0);
            let xb = other.atoms.get(j).map_or(f64::INFINITY, |a| a.0);
            let x = xa.min(xb);
            if xa == x {
                fa += self.atoms[i].1;
                i += 1;
            }
            if xb == x {
                fb += other.atoms[j].1;
                j += 1;
            }
            worst = worst.max((fa - fb).abs());
        }
        worst
    }

    /// Two-sample 1-Wasserstein distance, `int |F_a - F_b| dx`.
    pub fn w1_between(&self, other: &WeightedSample) -> f64 {
        let (mut i, mut j) = (0, 0);
        let (mut fa, mut fb) = (0.0f64, 0.0f64);
        let mut prev: Option<f64> = None;
        let mut total = 0.0;
        while i < self.atoms.len() || j < other.atoms.len() {
            let xa = self.atoms.get(i).map_or(f64::INFINITY, |a| a.0);
            let xb = other.atoms.get(j).map_or(f64::INFINITY, |a| a.0);
            let x = xa.min(xb);
            if let Some(p) = prev {
                total += (fa - fb).abs() * (x - p);
            }
            if xa == x {
                fa += self.atoms[i].1;
                i += 1;
            }
            if xb == x {
                fb += other.atoms[j].1;
                j += 1;
            }
            prev = Some(x);
        }
        total
    }

    /// 1-Wasserstein distance to the exponential law with the given rate,
    /// computed exactly through quantile functions.
    pub fn w1_to_exponential(&self, rate: f64) -> f64 {
        // antiderivative of the exponential quantile -ln(1-p)/rate
        let q_int = |p: f64| {
            if p >= 1.0 {
                1.0 / rate
            } else {
                ((1.0 - p) * (1.0 - p).ln() + p) / rate
            }
        };
        let cdf = |x: f64| if x <= 0.0 { 0.0 } else { -(-rate * x).exp_m1() };
        let mut p0 = 0.0;
        let mut total = 0.0;
        for &(x, w) in &self.atoms {
            let p1 = (p0 + w).min(1.0);
            // on (p0, p1) the sample quantile equals x; Q crosses x at F(x)
            let split = cdf(x).clamp(p0, p1);
            total += x * (split - p0) - (q_int(split) - q_int(p0));
            total += (q_int(p1) - q_int(split)) - x * (p1 - split);
            p0 = p1;
        }
        total
    }
}

pub fn exponential_cdf(rate: f64) -> impl Fn(f64) -> f64 {
    move |x| if x <= 0.0 { 0.0 } else { -(-rate * x).exp_m1() }
}
