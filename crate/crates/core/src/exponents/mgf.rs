use serde::Serialize;

use crate::model::DistributionSpec;
use crate::quad;

const SERIES_EPS: f64 = 1e-17;
const SERIES_MAX_TERMS: usize = 400;
const QUAD_TOL: f64 = 1e-12;

fn ln_factorial(k: u32) -> f64 {
    (2..=k).map(|i| (i as f64).ln()).sum()
}

/// `sum_{j>=0} x^j k! / (j+k)!`, the entire part of the lower incomplete
/// gamma function.
fn gamma_series(k: u32, x: f64) -> f64 {
    let mut term = 1.0;
    let mut sum = 1.0;
    for j in 1..SERIES_MAX_TERMS {
        term *= x / (k as f64 + j as f64);
        sum += term;
        if term.abs() <= SERIES_EPS * sum.abs() {
            break;
        }
    }
    sum
}

/// `sum_{i<k} x^i / i!` (a truncated exponential series).
fn exp_partial(k: u32, x: f64) -> f64 {
    let mut term = 1.0;
    let mut sum = 0.0;
    for i in 0..k {
        if i > 0 {
            term *= x / i as f64;
        }
        sum += term;
    }
    sum
}

/// Regularized incomplete gamma pair `(P(k,x), Q(k,x))` for integer `k >= 1`
/// and `x >= 0`.
pub(crate) fn gamma_pq(k: u32, x: f64) -> (f64, f64) {
    if x <= 0.0 {
        return (0.0, 1.0);
    }
    if x < k as f64 + 1.0 {
        let p = (k as f64 * x.ln() - x - ln_factorial(k)).exp() * gamma_series(k, x);
        (p, 1.0 - p)
    } else {
        // sum of the Poisson(x) mass below k, in log space
        let mut q = 0.0;
        for i in 0..k {
            q += (i as f64 * x.ln() - x - ln_factorial(i)).exp();
        }
        (1.0 - q, q)
    }
}

/// `int_0^c t^{k-1} e^{-a t} / (k-1)! dt` for any real `a`. May overflow to
/// `+inf` for very negative `a c`; never returns NaN.
fn erlang_kernel(k: u32, a: f64, c: f64) -> f64 {
    let x = a * c;
    let kf = k as f64;
    if x.abs() < kf + 1.0 {
        (kf * c.ln() - x - ln_factorial(k)).exp() * gamma_series(k, x)
    } else if x > 0.0 {
        gamma_pq(k, x).0 / a.powi(k as i32)
    } else {
        let s = exp_partial(k, x);
        let v = (1.0 - (-x).exp() * s) / a.powi(k as i32);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    }
}

/// `(E[e^{y H}], E[H e^{y H}])` with `H = min(T, c)`, `T ~ Erlang(k, beta)`.
fn erlang_mgf(k: u32, beta: f64, y: f64, c: f64) -> (f64, f64) {
    let a = beta - y;
    let tail = exp_partial(k, beta * c);
    let boundary = (-a * c).exp();
    let bk = beta.powi(k as i32);
    let g = bk * erlang_kernel(k, a, c) + boundary * tail;
    let dg = bk * k as f64 * erlang_kernel(k + 1, a, c) + c * boundary * tail;
    (finite_or_inf(g), finite_or_inf(dg))
}

fn finite_or_inf(v: f64) -> f64 {
    if v.is_nan() {
        f64::INFINITY
    } else {
        v
    }
}

/// `E[e^{y min(T,c)}]` and its derivative in `y`.
pub fn truncated_mgf_with_derivative(dist: &DistributionSpec, y: f64, c: f64) -> (f64, f64) {
    assert!(c > 0.0, "truncation level must be positive");
    if y == 0.0 {
        return (1.0, truncated_moments(dist, c).mean);
    }
    match *dist {
        DistributionSpec::Exponential { rate } => erlang_mgf(1, rate, y, c),
        DistributionSpec::Erlang { k, rate } => erlang_mgf(k, rate, y, c),
        DistributionSpec::Hyperexponential2 { p, rate1, rate2 } => {
            let (g1, d1) = erlang_mgf(1, rate1, y, c);
            let (g2, d2) = erlang_mgf(1, rate2, y, c);
            (mix(p, g1, g2), mix(p, d1, d2))
        }
        DistributionSpec::Deterministic { value } => {
            let h = value.min(c);
            let g = (y * h).exp();
            (g, h * g)
        }
        DistributionSpec::Uniform { a, b } => {
            if c <= a {
                let g = (y * c).exp();
                return (g, c * g);
            }
            let top = b.min(c);
            if y * top > 700.0 {
                return (f64::INFINITY, f64::INFINITY);
            }
            let w = 1.0 / (b - a);
            let tail = ((b - c).max(0.0) * w, (y * c).exp());
            let g_body = quad::integrate(|t| (y * t).exp() * w, a, top, QUAD_TOL);
            let d_body = quad::integrate(|t| t * (y * t).exp() * w, a, top, QUAD_TOL);
            (g_body + tail.0 * tail.1, d_body + c * tail.0 * tail.1)
        }
    }
}

fn mix(p: f64, x1: f64, x2: f64) -> f64 {
    // avoids 0 * inf when one branch has zero weight
    let a = if p > 0.0 { p * x1 } else { 0.0 };
    let b = if p < 1.0 { (1.0 - p) * x2 } else { 0.0 };
    a + b
}

/// `E[e^{y min(T,c)}]`.
pub fn truncated_mgf(dist: &DistributionSpec, y: f64, c: f64) -> f64 {
    truncated_mgf_with_derivative(dist, y, c).0
}

/// Moments of `min(T, c)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TruncatedMoments {
    pub mean: f64,
    pub second: f64,
    /// `1 / E[min(T,c)]`
    pub rate: f64,
    /// `Var(min(T,c))`
    pub variance: f64,
    pub c: f64,
}

pub fn truncated_moments(dist: &DistributionSpec, c: f64) -> TruncatedMoments {
    let (m1, m2) = match *dist {
        DistributionSpec::Exponential { rate } => erlang_moments(1, rate, c),
        DistributionSpec::Erlang { k, rate } => erlang_moments(k, rate, c),
        DistributionSpec::Hyperexponential2 { p, rate1, rate2 } => {
            let (a1, a2) = erlang_moments(1, rate1, c);
            let (b1, b2) = erlang_moments(1, rate2, c);
            (p * a1 + (1.0 - p) * b1, p * a2 + (1.0 - p) * b2)
        }
        DistributionSpec::Deterministic { value } => {
            let h = value.min(c);
            (h, h * h)
        }
        DistributionSpec::Uniform { a, b } => {
            if c <= a {
                (c, c * c)
            } else {
                let top = b.min(c);
                let w = 1.0 / (b - a);
                let over = (b - c).max(0.0) * w;
                (
                    (top * top - a * a) * 0.5 * w + c * over,
                    (top.powi(3) - a.powi(3)) / 3.0 * w + c * c * over,
                )
            }
        }
    };
    let variance = (m2 - m1 * m1).max(0.0);
    TruncatedMoments { mean: m1, second: m2, rate: 1.0 / m1, variance, c }
}

fn erlang_moments(k: u32, beta: f64, c: f64) -> (f64, f64) {
    let x = beta * c;
    let kf = k as f64;
    let q = gamma_pq(k, x).1;
    let m1 = kf / beta * gamma_pq(k + 1, x).0 + c * q;
    let m2 = kf * (kf + 1.0) / (beta * beta) * gamma_pq(k + 2, x).0 + c * c * q;
    (m1, m2)
}

#[cfg(test)]
mod tests {
    use super::*;

    // Oracle: quadrature of the density plus the atom at c.
    fn quad_oracle(density: impl Fn(f64) -> f64, survival_c: f64, y: f64, c: f64) -> f64 {
        quad::integrate(|t| (y * t).exp() * density(t), 0.0, c, 1e-14) + (y * c).exp() * survival_c
    }

    #[test]
    fn exponential_matches_quadrature() {
        let lam = 1.5;
        for &(y, c) in &[(0.3, 2.0), (-2.0, 5.0), (1.5, 3.0), (1.5 + 1e-9, 3.0), (4.0, 1.0)] {
            let got = truncated_mgf(&DistributionSpec::exponential(lam), y, c);
            let want = quad_oracle(|t| lam * (-lam * t).exp(), (-lam * c).exp(), y, c);
            assert!((got - want).abs() <= 1e-10 * want.max(1.0), "y={y} c={c}: {got} vs {want}");
        }
    }

    #[test]
    fn exponential_closed_form_away_from_singularity() {
        let (lam, y, c) = (2.0, 0.7, 3.0);
        let a: f64 = lam - y;
        let want = lam / a * (1.0 - (-a * c).exp()) + (-a * c).exp();
        let got = truncated_mgf(&DistributionSpec::exponential(lam), y, c);
        assert!((got - want).abs() < 1e-14);
    }

    #[test]
    fn erlang_matches_quadrature() {
        let (k, beta) = (3u32, 2.0f64);
        let dens = |t: f64| beta.powi(3) * t * t * (-beta * t).exp() / 2.0;
        for &(y, c) in &[(0.5, 1.0), (-3.0, 4.0), (2.0, 2.0), (5.0, 0.4), (-40.0, 10.0), (6.0, 3.0)] {
            let surv = exp_partial(k, beta * c) * (-beta * c).exp();
            let want = quad_oracle(dens, surv, y, c);
            let got = truncated_mgf(&DistributionSpec::erlang(k, beta), y, c);
            assert!((got - want).abs() <= 1e-10 * want.max(1.0), "y={y} c={c}: {got} vs {want}");
        }
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let dists = [
            DistributionSpec::exponential(1.0),
            DistributionSpec::erlang(2, 3.0),
            DistributionSpec::Hyperexponential2 { p: 0.4, rate1: 0.5, rate2: 3.0 },
            DistributionSpec::Uniform { a: 0.2, b: 1.4 },
            DistributionSpec::deterministic(0.8),
        ];
        for d in &dists {
            for &(y, c) in &[(0.3, 2.0), (-1.0, 1.0), (0.9, 5.0)] {
                let h = 1e-5;
                let fd = (truncated_mgf(d, y + h, c) - truncated_mgf(d, y - h, c)) / (2.0 * h);
                let (_, dg) = truncated_mgf_with_derivative(d, y, c);
                assert!((fd - dg).abs() <= 1e-6 * dg.abs().max(1.0), "{d:?} y={y}: {fd} vs {dg}");
            }
        }
    }

    #[test]
    fn uniform_matches_closed_form() {
        let (a, b) = (0.5, 2.0);
        let d = DistributionSpec::Uniform { a, b };
        for &(y, c) in &[(0.7f64, 10.0f64), (-1.3, 1.2), (2.0, 0.3)] {
            let top = b.min(c);
            let body = if top > a { ((y * top).exp() - (y * a).exp()) / (y * (b - a)) } else { 0.0 };
            let want = if c <= a { (y * c).exp() } else { body + (y * c).exp() * (b - c).max(0.0) / (b - a) };
            let got = truncated_mgf(&d, y, c);
            assert!((got - want).abs() < 1e-11, "y={y} c={c}: {got} vs {want}");
        }
    }

    #[test]
    fn simple_values() {
        for d in [DistributionSpec::exponential(3.0), DistributionSpec::Uniform { a: 0.0, b: 1.0 }] {
            assert_eq!(truncated_mgf(&d, 0.0, 0.5), 1.0);
        }
        let g = truncated_mgf(&DistributionSpec::deterministic(0.5), 1.3, 2.0);
        assert!((g - (1.3f64 * 0.5).exp()).abs() < 1e-15);
    }

    #[test]
    fn huge_arguments_do_not_produce_nan() {
        for d in [DistributionSpec::exponential(1.0), DistributionSpec::erlang(4, 2.0)] {
            for y in [1e3, 1e6, -1e6] {
                let (g, dg) = truncated_mgf_with_derivative(&d, y, 1e6);
                assert!(!g.is_nan() && !dg.is_nan(), "{d:?} y={y}");
            }
        }
    }

    #[test]
    fn moments_match_quadrature() {
        let d = DistributionSpec::erlang(2, 1.0);
        let c = 1.5;
        let m = truncated_moments(&d, c);
        let dens = |t: f64| t * (-t).exp();
        let surv = (1.0 + c) * (-c as f64).exp();
        let m1 = quad::integrate(|t| t * dens(t), 0.0, c, 1e-14) + c * surv;
        let m2 = quad::integrate(|t| t * t * dens(t), 0.0, c, 1e-14) + c * c * surv;
        assert!((m.mean - m1).abs() < 1e-12 && (m.second - m2).abs() < 1e-12);
        assert!(m.rate >= 1.0 / d.mean());
    }

    #[test]
    fn untruncated_moments_recover_originals() {
        let d = DistributionSpec::Hyperexponential2 { p: 0.2, rate1: 0.5, rate2: 2.0 };
        let m = truncated_moments(&d, 1e6);
        assert!((m.mean - d.mean()).abs() < 1e-12);
        assert!((m.variance - d.variance()).abs() < 1e-10);
    }
}
