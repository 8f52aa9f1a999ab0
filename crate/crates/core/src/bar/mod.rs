//! Adjoint-relation residuals: the exact prelimit relation for exponential
//! test functions, the SRBM-form residual `epsilon`, and the sweep over `n`.

mod asymptotic;
mod grid;
mod prelimit;
mod sweep;

pub use asymptotic::{
    asymptotic_residual, asymptotic_residual_from, asymptotic_residual_raw, empirical_mgfs, gamma, gamma_j,
    AsymptoticResidual, EmpiricalMgfs, Occupation,
};
pub use grid::{GridSpec, ThetaGrid};
pub use prelimit::{prelimit_bar_residual, prelimit_with_exponents, PrelimitResidual};
pub use sweep::{
    evaluate_n, marginal_distances, ray_diagnostic, residual_sweep, BarReport, DistanceRow, EpsilonRow, NReport,
    PrelimitRow, RayLimit, RayRow, RayTable, SweepOptions, DEFAULT_RAY_ALPHAS,
};
