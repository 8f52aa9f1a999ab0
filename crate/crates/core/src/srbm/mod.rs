//! Semimartingale reflecting Brownian motion: LCP reflection, Euler-type
//! path simulation, the one-dimensional closed form and the MGF adjoint
//! relation evaluated on simulated paths.

mod lcp;
mod path;
mod residual;

pub use lcp::{lcp_reflect, Reflector, LCP_TOL, MAX_SWEEPS};
pub use path::{simulate_srbm, ReflectionScheme, SrbmOptions, SrbmSample, Stepper};
pub use residual::{analytic_1d, regulator_rates, srbm_bar_residual, Analytic1d, SrbmBarResidual};
