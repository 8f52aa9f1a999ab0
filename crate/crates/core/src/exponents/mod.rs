//! Truncated MGFs, implicit test-function exponents and their quadratic
//! approximations.

mod expansion;
mod mgf;
mod solver;

pub use expansion::{
    expansion_error, network_exponents, quadratic_exponents, solve_all, ExpansionPoint, ExpansionTable, Exponents,
    QuadraticExponents,
};
pub use mgf::{truncated_mgf, truncated_mgf_with_derivative, truncated_moments, TruncatedMoments};
pub use solver::{chi, log_t, log_t_gradient, solve_eta, solve_zeta, ExponentSolution, BRACKET_LIMIT, RESIDUAL_TOL};
