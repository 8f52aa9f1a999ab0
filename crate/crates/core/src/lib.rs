//! Heavy-traffic experiments for generalized Jackson networks.
//!
//! The crate is organised around the objects an experiment touches:
//!
//! * [`model`]: network primitives, heavy-traffic sequences, and the data
//!   `(mu, Sigma, R)` of the approximating reflected Brownian motion.
//! * [`sim`]: an event-driven simulator of the Markov state
//!   `(queue lengths, residual interarrival times, residual service times)`
//!   with time-weighted stationary estimation.
//! * [`exponents`]: truncated moment generating functions and the implicit
//!   exponents that make the exponential test functions jump-free.
//! * [`bar`]: basic-adjoint-relationship residuals for the prelimit networks
//!   and for the limiting SRBM, plus distance and ray diagnostics.
//! * [`srbm`]: an Euler scheme for the SRBM with one-step LCP reflection.
//! * [`config`] and [`report`]: JSON experiment configs and CSV artifacts.

pub mod bar;
pub mod config;
pub mod error;
pub mod exponents;
pub mod linalg;
pub mod model;
pub mod quad;
pub mod report;
pub mod rng;
pub mod sim;
pub mod srbm;
pub mod stats;

pub use error::{Error, Result};
