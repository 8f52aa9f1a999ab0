//! Network instances, heavy-traffic sequences and SRBM data.

mod distribution;
mod heavy_traffic;
mod network;

pub use distribution::DistributionSpec;
pub use heavy_traffic::{HeavyTrafficSequence, NthNetwork, RRule, SrbmParams};
pub use network::{
    reflection_and_mmatrix, solve_traffic_equation, validate_network, Check, MMatrixReport, NetworkSpec,
    SubsetCertificate, ValidationReport,
};
