//! Event-driven simulation of the network Markov process with dwell-weighted
//! stationary estimation.

mod dynamics;
mod estimate;
mod flow;

pub use dynamics::{advance, Dynamics, Event, MarkovState};
pub use estimate::{simulate, PathCounters, SimOptions, Snapshot, StationaryEstimate, MIN_BATCHES};
pub use flow::{flow_checks, FlowItem, FlowReport};
