//! Random stream layout.
//!
//! Every experiment has one root seed. Each primitive sequence gets its own
//! ChaCha8 stream: the generator is seeded from the root seed and the stream
//! id is `kind << 32 | index`, where `kind` is 0 for external interarrival
//! times, 1 for service times, 2 for routing decisions and 3 for SRBM
//! Gaussian increments. Streams are therefore independent of one another and
//! of the network size, so two networks that differ only in their service
//! means consume identical uniforms (common random numbers).

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum StreamKind {
    Arrival = 0,
    Service = 1,
    Routing = 2,
    Gaussian = 3,
}

pub fn stream(seed: u64, kind: StreamKind, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((kind as u64) << 32) | index as u64);
    rng
}

/// The per-station streams consumed by the network simulator.
#[derive(Debug, Clone)]
pub struct Streams {
    pub arrival: Vec<ChaCha8Rng>,
    pub service: Vec<ChaCha8Rng>,
    pub routing: Vec<ChaCha8Rng>,
}

impl Streams {
    pub fn new(seed: u64, stations: usize) -> Self {
        let make = |kind| (0..stations).map(|j| stream(seed, kind, j)).collect();
        Streams {
            arrival: make(StreamKind::Arrival),
            service: make(StreamKind::Service),
            routing: make(StreamKind::Routing),
        }
    }
}
