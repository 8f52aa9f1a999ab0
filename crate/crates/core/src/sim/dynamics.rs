use rand::Rng;
use serde::Serialize;

use crate::model::{validate_network, DistributionSpec, NetworkSpec};
use crate::rng::Streams;
use crate::Result;

/// The Markov state `(l, u, v)` plus the clock.
///
/// `u[i]` is the residual interarrival time at an external station and 0
/// elsewhere. `v[j]` is the residual service time; at an idle station it
/// holds the frozen full service time of the next customer.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarkovState {
    pub l: Vec<u32>,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub clock: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Event {
    Arrival { station: usize },
    /// `to` is `None` when the customer leaves the network.
    Departure { from: usize, to: Option<usize> },
}

/// Precomputed view of a network for fast stepping.
#[derive(Debug, Clone)]
pub struct Dynamics {
    d: usize,
    arrivals: Vec<Option<DistributionSpec>>,
    services: Vec<DistributionSpec>,
    cum_routing: Vec<Vec<f64>>,
}

impl Dynamics {
    /// Rejects networks that fail validation.
    pub fn new(network: &NetworkSpec) -> Result<Self> {
        validate_network(network)?.into_result()?;
        let cum_routing = network
            .routing
            .iter()
            .map(|row| {
                row.iter()
                    .scan(0.0, |acc, p| {
                        *acc += p;
                        Some(*acc)
                    })
                    .collect()
            })
            .collect();
        Ok(Dynamics {
            d: network.d(),
            arrivals: network.arrivals.clone(),
            services: network.services.clone(),
            cum_routing,
        })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn is_external(&self, i: usize) -> bool {
        self.arrivals[i].is_some()
    }

    /// Empty network with fresh interarrival draws and frozen service draws.
    pub fn initial_state(&self, streams: &mut Streams) -> MarkovState {
        let u = (0..self.d)
            .map(|i| self.arrivals[i].as_ref().map_or(0.0, |a| a.sample(&mut streams.arrival[i])))
            .collect();
        let v = (0..self.d).map(|j| self.services[j].sample(&mut streams.service[j])).collect();
        MarkovState { l: vec![0; self.d], u, v, clock: 0.0 }
    }

    /// Time to the next event.
    pub fn next_dwell(&self, s: &MarkovState) -> f64 {
        let mut dwell = f64::INFINITY;
        for i in 0..self.d {
            if self.arrivals[i].is_some() {
                dwell = dwell.min(s.u[i]);
            }
            if s.l[i] > 0 {
                dwell = dwell.min(s.v[i]);
            }
        }
        dwell
    }

    /// Runs the clocks for `dwell` and fires every event whose residual hits
    /// zero: external arrivals by ascending station, then departures by
    /// ascending station.
    pub fn fire(&self, s: &mut MarkovState, dwell: f64, streams: &mut Streams, events: &mut Vec<Event>) {
        events.clear();
        for i in 0..self.d {
            if self.arrivals[i].is_some() {
                s.u[i] -= dwell;
            }
            if s.l[i] > 0 {
                s.v[i] -= dwell;
            }
        }
        s.clock += dwell;
        for i in 0..self.d {
            if let Some(a) = &self.arrivals[i] {
                if s.u[i] <= 0.0 {
                    s.l[i] += 1;
                    s.u[i] = a.sample(&mut streams.arrival[i]);
                    events.push(Event::Arrival { station: i });
                }
            }
        }
        for j in 0..self.d {
            // an idle station's frozen draw is positive, so only busy ones fire
            if s.v[j] <= 0.0 {
                assert!(s.l[j] > 0, "departure from empty station {j}");
                s.l[j] -= 1;
                let x: f64 = streams.routing[j].random();
                let to = self.cum_routing[j].iter().position(|&c| x < c);
                if let Some(k) = to {
                    s.l[k] += 1;
                }
                s.v[j] = self.services[j].sample(&mut streams.service[j]);
                events.push(Event::Departure { from: j, to });
            }
        }
    }
}

/// One transition: returns the dwell and the fired events.
pub fn advance(state: &mut MarkovState, dynamics: &Dynamics, streams: &mut Streams) -> (f64, Vec<Event>) {
    let dwell = dynamics.next_dwell(state);
    let mut events = Vec::new();
    dynamics.fire(state, dwell, streams, &mut events);
    (dwell, events)
}
