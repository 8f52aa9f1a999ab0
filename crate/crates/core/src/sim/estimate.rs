use std::io::Write;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::dynamics::{Dynamics, Event};
use crate::model::{solve_traffic_equation, NetworkSpec};
use crate::rng::Streams;
use crate::stats::{BatchEstimate, WeightedSample};
use crate::{Error, Result};

pub const MIN_BATCHES: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimOptions {
    pub warmup: f64,
    pub horizon: f64,
    pub seed: u64,
    pub batches: usize,
}

impl SimOptions {
    /// 10% warmup and 32 batches.
    pub fn new(horizon: f64, seed: u64) -> Self {
        SimOptions { warmup: 0.1 * horizon, horizon, seed, batches: 32 }
    }

    pub fn check(&self) -> Result<()> {
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(Error::Parameter(format!("horizon must be positive, got {}", self.horizon)));
        }
        if !(self.warmup >= 0.0 && self.warmup < self.horizon) {
            return Err(Error::Parameter(format!(
                "warmup {} must lie in [0, horizon {})",
                self.warmup, self.horizon
            )));
        }
        if self.batches < MIN_BATCHES {
            return Err(Error::Parameter(format!("need at least {MIN_BATCHES} batches, got {}", self.batches)));
        }
        Ok(())
    }
}

/// Post-warmup path counters.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathCounters {
    pub arrivals: Vec<u64>,
    pub departures: Vec<u64>,
    pub busy: Vec<f64>,
    pub idle: Vec<f64>,
    /// `routed[k][j]`: customers moved from `k` to `j`.
    pub routed: Vec<Vec<u64>>,
    /// Largest `|l_j(t) - l_j(t0) - E_j + D_j - sum_k routed_kj|` seen at any
    /// post-warmup event epoch.
    pub replay_max: i64,
}

/// Borrowed view of one recorded dwell piece.
#[derive(Debug, Clone, Copy)]
pub struct Snapshot<'a> {
    pub start: f64,
    pub dwell: f64,
    pub l: &'a [u32],
    pub u: &'a [f64],
    pub v: &'a [f64],
}

/// Dwell-weighted sample of the Markov state after warmup.
///
/// Each record is a maximal interval on which no event fires and that does
/// not cross a batch boundary; `u` and `v` are their values at its start and
/// decrease at unit rate over it (`v_j` only while `l_j > 0`).
#[derive(Debug, Clone)]
pub struct StationaryEstimate {
    pub d: usize,
    pub external: Vec<bool>,
    pub opts: SimOptions,
    pub batch_length: f64,
    start: Vec<f64>,
    dwell: Vec<f64>,
    l: Vec<u32>,
    u: Vec<f64>,
    v: Vec<f64>,
    batch_offsets: Vec<usize>,
    /// Per batch and station.
    pub idle_time: Vec<Vec<f64>>,
    pub arrival_counts: Vec<Vec<u64>>,
    pub departure_counts: Vec<Vec<u64>>,
    /// Queue vector seen by each post-warmup external arrival, with its
    /// station and batch.
    pub arrival_views: Vec<(u32, u32, Vec<u32>)>,
    pub warnings: Vec<String>,
}

impl StationaryEstimate {
    pub fn len(&self) -> usize {
        self.dwell.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dwell.is_empty()
    }

    pub fn batches(&self) -> usize {
        self.batch_offsets.len() - 1
    }

    pub fn snapshot(&self, k: usize) -> Snapshot<'_> {
        let d = self.d;
        Snapshot {
            start: self.start[k],
            dwell: self.dwell[k],
            l: &self.l[k * d..(k + 1) * d],
            u: &self.u[k * d..(k + 1) * d],
            v: &self.v[k * d..(k + 1) * d],
        }
    }

    pub fn batch_range(&self, b: usize) -> Range<usize> {
        self.batch_offsets[b]..self.batch_offsets[b + 1]
    }

    pub fn total_weight(&self) -> f64 {
        self.dwell.iter().sum()
    }

    /// Per-batch sums of `f`, where `f` returns the integral of a functional
    /// over one record's dwell.
    pub fn batch_sums<F: Fn(&Snapshot) -> f64>(&self, f: F) -> Vec<f64> {
        (0..self.batches()).map(|b| self.batch_range(b).map(|k| f(&self.snapshot(k))).sum()).collect()
    }

    /// Vector-valued [`Self::batch_sums`]; result indexed `[component][batch]`.
    pub fn batch_sums_vec<F: Fn(&Snapshot, &mut [f64])>(&self, width: usize, f: F) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; self.batches()]; width];
        let mut buf = vec![0.0; width];
        for b in 0..self.batches() {
            for k in self.batch_range(b) {
                buf.iter_mut().for_each(|x| *x = 0.0);
                f(&self.snapshot(k), &mut buf);
                for (o, x) in out.iter_mut().zip(&buf) {
                    o[b] += x;
                }
            }
        }
        out
    }

    /// Time average of a functional of the state at dwell start.
    pub fn time_average<F: Fn(&Snapshot) -> f64>(&self, f: F) -> BatchEstimate {
        let sums = self.batch_sums(|s| s.dwell * f(s));
        BatchEstimate::from_batches(sums.into_iter().map(|x| x / self.batch_length).collect())
    }

    pub fn idle_fraction(&self, j: usize) -> BatchEstimate {
        BatchEstimate::from_batches(self.idle_time.iter().map(|b| b[j] / self.batch_length).collect())
    }

    pub fn arrival_rate(&self, i: usize) -> BatchEstimate {
        BatchEstimate::from_batches(self.arrival_counts.iter().map(|b| b[i] as f64 / self.batch_length).collect())
    }

    pub fn departure_rate(&self, j: usize) -> BatchEstimate {
        BatchEstimate::from_batches(self.departure_counts.iter().map(|b| b[j] as f64 / self.batch_length).collect())
    }

    pub fn mean_queue(&self, j: usize) -> BatchEstimate {
        self.time_average(|s| s.l[j] as f64)
    }

    /// Time-weighted law of `l_j`; entry `k` is `P(l_j = k)`.
    pub fn queue_pmf(&self, j: usize) -> Vec<f64> {
        let mut pmf = Vec::new();
        for k in 0..self.len() {
            let s = self.snapshot(k);
            let q = s.l[j] as usize;
            if pmf.len() <= q {
                pmf.resize(q + 1, 0.0);
            }
            pmf[q] += s.dwell;
        }
        let total = self.total_weight();
        pmf.iter_mut().for_each(|p| *p /= total);
        pmf
    }

    /// Law of `l_j` seen by external arrivals at station `i`, just before
    /// they join.
    pub fn arrival_pmf(&self, i: usize, j: usize) -> Vec<f64> {
        let mut pmf = Vec::new();
        let mut count = 0usize;
        for (station, _, l) in &self.arrival_views {
            if *station as usize != i {
                continue;
            }
            let q = l[j] as usize;
            if pmf.len() <= q {
                pmf.resize(q + 1, 0.0);
            }
            pmf[q] += 1.0;
            count += 1;
        }
        pmf.iter_mut().for_each(|p| *p /= count.max(1) as f64);
        pmf
    }

    /// Dwell-weighted sample of `scale * l_j`.
    pub fn scaled_queue_sample(&self, j: usize, scale: f64) -> WeightedSample {
        WeightedSample::new((0..self.len()).map(|k| (scale * self.l[k * self.d + j] as f64, self.dwell[k])).collect())
    }

    /// CSV dump: `clock, dwell, l_1..l_d, u_1..u_d, v_1..v_d`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let d = self.d;
        let mut header = vec!["clock".to_string(), "dwell".to_string()];
        for prefix in ["l", "u", "v"] {
            header.extend((1..=d).map(|j| format!("{prefix}_{j}")));
        }
        writeln!(w, "{}", header.join(","))?;
        for k in 0..self.len() {
            let s = self.snapshot(k);
            write!(w, "{},{}", s.start, s.dwell)?;
            for x in s.l {
                write!(w, ",{x}")?;
            }
            for x in s.u.iter().chain(s.v) {
                write!(w, ",{x}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Runs one replication. Deterministic in `(network, opts)`.
pub fn simulate(network: &NetworkSpec, opts: &SimOptions) -> Result<(StationaryEstimate, PathCounters)> {
    opts.check()?;
    let dy = Dynamics::new(network)?;
    let d = dy.d();
    let mut warnings = Vec::new();
    let lambda_a = solve_traffic_equation(&network.external_rates(), &network.routing_matrix()?)?;
    for j in 0..d {
        let rho = lambda_a[j] * network.services[j].mean();
        if rho >= 1.0 {
            warnings.push(format!("station {} has utilisation {rho:.4} >= 1; no stationary law", j + 1));
        }
    }

    let batches = opts.batches;
    let window = opts.horizon - opts.warmup;
    let batch_length = window / batches as f64;
    let boundary = |b: usize| if b == batches { opts.horizon } else { opts.warmup + b as f64 * batch_length };
    let batch_of_event = |t: f64| (((t - opts.warmup) / batch_length).ceil() as usize).clamp(1, batches) - 1;

    let mut streams = Streams::new(opts.seed, d);
    let mut state = dy.initial_state(&mut streams);
    let mut est = StationaryEstimate {
        d,
        external: (0..d).map(|i| dy.is_external(i)).collect(),
        opts: *opts,
        batch_length,
        start: Vec::new(),
        dwell: Vec::new(),
        l: Vec::new(),
        u: Vec::new(),
        v: Vec::new(),
        batch_offsets: vec![0],
        idle_time: vec![vec![0.0; d]; batches],
        arrival_counts: vec![vec![0; d]; batches],
        departure_counts: vec![vec![0; d]; batches],
        arrival_views: Vec::new(),
        warnings,
    };
    let mut counters = PathCounters {
        arrivals: vec![0; d],
        departures: vec![0; d],
        busy: vec![0.0; d],
        idle: vec![0.0; d],
        routed: vec![vec![0; d]; d],
        replay_max: 0,
    };
    let mut l0: Option<Vec<u32>> = None;
    let mut routed_in = vec![0i64; d];
    let mut current_batch = 0usize;
    let mut events = Vec::new();

    loop {
        let t = state.clock;
        let dwell = dy.next_dwell(&state);
        let end = t + dwell;

        // record the part of [t, end) inside the window, split at batch edges
        let mut a = t.max(opts.warmup);
        let stop = end.min(opts.horizon);
        if l0.is_none() && end > opts.warmup {
            l0 = Some(state.l.clone());
        }
        while a < stop {
            while current_batch < batches && a >= boundary(current_batch + 1) {
                current_batch += 1;
                est.batch_offsets.push(est.dwell.len());
            }
            let b = current_batch.min(batches - 1);
            let piece_end = stop.min(boundary(b + 1));
            let shift = a - t;
            est.start.push(a);
            est.dwell.push(piece_end - a);
            est.l.extend_from_slice(&state.l);
            for j in 0..d {
                est.u.push(if dy.is_external(j) { state.u[j] - shift } else { 0.0 });
                est.v.push(if state.l[j] > 0 { state.v[j] - shift } else { state.v[j] });
                if state.l[j] > 0 {
                    counters.busy[j] += piece_end - a;
                } else {
                    counters.idle[j] += piece_end - a;
                    est.idle_time[b][j] += piece_end - a;
                }
            }
            if piece_end >= boundary(b + 1) && b + 1 < batches {
                current_batch = b + 1;
                est.batch_offsets.push(est.dwell.len());
            }
            a = piece_end;
        }
        if end > opts.horizon {
            break;
        }

        let before = state.l.clone();
        dy.fire(&mut state, dwell, &mut streams, &mut events);
        if end > opts.warmup {
            let b = batch_of_event(end);
            for ev in &events {
                match *ev {
                    Event::Arrival { station } => {
                        counters.arrivals[station] += 1;
                        est.arrival_counts[b][station] += 1;
                        est.arrival_views.push((station as u32, b as u32, before.clone()));
                    }
                    Event::Departure { from, to } => {
                        counters.departures[from] += 1;
                        est.departure_counts[b][from] += 1;
                        if let Some(k) = to {
                            counters.routed[from][k] += 1;
                            routed_in[k] += 1;
                        }
                    }
                }
            }
            let start = l0.as_ref().expect("window started");
            for j in 0..d {
                let r = state.l[j] as i64 - start[j] as i64 - counters.arrivals[j] as i64
                    + counters.departures[j] as i64
                    - routed_in[j];
                counters.replay_max = counters.replay_max.max(r.abs());
            }
        }
    }
    while est.batch_offsets.len() < batches + 1 {
        est.batch_offsets.push(est.dwell.len());
    }
    Ok((est, counters))
}
