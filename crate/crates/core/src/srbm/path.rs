use std::io::Write;
use std::ops::Range;

use rand::distr::Open01;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::lcp::Reflector;
use crate::model::SrbmParams;
use crate::rng::{stream, StreamKind};
use crate::stats::WeightedSample;
use crate::{Error, Result};

/// How a free Gaussian step is pushed back into the orthant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReflectionScheme {
    /// Reflect the end point of the Euler step: `z = W + R y` with
    /// `W = Z + mu h + sqrt(h) A xi`.
    Projected,
    /// Reflect the per-coordinate minimum of the Brownian bridge across the
    /// step, then add the free increment: `z = Z + X + R y` where `y` solves
    /// the LCP for `Z + min X`. Exact for `d = 1` (and for diagonal `R`), so
    /// it removes the boundary-layer bias of the projected scheme.
    #[default]
    Bridge,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SrbmOptions {
    pub h: f64,
    pub horizon: f64,
    pub burn_in: f64,
    pub seed: u64,
    /// Keep every `record_every`-th state.
    pub record_every: usize,
    pub batches: usize,
    pub scheme: ReflectionScheme,
}

impl SrbmOptions {
    /// `h = 1e-3`, 10% burn-in, every 10th state, 32 batches.
    pub fn new(horizon: f64, seed: u64) -> Self {
        SrbmOptions {
            h: 1e-3,
            horizon,
            burn_in: 0.1 * horizon,
            seed,
            record_every: 10,
            batches: 32,
            scheme: ReflectionScheme::default(),
        }
    }

    pub fn check(&self) -> Result<()> {
        if !(self.h.is_finite() && self.h > 0.0) {
            return Err(Error::Parameter(format!("step h must be positive, got {}", self.h)));
        }
        if !(self.horizon > self.burn_in && self.burn_in >= 0.0) {
            return Err(Error::Parameter(format!(
                "need 0 <= burn_in < horizon, got {} and {}",
                self.burn_in, self.horizon
            )));
        }
        if self.record_every == 0 || self.batches < 2 {
            return Err(Error::Parameter("record_every must be >= 1 and batches >= 2".into()));
        }
        let kept = ((self.horizon - self.burn_in) / self.h).round() as usize / self.record_every;
        if kept < self.batches {
            return Err(Error::Parameter("horizon too short for the requested batches".into()));
        }
        Ok(())
    }
}

/// Post-burn-in SRBM path.
///
/// `states` holds every `record_every`-th state; each carries weight
/// `record_every * h`. Every step with a positive regulator increment is
/// kept in `boundary_*`: its increment `dy` and the state at which the push
/// happened, whose pushed coordinates are 0.
#[derive(Debug, Clone)]
pub struct SrbmSample {
    pub d: usize,
    pub opts: SrbmOptions,
    pub states: Vec<f64>,
    state_offsets: Vec<usize>,
    pub boundary_states: Vec<f64>,
    pub boundary_dy: Vec<f64>,
    boundary_offsets: Vec<usize>,
    pub total_dy: Vec<f64>,
    pub steps: usize,
}

impl SrbmSample {
    pub fn state_count(&self) -> usize {
        self.states.len() / self.d
    }

    pub fn state(&self, k: usize) -> &[f64] {
        &self.states[k * self.d..(k + 1) * self.d]
    }

    pub fn boundary_count(&self) -> usize {
        self.boundary_dy.len() / self.d
    }

    pub fn boundary(&self, k: usize) -> (&[f64], &[f64]) {
        let r = k * self.d..(k + 1) * self.d;
        (&self.boundary_states[r.clone()], &self.boundary_dy[r])
    }

    pub fn batches(&self) -> usize {
        self.opts.batches
    }

    pub fn state_range(&self, b: usize) -> Range<usize> {
        self.state_offsets[b]..self.state_offsets[b + 1]
    }

    pub fn boundary_range(&self, b: usize) -> Range<usize> {
        self.boundary_offsets[b]..self.boundary_offsets[b + 1]
    }

    /// Time span of the kept path.
    pub fn window(&self) -> f64 {
        self.steps as f64 * self.opts.h
    }

    pub fn batch_length(&self) -> f64 {
        self.window() / self.batches() as f64
    }

    pub fn marginal(&self, j: usize) -> WeightedSample {
        WeightedSample::new((0..self.state_count()).map(|k| (self.state(k)[j], 1.0)).collect())
    }

    /// CSV of the kept states: `step, z_1..z_d`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let cols: Vec<String> = (1..=self.d).map(|j| format!("z_{j}")).collect();
        writeln!(w, "step,{}", cols.join(","))?;
        for k in 0..self.state_count() {
            let z: Vec<String> = self.state(k).iter().map(|x| x.to_string()).collect();
            writeln!(w, "{},{}", (k + 1) * self.opts.record_every, z.join(","))?;
        }
        Ok(())
    }
}

/// One step of the scheme, reusable across a path.
#[derive(Debug, Clone)]
pub struct Stepper {
    d: usize,
    scheme: ReflectionScheme,
    refl: Reflector,
    r: Vec<f64>,
    chol: Vec<f64>,
    drift: Vec<f64>,
    var: Vec<f64>,
    sqrt_h: f64,
    x: Vec<f64>,
    q: Vec<f64>,
    zn: Vec<f64>,
}

impl Stepper {
    pub fn new(params: &SrbmParams, h: f64, scheme: ReflectionScheme) -> Result<Self> {
        let d = params.d();
        let flat = |m: &nalgebra::DMatrix<f64>| -> Vec<f64> {
            (0..d).flat_map(|i| (0..d).map(move |j| (i, j))).map(|ij| m[ij]).collect()
        };
        Ok(Stepper {
            d,
            scheme,
            refl: Reflector::new(&params.r)?,
            r: flat(&params.r),
            chol: flat(&params.chol),
            drift: params.mu.iter().map(|m| m * h).collect(),
            var: (0..d).map(|j| params.sigma[(j, j)] * h).collect(),
            sqrt_h: h.sqrt(),
            x: vec![0.0; d],
            q: vec![0.0; d],
            zn: vec![0.0; d],
        })
    }

    /// Advances `z` given standard normals `xi` and uniforms `u` (the latter
    /// only used by the bridge scheme). Writes the regulator increment to
    /// `y` and the state at which it acted to `touch`; returns whether any
    /// push happened.
    pub fn step(&mut self, z: &mut [f64], xi: &[f64], u: &[f64], y: &mut [f64], touch: &mut [f64]) -> Result<bool> {
        let d = self.d;
        for i in 0..d {
            let noise: f64 = (0..=i).map(|k| self.chol[i * d + k] * xi[k]).sum();
            self.x[i] = self.drift[i] + self.sqrt_h * noise;
        }
        match self.scheme {
            ReflectionScheme::Projected => {
                for i in 0..d {
                    self.q[i] = z[i] + self.x[i];
                }
                self.refl.solve(&self.q, z, y)?;
                touch.copy_from_slice(z);
            }
            ReflectionScheme::Bridge => {
                for i in 0..d {
                    let x = self.x[i];
                    let low = 0.5 * (x - (x * x - 2.0 * self.var[i] * u[i].ln()).sqrt());
                    self.q[i] = z[i] + low;
                }
                self.refl.solve(&self.q, &mut self.zn, y)?;
                for i in 0..d {
                    let push: f64 = (0..d).map(|k| self.r[i * d + k] * y[k]).sum();
                    z[i] = (z[i] + self.x[i] + push).max(0.0);
                }
                for i in 0..d {
                    touch[i] = if y[i] > 0.0 { 0.0 } else { z[i] };
                }
            }
        }
        Ok(y.iter().any(|&v| v > 0.0))
    }
}

/// Euler scheme with one LCP reflection per step, started at the origin.
pub fn simulate_srbm(params: &SrbmParams, opts: &SrbmOptions) -> Result<SrbmSample> {
    opts.check()?;
    let d = params.d();
    let mut stepper = Stepper::new(params, opts.h, opts.scheme)?;

    let burn_steps = (opts.burn_in / opts.h).round() as usize;
    let kept_steps = ((opts.horizon - opts.burn_in) / opts.h).round() as usize;
    let kept_steps = kept_steps - kept_steps % opts.record_every;
    let batch_of = |step: usize| (step * opts.batches / kept_steps).min(opts.batches - 1);

    let mut gauss = stream(opts.seed, StreamKind::Gaussian, 0);
    let mut unif = stream(opts.seed, StreamKind::Gaussian, 1);
    let mut z = vec![0.0; d];
    let mut xi = vec![0.0; d];
    let mut u = vec![0.5; d];
    let mut y = vec![0.0; d];
    let mut touch = vec![0.0; d];

    let mut sample = SrbmSample {
        d,
        opts: *opts,
        states: Vec::with_capacity(kept_steps / opts.record_every * d),
        state_offsets: vec![0],
        boundary_states: Vec::new(),
        boundary_dy: Vec::new(),
        boundary_offsets: vec![0],
        total_dy: vec![0.0; d],
        steps: kept_steps,
    };
    let mut batch = 0usize;

    for step in 0..burn_steps + kept_steps {
        for v in xi.iter_mut() {
            *v = gauss.sample(StandardNormal);
        }
        if opts.scheme == ReflectionScheme::Bridge {
            for v in u.iter_mut() {
                *v = unif.sample(Open01);
            }
        }
        let pushed = stepper.step(&mut z, &xi, &u, &mut y, &mut touch)?;
        if step < burn_steps {
            continue;
        }
        let k = step - burn_steps;
        let b = batch_of(k);
        while batch < b {
            batch += 1;
            sample.state_offsets.push(sample.states.len() / d);
            sample.boundary_offsets.push(sample.boundary_dy.len() / d);
        }
        if pushed {
            sample.boundary_states.extend_from_slice(&touch);
            sample.boundary_dy.extend_from_slice(&y);
            for i in 0..d {
                sample.total_dy[i] += y[i];
            }
        }
        if (k + 1) % opts.record_every == 0 {
            sample.states.extend_from_slice(&z);
        }
    }
    while sample.state_offsets.len() < opts.batches + 1 {
        sample.state_offsets.push(sample.states.len() / d);
        sample.boundary_offsets.push(sample.boundary_dy.len() / d);
    }
    Ok(sample)
}
