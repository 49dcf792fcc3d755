//! Noisy first-order consensus `x' = −L x + ρ`, integrated with explicit Euler.
//!
//! The perturbation `ρ` is pre-generated at the sampling rate (one value per
//! node per recorded sample) and held constant over the integrator substeps
//! between two samples.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{self, Graph};
use crate::noise::{self, FrequencyBand, NoiseConfig, Signal};
use crate::series::TimeSeriesMatrix;

/// Starting state of the agents.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialState {
    /// Independent uniform draws in `[0, 1]`.
    Uniform {
        #[serde(default)]
        seed: u64,
    },
    Explicit { values: Vec<f64> },
}

impl InitialState {
    pub fn resolve(&self, n: usize) -> Result<Vec<f64>> {
        match self {
            InitialState::Uniform { seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                Ok((0..n).map(|_| rng.random::<f64>()).collect())
            }
            InitialState::Explicit { values } => {
                if values.len() != n {
                    return Err(Error::param(format!(
                        "initial state has {} values for {n} nodes",
                        values.len()
                    )));
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(Error::param("initial state must be finite"));
                }
                Ok(values.clone())
            }
        }
    }
}

/// Simulation settings. One "step" is `samples_per_step` samples spaced
/// `sample_dt` apart; each sample interval is split into `substeps` Euler steps.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub sample_dt: f64,
    pub substeps: usize,
    pub steps: usize,
    pub samples_per_step: usize,
    /// Leading samples the correlation stage drops; the simulator keeps them.
    pub transient_discard: usize,
    pub initial_state: InitialState,
    /// `None` runs the noise-free protocol.
    pub noise: Option<NoiseConfig>,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            sample_dt: 0.1,
            substeps: 10,
            steps: 150,
            samples_per_step: 10,
            transient_discard: 30,
            initial_state: InitialState::Uniform { seed: 0 },
            noise: Some(NoiseConfig {
                sigma2: 0.01,
                band: FrequencyBand::FULL,
                seed: 0,
            }),
        }
    }
}

/// Samples kept after the transient when the record is too short to be useful.
const MIN_WINDOW: usize = 2;

impl SimConfig {
    pub fn sample_count(&self) -> usize {
        self.steps * self.samples_per_step
    }

    /// Euler step `sample_dt / substeps`.
    pub fn integration_step(&self) -> f64 {
        self.sample_dt / self.substeps as f64
    }

    /// Set `steps` so that the record holds at least `samples` samples.
    pub fn with_samples(mut self, samples: usize) -> Self {
        self.steps = samples.div_ceil(self.samples_per_step.max(1));
        self
    }

    pub fn noise_free(mut self) -> Self {
        self.noise = None;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sample_dt.is_finite() && self.sample_dt > 0.0) {
            return Err(Error::param(format!("sample_dt must be positive, got {}", self.sample_dt)));
        }
        if self.substeps == 0 || self.samples_per_step == 0 || self.steps == 0 {
            return Err(Error::param("substeps, samples_per_step and steps must be positive"));
        }
        if self.sample_count() < self.transient_discard + MIN_WINDOW {
            return Err(Error::param(format!(
                "{} samples leave no window after discarding {}",
                self.sample_count(),
                self.transient_discard
            )));
        }
        if let Some(noise) = &self.noise {
            noise.validate()?;
        }
        Ok(())
    }
}

/// Integrate the consensus dynamics on `g` and return every sample, transient included.
pub fn simulate_consensus(g: &Graph, cfg: &SimConfig) -> Result<TimeSeriesMatrix> {
    cfg.validate()?;
    let n = g.node_count();
    if n == 0 {
        return Err(Error::param("graph has no nodes"));
    }
    let h = cfg.integration_step();
    let lambda_n = graph::lambda_max(g)?;
    if lambda_n > 0.0 && h >= 2.0 / lambda_n {
        return Err(Error::param(format!(
            "Euler step {h} violates the stability bound 2/λ_N = {:.6} (λ_N = {lambda_n:.6}); \
             increase substeps or reduce sample_dt",
            2.0 / lambda_n
        )));
    }

    let samples = cfg.sample_count();
    let forcing: Vec<Vec<f64>> = match &cfg.noise {
        Some(noise_cfg) => (0..n)
            .map(|i| noise::noise_stream(samples, noise_cfg, i as u64))
            .collect::<Result<_>>()?,
        None => Vec::new(),
    };

    let neighbors = g.adjacency_lists();
    let mut x = cfg.initial_state.resolve(n)?;
    let mut next = vec![0.0; n];
    let mut out = DMatrix::zeros(n, samples);
    for k in 0..samples {
        out.column_mut(k).copy_from_slice(&x);
        for _ in 0..cfg.substeps {
            for i in 0..n {
                let coupling: f64 = neighbors[i].iter().map(|&j| x[j] - x[i]).sum();
                let rho = forcing.get(i).map_or(0.0, |f| f[k]);
                next[i] = x[i] + h * (coupling + rho);
            }
            std::mem::swap(&mut x, &mut next);
        }
        if let Some(i) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::Unstable {
                step: k,
                detail: format!("node {i} state is {}", x[i]),
            });
        }
    }
    TimeSeriesMatrix::new(out, cfg.sample_dt)
}

/// Per-sample spread `max_i x_i − min_i x_i`.
pub fn consensus_disagreement(ts: &TimeSeriesMatrix) -> Signal {
    let samples = ts
        .values()
        .column_iter()
        .map(|c| c.max() - c.min())
        .collect();
    Signal {
        samples,
        dt: ts.dt(),
    }
}

/// Least-squares slope of `ln(spread)` against time over samples `[from, to)`.
pub fn disagreement_decay_rate(spread: &Signal, from: usize, to: usize) -> Result<f64> {
    if to > spread.len() || from + 2 > to {
        return Err(Error::param(format!("bad fit window [{from}, {to})")));
    }
    let pts: Vec<(f64, f64)> = (from..to)
        .filter(|&k| spread.samples[k] > 0.0)
        .map(|k| (k as f64 * spread.dt, spread.samples[k].ln()))
        .collect();
    if pts.len() < 2 {
        return Err(Error::numerical("spread vanished inside the fit window"));
    }
    let m = pts.len() as f64;
    let (mx, my) = pts
        .iter()
        .fold((0.0, 0.0), |(a, b), (x, y)| (a + x / m, b + y / m));
    let (sxy, sxx) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| {
        (a + (x - mx) * (y - my), b + (x - mx) * (x - mx))
    });
    Ok(sxy / sxx)
}
