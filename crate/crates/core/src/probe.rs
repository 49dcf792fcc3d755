//! Laplacian eigenvalue estimation from the oscillator protocol
//!
//! ```text
//! x_i' =  z_i + Σ_j a_ij (z_i − z_j)
//! z_i' = −x_i − Σ_j a_ij (x_i − x_j)
//! ```
//!
//! Every trajectory is a sum of sinusoids at angular frequencies `1 + λ_j`, so
//! spectral peak locations give the distinct eigenvalues (multiplicities are
//! lost). The system is integrated with the implicit midpoint rule, which is
//! symplectic and conserves `Σ x_i² + z_i²` exactly; it maps a continuous
//! angular frequency `Ω` to the per-step rotation `θ = 2·atan(Ω·dt/2)`, and
//! the estimator undoes that warp.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{laplacian, Graph};
use crate::series::TimeSeriesMatrix;

/// Oscillator protocol state.
#[derive(Clone, Debug, PartialEq)]
pub struct OscillatorState {
    pub x: Vec<f64>,
    pub z: Vec<f64>,
}

impl OscillatorState {
    /// `x` uniform in `[−1, 1]`, `z = 0`.
    pub fn random(n: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        OscillatorState {
            x: (0..n).map(|_| rng.random_range(-1.0..=1.0)).collect(),
            z: vec![0.0; n],
        }
    }

    pub fn energy(&self) -> f64 {
        self.x.iter().chain(&self.z).map(|v| v * v).sum()
    }
}

/// How a discrete spectral line maps back to a continuous angular frequency.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrequencyMap {
    /// Samples of a continuous-time signal: `Ω = 2π f / dt`.
    Continuous,
    /// Output of [`simulate_oscillator_protocol`]: `Ω = (2/dt)·tan(π f)`.
    #[default]
    Midpoint,
}

impl FrequencyMap {
    /// Angular frequency for `f` cycles per sample.
    fn omega(self, f: f64, dt: f64) -> f64 {
        match self {
            FrequencyMap::Continuous => 2.0 * PI * f / dt,
            FrequencyMap::Midpoint => 2.0 / dt * (PI * f).tan(),
        }
    }

    /// dΩ/df.
    fn slope(self, f: f64, dt: f64) -> f64 {
        match self {
            FrequencyMap::Continuous => 2.0 * PI / dt,
            FrequencyMap::Midpoint => 2.0 * PI / dt / (PI * f).cos().powi(2),
        }
    }
}

/// Upper bound on λ_N from degrees only: `λ_N ≤ 2·d_max`.
fn lambda_upper_bound(g: &Graph) -> f64 {
    2.0 * g.max_degree() as f64
}

/// Integrate the protocol from `init` and return the `(x, z)` records.
///
/// `dt` must keep the fastest line `(1 + λ_N)/2π` below the Nyquist rate; the
/// check uses the degree bound `λ_N ≤ 2·d_max`, i.e. `dt < π / (1 + 2·d_max)`.
pub fn simulate_oscillator_protocol(
    g: &Graph,
    init: &OscillatorState,
    dt: f64,
    total_samples: usize,
) -> Result<(TimeSeriesMatrix, TimeSeriesMatrix)> {
    let n = g.node_count();
    if init.x.len() != n || init.z.len() != n {
        return Err(Error::param(format!("initial state does not match {n} nodes")));
    }
    if total_samples < 2 {
        return Err(Error::param("need at least two samples"));
    }
    let bound = PI / (1.0 + lambda_upper_bound(g));
    if !(dt.is_finite() && dt > 0.0) || dt >= bound {
        return Err(Error::param(format!(
            "dt = {dt} would alias the top spectral line; need 0 < dt < {bound:.6}"
        )));
    }

    // K = I + L; generator J = [[0, K], [−K, 0]]
    let k = laplacian(g) + DMatrix::identity(n, n);
    let mut j = DMatrix::zeros(2 * n, 2 * n);
    j.view_mut((0, n), (n, n)).copy_from(&k);
    j.view_mut((n, 0), (n, n)).copy_from(&(-&k));
    let eye = DMatrix::<f64>::identity(2 * n, 2 * n);
    let half = &j * (0.5 * dt);
    let lu = (&eye - &half).lu();
    let propagator = lu
        .solve(&(&eye + &half))
        .ok_or_else(|| Error::numerical("midpoint propagator is singular"))?;

    let mut state = DVector::from_iterator(2 * n, init.x.iter().chain(&init.z).copied());
    let mut xs = DMatrix::zeros(n, total_samples);
    let mut zs = DMatrix::zeros(n, total_samples);
    for s in 0..total_samples {
        xs.column_mut(s).copy_from(&state.rows(0, n));
        zs.column_mut(s).copy_from(&state.rows(n, n));
        state = &propagator * &state;
    }
    Ok((TimeSeriesMatrix::new(xs, dt)?, TimeSeriesMatrix::new(zs, dt)?))
}

/// Distinct eigenvalue estimates and the eigenvalue width of one FFT bin.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigenvalueEstimate {
    #[serde(rename = "lambda")]
    pub values: Vec<f64>,
    pub resolution: f64,
}

impl EigenvalueEstimate {
    pub fn lambda_max(&self) -> Option<f64> {
        self.values.last().copied()
    }
}

/// Peak picking settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PeakConfig {
    /// Peaks below this fraction of the largest magnitude are ignored.
    pub threshold: f64,
    pub min_separation_bins: usize,
    pub frequency_map: FrequencyMap,
}

impl Default for PeakConfig {
    fn default() -> Self {
        PeakConfig {
            threshold: 0.05,
            min_separation_bins: 2,
            frequency_map: FrequencyMap::Midpoint,
        }
    }
}

fn hann(len: usize) -> Vec<f64> {
    (0..len)
        .map(|n| 0.5 - 0.5 * (2.0 * PI * n as f64 / len as f64).cos())
        .collect()
}

/// Node-averaged one-sided power spectrum of Hann-windowed, mean-removed rows.
fn averaged_power(runs: &[&TimeSeriesMatrix]) -> Vec<f64> {
    let len = runs[0].sample_count();
    let window = hann(len);
    let fft = FftPlanner::new().plan_fft_forward(len);
    let mut acc = vec![0.0; len / 2 + 1];
    let mut rows = 0usize;
    let mut buf = vec![Complex::new(0.0, 0.0); len];
    for ts in runs {
        for row in ts.values().row_iter() {
            let mean = row.mean();
            for (b, (v, w)) in buf.iter_mut().zip(row.iter().zip(&window)) {
                *b = Complex::new((v - mean) * w, 0.0);
            }
            fft.process(&mut buf);
            for (a, b) in acc.iter_mut().zip(&buf) {
                *a += b.norm_sqr();
            }
            rows += 1;
        }
    }
    acc.iter_mut().for_each(|a| *a /= rows as f64);
    acc
}

/// Local maxima of `mag` above `threshold · max`, closer ones than
/// `min_sep` bins suppressed in favour of the taller peak. Ascending bins.
fn find_peaks(mag: &[f64], threshold: f64, min_sep: usize) -> Vec<usize> {
    let top = mag.iter().copied().fold(0.0, f64::max);
    if top <= 0.0 {
        return Vec::new();
    }
    let mut candidates: Vec<usize> = (1..mag.len().saturating_sub(1))
        .filter(|&k| mag[k] > mag[k - 1] && mag[k] >= mag[k + 1] && mag[k] >= threshold * top)
        .collect();
    candidates.sort_by(|&a, &b| mag[b].total_cmp(&mag[a]).then(a.cmp(&b)));
    let mut kept: Vec<usize> = Vec::new();
    for c in candidates {
        if kept.iter().all(|&k| k.abs_diff(c) >= min_sep) {
            kept.push(c);
        }
    }
    kept.sort_unstable();
    kept
}

/// Sub-bin offset in `(−0.5, 0.5)` from a parabola through the log-magnitudes.
fn parabolic_offset(a: f64, b: f64, c: f64) -> f64 {
    let (la, lb, lc) = (a.max(f64::MIN_POSITIVE).ln(), b.ln(), c.max(f64::MIN_POSITIVE).ln());
    let denom = la - 2.0 * lb + lc;
    if denom.abs() < 1e-300 {
        return 0.0;
    }
    (0.5 * (la - lc) / denom).clamp(-0.5, 0.5)
}

/// Estimate distinct Laplacian eigenvalues from one protocol record.
pub fn estimate_eigenvalues_fft(ts: &TimeSeriesMatrix, cfg: &PeakConfig) -> Result<EigenvalueEstimate> {
    estimate_eigenvalues_fft_averaged(&[ts], cfg)
}

/// As [`estimate_eigenvalues_fft`], averaging the power spectra of several
/// records (all with the same length and `dt`).
pub fn estimate_eigenvalues_fft_averaged(
    runs: &[&TimeSeriesMatrix],
    cfg: &PeakConfig,
) -> Result<EigenvalueEstimate> {
    let first = runs
        .first()
        .ok_or_else(|| Error::param("no trajectories to analyse"))?;
    let (len, dt) = (first.sample_count(), first.dt());
    if runs.iter().any(|r| r.sample_count() != len || r.dt() != dt) {
        return Err(Error::param("records differ in length or sampling interval"));
    }
    if len < 8 {
        return Err(Error::param(format!("{len} samples are too few for spectral estimation")));
    }
    if !(cfg.threshold > 0.0 && cfg.threshold < 1.0) {
        return Err(Error::param(format!("peak threshold must lie in (0, 1), got {}", cfg.threshold)));
    }

    let mag: Vec<f64> = averaged_power(runs).into_iter().map(f64::sqrt).collect();
    let peaks = find_peaks(&mag, cfg.threshold, cfg.min_separation_bins.max(1));
    if peaks.is_empty() {
        return Err(Error::numerical("no spectral peaks found"));
    }

    let bin = 1.0 / len as f64;
    let mut values: Vec<f64> = Vec::with_capacity(peaks.len());
    let mut resolution = 0.0f64;
    for &k in &peaks {
        let delta = parabolic_offset(mag[k - 1], mag[k], mag[k + 1]);
        let f = (k as f64 + delta) * bin;
        values.push(cfg.frequency_map.omega(f, dt) - 1.0);
        resolution = resolution.max(cfg.frequency_map.slope(f, dt) * bin);
    }
    if let Some(&bad) = values.iter().find(|&&v| v < -resolution) {
        return Err(Error::numerical(format!(
            "spectral line implies a negative eigenvalue {bad:.6} (resolution {resolution:.6})"
        )));
    }
    values.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    Ok(EigenvalueEstimate { values, resolution })
}

/// Parameters for [`estimate_lambda_max`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeParams {
    pub dt: f64,
    pub samples: usize,
    /// Independent random initial states whose spectra are averaged.
    pub restarts: usize,
    pub seed: u64,
    pub peaks: PeakConfig,
}

impl Default for ProbeParams {
    fn default() -> Self {
        ProbeParams {
            dt: 0.1,
            samples: 8192,
            restarts: 4,
            seed: 0,
            peaks: PeakConfig::default(),
        }
    }
}

/// λ_N estimate with its bin-width error bound.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LambdaEstimate {
    pub value: f64,
    pub error_bound: f64,
    pub spectrum: EigenvalueEstimate,
}

/// Run the protocol `restarts` times and return all distinct eigenvalue lines.
pub fn probe_spectrum(g: &Graph, params: &ProbeParams) -> Result<EigenvalueEstimate> {
    if params.restarts == 0 {
        return Err(Error::param("restarts must be positive"));
    }
    let mut records = Vec::with_capacity(2 * params.restarts);
    for r in 0..params.restarts {
        let init = OscillatorState::random(g.node_count(), params.seed.wrapping_add(r as u64));
        let (x, z) = simulate_oscillator_protocol(g, &init, params.dt, params.samples)?;
        records.push(x);
        records.push(z);
    }
    let refs: Vec<&TimeSeriesMatrix> = records.iter().collect();
    estimate_eigenvalues_fft_averaged(&refs, &params.peaks)
}

/// Probe → FFT → largest line.
pub fn estimate_lambda_max(g: &Graph, params: &ProbeParams) -> Result<LambdaEstimate> {
    let spectrum = probe_spectrum(g, params)?;
    let value = spectrum
        .lambda_max()
        .ok_or_else(|| Error::numerical("no spectral peaks found"))?;
    Ok(LambdaEstimate {
        value,
        error_bound: spectrum.resolution,
        spectrum,
    })
}
