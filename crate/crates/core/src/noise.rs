//! Band-limited Gaussian perturbations, FIR low-pass recovery and Welch PSD.

use std::f64::consts::PI;
use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Order of the linear-phase FIR filters (taps = order + 1).
pub const DEFAULT_FILTER_ORDER: usize = 64;

/// Normalized frequency interval `[lo, hi]` in cycles per sample, `0 <= lo < hi <= 0.5`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 2]", into = "[f64; 2]")]
pub struct FrequencyBand {
    lo: f64,
    hi: f64,
}

impl FrequencyBand {
    /// The whole Nyquist range; noise in this band is white.
    pub const FULL: FrequencyBand = FrequencyBand { lo: 0.0, hi: 0.5 };
    /// High band used for the removable perturbation.
    pub const HIGH: FrequencyBand = FrequencyBand { lo: 0.35, hi: 0.49 };

    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite()) || lo < 0.0 || hi > 0.5 || lo >= hi {
            return Err(Error::param(format!(
                "frequency band must satisfy 0 <= lo < hi <= 0.5, got [{lo}, {hi}]"
            )));
        }
        Ok(FrequencyBand { lo, hi })
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn is_full(&self) -> bool {
        self.lo == 0.0 && self.hi == 0.5
    }

    pub fn widened(&self, margin: f64) -> (f64, f64) {
        ((self.lo - margin).max(0.0), (self.hi + margin).min(0.5))
    }
}

impl TryFrom<[f64; 2]> for FrequencyBand {
    type Error = Error;
    fn try_from(v: [f64; 2]) -> Result<Self> {
        FrequencyBand::new(v[0], v[1])
    }
}

impl From<FrequencyBand> for [f64; 2] {
    fn from(b: FrequencyBand) -> Self {
        [b.lo, b.hi]
    }
}

/// Injected perturbation: variance `sigma2`, spectral support `band`, seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    pub sigma2: f64,
    #[serde(default = "default_band")]
    pub band: FrequencyBand,
    #[serde(default)]
    pub seed: u64,
}

fn default_band() -> FrequencyBand {
    FrequencyBand::HIGH
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig {
            sigma2: 0.01,
            band: FrequencyBand::HIGH,
            seed: 0,
        }
    }
}

impl NoiseConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma2.is_finite() && self.sigma2 > 0.0) {
            return Err(Error::param(format!("sigma2 must be positive, got {}", self.sigma2)));
        }
        FrequencyBand::new(self.band.lo, self.band.hi).map(|_| ())
    }
}

/// Uniformly sampled real signal.
#[derive(Clone, Debug, PartialEq)]
pub struct Signal {
    pub samples: Vec<f64>,
    pub dt: f64,
}

impl Signal {
    pub fn new(samples: Vec<f64>, dt: f64) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::param(format!("sampling interval must be positive, got {dt}")));
        }
        if samples.is_empty() {
            return Err(Error::param("signal must have at least one sample"));
        }
        Ok(Signal { samples, dt })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.samples.iter().sum::<f64>() / self.samples.len() as f64
    }

    /// Population variance.
    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.samples.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / self.samples.len() as f64
    }

    pub fn rms(&self) -> f64 {
        (self.samples.iter().map(|v| v * v).sum::<f64>() / self.samples.len() as f64).sqrt()
    }

    /// `t,value` CSV.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,value\n");
        for (k, v) in self.samples.iter().enumerate() {
            let _ = writeln!(out, "{},{}", k as f64 * self.dt, v);
        }
        out
    }
}

/// Low-pass output plus the constant group delay of the linear-phase filter.
#[derive(Clone, Debug)]
pub struct Filtered {
    pub signal: Signal,
    pub group_delay: usize,
}

fn hamming(len: usize) -> Vec<f64> {
    if len == 1 {
        return vec![1.0];
    }
    let m = (len - 1) as f64;
    (0..len).map(|n| 0.54 - 0.46 * (2.0 * PI * n as f64 / m).cos()).collect()
}

/// Ideal low-pass impulse response (cutoff in cycles/sample) centred on the tap array.
fn sinc_lowpass(cutoff: f64, len: usize) -> Vec<f64> {
    let centre = (len - 1) as f64 / 2.0;
    (0..len)
        .map(|n| {
            let x = n as f64 - centre;
            if x == 0.0 {
                2.0 * cutoff
            } else {
                (2.0 * PI * cutoff * x).sin() / (PI * x)
            }
        })
        .collect()
}

/// Windowed-sinc low-pass with unit DC gain.
pub fn lowpass_taps(cutoff: f64, order: usize) -> Result<Vec<f64>> {
    if !(cutoff > 0.0 && cutoff < 0.5) {
        return Err(Error::param(format!("cutoff must lie in (0, 0.5), got {cutoff}")));
    }
    if order == 0 || !order.is_multiple_of(2) {
        return Err(Error::param(format!("filter order must be even and positive, got {order}")));
    }
    let len = order + 1;
    let mut taps: Vec<f64> = sinc_lowpass(cutoff, len)
        .into_iter()
        .zip(hamming(len))
        .map(|(h, w)| h * w)
        .collect();
    let dc: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= dc);
    Ok(taps)
}

/// Windowed-sinc band-pass for `band`: difference of two ideal low-passes.
pub fn bandpass_taps(band: FrequencyBand, order: usize) -> Result<Vec<f64>> {
    if order == 0 || !order.is_multiple_of(2) {
        return Err(Error::param(format!("filter order must be even and positive, got {order}")));
    }
    let len = order + 1;
    // Hamming main lobe is ~3.3/len wide; anything narrower is not a band.
    let min_width = 3.3 / len as f64;
    if band.hi - band.lo < min_width {
        return Err(Error::param(format!(
            "band [{}, {}] narrower than the order-{order} filter transition ({min_width:.3})",
            band.lo, band.hi
        )));
    }
    let hi = sinc_lowpass(band.hi, len);
    let lo = if band.lo > 0.0 {
        sinc_lowpass(band.lo, len)
    } else {
        vec![0.0; len]
    };
    Ok(hi
        .iter()
        .zip(&lo)
        .zip(hamming(len))
        .map(|((h, l), w)| (h - l) * w)
        .collect())
}

/// Causal FIR filtering; samples before the start repeat the first sample.
fn fir_filter(taps: &[f64], x: &[f64]) -> Vec<f64> {
    let first = x[0];
    (0..x.len())
        .map(|k| {
            taps.iter()
                .enumerate()
                .map(|(m, h)| h * if m <= k { x[k - m] } else { first })
                .sum()
        })
        .collect()
}

/// Seeded unit-variance Gaussian stream; `stream` selects an independent
/// ChaCha stream under the same seed.
pub(crate) fn white_gaussian(len: usize, seed: u64, stream: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    (0..len).map(|_| StandardNormal.sample(&mut rng)).collect()
}

pub(crate) fn noise_stream(length: usize, cfg: &NoiseConfig, stream: u64) -> Result<Vec<f64>> {
    cfg.validate()?;
    if length < 2 {
        return Err(Error::param("noise needs at least two samples"));
    }
    let mut out = if cfg.band.is_full() {
        white_gaussian(length, cfg.seed, stream)
    } else {
        let taps = bandpass_taps(cfg.band, DEFAULT_FILTER_ORDER)?;
        if length < taps.len() {
            return Err(Error::param(format!(
                "band-limited noise needs at least {} samples (filter warm-up), got {length}",
                taps.len()
            )));
        }
        let raw = white_gaussian(length + taps.len() - 1, cfg.seed, stream);
        // valid part of the convolution only
        (0..length)
            .map(|k| {
                let end = k + taps.len() - 1;
                taps.iter().enumerate().map(|(m, h)| h * raw[end - m]).sum()
            })
            .collect::<Vec<f64>>()
    };
    let mean = out.iter().sum::<f64>() / length as f64;
    let var = out.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / length as f64;
    let scale = (cfg.sigma2 / var).sqrt();
    out.iter_mut().for_each(|v| *v *= scale);
    Ok(out)
}

/// Zero-mean Gaussian noise confined to `cfg.band`, rescaled to sample variance `cfg.sigma2`.
/// The white source is unit variance before filtering; `dt` only labels the time axis.
pub fn gen_hf_noise(length: usize, cfg: &NoiseConfig, dt: f64) -> Result<Signal> {
    Signal::new(noise_stream(length, cfg, 0)?, dt)
}

/// Order-64 linear-phase low-pass; the output lags the input by 32 samples.
pub fn low_pass(s: &Signal, cutoff: f64) -> Result<Filtered> {
    low_pass_with_order(s, cutoff, DEFAULT_FILTER_ORDER)
}

pub fn low_pass_with_order(s: &Signal, cutoff: f64, order: usize) -> Result<Filtered> {
    let taps = lowpass_taps(cutoff, order)?;
    Ok(Filtered {
        signal: Signal {
            samples: fir_filter(&taps, &s.samples),
            dt: s.dt,
        },
        group_delay: order / 2,
    })
}

/// A clean signal, the same signal with noise added, and its low-pass recovery.
#[derive(Clone, Debug)]
pub struct Recovery {
    pub clean: Signal,
    pub noisy: Signal,
    pub recovered: Filtered,
    /// RMS of `recovered − clean` after undoing the group delay, excluding
    /// the first `order` output samples (filter warm-up).
    pub rms_error: f64,
    pub noise_rms: f64,
}

/// Add `cfg` noise to `clean`, low-pass at `cutoff`, and score the recovery.
pub fn recover_low_pass(clean: &Signal, cfg: &NoiseConfig, cutoff: f64) -> Result<Recovery> {
    let noise = gen_hf_noise(clean.len(), cfg, clean.dt)?;
    let noisy = Signal::new(
        clean.samples.iter().zip(&noise.samples).map(|(a, b)| a + b).collect(),
        clean.dt,
    )?;
    let recovered = low_pass(&noisy, cutoff)?;
    let delay = recovered.group_delay;
    let skip = 2 * delay;
    if clean.len() <= skip + delay {
        return Err(Error::param(format!(
            "signal of {} samples is too short to score a {}-tap filter",
            clean.len(),
            skip + 1
        )));
    }
    let errs: Vec<f64> = (skip..clean.len())
        .map(|k| recovered.signal.samples[k] - clean.samples[k - delay])
        .collect();
    let rms_error = (errs.iter().map(|e| e * e).sum::<f64>() / errs.len() as f64).sqrt();
    Ok(Recovery {
        clean: clean.clone(),
        noisy,
        recovered,
        rms_error,
        noise_rms: noise.rms(),
    })
}

/// Magnitude response of an FIR filter at normalized frequency `f`.
pub fn fir_gain(taps: &[f64], f: f64) -> f64 {
    let (re, im) = taps.iter().enumerate().fold((0.0, 0.0), |(re, im), (n, h)| {
        let w = 2.0 * PI * f * n as f64;
        (re + h * w.cos(), im - h * w.sin())
    });
    (re * re + im * im).sqrt()
}

/// One-sided PSD sample.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PsdPoint {
    pub freq: f64,
    pub power: f64,
}

fn hann_periodic(len: usize) -> Vec<f64> {
    (0..len)
        .map(|n| 0.5 - 0.5 * (2.0 * PI * n as f64 / len as f64).cos())
        .collect()
}

/// Welch estimate: Hann-windowed segments with 50% overlap, each segment
/// mean-removed, one-sided density over normalized frequency `[0, 0.5]`.
/// Integrating `power` over frequency gives the signal variance.
pub fn psd(s: &Signal, segment_length: usize) -> Result<Vec<PsdPoint>> {
    if segment_length < 4 {
        return Err(Error::param(format!("segment length must be >= 4, got {segment_length}")));
    }
    if segment_length > s.len() {
        return Err(Error::param(format!(
            "signal of {} samples is shorter than the {segment_length}-sample segment",
            s.len()
        )));
    }
    let window = hann_periodic(segment_length);
    let u: f64 = window.iter().map(|w| w * w).sum();
    let fft = FftPlanner::new().plan_fft_forward(segment_length);
    let hop = (segment_length / 2).max(1);
    let bins = segment_length / 2 + 1;
    let mut acc = vec![0.0; bins];
    let mut segments = 0usize;
    let mut buf = vec![Complex::new(0.0, 0.0); segment_length];
    let mut start = 0;
    while start + segment_length <= s.len() {
        let seg = &s.samples[start..start + segment_length];
        let mean = seg.iter().sum::<f64>() / segment_length as f64;
        for (b, (x, w)) in buf.iter_mut().zip(seg.iter().zip(&window)) {
            *b = Complex::new((x - mean) * w, 0.0);
        }
        fft.process(&mut buf);
        for (a, b) in acc.iter_mut().zip(&buf) {
            *a += b.norm_sqr();
        }
        segments += 1;
        start += hop;
    }
    let nyquist_bin = if segment_length.is_multiple_of(2) { Some(bins - 1) } else { None };
    Ok(acc
        .into_iter()
        .enumerate()
        .map(|(k, p)| {
            let one_sided = if k == 0 || Some(k) == nyquist_bin { 1.0 } else { 2.0 };
            PsdPoint {
                freq: k as f64 / segment_length as f64,
                power: one_sided * p / (u * segments as f64),
            }
        })
        .collect())
}

/// `∫ psd df` over the whole estimate (rectangle rule on the bin grid).
pub fn psd_total_power(points: &[PsdPoint]) -> f64 {
    if points.len() < 2 {
        return 0.0;
    }
    let df = points[1].freq - points[0].freq;
    points.iter().map(|p| p.power).sum::<f64>() * df
}

/// Fraction of PSD mass in `[lo, hi]`.
pub fn band_power_fraction(points: &[PsdPoint], lo: f64, hi: f64) -> f64 {
    let total: f64 = points.iter().map(|p| p.power).sum();
    if total <= 0.0 {
        return 0.0;
    }
    let inside: f64 = points
        .iter()
        .filter(|p| p.freq >= lo && p.freq <= hi)
        .map(|p| p.power)
        .sum();
    inside / total
}

/// `freq,power` CSV.
pub fn psd_to_csv(points: &[PsdPoint]) -> String {
    let mut out = String::from("freq,power\n");
    for p in points {
        let _ = writeln!(out, "{},{}", p.freq, p.power);
    }
    out
}
