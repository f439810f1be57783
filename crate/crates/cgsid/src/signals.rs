//! Range-constrained excitation signals for training-data generation.
//!
//! All generators are deterministic functions of an explicit seed; no hidden
//! entropy sources.

use crate::error::{Error, Result};
use crate::volterra::SignalSeries;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

/// The crate-wide deterministic generator. Every random draw in the library
/// flows through a generator constructed here.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// I.i.d. zero-mean Gaussian samples with standard deviation `sigma`.
pub fn white_noise(len: usize, sigma: f64, sample_rate: f64, seed: u64) -> Result<SignalSeries> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "noise standard deviation {sigma} must be finite and >= 0"
        )));
    }
    let normal = Normal::new(0.0, sigma)
        .map_err(|e| Error::InvalidArgument(format!("bad noise parameters: {e}")))?;
    let mut rng = seeded_rng(seed);
    let samples = (0..len).map(|_| normal.sample(&mut rng)).collect();
    SignalSeries::new(samples, sample_rate)
}

/// White noise shaped by a single-pole low-pass filter at the given cutoff
/// (as a fraction of the sample rate, `0 < cutoff_fraction <= 0.5`), then
/// shifted and rescaled to zero mean and unit sample standard deviation.
pub fn lowpass_noise(
    len: usize,
    cutoff_fraction: f64,
    sample_rate: f64,
    seed: u64,
) -> Result<SignalSeries> {
    if !(cutoff_fraction > 0.0 && cutoff_fraction <= 0.5) {
        return Err(Error::InvalidArgument(format!(
            "cutoff fraction {cutoff_fraction} must be in (0, 0.5]"
        )));
    }
    if len < 2 {
        return Err(Error::InvalidArgument(format!(
            "lowpass noise needs at least 2 samples to normalize, got {len}"
        )));
    }
    let mut rng = seeded_rng(seed);
    let pole = (-2.0 * std::f64::consts::PI * cutoff_fraction).exp();
    let mut state = 0.0;
    let mut samples: Vec<f64> = (0..len)
        .map(|_| {
            let white: f64 = StandardNormal.sample(&mut rng);
            state = pole * state + (1.0 - pole) * white;
            state
        })
        .collect();
    let mean = samples.iter().sum::<f64>() / len as f64;
    let var = samples.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / len as f64;
    if var == 0.0 {
        return Err(Error::ZeroVariance);
    }
    let inv_std = 1.0 / var.sqrt();
    for v in &mut samples {
        *v = (*v - mean) * inv_std;
    }
    SignalSeries::new(samples, sample_rate)
}

/// Componentwise clamp into `[lo, hi]`.
pub fn clip(signal: &SignalSeries, lo: f64, hi: f64) -> Result<SignalSeries> {
    if !(lo < hi) {
        return Err(Error::InvalidArgument(format!("clip bounds [{lo}, {hi}] are not ordered")));
    }
    let samples = signal.samples().iter().map(|v| v.clamp(lo, hi)).collect();
    SignalSeries::new(samples, signal.sample_rate())
}

/// Admissible filament drive voltage range.
pub const DRIVE_RANGE: (f64, f64) = (0.0, 1.5);

/// Default filament drive: slow lowpass noise (cutoff 5% of the sample
/// rate) shifted to the middle of [`DRIVE_RANGE`] and clipped into it. The
/// slow variation lets the filament track the drive across its full
/// operating range instead of averaging fast fluctuations away.
pub fn filament_excitation(len: usize, sample_rate: f64, seed: u64) -> Result<SignalSeries> {
    let (lo, hi) = DRIVE_RANGE;
    let mid = 0.5 * (lo + hi);
    let swing = 0.5 * (hi - lo);
    let base = lowpass_noise(len, 0.05, sample_rate, seed)?;
    let shifted: Vec<f64> =
        base.samples().iter().map(|v| mid + 0.5 * swing * v).collect();
    clip(&SignalSeries::new(shifted, sample_rate)?, lo, hi)
}
