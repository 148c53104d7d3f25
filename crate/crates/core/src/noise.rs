//! Poisson photon-count noise on diffraction intensities.
//!
//! SNR is defined on intensities `I = b^2`. Counts `K_j ~ Poisson(s I_j)` with
//! `s = ||I||_1 10^(snr/10) / ||I||_2^2` give `E||K/s - I||^2 = ||I||_1 / s`,
//! i.e. an expected intensity-domain SNR of exactly `snr` dB.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::projections::MagnitudeData;

/// Means at or above this use the normal approximation.
const INVERSION_LIMIT: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub snr_db: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(snr_db: f64, seed: u64) -> Result<Self> {
        if !snr_db.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "snr_db must be finite, got {snr_db}"
            )));
        }
        Ok(NoiseSpec { snr_db, seed })
    }
}

/// Photon scale `s` for the requested SNR.
pub fn photon_scale(intensities: &[f64], snr_db: f64) -> Result<f64> {
    let l1: f64 = intensities.iter().sum();
    let l2: f64 = intensities.iter().map(|v| v * v).sum();
    if l1 <= 0.0 || l2 <= 0.0 {
        return Err(Error::InvalidData(
            "all-zero magnitudes cannot be noised".into(),
        ));
    }
    let s = l1 * 10f64.powf(snr_db / 10.0) / l2;
    if !s.is_finite() || s <= 0.0 {
        return Err(Error::Capacity(format!(
            "photon scale overflows at {snr_db} dB"
        )));
    }
    Ok(s)
}

pub fn poissonize(b: &MagnitudeData, spec: &NoiseSpec) -> Result<MagnitudeData> {
    let intensities: Vec<f64> = b.values().iter().map(|v| v * v).collect();
    let s = photon_scale(&intensities, spec.snr_db)?;
    let noisy = intensities
        .iter()
        .enumerate()
        .map(|(j, &i)| {
            let mut rng = entry_rng(spec.seed, j);
            let k = sample_poisson(&mut rng, s * i);
            (k / s).sqrt()
        })
        .collect();
    MagnitudeData::new(b.shape(), b.patterns(), noisy)
}

/// Each entry draws from its own stream, so the result does not depend on
/// traversal order.
fn entry_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Inversion for small means, rounded normal approximation for large ones.
fn sample_poisson<R: Rng>(rng: &mut R, mean: f64) -> f64 {
    if mean <= 0.0 {
        return 0.0;
    }
    if mean < INVERSION_LIMIT {
        let u: f64 = rng.random();
        let mut k = 0u64;
        let mut p = (-mean).exp();
        let mut cdf = p;
        while u > cdf {
            k += 1;
            p *= mean / k as f64;
            cdf += p;
            if p == 0.0 {
                break;
            }
        }
        k as f64
    } else {
        let z: f64 = rng.sample(StandardNormal);
        (mean + mean.sqrt() * z).round().max(0.0)
    }
}

/// `10 log10(||I||^2 / ||I_noisy - I||^2)` in the intensity domain.
pub fn measured_snr_db(clean: &MagnitudeData, noisy: &MagnitudeData) -> f64 {
    let (mut signal, mut noise) = (0.0, 0.0);
    for (c, n) in clean.values().iter().zip(noisy.values()) {
        let (ic, in_) = (c * c, n * n);
        signal += ic * ic;
        noise += (in_ - ic).powi(2);
    }
    10.0 * (signal / noise).log10()
}
