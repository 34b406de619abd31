//! Analytic referee that reads factor classes back out of a feature vector.
//!
//! * Pitch: the two lowest harmonics of each candidate fundamental fall into a
//!   pair of bands; the class whose pair holds the most frame-averaged
//!   log-energy wins. The fundamental band alone cannot decide, because the
//!   250/375 Hz and 500/625 Hz fundamentals share bands at two bins per band.
//! * Envelope: least-squares slope of mean-normalised per-frame energy,
//!   thresholded at a quarter of the rising class's design slope.
//! * Timbre: L1 nearest rolloff template over the normalised energies of the
//!   four harmonic bands of the detected pitch.
//!
//! Inputs may be decoder reconstructions, so negative entries are clamped.

use super::factors::FactorAssignment;
use super::features::{band_of_freq, N_BANDS};
use super::signal::{envelope_gain, harmonic_amplitudes, FUNDAMENTALS, N_FRAMES, N_HARMONICS, ROLLOFF};

/// Fraction of the rising design slope below which an envelope reads flat.
pub const FLAT_SLOPE_FRACTION: f64 = 0.25;

fn energy(v: f64) -> f64 {
    v.max(0.0).exp_m1()
}

fn harmonic_bands(pitch: usize) -> [usize; N_HARMONICS] {
    std::array::from_fn(|h| band_of_freq(FUNDAMENTALS[pitch] * (h + 1) as f64))
}

fn ls_slope(y: &[f64]) -> f64 {
    let n = y.len() as f64;
    let tm = (n - 1.0) / 2.0;
    let ym = y.iter().sum::<f64>() / n;
    let (mut num, mut den) = (0.0, 0.0);
    for (t, v) in y.iter().enumerate() {
        let dt = t as f64 - tm;
        num += dt * (v - ym);
        den += dt * dt;
    }
    num / den
}

fn relative_slope(frame_energy: &[f64]) -> f64 {
    let mean = frame_energy.iter().sum::<f64>() / frame_energy.len() as f64;
    if mean <= 0.0 {
        return 0.0;
    }
    let rel: Vec<f64> = frame_energy.iter().map(|e| e / mean).collect();
    ls_slope(&rel)
}

/// Relative energy slope of the noiseless rising envelope.
pub fn rising_design_slope() -> f64 {
    let e: Vec<f64> = (0..N_FRAMES).map(|t| envelope_gain(0, t).powi(2)).collect();
    relative_slope(&e)
}

fn timbre_template(timbre: usize) -> [f64; N_HARMONICS] {
    let amps = harmonic_amplitudes(timbre);
    let e: [f64; N_HARMONICS] = std::array::from_fn(|h| amps[h] * amps[h]);
    let total: f64 = e.iter().sum();
    e.map(|v| v / total)
}

pub fn oracle_pitch(features: &[f64]) -> usize {
    let mean_band = |b: usize| (0..N_FRAMES).map(|t| features[t * N_BANDS + b]).sum::<f64>() / N_FRAMES as f64;
    let scores: Vec<f64> = (0..FUNDAMENTALS.len())
        .map(|c| {
            let bands = harmonic_bands(c);
            mean_band(bands[0]) + mean_band(bands[1])
        })
        .collect();
    crate::numerics::ops::argmax(&scores)
}

pub fn oracle_envelope(features: &[f64]) -> usize {
    let frame_energy: Vec<f64> = (0..N_FRAMES)
        .map(|t| features[t * N_BANDS..(t + 1) * N_BANDS].iter().map(|&v| energy(v)).sum())
        .collect();
    let slope = relative_slope(&frame_energy);
    let threshold = FLAT_SLOPE_FRACTION * rising_design_slope();
    if slope >= threshold {
        0
    } else if slope <= -threshold {
        2
    } else {
        1
    }
}

pub fn oracle_timbre(features: &[f64], pitch: usize) -> usize {
    let bands = harmonic_bands(pitch);
    let e: Vec<f64> = bands
        .iter()
        .map(|&b| (0..N_FRAMES).map(|t| energy(features[t * N_BANDS + b])).sum())
        .collect();
    let total: f64 = e.iter().sum();
    let ratios: Vec<f64> = if total > 0.0 {
        e.iter().map(|v| v / total).collect()
    } else {
        vec![1.0 / N_HARMONICS as f64; N_HARMONICS]
    };
    let dists: Vec<f64> = (0..ROLLOFF.len())
        .map(|c| {
            timbre_template(c)
                .iter()
                .zip(&ratios)
                .map(|(a, b)| (a - b).abs())
                .sum::<f64>()
        })
        .map(|d: f64| -d)
        .collect();
    crate::numerics::ops::argmax(&dists)
}

/// Reads (pitch, envelope, timbre) from a 128-entry feature vector.
pub fn oracle_factors(features: &[f64]) -> FactorAssignment {
    debug_assert_eq!(features.len(), N_FRAMES * N_BANDS);
    let pitch = oracle_pitch(features);
    FactorAssignment::new(vec![pitch, oracle_envelope(features), oracle_timbre(features, pitch)])
}
