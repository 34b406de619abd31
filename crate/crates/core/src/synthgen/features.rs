//! Log band-energy spectrogram: 8 non-overlapping 64-sample frames, each
//! reduced to 16 bands of two adjacent DFT bins (bins 0..32; the Nyquist bin
//! is dropped). Entry `frame * 16 + band` holds `ln(1 + Σ|X_k|²)`.

use std::sync::{Arc, OnceLock};

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use super::signal::{FRAME_LEN, N_FRAMES, SAMPLE_RATE, SEGMENT_LEN};
use crate::error::{Error, Result};

pub const N_BANDS: usize = 16;
pub const BINS_PER_BAND: usize = FRAME_LEN / 2 / N_BANDS;
pub const FEATURE_DIM: usize = N_FRAMES * N_BANDS;

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector(Vec<f64>);

impl FeatureVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() != FEATURE_DIM {
            return Err(Error::dim("feature vector", FEATURE_DIM, values.len()));
        }
        Ok(Self(values))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn at(&self, frame: usize, band: usize) -> f64 {
        self.0[frame * N_BANDS + band]
    }
}

/// Band that DFT bin `bin` falls into.
pub fn band_of_bin(bin: usize) -> usize {
    bin / BINS_PER_BAND
}

/// Band containing frequency `hz` (exact for bin-centred frequencies).
pub fn band_of_freq(hz: f64) -> usize {
    band_of_bin((hz * FRAME_LEN as f64 / SAMPLE_RATE).round() as usize)
}

fn fft() -> &'static Arc<dyn Fft<f64>> {
    static PLAN: OnceLock<Arc<dyn Fft<f64>>> = OnceLock::new();
    PLAN.get_or_init(|| FftPlanner::new().plan_fft_forward(FRAME_LEN))
}

pub fn featurize(samples: &[f64]) -> Result<FeatureVector> {
    if samples.len() != SEGMENT_LEN {
        return Err(Error::dim("segment", SEGMENT_LEN, samples.len()));
    }
    let plan = fft();
    let mut out = Vec::with_capacity(FEATURE_DIM);
    let mut buf = vec![Complex::new(0.0, 0.0); FRAME_LEN];
    for frame in samples.chunks_exact(FRAME_LEN) {
        for (b, &s) in buf.iter_mut().zip(frame) {
            *b = Complex::new(s, 0.0);
        }
        plan.process(&mut buf);
        for band in 0..N_BANDS {
            let lo = band * BINS_PER_BAND;
            let energy: f64 = buf[lo..lo + BINS_PER_BAND].iter().map(|c| c.norm_sqr()).sum();
            out.push(energy.ln_1p());
        }
    }
    Ok(FeatureVector(out))
}
