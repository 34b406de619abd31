//! Harmonic segment synthesis for the canonical pitch/envelope/timbre factors.

use super::factors::{canonical_factors, FactorAssignment, ENVELOPE, PITCH, TIMBRE};
use crate::error::Result;
use crate::numerics::Rng;

pub const SAMPLE_RATE: f64 = 8000.0;
pub const SEGMENT_LEN: usize = 512;
pub const FRAME_LEN: usize = 64;
pub const N_FRAMES: usize = SEGMENT_LEN / FRAME_LEN;
pub const N_HARMONICS: usize = 4;

/// Fundamental per pitch class, Hz. All are multiples of the 125 Hz DFT bin
/// spacing, so every harmonic lands exactly on a bin.
pub const FUNDAMENTALS: [f64; 4] = [250.0, 375.0, 500.0, 625.0];

/// Geometric amplitude rolloff per timbre class (bright, neutral, dark):
/// harmonic h has amplitude `r^(h-1)`.
pub const ROLLOFF: [f64; 3] = [0.7, 0.45, 0.2];

pub const ENVELOPE_NAMES: [&str; 3] = ["rising", "flat", "falling"];
pub const TIMBRE_NAMES: [&str; 3] = ["bright", "neutral", "dark"];

/// Relative half-width of the per-harmonic amplitude jitter.
pub const AMPLITUDE_JITTER: f64 = 0.10;

pub const PEAK_LEVEL: f64 = 0.9;

const RISE_FLOOR: f64 = 0.25;

/// Audio segment: 512 samples at 8 kHz, peak |amplitude| ≤ 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment(Vec<f64>);

impl Segment {
    pub fn samples(&self) -> &[f64] {
        &self.0
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.0
    }
}

/// Linear framewise gain for an envelope class.
pub fn envelope_gain(class: usize, frame: usize) -> f64 {
    let t = frame as f64 / (N_FRAMES - 1) as f64;
    match class {
        0 => RISE_FLOOR + (1.0 - RISE_FLOOR) * t,
        1 => 1.0,
        _ => RISE_FLOOR + (1.0 - RISE_FLOOR) * (1.0 - t),
    }
}

pub fn harmonic_amplitudes(timbre: usize) -> [f64; N_HARMONICS] {
    let r = ROLLOFF[timbre];
    std::array::from_fn(|h| r.powi(h as i32))
}

pub fn synth_segment(assignment: &FactorAssignment, nuisance_seed: u64) -> Result<Segment> {
    assignment.validate(&canonical_factors())?;
    let f0 = FUNDAMENTALS[assignment.class(PITCH)];
    let envelope = assignment.class(ENVELOPE);
    let amps = harmonic_amplitudes(assignment.class(TIMBRE));

    let mut rng = Rng::new(nuisance_seed);
    let mut phase = [0.0; N_HARMONICS];
    let mut amp = [0.0; N_HARMONICS];
    for h in 0..N_HARMONICS {
        phase[h] = rng.uniform_range(0.0, std::f64::consts::TAU);
        amp[h] = amps[h] * rng.uniform_range(1.0 - AMPLITUDE_JITTER, 1.0 + AMPLITUDE_JITTER);
    }

    let mut x: Vec<f64> = (0..SEGMENT_LEN)
        .map(|n| {
            let t = n as f64 / SAMPLE_RATE;
            let tone: f64 = (0..N_HARMONICS)
                .map(|h| {
                    let f = f0 * (h + 1) as f64;
                    amp[h] * (std::f64::consts::TAU * f * t + phase[h]).sin()
                })
                .sum();
            envelope_gain(envelope, n / FRAME_LEN) * tone
        })
        .collect();

    let peak = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak > 0.0 {
        let k = PEAK_LEVEL / peak;
        x.iter_mut().for_each(|v| *v *= k);
    }
    Ok(Segment(x))
}

/// Pure sinusoid segment (no envelope, no normalisation), used to probe the
/// feature extractor.
pub fn pure_tone(freq_hz: f64, amplitude: f64) -> Segment {
    Segment(
        (0..SEGMENT_LEN)
            .map(|n| amplitude * (std::f64::consts::TAU * freq_hz * n as f64 / SAMPLE_RATE).sin())
            .collect(),
    )
}

pub fn silence() -> Segment {
    Segment(vec![0.0; SEGMENT_LEN])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frame_rms(seg: &Segment) -> Vec<f64> {
        seg.samples()
            .chunks(FRAME_LEN)
            .map(|f| (f.iter().map(|v| v * v).sum::<f64>() / f.len() as f64).sqrt())
            .collect()
    }

    #[test]
    fn deterministic() {
        let a = FactorAssignment::new(vec![2, 0, 1]);
        assert_eq!(synth_segment(&a, 77).unwrap(), synth_segment(&a, 77).unwrap());
        assert_ne!(synth_segment(&a, 77).unwrap(), synth_segment(&a, 78).unwrap());
    }

    #[test]
    fn peak_normalised() {
        for seed in 0..20 {
            let seg = synth_segment(&FactorAssignment::new(vec![1, 1, 0]), seed).unwrap();
            let peak = seg.samples().iter().fold(0.0f64, |m, v| m.max(v.abs()));
            assert!((peak - PEAK_LEVEL).abs() < 1e-12);
        }
    }

    #[test]
    fn envelope_shapes_frame_rms() {
        for seed in 0..10 {
            let rising = frame_rms(&synth_segment(&FactorAssignment::new(vec![0, 0, 2]), seed).unwrap());
            assert!(rising.windows(2).all(|w| w[1] > w[0]), "{rising:?}");
            let falling = frame_rms(&synth_segment(&FactorAssignment::new(vec![3, 2, 0]), seed).unwrap());
            assert!(falling.windows(2).all(|w| w[1] < w[0]), "{falling:?}");
        }
    }

    #[test]
    fn invalid_class_rejected() {
        assert!(synth_segment(&FactorAssignment::new(vec![4, 0, 0]), 1).is_err());
        assert!(synth_segment(&FactorAssignment::new(vec![0, 0]), 1).is_err());
    }
}
