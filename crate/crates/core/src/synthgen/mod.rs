//! Synthetic factorised audio: three independent factors drive a harmonic
//! signal, which is reduced to a log band-energy spectrogram. An analytic
//! oracle recovers the factors from features without any learning.

mod dataset;
mod factors;
mod features;
mod oracle;
mod signal;

pub use dataset::{make_dataset, Dataset, LabeledSample, MaskPolicy, DATASET_VERSION};
pub use factors::{canonical_factors, normalize_factors, FactorAssignment, FactorSpec, ENVELOPE, PITCH, TIMBRE};
pub use features::{band_of_freq, featurize, FeatureVector, FEATURE_DIM, N_BANDS};
pub use oracle::{oracle_envelope, oracle_factors, oracle_pitch, oracle_timbre, rising_design_slope};
pub use signal::{
    envelope_gain, pure_tone, silence, synth_segment, Segment, ENVELOPE_NAMES, FUNDAMENTALS, FRAME_LEN,
    N_FRAMES, SAMPLE_RATE, SEGMENT_LEN, TIMBRE_NAMES,
};
