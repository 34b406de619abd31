//! Shared fixtures for the criterion benches.

use disentangle_core::synthgen::{canonical_factors, make_dataset};
use disentangle_core::trainer::Batch;
use disentangle_core::{Dataset, DisentangleModel, LabeledSample, MaskPolicy, ModelDims};

pub fn model(seed: u64) -> DisentangleModel {
    DisentangleModel::init(&canonical_factors(), ModelDims::default(), seed).expect("canonical spec")
}

pub fn dataset(n: usize, policy: MaskPolicy, seed: u64) -> Dataset {
    make_dataset(n, policy, seed).expect("valid size")
}

pub fn batch(d: &Dataset, size: usize) -> Batch {
    let picks: Vec<&LabeledSample> = d.samples.iter().cycle().take(size).collect();
    Batch::from_samples(&picks).expect("non-empty")
}
