use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{others, DisentangleModel};
use crate::numerics::{Matrix, Rng};
use crate::synthgen::{oracle_factors, Dataset, FactorAssignment, LabeledSample};

use super::probe::features_matrix;

#[derive(Debug, Clone, PartialEq)]
pub struct SwapResult {
    pub x_hat: Vec<f64>,
    pub oracle: FactorAssignment,
    /// The expected combination: `a`'s class for factor i, `b`'s elsewhere.
    pub expected: FactorAssignment,
}

impl SwapResult {
    pub fn factor_agrees(&self, j: usize) -> bool {
        self.oracle.class(j) == self.expected.class(j)
    }

    pub fn agrees(&self) -> bool {
        self.oracle == self.expected
    }
}

/// Decodes `a`'s latent from auto-encoder `i` with `b`'s labels for every
/// other factor, and reads the result with the analytic oracle.
pub fn swap_synthesis(model: &DisentangleModel, i: usize, a: &LabeledSample, b: &LabeledSample) -> Result<SwapResult> {
    let z = model.encode(i, a.features.as_slice())?;
    let labels = model.one_hot_block(i, &[b.labels.classes()]);
    let x_hat = model.decode_batch(i, &Matrix::row_vector(&z), &labels)?.into_vec();
    let oracle = oracle_factors(&x_hat);
    Ok(SwapResult {
        x_hat,
        oracle,
        expected: expected_combination(i, a, b),
    })
}

fn expected_combination(i: usize, a: &LabeledSample, b: &LabeledSample) -> FactorAssignment {
    let mut classes = b.labels.classes().to_vec();
    classes[i] = a.labels.class(i);
    FactorAssignment::new(classes)
}

/// Agreement rates for one auto-encoder over random pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwapStats {
    /// Oracle reads `a`'s class for the swapped factor.
    pub swapped: f64,
    /// Mean over pairs and carried factors of "oracle reads `b`'s class".
    pub carried: f64,
    /// Every factor matches.
    pub full: f64,
}

/// Swap agreement per auto-encoder over `pairs` seeded random (a, b) pairs.
pub fn swap_agreement(model: &DisentangleModel, dataset: &Dataset, pairs: usize, seed: u64) -> Result<Vec<SwapStats>> {
    if dataset.is_empty() {
        return Err(Error::Empty("swap dataset"));
    }
    if pairs == 0 {
        return Err(Error::Empty("swap pair request"));
    }
    let n = model.n_factors();
    let x = features_matrix(dataset)?;
    let root = Rng::new(seed).split("swap");
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut rng = root.split_index(i as u64);
        let picks: Vec<(usize, usize)> = (0..pairs).map(|_| (rng.below(dataset.len()), rng.below(dataset.len()))).collect();
        let a_rows: Vec<usize> = picks.iter().map(|p| p.0).collect();
        let z = model.encode_batch(i, &x.select_rows(&a_rows))?;
        let b_labels: Vec<&[usize]> = picks.iter().map(|p| dataset.samples[p.1].labels.classes()).collect();
        let x_hat = model.decode_batch(i, &z, &model.one_hot_block(i, &b_labels))?;

        let (mut swapped, mut carried, mut full) = (0usize, 0usize, 0usize);
        for (r, &(a, b)) in picks.iter().enumerate() {
            let expected = expected_combination(i, &dataset.samples[a], &dataset.samples[b]);
            let read = oracle_factors(x_hat.row(r));
            swapped += usize::from(read.class(i) == expected.class(i));
            carried += others(n, i).filter(|&j| read.class(j) == expected.class(j)).count();
            full += usize::from(read == expected);
        }
        out.push(SwapStats {
            swapped: swapped as f64 / pairs as f64,
            carried: carried as f64 / (pairs * (n - 1)) as f64,
            full: full as f64 / pairs as f64,
        });
    }
    Ok(out)
}
