use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DisentangleModel, Mlp};
use crate::numerics::{ops::argmax, sgd_step, Matrix, Rng, Tape};
use crate::synthgen::Dataset;

/// Post-hoc probe training schedule. The probe network has the same shape as
/// the trainer's predictors (latent → hidden → classes) and, by default, the
/// same optimiser settings. Latents are fed raw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProbeConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub momentum: f64,
    pub hidden: usize,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            epochs: 500,
            batch_size: 64,
            lr: 0.05,
            momentum: 0.9,
            hidden: 32,
        }
    }
}

/// Entry (i, j): held-out accuracy predicting factor `j` from latent `z_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ProbeMatrix(pub Vec<Vec<f64>>);

impl ProbeMatrix {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[i][j]
    }

    pub fn n(&self) -> usize {
        self.0.len()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n()).map(|i| self.0[i][i]).collect()
    }

    /// Per row: `max_{j≠i}(A[i][j] − chance_j)`.
    pub fn leakage(&self, chance: &[f64]) -> Vec<f64> {
        (0..self.n())
            .map(|i| {
                (0..self.n())
                    .filter(|&j| j != i)
                    .map(|j| self.0[i][j] - chance[j])
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .collect()
    }
}

/// Trains a fresh probe on (`train_z`, `train_y`) and returns its accuracy on
/// the test split.
pub fn probe_accuracy(
    train_z: &Matrix,
    train_y: &[usize],
    test_z: &Matrix,
    test_y: &[usize],
    cardinality: usize,
    config: &ProbeConfig,
    rng: &mut Rng,
) -> Result<f64> {
    if train_z.rows() == 0 || test_z.rows() == 0 {
        return Err(Error::Empty("probe split"));
    }
    let mut probe = Mlp::new("probe", train_z.cols(), config.hidden, cardinality, &mut rng.split("init"));
    let mut order: Vec<usize> = (0..train_z.rows()).collect();
    for _ in 0..config.epochs {
        rng.shuffle(&mut order);
        for chunk in order.chunks(config.batch_size) {
            let mut tape = Tape::new();
            let z = tape.constant(train_z.select_rows(chunk));
            let logits = probe.on_tape(&mut tape, z, true)?;
            let p = tape.softmax(logits);
            let targets: Vec<usize> = chunk.iter().map(|&r| train_y[r]).collect();
            let loss = tape.cross_entropy(p, &targets)?;
            tape.backward(loss, &mut [&mut probe.store])?;
            sgd_step(&mut probe.store, config.lr, config.momentum);
        }
    }
    let logits = probe.forward(&test_z)?;
    let correct = (0..test_z.rows()).filter(|&r| argmax(logits.row(r)) == test_y[r]).count();
    Ok(correct as f64 / test_z.rows() as f64)
}

pub(crate) fn features_matrix(d: &Dataset) -> Result<Matrix> {
    let dim = d.samples.first().map_or(0, |s| s.features.as_slice().len());
    let data = d.samples.iter().flat_map(|s| s.features.as_slice().iter().copied()).collect();
    Matrix::from_vec(d.len(), dim, data)
}

fn labels_of(d: &Dataset, j: usize) -> Vec<usize> {
    d.samples.iter().map(|s| s.labels.class(j)).collect()
}

/// Probe accuracy for every (latent i, factor j) pair on frozen latents.
/// Ground-truth labels are used regardless of annotation masks.
pub fn probe_matrix(
    model: &DisentangleModel,
    train_split: &Dataset,
    test_split: &Dataset,
    seed: u64,
    config: &ProbeConfig,
) -> Result<ProbeMatrix> {
    if train_split.is_empty() || test_split.is_empty() {
        return Err(Error::Empty("probe split"));
    }
    let n = model.n_factors();
    let train_x = features_matrix(train_split)?;
    let test_x = features_matrix(test_split)?;
    let root = Rng::new(seed).split("probes");
    let mut out = vec![vec![0.0; n]; n];
    for (i, row) in out.iter_mut().enumerate() {
        let train_z = model.encode_batch(i, &train_x)?;
        let test_z = model.encode_batch(i, &test_x)?;
        for (j, cell) in row.iter_mut().enumerate() {
            let mut rng = root.split(&format!("cell{i}.{j}"));
            *cell = probe_accuracy(
                &train_z,
                &labels_of(train_split, j),
                &test_z,
                &labels_of(test_split, j),
                model.cardinality(j),
                config,
                &mut rng,
            )?;
        }
    }
    Ok(ProbeMatrix(out))
}
