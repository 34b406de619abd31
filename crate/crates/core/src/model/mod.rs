//! The factor auto-encoders: for each factor `i`, an encoder producing the
//! latent `z_i`, a decoder conditioned on the labels of every other factor,
//! and one private adversarial predictor per other factor.

mod io;
mod net;

use serde::{Deserialize, Serialize};

pub use io::MODEL_VERSION;
pub use net::{Mlp, B1, B2, W1, W2};

use crate::error::{Error, Result};
use crate::numerics::{Matrix, ParamStore, Rng, Tape, Var};
use crate::synthgen::{FactorSpec, FEATURE_DIM};

/// Layer widths. Defaults: latent 8, auto-encoder hidden 64, predictor hidden 32.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelDims {
    pub latent: usize,
    pub ae_hidden: usize,
    pub pred_hidden: usize,
}

impl Default for ModelDims {
    fn default() -> Self {
        Self {
            latent: 8,
            ae_hidden: 64,
            pred_hidden: 32,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Encoder(pub Mlp);

#[derive(Debug, Clone, PartialEq)]
pub struct Decoder(pub Mlp);

/// Predicts factor `target` from the latent of auto-encoder `owner`.
#[derive(Debug, Clone, PartialEq)]
pub struct Predictor {
    pub owner: usize,
    pub target: usize,
    pub net: Mlp,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FactorAutoEncoder {
    pub owner: usize,
    pub encoder: Encoder,
    pub decoder: Decoder,
    /// Ordered by ascending target, skipping the owner.
    pub predictors: Vec<Predictor>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DisentangleModel {
    pub factors: Vec<FactorSpec>,
    pub seed: u64,
    pub dims: ModelDims,
    pub aes: Vec<FactorAutoEncoder>,
}

impl DisentangleModel {
    pub fn init(factors: &[FactorSpec], dims: ModelDims, seed: u64) -> Result<Self> {
        let n = factors.len();
        if n < 2 {
            return Err(Error::TooFewFactors(n));
        }
        let factors = crate::synthgen::normalize_factors(factors.to_vec())?;
        let root = Rng::new(seed);
        let mut aes = Vec::with_capacity(n);
        for i in 0..n {
            let label_width: usize = others(n, i).map(|j| factors[j].cardinality).sum();
            let name = |part: &str| format!("ae{i}.{part}");
            let encoder = Encoder(Mlp::new(
                &name("enc"),
                FEATURE_DIM,
                dims.ae_hidden,
                dims.latent,
                &mut root.split(&name("enc")),
            ));
            let decoder = Decoder(Mlp::new(
                &name("dec"),
                dims.latent + label_width,
                dims.ae_hidden,
                FEATURE_DIM,
                &mut root.split(&name("dec")),
            ));
            let predictors = others(n, i)
                .map(|j| {
                    let pname = name(&format!("pred{j}"));
                    Predictor {
                        owner: i,
                        target: j,
                        net: Mlp::new(
                            &pname,
                            dims.latent,
                            dims.pred_hidden,
                            factors[j].cardinality,
                            &mut root.split(&pname),
                        ),
                    }
                })
                .collect();
            aes.push(FactorAutoEncoder {
                owner: i,
                encoder,
                decoder,
                predictors,
            });
        }
        Ok(Self {
            factors,
            seed,
            dims,
            aes,
        })
    }

    pub fn n_factors(&self) -> usize {
        self.factors.len()
    }

    pub fn cardinality(&self, j: usize) -> usize {
        self.factors[j].cardinality
    }

    /// Width of the label block fed to decoder `i`.
    pub fn label_width(&self, i: usize) -> usize {
        others(self.n_factors(), i).map(|j| self.cardinality(j)).sum()
    }

    pub fn decoder_input_width(&self, i: usize) -> usize {
        self.dims.latent + self.label_width(i)
    }

    fn check_factor(&self, i: usize) -> Result<()> {
        if i >= self.n_factors() {
            return Err(Error::IndexOutOfRange {
                what: "factor",
                index: i,
                len: self.n_factors(),
            });
        }
        Ok(())
    }

    pub fn ae(&self, i: usize) -> Result<&FactorAutoEncoder> {
        self.check_factor(i)?;
        Ok(&self.aes[i])
    }

    pub fn ae_mut(&mut self, i: usize) -> Result<&mut FactorAutoEncoder> {
        self.check_factor(i)?;
        Ok(&mut self.aes[i])
    }

    pub fn predictor(&self, i: usize, j: usize) -> Result<&Predictor> {
        self.check_factor(i)?;
        self.check_factor(j)?;
        if i == j {
            return Err(Error::SelfPredictor(i));
        }
        Ok(&self.aes[i].predictors[pred_index(i, j)])
    }

    pub fn predictor_mut(&mut self, i: usize, j: usize) -> Result<&mut Predictor> {
        self.check_factor(i)?;
        self.check_factor(j)?;
        if i == j {
            return Err(Error::SelfPredictor(i));
        }
        Ok(&mut self.aes[i].predictors[pred_index(i, j)])
    }

    /// Every parameter store, in file order.
    pub fn stores(&self) -> Vec<&ParamStore> {
        let mut out = Vec::new();
        for ae in &self.aes {
            out.push(&ae.encoder.0.store);
            out.push(&ae.decoder.0.store);
            out.extend(ae.predictors.iter().map(|p| &p.net.store));
        }
        out
    }

    pub fn stores_mut(&mut self) -> Vec<&mut ParamStore> {
        let mut out = Vec::new();
        for ae in &mut self.aes {
            out.push(&mut ae.encoder.0.store);
            out.push(&mut ae.decoder.0.store);
            out.extend(ae.predictors.iter_mut().map(|p| &mut p.net.store));
        }
        out
    }

    pub fn predictor_count(&self) -> usize {
        self.aes.iter().map(|a| a.predictors.len()).sum()
    }

    pub fn encode(&self, i: usize, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != FEATURE_DIM {
            return Err(Error::dim(format!("ae{i}.enc input"), FEATURE_DIM, x.len()));
        }
        Ok(self.encode_batch(i, &Matrix::row_vector(x))?.into_vec())
    }

    pub fn encode_batch(&self, i: usize, x: &Matrix) -> Result<Matrix> {
        self.ae(i)?.encoder.0.forward(x)
    }

    pub fn predict(&self, i: usize, j: usize, z: &[f64]) -> Result<Vec<f64>> {
        Ok(self.predict_batch(i, j, &Matrix::row_vector(z))?.into_vec())
    }

    /// Row-wise class distributions of predictor (i, j).
    pub fn predict_batch(&self, i: usize, j: usize, z: &Matrix) -> Result<Matrix> {
        let mut logits = self.predictor(i, j)?.net.forward(z)?;
        for r in 0..logits.rows() {
            crate::numerics::ops::softmax_in_place(logits.row_mut(r));
        }
        Ok(logits)
    }

    /// Decodes one latent with one probability vector per factor `j ≠ i`,
    /// in ascending `j`.
    pub fn decode(&self, i: usize, z: &[f64], label_inputs: &[Vec<f64>]) -> Result<Vec<f64>> {
        self.check_factor(i)?;
        if z.len() != self.dims.latent {
            return Err(Error::dim(format!("ae{i}.dec latent"), self.dims.latent, z.len()));
        }
        let expected: Vec<usize> = others(self.n_factors(), i).collect();
        if label_inputs.len() != expected.len() {
            return Err(Error::MalformedLabel {
                factor: i,
                reason: format!("expected {} label vectors, got {}", expected.len(), label_inputs.len()),
            });
        }
        let mut row = z.to_vec();
        for (&j, v) in expected.iter().zip(label_inputs) {
            check_distribution(j, self.cardinality(j), v)?;
            row.extend_from_slice(v);
        }
        Ok(self.aes[i].decoder.0.forward(&Matrix::row_vector(&row))?.into_vec())
    }

    /// Batched decode; `labels` is the concatenated label block per row.
    pub fn decode_batch(&self, i: usize, z: &Matrix, labels: &Matrix) -> Result<Matrix> {
        self.check_factor(i)?;
        if labels.cols() != self.label_width(i) {
            return Err(Error::dim(format!("ae{i}.dec labels"), self.label_width(i), labels.cols()));
        }
        let input = Matrix::hcat(&[z, labels])?;
        self.aes[i].decoder.0.forward(&input)
    }

    /// Label block for decoder `i` holding exact one-hots of `labels` rows.
    pub fn one_hot_block(&self, i: usize, labels: &[&[usize]]) -> Matrix {
        let mut m = Matrix::zeros(labels.len(), self.label_width(i));
        for (r, l) in labels.iter().enumerate() {
            let mut off = 0;
            for j in others(self.n_factors(), i) {
                m.set(r, off + l[j], 1.0);
                off += self.cardinality(j);
            }
        }
        m
    }

    /// Column offset of factor `j`'s slot inside decoder `i`'s label block.
    pub fn label_offset(&self, i: usize, j: usize) -> usize {
        others(self.n_factors(), i).take_while(|&k| k != j).map(|k| self.cardinality(k)).sum()
    }

    // Tape builders. Parameters of the `trainable` networks are bound so
    // their gradients flow back; everything else enters as constants.

    pub(crate) fn encode_on_tape(&self, i: usize, tape: &mut Tape, x: Var, trainable: bool) -> Result<Var> {
        self.aes[i].encoder.0.on_tape(tape, x, trainable)
    }

    pub(crate) fn decode_on_tape(&self, i: usize, tape: &mut Tape, input: Var, trainable: bool) -> Result<Var> {
        self.aes[i].decoder.0.on_tape(tape, input, trainable)
    }

    pub(crate) fn predict_on_tape(
        &self,
        i: usize,
        j: usize,
        tape: &mut Tape,
        z: Var,
        trainable: bool,
    ) -> Result<Var> {
        let logits = self.predictor(i, j)?.net.on_tape(tape, z, trainable)?;
        Ok(tape.softmax(logits))
    }
}

/// Factor indices other than `i`, ascending.
pub fn others(n: usize, i: usize) -> impl Iterator<Item = usize> {
    (0..n).filter(move |&j| j != i)
}

fn pred_index(i: usize, j: usize) -> usize {
    if j < i {
        j
    } else {
        j - 1
    }
}

fn check_distribution(factor: usize, card: usize, v: &[f64]) -> Result<()> {
    if v.len() != card {
        return Err(Error::MalformedLabel {
            factor,
            reason: format!("length {} != cardinality {card}", v.len()),
        });
    }
    let total: f64 = v.iter().sum();
    if v.iter().any(|p| !(p.is_finite() && *p >= 0.0)) || (total - 1.0).abs() > 1e-6 {
        return Err(Error::MalformedLabel {
            factor,
            reason: format!("not a probability vector (sum {total})"),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests;
