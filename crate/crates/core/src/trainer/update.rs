//! Single optimisation steps: predictor descent and auto-encoder descent on
//! the adversarially composed objective.

use std::collections::BTreeMap;

use super::config::TrainConfig;
use super::loss::{compose_ae_loss, BatchLossBreakdown};
use crate::error::{Error, Result};
use crate::model::{others, DisentangleModel};
use crate::numerics::{sgd_step, BackwardFault, Matrix, Tape, Var};
use crate::synthgen::LabeledSample;

/// A minibatch: stacked features plus per-sample labels and visibility.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub x: Matrix,
    pub labels: Vec<Vec<usize>>,
    pub mask: Vec<Vec<bool>>,
}

impl Batch {
    pub fn from_samples(samples: &[&LabeledSample]) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Empty("batch"));
        }
        let dim = samples[0].features.as_slice().len();
        let mut data = Vec::with_capacity(samples.len() * dim);
        for s in samples {
            data.extend_from_slice(s.features.as_slice());
        }
        Ok(Self {
            x: Matrix::from_vec(samples.len(), dim, data)?,
            labels: samples.iter().map(|s| s.labels.classes().to_vec()).collect(),
            mask: samples.iter().map(|s| s.mask.clone()).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn fully_labeled(&self) -> bool {
        self.mask.iter().all(|m| m.iter().all(|&v| v))
    }

    /// Rows whose label for `factor` is visible.
    pub fn visible_rows(&self, factor: usize) -> Vec<usize> {
        (0..self.len()).filter(|&r| self.mask[r][factor]).collect()
    }

    pub fn hidden_rows(&self, factor: usize) -> Vec<usize> {
        (0..self.len()).filter(|&r| !self.mask[r][factor]).collect()
    }

    fn targets(&self, rows: &[usize], factor: usize) -> Vec<usize> {
        rows.iter().map(|&r| self.labels[r][factor]).collect()
    }
}

/// Which networks an update touched.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpdateKind {
    Predictor { owner: usize, target: usize },
    AutoEncoder { owner: usize },
}

/// Called after every applied SGD step with the model before and after it.
pub type UpdateHook<'a> = dyn FnMut(UpdateKind, &DisentangleModel, &DisentangleModel) + 'a;

/// Mean cross-entropy of predictor (i, j) on the visible rows of each
/// target, without updating anything.
pub fn predictor_losses(model: &DisentangleModel, i: usize, batch: &Batch) -> Result<BTreeMap<usize, f64>> {
    let z = model.encode_batch(i, &batch.x)?;
    let mut out = BTreeMap::new();
    for j in others(model.n_factors(), i) {
        let rows = batch.visible_rows(j);
        if rows.is_empty() {
            continue;
        }
        let p = model.predict_batch(i, j, &z.select_rows(&rows))?;
        let targets = batch.targets(&rows, j);
        let ce: f64 = targets
            .iter()
            .enumerate()
            .map(|(r, &t)| crate::numerics::cross_entropy(p.row(r), t))
            .sum::<Result<f64>>()?;
        out.insert(j, ce / rows.len() as f64);
    }
    Ok(out)
}

/// One SGD step on every predictor (i, j) that has labelled rows in the
/// batch. The encoder is evaluated off-tape, so no gradient reaches it.
/// Returns each stepped predictor's pre-step loss.
pub fn predictor_update(
    model: &mut DisentangleModel,
    i: usize,
    batch: &Batch,
    config: &TrainConfig,
) -> Result<BTreeMap<usize, f64>> {
    predictor_update_hooked(model, i, batch, config, None)
}

pub(crate) fn predictor_update_hooked(
    model: &mut DisentangleModel,
    i: usize,
    batch: &Batch,
    config: &TrainConfig,
    mut hook: Option<&mut UpdateHook<'_>>,
) -> Result<BTreeMap<usize, f64>> {
    if batch.is_empty() {
        return Err(Error::Empty("batch"));
    }
    let z = model.encode_batch(i, &batch.x)?;
    let mut out = BTreeMap::new();
    for j in others(model.n_factors(), i) {
        let rows = batch.visible_rows(j);
        if rows.is_empty() {
            continue;
        }
        let mut tape = Tape::new();
        let zv = tape.constant(z.select_rows(&rows));
        let p = model.predict_on_tape(i, j, &mut tape, zv, true)?;
        let loss = tape.cross_entropy(p, &batch.targets(&rows, j))?;
        out.insert(j, tape.scalar(loss));

        let before = hook.is_some().then(|| model.clone());
        let store = &mut model.predictor_mut(i, j)?.net.store;
        tape.backward(loss, &mut [&mut *store])?;
        sgd_step(store, config.lr_pred, config.momentum);
        if let (Some(h), Some(b)) = (hook.as_deref_mut(), before) {
            h(UpdateKind::Predictor { owner: i, target: j }, &b, model);
        }
    }
    Ok(out)
}

pub(crate) struct AeGraph {
    pub tape: Tape,
    pub loss: Var,
    pub breakdown: BatchLossBreakdown,
    /// Decoder label block as fed (one-hots and detached soft predictions).
    pub labels: Matrix,
}

/// Builds auto-encoder `i`'s objective on a tape. Predictors enter as
/// constants; hidden labels are replaced by the (detached) soft prediction,
/// or by `frozen_labels` when given.
pub(crate) fn ae_graph(
    model: &DisentangleModel,
    i: usize,
    batch: &Batch,
    config: &TrainConfig,
    fault: Option<BackwardFault>,
    frozen_labels: Option<&Matrix>,
) -> Result<AeGraph> {
    if batch.is_empty() {
        return Err(Error::Empty("batch"));
    }
    let n = model.n_factors();
    let mut tape = fault.map_or_else(Tape::new, Tape::with_fault);
    let x = tape.constant(batch.x.clone());
    let z = model.encode_on_tape(i, &mut tape, x, true)?;

    let mut label_block = Matrix::zeros(batch.len(), model.label_width(i));
    let mut l_adv: BTreeMap<usize, f64> = BTreeMap::new();
    let mut ce_vars: BTreeMap<usize, Var> = BTreeMap::new();
    let mut cert_parts: Vec<(Var, usize)> = Vec::new();

    for j in others(n, i) {
        let p = model.predict_on_tape(i, j, &mut tape, z, false)?;
        let offset = model.label_offset(i, j);
        let visible = batch.visible_rows(j);
        let hidden = batch.hidden_rows(j);
        for &r in &visible {
            label_block.set(r, offset + batch.labels[r][j], 1.0);
        }
        for &r in &hidden {
            let probs = tape.value(p).row(r).to_vec();
            label_block.row_mut(r)[offset..offset + probs.len()].copy_from_slice(&probs);
        }
        if !visible.is_empty() {
            let pv = tape.select_rows(p, &visible)?;
            let ce = tape.cross_entropy(pv, &batch.targets(&visible, j))?;
            l_adv.insert(j, tape.scalar(ce));
            ce_vars.insert(j, ce);
        }
        if !hidden.is_empty() {
            let ph = tape.select_rows(p, &hidden)?;
            cert_parts.push((tape.max_prob(ph)?, hidden.len()));
        }
    }

    if let Some(f) = frozen_labels {
        if f.shape() != label_block.shape() {
            return Err(Error::dim(
                "frozen labels",
                format!("{:?}", label_block.shape()),
                format!("{:?}", f.shape()),
            ));
        }
        label_block = f.clone();
    }
    let labels = tape.constant(label_block.clone());
    let dec_in = tape.hcat(&[z, labels])?;
    let x_hat = model.decode_on_tape(i, &mut tape, dec_in, true)?;
    let l_rec = tape.l1(x_hat, x)?;
    let mut loss = l_rec;

    // Mean over every hidden (sample, factor) pair.
    let certainty = if cert_parts.is_empty() {
        None
    } else {
        let total: usize = cert_parts.iter().map(|(_, c)| c).sum();
        let mut acc: Option<Var> = None;
        for (v, count) in cert_parts {
            let w = tape.scale(v, config.gamma * count as f64 / total as f64);
            acc = Some(match acc {
                None => w,
                Some(a) => tape.add(a, w)?,
            });
        }
        let c = acc.expect("non-empty");
        loss = tape.add(loss, c)?;
        Some(tape.scalar(c))
    };

    let lambda: BTreeMap<usize, f64> = config.lambda.iter().copied().enumerate().collect();
    let l_rec_value = tape.scalar(l_rec);
    let (l_i, argmin_j) = if l_adv.is_empty() && certainty.is_none() {
        (l_rec_value, None)
    } else {
        compose_ae_loss(l_rec_value, &l_adv, &lambda, certainty, config.adv_cap)?
    };
    if let Some(j) = argmin_j {
        let lam = config.lambda[j];
        // A capped term is constant, so it contributes no gradient.
        if lam * l_adv[&j] < config.adv_cap {
            let term = tape.scale(ce_vars[&j], lam);
            loss = tape.sub(loss, term)?;
        } else {
            let cap = tape.constant(Matrix::scalar(config.adv_cap));
            loss = tape.sub(loss, cap)?;
        }
    }
    debug_assert!((tape.scalar(loss) - l_i).abs() <= 1e-12 * (1.0 + l_i.abs()));

    Ok(AeGraph {
        tape,
        loss,
        breakdown: BatchLossBreakdown {
            l_rec: l_rec_value,
            l_adv,
            certainty,
            l_i,
            argmin_j,
        },
        labels: label_block,
    })
}

/// Auto-encoder objective on a batch, without updating anything.
pub fn ae_objective(model: &DisentangleModel, i: usize, batch: &Batch, config: &TrainConfig) -> Result<BatchLossBreakdown> {
    Ok(ae_graph(model, i, batch, config, None, None)?.breakdown)
}

fn ae_step(
    model: &mut DisentangleModel,
    i: usize,
    batch: &Batch,
    config: &TrainConfig,
    hook: Option<&mut UpdateHook<'_>>,
) -> Result<BatchLossBreakdown> {
    let AeGraph { tape, loss, breakdown, .. } = ae_graph(model, i, batch, config, None, None)?;
    let before = hook.is_some().then(|| model.clone());
    let ae = model.ae_mut(i)?;
    tape.backward(loss, &mut [&mut ae.encoder.0.store, &mut ae.decoder.0.store])?;
    sgd_step(&mut ae.encoder.0.store, config.lr_ae, config.momentum);
    sgd_step(&mut ae.decoder.0.store, config.lr_ae, config.momentum);
    if let (Some(h), Some(b)) = (hook, before) {
        h(UpdateKind::AutoEncoder { owner: i }, &b, model);
    }
    Ok(breakdown)
}

/// Fully supervised step: decoder gets ground-truth one-hots and the
/// objective is `L_rec − min_j min(λ_j·L_ij, cap)`.
pub fn ae_update_supervised(
    model: &mut DisentangleModel,
    i: usize,
    batch: &Batch,
    config: &TrainConfig,
) -> Result<BatchLossBreakdown> {
    ae_update_supervised_hooked(model, i, batch, config, None)
}

pub(crate) fn ae_update_supervised_hooked(
    model: &mut DisentangleModel,
    i: usize,
    batch: &Batch,
    config: &TrainConfig,
    hook: Option<&mut UpdateHook<'_>>,
) -> Result<BatchLossBreakdown> {
    if let Some(sample) = batch.mask.iter().position(|m| m.iter().any(|&v| !v)) {
        return Err(Error::Unlabeled { sample });
    }
    ae_step(model, i, batch, config, hook)
}

/// Partial-annotation step: hidden labels contribute a certainty penalty and
/// are replaced at the decoder by the predictor's soft output.
pub fn ae_update_partial(
    model: &mut DisentangleModel,
    i: usize,
    batch: &Batch,
    config: &TrainConfig,
) -> Result<BatchLossBreakdown> {
    ae_step(model, i, batch, config, None)
}

pub(crate) fn ae_update_partial_hooked(
    model: &mut DisentangleModel,
    i: usize,
    batch: &Batch,
    config: &TrainConfig,
    hook: Option<&mut UpdateHook<'_>>,
) -> Result<BatchLossBreakdown> {
    ae_step(model, i, batch, config, hook)
}
