use std::io::Write;
use std::path::Path;
use std::time::Instant;

use serde::Serialize;

use super::config::TrainConfig;
use super::loss::BatchLossBreakdown;
use super::update::{ae_update_partial_hooked, ae_update_supervised_hooked, predictor_update_hooked, Batch, UpdateHook};
use crate::error::{Error, Result};
use crate::model::DisentangleModel;
use crate::numerics::Rng;
use crate::synthgen::{Dataset, LabeledSample};

#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    pub round: usize,
    /// Seconds since the loop started; not persisted.
    pub elapsed_secs: f64,
    /// One breakdown per factor auto-encoder, in factor order.
    pub factors: Vec<BatchLossBreakdown>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainHistory {
    pub rounds: Vec<RoundRecord>,
}

#[derive(Serialize)]
struct HistoryLine {
    round: usize,
    factor: usize,
    l_rec: f64,
    l_adv: std::collections::BTreeMap<String, f64>,
    certainty: Option<f64>,
    l_i: f64,
    argmin_j: Option<usize>,
}

impl TrainHistory {
    pub fn len(&self) -> usize {
        self.rounds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rounds.is_empty()
    }

    pub fn last(&self) -> Option<&RoundRecord> {
        self.rounds.last()
    }

    /// NDJSON, one line per (round, factor).
    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        for r in &self.rounds {
            for (factor, b) in r.factors.iter().enumerate() {
                let line = HistoryLine {
                    round: r.round,
                    factor,
                    l_rec: b.l_rec,
                    l_adv: b.l_adv.iter().map(|(j, v)| (j.to_string(), *v)).collect(),
                    certainty: b.certainty,
                    l_i: b.l_i,
                    argmin_j: b.argmin_j,
                };
                serde_json::to_writer(&mut w, &line)?;
                w.write_all(b"\n").map_err(|e| Error::io("<history stream>", e))?;
            }
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(f);
        self.write_to(&mut w)?;
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Everything the loop needs to know before the first step.
fn check_inputs(model: &DisentangleModel, datasets: &[Dataset], config: &TrainConfig) -> Result<()> {
    if datasets.is_empty() {
        return Err(Error::Empty("dataset list"));
    }
    if datasets.iter().any(Dataset::is_empty) {
        return Err(Error::Empty("dataset"));
    }
    if datasets.iter().any(|d| d.factors != model.factors) {
        return Err(Error::SpecMismatch);
    }
    config.validate(model.n_factors())
}

fn draw_batch(dataset: &Dataset, size: usize, rng: &mut Rng) -> Result<Batch> {
    let picks: Vec<&LabeledSample> = (0..size).map(|_| &dataset.samples[rng.below(dataset.len())]).collect();
    Batch::from_samples(&picks)
}

/// Alternating optimisation. Each round, for every factor `i` in order:
/// `predictor_steps` predictor updates, then one auto-encoder update
/// (supervised when the batch is fully labelled, partial otherwise).
///
/// Batches rotate across datasets: predictor step `s` of round `r` draws from
/// dataset `(r·k + s + i) mod D`, the auto-encoder step from `(r + i) mod D`.
pub fn train_loop(model: &mut DisentangleModel, datasets: &[Dataset], config: &TrainConfig) -> Result<TrainHistory> {
    train_loop_hooked(model, datasets, config, None)
}

/// As [`train_loop`], invoking `hook` after every applied update.
pub fn train_loop_hooked(
    model: &mut DisentangleModel,
    datasets: &[Dataset],
    config: &TrainConfig,
    mut hook: Option<&mut UpdateHook<'_>>,
) -> Result<TrainHistory> {
    check_inputs(model, datasets, config)?;
    let n = model.n_factors();
    let d = datasets.len();
    let k = config.predictor_steps;
    let mut rng = Rng::new(config.seed).split("batches");
    let start = Instant::now();
    let mut history = TrainHistory::default();

    for round in 0..config.total_rounds {
        let mut factors = Vec::with_capacity(n);
        for i in 0..n {
            for s in 0..k {
                let ds = &datasets[(round * k + s + i) % d];
                let batch = draw_batch(ds, config.batch_size, &mut rng)?;
                predictor_update_hooked(model, i, &batch, config, hook.as_deref_mut())?;
            }
            let batch = draw_batch(&datasets[(round + i) % d], config.batch_size, &mut rng)?;
            let b = if batch.fully_labeled() {
                ae_update_supervised_hooked(model, i, &batch, config, hook.as_deref_mut())?
            } else {
                ae_update_partial_hooked(model, i, &batch, config, hook.as_deref_mut())?
            };
            factors.push(b);
        }
        history.rounds.push(RoundRecord {
            round,
            elapsed_secs: start.elapsed().as_secs_f64(),
            factors,
        });
        if round % 500 == 0 || round + 1 == config.total_rounds {
            let last = history.last().expect("just pushed");
            log::debug!(
                "round {round}: l_rec {:?}",
                last.factors.iter().map(|b| b.l_rec).collect::<Vec<_>>()
            );
        }
    }
    Ok(history)
}
