//! Ground-truth evaluation: probe accuracy matrix, leakage, reconstruction
//! error and oracle-refereed swap synthesis.

mod probe;
mod swap;

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

pub use probe::{probe_accuracy, probe_matrix, ProbeConfig, ProbeMatrix};
pub use swap::{swap_agreement, swap_synthesis, SwapResult, SwapStats};

use crate::error::{Error, Result};
use crate::model::DisentangleModel;
use crate::synthgen::Dataset;

pub const REPORT_VERSION: u64 = 1;

/// Mean L1 reconstruction per auto-encoder, decoding with ground-truth
/// one-hots.
pub fn reconstruction_report(model: &DisentangleModel, dataset: &Dataset) -> Result<Vec<f64>> {
    if dataset.is_empty() {
        return Err(Error::Empty("dataset"));
    }
    let x = probe::features_matrix(dataset)?;
    let labels: Vec<&[usize]> = dataset.samples.iter().map(|s| s.labels.classes()).collect();
    (0..model.n_factors())
        .map(|i| {
            let z = model.encode_batch(i, &x)?;
            let x_hat = model.decode_batch(i, &z, &model.one_hot_block(i, &labels))?;
            let total: f64 = x
                .as_slice()
                .iter()
                .zip(x_hat.as_slice())
                .map(|(a, b)| (a - b).abs())
                .sum();
            Ok(total / x.len() as f64)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub version: u64,
    pub probe_matrix: ProbeMatrix,
    pub chance: Vec<f64>,
    pub leakage: Vec<f64>,
    pub recon_l1: Vec<f64>,
    /// Keyed `factor_<i>`: fraction of pairs where every factor agrees.
    pub swap_agreement: Map<String, Value>,
    pub swap_swapped: Vec<f64>,
    pub swap_carried: Vec<f64>,
    pub config: Value,
    pub seed: u64,
}

/// Evaluation schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    pub probe: ProbeConfig,
    pub swap_pairs: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            probe: ProbeConfig::default(),
            swap_pairs: 500,
        }
    }
}

impl MetricsReport {
    pub fn assemble(
        model: &DisentangleModel,
        probes: ProbeMatrix,
        recon_l1: Vec<f64>,
        swaps: &[SwapStats],
        config: Value,
        seed: u64,
    ) -> Self {
        let chance: Vec<f64> = model.factors.iter().map(|f| f.chance()).collect();
        let leakage = probes.leakage(&chance);
        let swap_agreement = swaps
            .iter()
            .enumerate()
            .map(|(i, s)| (format!("factor_{i}"), Value::from(s.full)))
            .collect();
        Self {
            version: REPORT_VERSION,
            probe_matrix: probes,
            chance,
            leakage,
            recon_l1,
            swap_agreement,
            swap_swapped: swaps.iter().map(|s| s.swapped).collect(),
            swap_carried: swaps.iter().map(|s| s.carried).collect(),
            config,
            seed,
        }
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("report is plain data")
    }

    pub fn emit(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json_string() + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let r: Self = serde_json::from_str(&text)?;
        if r.version != REPORT_VERSION {
            return Err(Error::Version {
                what: "report",
                found: r.version,
                expected: REPORT_VERSION,
            });
        }
        Ok(r)
    }
}

/// Probe matrix, reconstruction and swap agreement in one pass.
pub fn evaluate(
    model: &DisentangleModel,
    train_split: &Dataset,
    test_split: &Dataset,
    eval: &EvalConfig,
    config_echo: Value,
    seed: u64,
) -> Result<MetricsReport> {
    let probes = probe_matrix(model, train_split, test_split, seed, &eval.probe)?;
    let recon = reconstruction_report(model, test_split)?;
    let swaps = swap_agreement(model, test_split, eval.swap_pairs, seed)?;
    Ok(MetricsReport::assemble(model, probes, recon, &swaps, config_echo, seed))
}

#[cfg(test)]
mod tests;
