//! Post-step audits over a logged run: descent direction and freeze
//! discipline, both computed from the before/after models of each update.

use super::config::TrainConfig;
use super::train_loop::train_loop_hooked;
use super::update::UpdateKind;
use crate::error::{Error, Result};
use crate::model::DisentangleModel;
use crate::numerics::ParamStore;
use crate::synthgen::Dataset;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct AuditReport {
    pub updates: usize,
    /// Largest directional derivative seen (descent audit only).
    pub max_directional: f64,
    pub violations: Vec<String>,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.updates > 0 && self.violations.is_empty()
    }
}

/// Store names an update of `kind` may write.
pub fn owned_stores(kind: UpdateKind) -> Vec<String> {
    match kind {
        UpdateKind::Predictor { owner, target } => vec![format!("ae{owner}.pred{target}")],
        UpdateKind::AutoEncoder { owner } => vec![format!("ae{owner}.enc"), format!("ae{owner}.dec")],
    }
}

fn kind_label(kind: UpdateKind) -> String {
    match kind {
        UpdateKind::Predictor { owner, target } => format!("predictor ({owner},{target})"),
        UpdateKind::AutoEncoder { owner } => format!("auto-encoder {owner}"),
    }
}

/// `Σ grad·Δw` over a store, with the gradient read from `after`, which is
/// the gradient the step consumed.
fn directional(before: &ParamStore, after: &ParamStore) -> f64 {
    before
        .slots()
        .iter()
        .zip(after.slots())
        .map(|(b, a)| {
            a.grad
                .as_slice()
                .iter()
                .zip(a.value.as_slice().iter().zip(b.value.as_slice()))
                .map(|(g, (wa, wb))| g * (wa - wb))
                .sum::<f64>()
        })
        .sum()
}

/// Runs `config` with momentum forced to zero and checks that every applied
/// update moved its own parameters along a non-ascent direction.
pub fn descent_audit(model: &mut DisentangleModel, datasets: &[Dataset], config: &TrainConfig) -> Result<AuditReport> {
    let mut config = config.clone();
    config.momentum = 0.0;
    let mut report = AuditReport {
        max_directional: f64::NEG_INFINITY,
        ..AuditReport::default()
    };
    let mut hook = |kind: UpdateKind, before: &DisentangleModel, after: &DisentangleModel| {
        report.updates += 1;
        let owned = owned_stores(kind);
        let d: f64 = before
            .stores()
            .into_iter()
            .zip(after.stores())
            .filter(|(b, _)| owned.iter().any(|o| o == b.name()))
            .map(|(b, a)| directional(b, a))
            .sum();
        report.max_directional = report.max_directional.max(d);
        if d > 0.0 {
            report.violations.push(format!("{}: directional derivative {d:e}", kind_label(kind)));
        }
    };
    train_loop_hooked(model, datasets, &config, Some(&mut hook))?;
    Ok(report)
}

/// Checks bitwise that every update left all stores it does not own
/// untouched (values, gradients and momentum).
pub fn freeze_audit(model: &mut DisentangleModel, datasets: &[Dataset], config: &TrainConfig) -> Result<AuditReport> {
    let mut report = AuditReport::default();
    let mut hook = |kind: UpdateKind, before: &DisentangleModel, after: &DisentangleModel| {
        report.updates += 1;
        let owned = owned_stores(kind);
        for (b, a) in before.stores().into_iter().zip(after.stores()) {
            let mine = owned.iter().any(|o| o == b.name());
            if !mine && b != a {
                report.violations.push(format!("{} touched {}", kind_label(kind), b.name()));
            }
            if mine && b.slots().iter().zip(a.slots()).all(|(x, y)| x.value == y.value) {
                report.violations.push(format!("{} left its own store {} unchanged", kind_label(kind), b.name()));
            }
        }
    };
    train_loop_hooked(model, datasets, config, Some(&mut hook))?;
    if report.updates == 0 {
        return Err(Error::Empty("audited updates"));
    }
    Ok(report)
}
