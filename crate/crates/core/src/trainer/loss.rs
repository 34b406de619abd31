use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `L_i = L_rec − min_j(λ_j · L_ij)`; ties go to the lowest `j`. Returns the
/// composed loss and the selected `j`.
pub fn compose_ae_loss_supervised(
    l_rec: f64,
    losses: &BTreeMap<usize, f64>,
    lambda: &BTreeMap<usize, f64>,
) -> Result<(f64, usize)> {
    let (l, j) = compose_ae_loss(l_rec, losses, lambda, None, f64::INFINITY)?;
    Ok((l, j.expect("non-empty losses select a term")))
}

/// Adversarial term `min(λ_j·L_ij, cap)`.
pub fn adversarial_term(loss: f64, lambda: f64, cap: f64) -> f64 {
    (lambda * loss).min(cap)
}

/// General form used by the trainer:
/// `L_rec + certainty_penalty − min_j min(λ_j·L_ij, cap)`. The min term is
/// omitted when `losses` is empty, which is only an error if there is
/// nothing else to compose (no certainty term either).
pub fn compose_ae_loss(
    l_rec: f64,
    losses: &BTreeMap<usize, f64>,
    lambda: &BTreeMap<usize, f64>,
    certainty_penalty: Option<f64>,
    cap: f64,
) -> Result<(f64, Option<usize>)> {
    if losses.is_empty() && certainty_penalty.is_none() {
        return Err(Error::Empty("adversarial losses"));
    }
    let mut best: Option<(usize, f64)> = None;
    for (&j, &l) in losses {
        let lam = *lambda.get(&j).ok_or(Error::IndexOutOfRange {
            what: "lambda factor",
            index: j,
            len: lambda.len(),
        })?;
        let term = adversarial_term(l, lam, cap);
        // BTreeMap iterates in ascending j, so strict < keeps the lowest index on ties.
        if best.map_or(true, |(_, b)| term < b) {
            best = Some((j, term));
        }
    }
    let adv = best.map_or(0.0, |(_, t)| t);
    Ok((l_rec + certainty_penalty.unwrap_or(0.0) - adv, best.map(|(j, _)| j)))
}

/// Per-step loss decomposition of one auto-encoder update.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchLossBreakdown {
    pub l_rec: f64,
    /// `L_ij` (cross-entropy of predictor (i, j)) for each target whose label
    /// is visible somewhere in the batch. With two factors this is `L_c`.
    pub l_adv: BTreeMap<usize, f64>,
    /// `γ · mean max_k P(y_k|z)` over hidden (sample, factor) pairs; `None`
    /// when every label is visible.
    pub certainty: Option<f64>,
    pub l_i: f64,
    pub argmin_j: Option<usize>,
}

impl BatchLossBreakdown {
    /// Recomputes `l_i` from the stored parts.
    pub fn recompose(&self, lambda: &[f64], cap: f64) -> f64 {
        let lam: BTreeMap<usize, f64> = lambda.iter().copied().enumerate().collect();
        compose_ae_loss(self.l_rec, &self.l_adv, &lam, self.certainty, cap)
            .map(|(l, _)| l)
            .unwrap_or(self.l_rec)
    }

    /// The single-adversary loss `L_c` (two-factor case).
    pub fn l_c(&self) -> Option<f64> {
        (self.l_adv.len() == 1).then(|| *self.l_adv.values().next().expect("one entry"))
    }
}
