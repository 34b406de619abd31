use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hyper-parameters of the alternating adversarial optimisation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    /// Adversarial weight per factor `j`, applied to every predictor that
    /// targets `j`.
    pub lambda: Vec<f64>,
    /// Weight of the certainty penalty on factors whose label is hidden.
    pub gamma: f64,
    pub lr_ae: f64,
    pub lr_pred: f64,
    pub momentum: f64,
    /// Predictor steps per auto-encoder step.
    pub predictor_steps: usize,
    pub batch_size: usize,
    pub total_rounds: usize,
    /// Upper bound on each `λ_j·L_ij` before the min is taken.
    pub adv_cap: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lambda: vec![0.5; 3],
            gamma: 0.5,
            lr_ae: 0.01,
            lr_pred: 0.05,
            momentum: 0.9,
            predictor_steps: 5,
            batch_size: 64,
            total_rounds: 3000,
            adv_cap: 10.0,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self, n_factors: usize) -> Result<()> {
        let bad = |reason: String| Err(Error::Invalid { what: "train config", reason });
        if self.lambda.len() != n_factors {
            return bad(format!("lambda has {} entries for {n_factors} factors", self.lambda.len()));
        }
        if self.lambda.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
            return bad("lambda entries must be finite and non-negative".into());
        }
        for (name, v) in [("lr_ae", self.lr_ae), ("lr_pred", self.lr_pred), ("adv_cap", self.adv_cap)] {
            if !(v > 0.0) {
                return bad(format!("{name} must be positive"));
            }
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return bad("gamma must be finite and non-negative".into());
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad("momentum must lie in [0, 1)".into());
        }
        if self.predictor_steps == 0 {
            return bad("predictor_steps must be at least 1".into());
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1".into());
        }
        Ok(())
    }
}
