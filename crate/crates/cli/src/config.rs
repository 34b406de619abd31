use std::path::Path;

use serde::{Deserialize, Serialize};

use disentangle_core::{EvalConfig, MaskPolicy, ModelDims, TrainConfig};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    pub n_samples: usize,
    /// `"full"` or `"only(<factor>)"`.
    pub mask_policy: String,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            n_samples: 8000,
            mask_policy: "full".into(),
        }
    }
}

/// One experiment: a single JSON file, every field optional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Master seed: data generation, model init, batch order and probes.
    pub seed: u64,
    pub data: DataConfig,
    pub train: TrainConfig,
    pub model: ModelDims,
    pub eval: EvalConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        let seed = 0;
        Self {
            seed,
            data: DataConfig::default(),
            train: TrainConfig {
                seed,
                ..TrainConfig::default()
            },
            model: ModelDims::default(),
            eval: EvalConfig::default(),
        }
    }
}

fn bad(key: &str, reason: impl std::fmt::Display) -> CliError {
    CliError::new(2, format!("config key `{key}`: {reason}"))
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let raw: serde_json::Value = serde_path_to_error::deserialize(de)
            .map_err(|e| CliError::new(2, format!("config is not valid json: {}", e.inner())))?;
        let train_seed = raw.pointer("/train/seed").cloned();
        let mut cfg: RunConfig = serde_path_to_error::deserialize(raw).map_err(|e| {
            let path = e.path().to_string();
            bad(if path.is_empty() { "." } else { &path }, e.inner())
        })?;
        // The top-level seed is the only seed; an explicit different train.seed is a conflict.
        if let Some(s) = train_seed {
            if s.as_u64() != Some(cfg.seed) {
                return Err(bad("train.seed", "must be omitted or equal to `seed`"));
            }
        }
        cfg.train.seed = cfg.seed;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::new(2, format!("cannot read config {}: {e}", p.display())))?;
                Self::parse(&text)
            }
        }
    }

    pub fn with_seed(mut self, seed: Option<u64>) -> Self {
        if let Some(s) = seed {
            self.seed = s;
            self.train.seed = s;
        }
        self
    }

    pub fn mask_policy(&self) -> Result<MaskPolicy, CliError> {
        let p: MaskPolicy = self.data.mask_policy.parse().map_err(|e| bad("data.mask_policy", e))?;
        if let MaskPolicy::Only(f) = p {
            if f >= self.train.lambda.len() {
                return Err(bad("data.mask_policy", format!("factor {f} does not exist")));
            }
        }
        Ok(p)
    }

    fn validate(&self) -> Result<(), CliError> {
        if self.data.n_samples == 0 {
            return Err(bad("data.n_samples", "must be at least 1"));
        }
        self.mask_policy()?;
        self.train
            .validate(disentangle_core::synthgen::canonical_factors().len())
            .map_err(|e| bad("train", e))?;
        let m = &self.model;
        for (k, v) in [("model.latent", m.latent), ("model.ae_hidden", m.ae_hidden), ("model.pred_hidden", m.pred_hidden)] {
            if v == 0 {
                return Err(bad(k, "must be positive"));
            }
        }
        let p = &self.eval.probe;
        if p.batch_size == 0 || p.hidden == 0 || !(p.lr > 0.0) || !(0.0..1.0).contains(&p.momentum) {
            return Err(bad("eval.probe", "batch_size, hidden and lr must be positive; momentum in [0, 1)"));
        }
        if self.eval.swap_pairs == 0 {
            return Err(bad("eval.swap_pairs", "must be at least 1"));
        }
        Ok(())
    }

    /// Fully materialised config, as echoed into reports.
    pub fn echo(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config is plain data")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_is_all_defaults() {
        let c = RunConfig::parse("{}").unwrap();
        assert_eq!(c, RunConfig::default());
        let echo = c.echo();
        assert_eq!(echo["train"]["lambda"], serde_json::json!([0.5, 0.5, 0.5]));
        assert_eq!(echo["eval"]["probe"]["epochs"], 500);
        assert_eq!(echo["eval"]["swap_pairs"], 500);
        assert_eq!(echo["model"]["latent"], 8);
    }

    #[test]
    fn unknown_key_is_named() {
        let e = RunConfig::parse(r#"{"train":{"lamda":[1,1,1]}}"#).unwrap_err();
        assert_eq!(e.code, 2);
        assert!(e.message.contains("train.lamda"), "{}", e.message);
        let e = RunConfig::parse(r#"{"data":{"mask_policy":"some(1)"}}"#).unwrap_err();
        assert!(e.message.contains("data.mask_policy"), "{}", e.message);
        let e = RunConfig::parse(r#"{"data":{"mask_policy":"only(7)"}}"#).unwrap_err();
        assert!(e.message.contains("data.mask_policy"), "{}", e.message);
    }

    #[test]
    fn seed_overrides() {
        let c = RunConfig::parse(r#"{"seed":4}"#).unwrap();
        assert_eq!(c.train.seed, 4);
        let c = c.with_seed(Some(9));
        assert_eq!((c.seed, c.train.seed), (9, 9));
        assert!(RunConfig::parse(r#"{"seed":4,"train":{"seed":5}}"#).is_err());
        assert!(RunConfig::parse(r#"{"seed":4,"train":{"seed":4}}"#).is_ok());
    }

    #[test]
    fn invalid_values_rejected() {
        for text in [
            r#"{"train":{"lambda":[1,1]}}"#,
            r#"{"train":{"predictor_steps":0}}"#,
            r#"{"data":{"n_samples":0}}"#,
            r#"{"eval":{"swap_pairs":0}}"#,
            r#"{"model":{"latent":0}}"#,
            "[1,2]",
            "{",
        ] {
            assert_eq!(RunConfig::parse(text).unwrap_err().code, 2, "{text}");
        }
    }
}
