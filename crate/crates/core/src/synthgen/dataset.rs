use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::factors::{canonical_factors, normalize_factors, FactorAssignment, FactorSpec};
use super::features::{featurize, FeatureVector, FEATURE_DIM};
use super::signal::synth_segment;
use crate::error::{Error, Result};
use crate::numerics::Rng;

pub const DATASET_VERSION: u64 = 1;

/// Which labels a generated dataset exposes to training.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaskPolicy {
    Full,
    Only(usize),
}

impl MaskPolicy {
    pub fn mask(&self, n_factors: usize) -> Vec<bool> {
        (0..n_factors)
            .map(|f| match self {
                MaskPolicy::Full => true,
                MaskPolicy::Only(v) => f == *v,
            })
            .collect()
    }
}

impl fmt::Display for MaskPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MaskPolicy::Full => write!(f, "full"),
            MaskPolicy::Only(v) => write!(f, "only({v})"),
        }
    }
}

impl FromStr for MaskPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "full" {
            return Ok(MaskPolicy::Full);
        }
        s.strip_prefix("only(")
            .and_then(|r| r.strip_suffix(')'))
            .and_then(|n| n.trim().parse().ok())
            .map(MaskPolicy::Only)
            .ok_or_else(|| Error::Invalid {
                what: "mask_policy",
                reason: format!("expected \"full\" or \"only(<factor>)\", got {s:?}"),
            })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample {
    pub features: FeatureVector,
    /// Full ground truth, kept for evaluation even where the mask hides it.
    pub labels: FactorAssignment,
    pub mask: Vec<bool>,
    pub nuisance_seed: u64,
}

impl LabeledSample {
    pub fn fully_labeled(&self) -> bool {
        self.mask.iter().all(|&m| m)
    }

    pub fn visible(&self, factor: usize) -> bool {
        self.mask[factor]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub factors: Vec<FactorSpec>,
    pub samples: Vec<LabeledSample>,
    pub provenance: String,
    pub seed: u64,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn n_factors(&self) -> usize {
        self.factors.len()
    }

    /// Count of samples whose label for each factor is visible.
    pub fn visibility_counts(&self) -> Vec<usize> {
        (0..self.n_factors())
            .map(|f| self.samples.iter().filter(|s| s.visible(f)).count())
            .collect()
    }

    /// Same samples with every label visible (for evaluation on ground truth).
    pub fn unmasked(&self) -> Dataset {
        let mut d = self.clone();
        d.samples.iter_mut().for_each(|s| s.mask.iter_mut().for_each(|m| *m = true));
        d
    }

    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        let header = DatasetHeader {
            version: DATASET_VERSION,
            factors: self.factors.clone(),
            seed: self.seed,
            provenance: Some(self.provenance.clone()),
        };
        serde_json::to_writer(&mut w, &header)?;
        w.write_all(b"\n").map_err(|e| Error::io("<dataset stream>", e))?;
        for s in &self.samples {
            let rec = SampleRecord {
                features: s.features.as_slice().to_vec(),
                labels: s.labels.classes().to_vec(),
                mask: s.mask.clone(),
                nuisance_seed: s.nuisance_seed,
            };
            serde_json::to_writer(&mut w, &rec)?;
            w.write_all(b"\n").map_err(|e| Error::io("<dataset stream>", e))?;
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

    pub fn read_from(r: impl BufRead) -> Result<Dataset> {
        let mut lines = r.lines();
        let header_line = lines
            .next()
            .ok_or(Error::Empty("dataset file"))?
            .map_err(|e| Error::io("<dataset stream>", e))?;
        let header: DatasetHeader = serde_json::from_str(&header_line)?;
        if header.version != DATASET_VERSION {
            return Err(Error::Version {
                what: "dataset",
                found: header.version,
                expected: DATASET_VERSION,
            });
        }
        let factors = normalize_factors(header.factors)?;
        let mut samples = Vec::new();
        for line in lines {
            let line = line.map_err(|e| Error::io("<dataset stream>", e))?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: SampleRecord = serde_json::from_str(&line)?;
            if rec.features.len() != FEATURE_DIM || rec.mask.len() != factors.len() {
                return Err(Error::Invalid {
                    what: "dataset record",
                    reason: format!("sample {} has wrong feature or mask length", samples.len()),
                });
            }
            let labels = FactorAssignment::new(rec.labels);
            labels.validate(&factors)?;
            samples.push(LabeledSample {
                features: FeatureVector::new(rec.features)?,
                labels,
                mask: rec.mask,
                nuisance_seed: rec.nuisance_seed,
            });
        }
        Ok(Dataset {
            factors,
            samples,
            provenance: header.provenance.unwrap_or_default(),
            seed: header.seed,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Dataset> {
        let path = path.as_ref();
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Dataset::read_from(std::io::BufReader::new(f))
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DatasetHeader {
    version: u64,
    factors: Vec<FactorSpec>,
    seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    provenance: Option<String>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SampleRecord {
    features: Vec<f64>,
    labels: Vec<usize>,
    mask: Vec<bool>,
    nuisance_seed: u64,
}

/// Samples `n_samples` canonical segments with independently uniform factor
/// classes and featurises them.
pub fn make_dataset(n_samples: usize, policy: MaskPolicy, seed: u64) -> Result<Dataset> {
    if n_samples == 0 {
        return Err(Error::Empty("dataset request"));
    }
    let factors = canonical_factors();
    if let MaskPolicy::Only(f) = policy {
        if f >= factors.len() {
            return Err(Error::IndexOutOfRange {
                what: "mask factor",
                index: f,
                len: factors.len(),
            });
        }
    }
    let mut rng = Rng::new(seed).split("dataset");
    let mask = policy.mask(factors.len());
    let mut samples = Vec::with_capacity(n_samples);
    for _ in 0..n_samples {
        let labels = FactorAssignment::new(factors.iter().map(|f| rng.below(f.cardinality)).collect());
        let nuisance_seed = rng.next_u64();
        let seg = synth_segment(&labels, nuisance_seed)?;
        samples.push(LabeledSample {
            features: featurize(seg.samples())?,
            labels,
            mask: mask.clone(),
            nuisance_seed,
        });
    }
    Ok(Dataset {
        factors,
        samples,
        provenance: format!("synthetic:{policy}"),
        seed,
    })
}
