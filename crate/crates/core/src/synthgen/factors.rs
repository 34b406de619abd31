use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const PITCH: usize = 0;
pub const ENVELOPE: usize = 1;
pub const TIMBRE: usize = 2;

/// One independent generative factor.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FactorSpec {
    #[serde(skip)]
    pub id: usize,
    pub name: String,
    pub cardinality: usize,
}

impl FactorSpec {
    pub fn new(id: usize, name: impl Into<String>, cardinality: usize) -> Self {
        Self {
            id,
            name: name.into(),
            cardinality,
        }
    }

    pub fn chance(&self) -> f64 {
        1.0 / self.cardinality as f64
    }
}

/// Pitch (4 classes), envelope (3), timbre (3).
pub fn canonical_factors() -> Vec<FactorSpec> {
    vec![
        FactorSpec::new(PITCH, "pitch", 4),
        FactorSpec::new(ENVELOPE, "envelope", 3),
        FactorSpec::new(TIMBRE, "timbre", 3),
    ]
}

/// Reassigns consecutive ids and checks cardinalities.
pub fn normalize_factors(mut factors: Vec<FactorSpec>) -> Result<Vec<FactorSpec>> {
    for (i, f) in factors.iter_mut().enumerate() {
        f.id = i;
        if f.cardinality < 2 {
            return Err(Error::Invalid {
                what: "factor spec",
                reason: format!("factor {} ({}) has cardinality {}", i, f.name, f.cardinality),
            });
        }
    }
    Ok(factors)
}

/// Class index per factor, ordered by factor id.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FactorAssignment(Vec<usize>);

impl FactorAssignment {
    pub fn new(classes: Vec<usize>) -> Self {
        Self(classes)
    }

    pub fn class(&self, factor: usize) -> usize {
        self.0[factor]
    }

    pub fn classes(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn validate(&self, factors: &[FactorSpec]) -> Result<()> {
        if self.0.len() != factors.len() {
            return Err(Error::dim("factor assignment", factors.len(), self.0.len()));
        }
        for (f, &c) in factors.iter().zip(&self.0) {
            if c >= f.cardinality {
                return Err(Error::InvalidClass {
                    factor: f.id,
                    class: c,
                    cardinality: f.cardinality,
                });
            }
        }
        Ok(())
    }

    /// Every assignment over `factors`, last factor varying fastest.
    pub fn enumerate(factors: &[FactorSpec]) -> Vec<FactorAssignment> {
        let mut out = vec![Vec::new()];
        for f in factors {
            out = out
                .into_iter()
                .flat_map(|prefix| {
                    (0..f.cardinality).map(move |c| {
                        let mut v = prefix.clone();
                        v.push(c);
                        v
                    })
                })
                .collect();
        }
        out.into_iter().map(FactorAssignment).collect()
    }
}
