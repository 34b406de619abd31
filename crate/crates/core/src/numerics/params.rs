use super::matrix::Matrix;
use super::rng::Rng;
use crate::error::{Error, Result};

/// Whether a slot is persisted as a nested array or a flat array.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlotKind {
    Matrix,
    Vector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Slot {
    pub name: String,
    pub kind: SlotKind,
    pub value: Matrix,
    pub grad: Matrix,
    pub momentum: Matrix,
}

/// Named weights of one network, each with a gradient accumulator and a
/// momentum buffer of the same shape.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamStore {
    name: String,
    slots: Vec<Slot>,
}

impl ParamStore {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            slots: Vec::new(),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn add_matrix(&mut self, name: &str, value: Matrix) -> Result<usize> {
        self.add(name, SlotKind::Matrix, value)
    }

    pub fn add_vector(&mut self, name: &str, value: &[f64]) -> Result<usize> {
        self.add(name, SlotKind::Vector, Matrix::row_vector(value))
    }

    fn add(&mut self, name: &str, kind: SlotKind, value: Matrix) -> Result<usize> {
        if self.slots.iter().any(|s| s.name == name) {
            return Err(Error::Invalid {
                what: "parameter slot",
                reason: format!("duplicate slot {name} in {}", self.name),
            });
        }
        let (r, c) = value.shape();
        self.slots.push(Slot {
            name: name.to_string(),
            kind,
            value,
            grad: Matrix::zeros(r, c),
            momentum: Matrix::zeros(r, c),
        });
        Ok(self.slots.len() - 1)
    }

    pub fn slots(&self) -> &[Slot] {
        &self.slots
    }

    pub fn slot(&self, idx: usize) -> &Slot {
        &self.slots[idx]
    }

    pub fn slot_mut(&mut self, idx: usize) -> &mut Slot {
        &mut self.slots[idx]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.slots.iter().position(|s| s.name == name)
    }

    /// `"<store>.<slot>"`, the key used in model files.
    pub fn qualified(&self, idx: usize) -> String {
        format!("{}.{}", self.name, self.slots[idx].name)
    }

    pub fn value(&self, idx: usize) -> &Matrix {
        &self.slots[idx].value
    }

    /// Overwrites a slot's weights, keeping gradient and momentum buffers.
    pub fn set_value(&mut self, idx: usize, value: Matrix) -> Result<()> {
        let slot = &mut self.slots[idx];
        if slot.value.shape() != value.shape() {
            return Err(Error::dim(
                format!("{}.{}", self.name, slot.name),
                format!("{:?}", slot.value.shape()),
                format!("{:?}", value.shape()),
            ));
        }
        slot.value = value;
        Ok(())
    }

    pub fn zero_grads(&mut self) {
        for s in &mut self.slots {
            s.grad.fill(0.0);
        }
    }

    pub fn num_params(&self) -> usize {
        self.slots.iter().map(|s| s.value.len()).sum()
    }

    /// Flat copy of every weight, slot order then row-major.
    pub fn flat_values(&self) -> Vec<f64> {
        self.slots
            .iter()
            .flat_map(|s| s.value.as_slice().iter().copied())
            .collect()
    }

    pub fn flat_grads(&self) -> Vec<f64> {
        self.slots
            .iter()
            .flat_map(|s| s.grad.as_slice().iter().copied())
            .collect()
    }
}

/// He-style uniform initialisation: weights uniform on ±√3·√(2/fan_in)
/// (variance 2/fan_in), biases zero.
pub fn he_uniform(rows: usize, cols: usize, rng: &mut Rng) -> Matrix {
    let bound = 3f64.sqrt() * (2.0 / cols as f64).sqrt();
    let data = (0..rows * cols)
        .map(|_| rng.uniform_range(-bound, bound))
        .collect();
    Matrix::from_vec(rows, cols, data).expect("shape from construction")
}
