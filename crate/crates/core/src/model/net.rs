use crate::error::Result;
use crate::numerics::ops::leaky;
use crate::numerics::{he_uniform, Matrix, ParamStore, Rng, Tape, Var, LEAKY_SLOPE};

pub const W1: usize = 0;
pub const B1: usize = 1;
pub const W2: usize = 2;
pub const B2: usize = 3;

/// dense → leaky_relu → dense.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub store: ParamStore,
}

impl Mlp {
    pub fn new(name: &str, input: usize, hidden: usize, output: usize, rng: &mut Rng) -> Self {
        let mut store = ParamStore::new(name);
        store.add_matrix("W1", he_uniform(hidden, input, rng)).expect("fresh store");
        store.add_vector("b1", &vec![0.0; hidden]).expect("fresh store");
        store.add_matrix("W2", he_uniform(output, hidden, rng)).expect("fresh store");
        store.add_vector("b2", &vec![0.0; output]).expect("fresh store");
        Self { store }
    }

    pub fn input_dim(&self) -> usize {
        self.store.value(W1).cols()
    }

    pub fn hidden_dim(&self) -> usize {
        self.store.value(W1).rows()
    }

    pub fn output_dim(&self) -> usize {
        self.store.value(W2).rows()
    }

    pub fn forward(&self, x: &Matrix) -> Result<Matrix> {
        let v = |i| self.store.value(i);
        if x.cols() != self.input_dim() {
            return Err(crate::Error::dim(
                format!("{}.W1", self.store.name()),
                self.input_dim(),
                x.cols(),
            ));
        }
        let mut h = v(W1).affine_rows(x, v(B1).as_slice());
        h.as_mut_slice().iter_mut().for_each(|a| *a = leaky(*a, LEAKY_SLOPE));
        Ok(v(W2).affine_rows(&h, v(B2).as_slice()))
    }

    pub fn on_tape(&self, tape: &mut Tape, x: Var, trainable: bool) -> Result<Var> {
        let mut bind = |slot| {
            if trainable {
                tape.param(&self.store, slot)
            } else {
                tape.constant(self.store.value(slot).clone())
            }
        };
        let (w1, b1, w2, b2) = (bind(W1), bind(B1), bind(W2), bind(B2));
        let h = tape.dense(x, w1, b1)?;
        let h = tape.leaky_relu(h, LEAKY_SLOPE);
        tape.dense(h, w2, b2)
    }
}
