//! 64-bit differentiable primitives, reverse-mode tape, parameters and SGD.

mod matrix;
pub mod ops;
mod optim;
mod params;
mod rng;
mod tape;

pub use matrix::Matrix;
pub use ops::{cross_entropy, dense_forward, l1_loss, leaky_relu, softmax, LEAKY_SLOPE, LOG_EPS};
pub use optim::sgd_step;
pub use params::{he_uniform, ParamStore, Slot, SlotKind};
pub use rng::Rng;
pub use tape::{BackwardFault, Gradients, Tape, Var};

#[cfg(test)]
mod tests;
