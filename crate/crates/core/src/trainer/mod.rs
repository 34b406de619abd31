//! Alternating adversarial training of the factor auto-encoders.

mod audit;
mod config;
mod loss;
mod train_loop;
mod update;

pub use audit::{descent_audit, freeze_audit, owned_stores, AuditReport};
pub use config::TrainConfig;
pub use loss::{adversarial_term, compose_ae_loss, compose_ae_loss_supervised, BatchLossBreakdown};
pub use train_loop::{train_loop, train_loop_hooked, RoundRecord, TrainHistory};
pub(crate) use update::ae_graph;
pub use update::{
    ae_objective, ae_update_partial, ae_update_supervised, predictor_losses, predictor_update, Batch, UpdateHook,
    UpdateKind,
};
