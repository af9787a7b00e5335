//! Multi-task training: joint objective, epoch loop, dev-set selection,
//! checkpointing and the full-model gradient check.

mod checkpoint;
mod loss;
mod run;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CheckpointError};
pub use loss::{intent_loss, joint_loss, l2_penalty, slot_loss, CLAMP};
pub use run::{
    fit, improves, model_gradient_check, select_best, train_epoch, training_loss,
    training_loss_grads, EpochLog, EpochStats, SelectionMetric, TrainConfig, TrainError,
};
