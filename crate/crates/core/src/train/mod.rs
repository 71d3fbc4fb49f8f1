mod adam;
mod checkpoint;
mod trainer;

pub use adam::{adam_step, AdamState};
pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use trainer::{
    batch_gradients, loss_on_batch, prepare_windows, train, train_with_validation, TrainConfig, TrainOutcome,
    Validation,
};
