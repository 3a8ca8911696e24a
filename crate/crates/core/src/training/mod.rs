//! Loss, segmentation, augmentation, optimizer, checkpoints and the
//! training loop.

mod adam;
mod checkpoint;
mod data;
mod fit;
mod loss;

pub use adam::{Adam, AdamHyper};
pub use checkpoint::{Checkpoint, MAGIC as CHECKPOINT_MAGIC, VERSION as CHECKPOINT_VERSION};
pub use data::{augment_remix, augment_scale, segment, StemSet, TrainConfig, MIXTURE_TOLERANCE};
pub use fit::{evaluate_loss, example_tensors, fit_toy, TrainLog, Trainer};
pub use loss::{rmse_loss, RMSE_EPS};
