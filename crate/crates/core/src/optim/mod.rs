//! Adam, the plateau learning-rate schedule and the training loop.

mod adam;
mod schedule;
mod train;

pub use adam::{Adam, AdamConfig};
pub use schedule::{plateau_lr, PlateauScheduler};
pub use train::{evaluate_mse, fit, train, EpochRecord, TrainConfig, TrainHistory};
