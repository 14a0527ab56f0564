//! The experiment commands. Each writes its artifacts below `out` and returns
//! the numbers it wrote.

mod boundary;
mod conv1d;
mod deblur;
pub mod output;
mod report;

pub use boundary::{cmd_boundary, BoundaryRow};
pub use conv1d::{cmd_ablation, cmd_conv1d, extract_h, AblationOutcome, AblationRow, Conv1dOutcome};
pub use deblur::{cmd_deblur, DeblurOutcome};
pub use report::{cmd_report, PlotPoint, ReportOutcome, ReportRow};

use coordgate::nn::{Model, ModelSpec};
use coordgate::optim::{fit, TrainConfig, TrainHistory};
use coordgate::datagen::DatasetPair;
use coordgate::Result;

use crate::config::ExperimentConfig;

/// A trained model with its history.
pub struct Trained {
    pub model: Model<f64>,
    pub history: TrainHistory,
}

/// Builds `spec` with init seed `seed` and trains it on the given split.
pub fn train_model(
    spec: &ModelSpec,
    seed: u64,
    train: &DatasetPair<f64>,
    val: &DatasetPair<f64>,
    tc: &TrainConfig,
) -> Result<Trained> {
    let mut model = Model::build(spec, seed)?;
    let history = fit(&mut model, train, val, tc)?;
    Ok(Trained { model, history })
}

/// Training config with the run seed applied.
pub(crate) fn train_config(cfg: &ExperimentConfig, seed: u64) -> TrainConfig {
    TrainConfig {
        seed,
        ..cfg.train.clone()
    }
}
