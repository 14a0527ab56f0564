use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::Tape;
use crate::datagen::DatasetPair;
use crate::error::{Error, Result};
use crate::metrics::psnr_from_mse;
use crate::nn::Model;
use crate::optim::{Adam, AdamConfig, PlateauScheduler};
use crate::scalar::Real;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub patience: usize,
    pub decay: f64,
    pub seed: u64,
    pub train_fraction: f64,
    pub val_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            batch_size: 32,
            lr: 1e-3,
            patience: 20,
            decay: 0.5,
            seed: 0,
            train_fraction: 0.9,
            val_fraction: 0.1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.patience < 1 {
            return bad("patience must be at least 1".into());
        }
        if !(self.decay > 0.0 && self.decay < 1.0) {
            return bad(format!("decay factor {} outside (0, 1)", self.decay));
        }
        if self.batch_size == 0 {
            return bad("batch size must be positive".into());
        }
        if (self.train_fraction + self.val_fraction - 1.0).abs() > 1e-9
            || self.val_fraction <= 0.0
            || self.train_fraction <= 0.0
        {
            return bad(format!(
                "split fractions {} + {} must be positive and sum to 1",
                self.train_fraction, self.val_fraction
            ));
        }
        if !(self.lr >= 0.0) {
            return bad(format!("learning rate {}", self.lr));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_psnr: f64,
    pub lr: f64,
    pub seconds: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub records: Vec<EpochRecord>,
    /// Train MSE of the initial parameters.
    pub initial_train_loss: f64,
    /// Train MSE of the retained (best validation) parameters.
    pub final_train_loss: f64,
    pub best_epoch: usize,
    pub best_val_loss: f64,
}

impl TrainHistory {
    pub fn best_val_psnr(&self) -> f64 {
        psnr_from_mse(self.best_val_loss)
    }
}

/// Mean squared error of `model` over a dataset, evaluated in batches.
pub fn evaluate_mse<T: Real>(model: &Model<T>, data: &DatasetPair<T>, batch_size: usize) -> Result<f64> {
    let n = data.len();
    if n == 0 {
        return Err(Error::Contract("empty dataset".into()));
    }
    let mut total = 0.0;
    let mut count = 0usize;
    let idx: Vec<usize> = (0..n).collect();
    for chunk in idx.chunks(batch_size.max(1)) {
        let x = data.inputs.select(chunk)?;
        let y = data.targets.select(chunk)?;
        let p = model.predict(&x)?;
        if p.shape() != y.shape() {
            return Err(crate::error::shape_err!(
                "prediction {:?} vs target {:?}",
                p.shape(),
                y.shape()
            ));
        }
        for (a, b) in p.data().iter().zip(y.data()) {
            let d = (*a - *b).to_f64();
            total += d * d;
        }
        count += p.len();
    }
    Ok(total / count as f64)
}

/// Splits `data` by `config.seed` and trains on the train part.
pub fn train<T: Real>(model: &mut Model<T>, data: &DatasetPair<T>, config: &TrainConfig) -> Result<TrainHistory> {
    config.validate()?;
    let (tr, va) = data.split(config.val_fraction, config.seed)?;
    fit(model, &tr, &va, config)
}

/// Mini-batch Adam on MSE with plateau decay; the parameters with the best
/// validation loss are restored at the end.
pub fn fit<T: Real>(
    model: &mut Model<T>,
    train: &DatasetPair<T>,
    val: &DatasetPair<T>,
    config: &TrainConfig,
) -> Result<TrainHistory> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut adam = Adam::new(AdamConfig {
        lr: config.lr,
        ..Default::default()
    });
    let mut sched = PlateauScheduler::new(config.lr, config.patience, config.decay);
    let eval_batch = config.batch_size.max(64);

    let mut hist = TrainHistory {
        initial_train_loss: evaluate_mse(model, train, eval_batch)?,
        best_val_loss: evaluate_mse(model, val, eval_batch)?,
        ..Default::default()
    };
    let mut best = model.params().clone();
    let mut order: Vec<usize> = (0..train.len()).collect();

    for epoch in 1..=config.epochs {
        let start = Instant::now();
        order.shuffle(&mut rng);
        let mut sum = 0.0;
        for (b, chunk) in order.chunks(config.batch_size).enumerate() {
            let mut tape = Tape::new();
            let bound = model.bind(&mut tape, true);
            let x = tape.leaf(train.inputs.select(chunk)?, false);
            let y = tape.leaf(train.targets.select(chunk)?, false);
            let pred = model.forward(&mut tape, &bound, x)?;
            let loss = tape.mse_loss(pred, y)?;
            let l = tape.value(loss).item()?.to_f64();
            if !l.is_finite() {
                return Err(Error::TrainingAbort {
                    model: model.name(),
                    epoch,
                    batch: b,
                });
            }
            sum += l * chunk.len() as f64;
            tape.backward(loss)?;
            let grads = bound.grads(&mut tape);
            adam.step(model.params_mut(), &grads)?;
        }
        let train_loss = sum / train.len() as f64;
        let val_loss = evaluate_mse(model, val, eval_batch)?;
        if !val_loss.is_finite() {
            return Err(Error::TrainingAbort {
                model: model.name(),
                epoch,
                batch: order.len().div_ceil(config.batch_size),
            });
        }
        if val_loss < hist.best_val_loss {
            hist.best_val_loss = val_loss;
            hist.best_epoch = epoch;
            best = model.params().clone();
        }
        let lr = adam.config.lr;
        adam.set_lr(sched.observe(val_loss));
        hist.records.push(EpochRecord {
            epoch,
            train_loss,
            val_loss,
            val_psnr: psnr_from_mse(val_loss),
            lr,
            seconds: start.elapsed().as_secs_f64(),
        });
    }
    *model.params_mut() = best;
    hist.final_train_loss = evaluate_mse(model, train, eval_batch)?;
    Ok(hist)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::ModelSpec;
    use crate::tensor::Tensor;

    fn scaled_data(n: usize) -> DatasetPair<f64> {
        // y = 0.7 x is exactly representable by CNN(1,1,1)
        let x = Tensor::from_fn([n, 5, 1], |i| ((i * 37) % 11) as f64 / 11.0);
        let y = x.map(|v| 0.7 * v);
        DatasetPair::new(x, y, 0).unwrap()
    }

    #[test]
    fn zero_lr_keeps_params() {
        let data = scaled_data(20);
        let mut m = Model::<f64>::build(&ModelSpec::cnn(2, 3, 2, &[5]), 1).unwrap();
        let before = m.params().clone();
        let cfg = TrainConfig {
            epochs: 3,
            lr: 0.0,
            batch_size: 4,
            ..Default::default()
        };
        train(&mut m, &data, &cfg).unwrap();
        assert_eq!(m.params(), &before);
    }

    #[test]
    fn solvable_linear_model_fits() {
        let data = scaled_data(40);
        let mut m = Model::<f64>::build(&ModelSpec::cnn(1, 1, 1, &[5]), 3).unwrap();
        let cfg = TrainConfig {
            epochs: 300,
            lr: 0.05,
            batch_size: 8,
            patience: 10,
            ..Default::default()
        };
        let h = train(&mut m, &data, &cfg).unwrap();
        assert!(h.final_train_loss < 1e-8, "{}", h.final_train_loss);
        assert!(h.final_train_loss <= h.initial_train_loss);
        let lrs: Vec<f64> = h.records.iter().map(|r| r.lr).collect();
        assert!(lrs.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn equal_seeds_equal_histories() {
        let data = scaled_data(30);
        let spec = ModelSpec::cnn(2, 3, 3, &[5]);
        let cfg = TrainConfig {
            epochs: 4,
            batch_size: 5,
            ..Default::default()
        };
        let run = || {
            let mut m = Model::<f64>::build(&spec, 9).unwrap();
            let h = train(&mut m, &data, &cfg).unwrap();
            (h.records.iter().map(|r| (r.train_loss, r.val_loss, r.lr)).collect::<Vec<_>>(), m)
        };
        let (a, ma) = run();
        let (b, mb) = run();
        assert_eq!(a, b);
        assert_eq!(ma.params(), mb.params());
    }

    #[test]
    fn nan_aborts_with_location() {
        let mut data = scaled_data(10);
        data.inputs.data_mut()[0] = f64::NAN;
        let mut m = Model::<f64>::build(&ModelSpec::cnn(1, 3, 1, &[5]), 0).unwrap();
        let cfg = TrainConfig {
            epochs: 2,
            batch_size: 100,
            ..Default::default()
        };
        match fit(&mut m, &data, &scaled_data(4), &cfg) {
            Err(Error::TrainingAbort { epoch, batch, .. }) => assert_eq!((epoch, batch), (1, 0)),
            other => panic!("{other:?}"),
        }
    }
}
