use std::path::Path;

use coordgate::datagen::{gen_blur_dataset, gen_psf_field, DatasetPair};
use coordgate::metrics::{mse, ssim_with, time_inference, MetricsRecord};
use coordgate::nn::Model;
use coordgate::optim::{EpochRecord, TrainHistory};
use coordgate::{pgm, Result, Tensor};

use super::output::{ensure_dir, slug, write_csv};
use super::{train_config, train_model};
use crate::config::ExperimentConfig;

pub struct DeblurOutcome {
    /// First row is the untrained identity baseline (output = blurred input).
    pub records: Vec<MetricsRecord>,
    pub histories: Vec<(String, TrainHistory)>,
    pub models: Vec<Model<f64>>,
    pub val: DatasetPair<f64>,
}

fn predict_all(model: &Model<f64>, inputs: &Tensor<f64>, batch: usize) -> Result<Tensor<f64>> {
    let n = inputs.shape()[0];
    let idx: Vec<usize> = (0..n).collect();
    let parts = idx
        .chunks(batch.max(1))
        .map(|c| model.predict(&inputs.select(c)?))
        .collect::<Result<Vec<_>>>()?;
    let mut data = Vec::with_capacity(inputs.len());
    for p in parts {
        data.extend_from_slice(p.data());
    }
    Tensor::new(inputs.shape().to_vec(), data)
}

fn image(batch: &Tensor<f64>, i: usize) -> Result<Tensor<f64>> {
    let s = batch.shape();
    batch.select(&[i])?.reshape([s[1], s[2]])
}

/// Trains the U-Net roster to undo the spatially varying blur.
pub fn cmd_deblur(cfg: &ExperimentConfig, out: &Path) -> Result<DeblurOutcome> {
    let out = ensure_dir(out)?;
    let field = gen_psf_field::<f64>(cfg.dataset.psf())?;
    let data = gen_blur_dataset(cfg.dataset.images, &field, cfg.seed)?.swapped();
    let tc = train_config(cfg, cfg.seed);
    let (train, val) = data.split(tc.val_fraction, tc.seed)?;
    let timing_input = val.inputs.select(&(0..cfg.timing_batch.min(val.len())).collect::<Vec<_>>())?;
    let shown = cfg.triptychs.min(val.len());
    for i in 0..shown {
        pgm::write_pgm(&out.join(format!("sample{i}_clean.pgm")), &image(&val.targets, i)?)?;
        pgm::write_pgm(&out.join(format!("sample{i}_blurred.pgm")), &image(&val.inputs, i)?)?;
    }

    let baseline = MetricsRecord::new(
        "Identity",
        0,
        mse(&val.inputs, &val.targets)?,
        ssim_with(&val.inputs, &val.targets, &cfg.ssim)?,
        0.0,
    );
    let mut outcome = DeblurOutcome {
        records: vec![baseline],
        histories: Vec::new(),
        models: Vec::new(),
        val,
    };
    for (i, spec) in cfg.roster().iter().enumerate() {
        let t = train_model(spec, cfg.seed.wrapping_add(i as u64), &train, &outcome.val, &tc)?;
        let name = t.model.name();
        let s = slug(&name);
        write_csv::<EpochRecord>(&out.join(format!("history_{s}.csv")), &t.history.records)?;
        let pred = predict_all(&t.model, &outcome.val.inputs, 32)?;
        for i in 0..shown {
            pgm::write_pgm(&out.join(format!("sample{i}_{s}.pgm")), &image(&pred, i)?)?;
        }
        let rec = MetricsRecord::new(
            name.clone(),
            t.model.param_count(),
            mse(&pred, &outcome.val.targets)?,
            ssim_with(&pred, &outcome.val.targets, &cfg.ssim)?,
            time_inference(&t.model, &timing_input, cfg.timing_repeats)?,
        );
        rec.check()?;
        outcome.records.push(rec);
        outcome.histories.push((name, t.history));
        outcome.models.push(t.model);
    }
    write_csv(&out.join("metrics.csv"), &outcome.records)?;
    Ok(outcome)
}
