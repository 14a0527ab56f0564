use std::path::Path;

use coordgate::datagen::{build_h_gaussian, gen_1d_dataset, ConvolutionMatrix};
use coordgate::metrics::{psnr_from_mse, ssim_with, time_inference, MetricsRecord};
use coordgate::nn::{CoordSource, GatingMap, Model, ModelSpec};
use coordgate::optim::{evaluate_mse, EpochRecord, TrainHistory};
use coordgate::{pgm, Result, Tensor};
use serde::Serialize;

use super::output::{ensure_dir, slug, write_csv, write_matrix};
use super::{train_config, train_model};
use crate::config::ExperimentConfig;

/// Offset at which nonlinear models are probed.
pub const PROBE_OFFSET: f64 = 0.5;

/// Effective `[N, N]` matrix of a 1D model: column `j` is
/// `f(c + e_j) - f(c)` with `c` the constant [`PROBE_OFFSET`] signal. Exact for
/// affine models, a linearization otherwise.
pub fn extract_h(model: &Model<f64>) -> Result<Tensor<f64>> {
    let n = model.spec().extent[0];
    let base = Tensor::full([1, n, 1], PROBE_OFFSET);
    let probes = Tensor::from_fn([n, n, 1], |i| {
        let (j, x) = (i / n, i % n);
        PROBE_OFFSET + if j == x { 1.0 } else { 0.0 }
    });
    let f0 = model.predict(&base)?;
    let f = model.predict(&probes)?;
    // f[j, x] is column j; transpose into h[x, j]
    Ok(Tensor::from_fn([n, n], |i| {
        let (x, j) = (i / n, i % n);
        f.data()[j * n + x] - f0.data()[x]
    }))
}

pub struct Conv1dOutcome {
    pub records: Vec<MetricsRecord>,
    pub histories: Vec<(String, TrainHistory)>,
    pub h_true: ConvolutionMatrix<f64>,
    pub h_learned: Vec<(String, Tensor<f64>)>,
    pub models: Vec<Model<f64>>,
}

fn write_history(path: &Path, h: &TrainHistory) -> Result<()> {
    write_csv::<EpochRecord>(path, &h.records)
}

fn gate_matrix(maps: &[GatingMap<f64>]) -> Result<Option<Tensor<f64>>> {
    match maps.first() {
        Some(g) => {
            let s = g.values.shape();
            Ok(Some(g.values.clone().reshape([s[1], s[2]])?))
        }
        None => Ok(None),
    }
}

/// Trains the 1D roster on signals blurred by the Gaussian-column matrix.
pub fn cmd_conv1d(cfg: &ExperimentConfig, out: &Path) -> Result<Conv1dOutcome> {
    let out = ensure_dir(out)?;
    let h = build_h_gaussian::<f64>(cfg.dataset.n)?;
    let data = gen_1d_dataset(cfg.dataset.samples, &h, cfg.seed)?;
    let tc = train_config(cfg, cfg.seed);
    let (train, val) = data.split(tc.val_fraction, tc.seed)?;
    pgm::write_pgm(&out.join("h_true.pgm"), &h.h)?;
    write_matrix(&out.join("h_true.csv"), &h.h)?;

    let timing_input = val.inputs.select(&(0..cfg.timing_batch.min(val.len())).collect::<Vec<_>>())?;
    let mut outcome = Conv1dOutcome {
        records: Vec::new(),
        histories: Vec::new(),
        h_true: h,
        h_learned: Vec::new(),
        models: Vec::new(),
    };
    for (i, spec) in cfg.roster().iter().enumerate() {
        let t = train_model(spec, cfg.seed.wrapping_add(i as u64), &train, &val, &tc)?;
        let name = t.model.name();
        let s = slug(&name);
        let learned = extract_h(&t.model)?;
        pgm::write_pgm(&out.join(format!("h_{s}.pgm")), &learned)?;
        write_matrix(&out.join(format!("h_{s}.csv")), &learned)?;
        if let Some(g) = gate_matrix(&t.model.gating_maps()?)? {
            write_matrix(&out.join(format!("gate_{s}.csv")), &g)?;
        }
        write_history(&out.join(format!("history_{s}.csv")), &t.history)?;
        let mse = evaluate_mse(&t.model, &val, 256)?;
        let ssim = ssim_with(&learned, &outcome.h_true.h, &cfg.ssim)?;
        let secs = time_inference(&t.model, &timing_input, cfg.timing_repeats)?;
        let rec = MetricsRecord::new(name.clone(), t.model.param_count(), mse, ssim, secs);
        rec.check()?;
        outcome.records.push(rec);
        outcome.histories.push((name.clone(), t.history));
        outcome.h_learned.push((name, learned));
        outcome.models.push(t.model);
    }
    write_csv(&out.join("metrics.csv"), &outcome.records)?;
    Ok(outcome)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AblationRow {
    pub seed: u64,
    pub variant: String,
    pub params: usize,
    pub psnr_db: f64,
    pub mse: f64,
    pub initial_train_loss: f64,
    pub final_train_loss: f64,
}

pub struct AblationOutcome {
    pub rows: Vec<AblationRow>,
    /// Per seed, the gating map of the random-input variant.
    pub random_gates: Vec<Tensor<f64>>,
}

/// CG fed with the coordinate grid versus the same CG fed with a static
/// random map, over several seeds.
pub fn cmd_ablation(cfg: &ExperimentConfig, out: &Path) -> Result<AblationOutcome> {
    let out = ensure_dir(out)?;
    let h = build_h_gaussian::<f64>(cfg.dataset.n)?;
    let data = gen_1d_dataset(cfg.dataset.samples, &h, cfg.seed)?;
    let base = cfg.roster().into_iter().next().unwrap_or_else(|| ModelSpec::cg(1, 7, 3, 3, &[cfg.dataset.n]));
    let mut outcome = AblationOutcome {
        rows: Vec::new(),
        random_gates: Vec::new(),
    };
    for &seed in &cfg.seeds {
        let tc = train_config(cfg, seed);
        let (train, val) = data.split(tc.val_fraction, tc.seed)?;
        for (variant, source) in [("coordinates", CoordSource::Grid), ("random", CoordSource::Random)] {
            let spec = ModelSpec {
                coord_source: source,
                coord_seed: seed,
                ..base.clone()
            };
            let t = train_model(&spec, seed, &train, &val, &tc)?;
            let mse = evaluate_mse(&t.model, &val, 256)?;
            if let Some(g) = gate_matrix(&t.model.gating_maps()?)? {
                write_matrix(&out.join(format!("gate_seed{seed}_{variant}.csv")), &g)?;
                if source == CoordSource::Random {
                    outcome.random_gates.push(g);
                }
            }
            write_history(&out.join(format!("history_seed{seed}_{variant}.csv")), &t.history)?;
            outcome.rows.push(AblationRow {
                seed,
                variant: variant.into(),
                params: t.model.param_count(),
                psnr_db: psnr_from_mse(mse),
                mse,
                initial_train_loss: t.history.initial_train_loss,
                final_train_loss: t.history.final_train_loss,
            });
        }
    }
    write_csv(&out.join("ablation.csv"), &outcome.rows)?;
    Ok(outcome)
}
