//! Synthetic data: convolution-matrix signals, spatially varying blur and the
//! padding demonstration.

mod blur;
mod boundary;
mod matrix;

pub use blur::{
    blur_image, foreground_coverage, gaussian_kernel, gen_procedural_images, gen_psf_field, PsfField,
    PsfParams, FOREGROUND_THRESHOLD,
};
pub use boundary::{defect_depth, demo_boundary, run_boundary, BoundaryStage, BoundaryVariant};
pub use matrix::{apply_matrix, build_h_gaussian, build_toeplitz, column_params, ConvolutionMatrix, MatrixGenerator};

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{shape_err, Error, Result};
use crate::pgm;
use crate::scalar::{Real, Scalar};
use crate::tensor::Tensor;

/// Index-aligned `(input, target)` samples, batch-first.
#[derive(Clone, Debug, PartialEq)]
pub struct DatasetPair<T> {
    pub inputs: Tensor<T>,
    pub targets: Tensor<T>,
    pub seed: u64,
}

impl<T: Scalar> DatasetPair<T> {
    pub fn new(inputs: Tensor<T>, targets: Tensor<T>, seed: u64) -> Result<Self> {
        if inputs.shape().first() != targets.shape().first() || inputs.rank() == 0 {
            return Err(shape_err!(
                "unpaired dataset: inputs {:?}, targets {:?}",
                inputs.shape(),
                targets.shape()
            ));
        }
        Ok(Self { inputs, targets, seed })
    }

    pub fn len(&self) -> usize {
        self.inputs.shape()[0]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn select(&self, rows: &[usize]) -> Result<Self> {
        Self::new(self.inputs.select(rows)?, self.targets.select(rows)?, self.seed)
    }

    /// Same pairs with input and target exchanged (blur -> deblur).
    pub fn swapped(self) -> Self {
        Self {
            inputs: self.targets,
            targets: self.inputs,
            seed: self.seed,
        }
    }

    /// Row indices of a seeded `(train, val)` split.
    pub fn split_indices(&self, val_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
        let n = self.len();
        let n_val = (n as f64 * val_fraction).round() as usize;
        if n_val == 0 || n_val >= n {
            return Err(Error::Config(format!(
                "validation fraction {val_fraction} leaves an empty split of {n} samples"
            )));
        }
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let val = idx.split_off(n - n_val);
        Ok((idx, val))
    }

    pub fn split(&self, val_fraction: f64, seed: u64) -> Result<(Self, Self)> {
        let (tr, va) = self.split_indices(val_fraction, seed)?;
        Ok((self.select(&tr)?, self.select(&va)?))
    }
}

/// `m ~ U(0, 1)` per element, `n = H m`; inputs and targets are `[S, N, 1]`.
pub fn gen_1d_dataset<T: Real>(n_samples: usize, h: &ConvolutionMatrix<T>, seed: u64) -> Result<DatasetPair<T>> {
    let n = h.n();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = Tensor::from_fn([n_samples, n, 1], |_| T::from_f64(rng.gen_range(0.0..1.0)));
    let targets = apply_matrix(h, &m)?;
    DatasetPair::new(m, targets, seed)
}

/// Clean procedural images as inputs, their blurred versions as targets.
pub fn gen_blur_dataset<T: Real>(n: usize, field: &PsfField<T>, seed: u64) -> Result<DatasetPair<T>> {
    let clean = gen_procedural_images(n, field.params.h, field.params.w, seed);
    let blurred = blur_image(&clean, field)?;
    DatasetPair::new(clean, blurred, seed)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub seed: u64,
    pub field: Option<PsfParams>,
    /// Per-sample split label, `"train"` or `"val"`.
    pub split: Vec<String>,
}

/// Writes `NNNNN_input.pgm` / `NNNNN_target.pgm` pairs plus `manifest.json`.
/// Samples must be single-channel images `[S, h, w, 1]`.
pub fn save_dataset<T: Real>(dir: &Path, data: &DatasetPair<T>, manifest: &DatasetManifest) -> Result<()> {
    if data.inputs.rank() != 4 {
        return Err(shape_err!("PGM datasets hold images, got {:?}", data.inputs.shape()));
    }
    fs::create_dir_all(dir)?;
    for i in 0..data.len() {
        pgm::write_pgm(&dir.join(format!("{i:05}_input.pgm")), &data.inputs.select(&[i])?)?;
        pgm::write_pgm(&dir.join(format!("{i:05}_target.pgm")), &data.targets.select(&[i])?)?;
    }
    fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(manifest)?)?;
    Ok(())
}

pub fn load_dataset<T: Real>(dir: &Path) -> Result<(DatasetPair<T>, DatasetManifest)> {
    let manifest: DatasetManifest = serde_json::from_str(&fs::read_to_string(dir.join("manifest.json"))?)?;
    let mut inputs = Vec::new();
    let mut targets = Vec::new();
    for i in 0..manifest.split.len() {
        let a: Tensor<T> = pgm::read_pgm(&dir.join(format!("{i:05}_input.pgm")))?;
        let b: Tensor<T> = pgm::read_pgm(&dir.join(format!("{i:05}_target.pgm")))?;
        let (h, w) = (a.shape()[0], a.shape()[1]);
        inputs.push(a.reshape([1, h, w, 1])?);
        targets.push(b.reshape([1, h, w, 1])?);
    }
    let data = DatasetPair::new(Tensor::stack(&inputs)?, Tensor::stack(&targets)?, manifest.seed)?;
    Ok((data, manifest))
}
