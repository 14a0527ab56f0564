//! MSE, PSNR, SSIM and inference timing.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{shape_err, Error, Result};
use crate::nn::Model;
use crate::scalar::Real;
use crate::tensor::Tensor;

pub fn mse<T: Real>(pred: &Tensor<T>, target: &Tensor<T>) -> Result<f64> {
    if pred.shape() != target.shape() {
        return Err(shape_err!("mse of {:?} vs {:?}", pred.shape(), target.shape()));
    }
    if pred.is_empty() {
        return Err(shape_err!("mse of empty tensors"));
    }
    let s: f64 = pred
        .data()
        .iter()
        .zip(target.data())
        .map(|(a, b)| {
            let d = (*a - *b).to_f64();
            d * d
        })
        .sum();
    Ok(s / pred.len() as f64)
}

/// `10 log10(1 / mse)` for unit-range data; a perfect match is `+inf`.
pub fn psnr_from_mse(mse: f64) -> f64 {
    if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (1.0 / mse).log10()
    }
}

pub fn psnr<T: Real>(pred: &Tensor<T>, target: &Tensor<T>) -> Result<f64> {
    mse(pred, target).map(psnr_from_mse)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SsimConfig {
    pub window: usize,
    pub sigma: f64,
    pub k1: f64,
    pub k2: f64,
    pub data_range: f64,
}

impl Default for SsimConfig {
    fn default() -> Self {
        Self {
            window: 7,
            sigma: 1.5,
            k1: 0.01,
            k2: 0.03,
            data_range: 1.0,
        }
    }
}

fn gaussian_window(n: usize, sigma: f64) -> Vec<f64> {
    let c = (n as f64 - 1.0) / 2.0;
    let g: Vec<f64> = (0..n).map(|i| (-((i as f64 - c).powi(2)) / (2.0 * sigma * sigma)).exp()).collect();
    let s: f64 = g.iter().sum();
    g.iter().map(|v| v / s).collect()
}

/// Splits `[h, w]`, `[h, w, 1]` or `[b, h, w, 1]` into `(b, h, w)`.
fn image_dims(shape: &[usize]) -> Result<(usize, usize, usize)> {
    match *shape {
        [h, w] | [h, w, 1] => Ok((1, h, w)),
        [b, h, w, 1] => Ok((b, h, w)),
        _ => Err(shape_err!("SSIM needs grayscale images, got {shape:?}")),
    }
}

/// Mean SSIM over all fully contained windows (and over the batch).
pub fn ssim_with<T: Real>(a: &Tensor<T>, b: &Tensor<T>, cfg: &SsimConfig) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(shape_err!("ssim of {:?} vs {:?}", a.shape(), b.shape()));
    }
    let (n, h, w) = image_dims(a.shape())?;
    let k = cfg.window;
    if k == 0 || h < k || w < k {
        return Err(shape_err!("{h}x{w} image smaller than the {k}x{k} window"));
    }
    let g = gaussian_window(k, cfg.sigma);
    let c1 = (cfg.k1 * cfg.data_range).powi(2);
    let c2 = (cfg.k2 * cfg.data_range).powi(2);
    let (ad, bd) = (a.data(), b.data());
    let mut total = 0.0;
    let mut count = 0usize;
    for img in 0..n {
        let off = img * h * w;
        for y in 0..=h - k {
            for x in 0..=w - k {
                let (mut ma, mut mb, mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0, 0.0, 0.0);
                for dy in 0..k {
                    for dx in 0..k {
                        let wt = g[dy] * g[dx];
                        let i = off + (y + dy) * w + x + dx;
                        let (p, q) = (ad[i].to_f64(), bd[i].to_f64());
                        ma += wt * p;
                        mb += wt * q;
                        saa += wt * (p * p);
                        sbb += wt * (q * q);
                        sab += wt * (p * q);
                    }
                }
                let va = saa - ma * ma;
                let vb = sbb - mb * mb;
                let cov = sab - ma * mb;
                let num = (2.0 * ma * mb + c1) * (2.0 * cov + c2);
                let den = (ma * ma + mb * mb + c1) * (va + vb + c2);
                total += num / den;
                count += 1;
            }
        }
    }
    Ok(total / count as f64)
}

pub fn ssim<T: Real>(a: &Tensor<T>, b: &Tensor<T>) -> Result<f64> {
    ssim_with(a, b, &SsimConfig::default())
}

/// One row of a metrics table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub model: String,
    pub params: usize,
    pub psnr_db: f64,
    pub ssim: f64,
    pub mse: f64,
    pub inference_s: f64,
}

impl MetricsRecord {
    pub fn new(model: impl Into<String>, params: usize, mse: f64, ssim: f64, inference_s: f64) -> Self {
        Self {
            model: model.into(),
            params,
            psnr_db: psnr_from_mse(mse),
            ssim,
            mse,
            inference_s,
        }
    }

    /// Checks the psnr/mse identity to 1e-9.
    pub fn check(&self) -> Result<()> {
        let expect = psnr_from_mse(self.mse);
        let ok = if expect.is_infinite() {
            self.psnr_db == expect
        } else {
            (self.psnr_db - expect).abs() <= 1e-9
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Contract(format!(
                "{}: psnr {} dB inconsistent with mse {}",
                self.model, self.psnr_db, self.mse
            )))
        }
    }
}

pub const WARMUP_RUNS: usize = 5;

/// Mean seconds per sample of `model.predict(input)` over `repeats` runs,
/// after discarding [`WARMUP_RUNS`].
pub fn time_inference<T: Real>(model: &Model<T>, input: &Tensor<T>, repeats: usize) -> Result<f64> {
    let batch = input.shape().first().copied().unwrap_or(1).max(1);
    for _ in 0..WARMUP_RUNS {
        std::hint::black_box(model.predict(input)?);
    }
    let repeats = repeats.max(1);
    let start = Instant::now();
    for _ in 0..repeats {
        std::hint::black_box(model.predict(input)?);
    }
    Ok(start.elapsed().as_secs_f64() / (repeats * batch) as f64)
}

/// Spearman rank correlation (average ranks for ties).
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(shape_err!("spearman needs two equal series of length >= 2"));
    }
    let rank = |v: &[f64]| {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
        let mut r = vec![0.0; v.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
                j += 1;
            }
            let avg = (i + j) as f64 / 2.0;
            for &t in &idx[i..=j] {
                r[t] = avg;
            }
            i = j + 1;
        }
        r
    };
    let (rx, ry) = (rank(x), rank(y));
    let n = x.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    if vx == 0.0 || vy == 0.0 {
        return Ok(0.0);
    }
    Ok(cov / (vx * vy).sqrt())
}
