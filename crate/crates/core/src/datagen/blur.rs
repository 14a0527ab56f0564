//! Spatially varying Gaussian blur and procedural ground-truth images.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{shape_err, Error, Result};
use crate::scalar::Real;
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PsfParams {
    pub h: usize,
    pub w: usize,
    pub k: usize,
    pub sigma_min: f64,
    pub sigma_max: f64,
}

/// Isotropic Gaussian PSFs whose width grows quadratically with the distance
/// from the image centre. `sigma` is Lipschitz in position with constant
/// `2 (sigma_max - sigma_min) / r_max`.
#[derive(Clone, Debug, PartialEq)]
pub struct PsfField<T> {
    pub params: PsfParams,
    /// `[h, w, k, k]`; each `k x k` kernel sums to 1.
    pub kernels: Tensor<T>,
}

impl PsfParams {
    pub fn r_max(&self) -> f64 {
        let cy = (self.h as f64 - 1.0) / 2.0;
        let cx = (self.w as f64 - 1.0) / 2.0;
        (cy * cy + cx * cx).sqrt()
    }

    pub fn sigma_at(&self, y: usize, x: usize) -> f64 {
        let cy = (self.h as f64 - 1.0) / 2.0;
        let cx = (self.w as f64 - 1.0) / 2.0;
        let rmax = self.r_max();
        let r = ((y as f64 - cy).powi(2) + (x as f64 - cx).powi(2)).sqrt();
        let t = if rmax > 0.0 { r / rmax } else { 0.0 };
        self.sigma_min + (self.sigma_max - self.sigma_min) * t * t
    }
}

pub fn gaussian_kernel(k: usize, sigma: f64) -> Vec<f64> {
    let c = (k / 2) as f64;
    let mut g: Vec<f64> = (0..k * k)
        .map(|i| {
            let (dy, dx) = ((i / k) as f64 - c, (i % k) as f64 - c);
            (-(dy * dy + dx * dx) / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let s: f64 = g.iter().sum();
    g.iter_mut().for_each(|v| *v /= s);
    g
}

pub fn gen_psf_field<T: Real>(params: PsfParams) -> Result<PsfField<T>> {
    let PsfParams { h, w, k, sigma_min, sigma_max } = params;
    if k % 2 == 0 {
        return Err(Error::Config(format!("PSF size must be odd, got {k}")));
    }
    if !(sigma_min > 0.0) || sigma_max < sigma_min {
        return Err(Error::Config(format!(
            "need 0 < sigma_min <= sigma_max, got {sigma_min}, {sigma_max}"
        )));
    }
    let mut data = Vec::with_capacity(h * w * k * k);
    for y in 0..h {
        for x in 0..w {
            data.extend(gaussian_kernel(k, params.sigma_at(y, x)).into_iter().map(T::from_f64));
        }
    }
    Ok(PsfField {
        params,
        kernels: Tensor::new([h, w, k, k], data)?,
    })
}

/// `n(i) = sum_j psf_j(i - j) m(j)`: every source pixel spreads its intensity
/// with its own kernel; light leaving the frame is lost.
///
/// `image` is `[h, w]` or `[b, h, w, 1]`; the result has the same shape.
pub fn blur_image<T: Real>(image: &Tensor<T>, field: &PsfField<T>) -> Result<Tensor<T>> {
    let PsfParams { h, w, k, .. } = field.params;
    let b = match *image.shape() {
        [ih, iw] if (ih, iw) == (h, w) => 1,
        [b, ih, iw, 1] if (ih, iw) == (h, w) => b,
        ref s => return Err(shape_err!("image {s:?} does not match {h}x{w} PSF field")),
    };
    let r = (k / 2) as isize;
    let kd = field.kernels.data();
    let mut out = vec![T::zero(); image.len()];
    for n in 0..b {
        let src = &image.data()[n * h * w..(n + 1) * h * w];
        let dst = &mut out[n * h * w..(n + 1) * h * w];
        for y in 0..h {
            for x in 0..w {
                let m = src[y * w + x];
                if m == T::zero() {
                    continue;
                }
                let kern = &kd[(y * w + x) * k * k..(y * w + x + 1) * k * k];
                for dy in 0..k {
                    let yy = y as isize + dy as isize - r;
                    if yy < 0 || yy >= h as isize {
                        continue;
                    }
                    for dx in 0..k {
                        let xx = x as isize + dx as isize - r;
                        if xx < 0 || xx >= w as isize {
                            continue;
                        }
                        dst[yy as usize * w + xx as usize] += kern[dy * k + dx] * m;
                    }
                }
            }
        }
    }
    Tensor::new(image.shape().to_vec(), out)
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Soft-edged random ellipses on a dark background, `[n, h, w, 1]` in [0, 1].
/// Image `i` is drawn from its own ChaCha stream, so any image can be
/// regenerated alone.
pub fn gen_procedural_images<T: Real>(n: usize, h: usize, w: usize, seed: u64) -> Tensor<T> {
    let side = h.min(w) as f64;
    let mut data = Vec::with_capacity(n * h * w);
    for i in 0..n {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i as u64);
        let background = rng.gen_range(0.0..0.05);
        let mut img = vec![background; h * w];
        let blobs = rng.gen_range(5..=15);
        for _ in 0..blobs {
            let cy = rng.gen_range(0.0..h as f64);
            let cx = rng.gen_range(0.0..w as f64);
            let a = rng.gen_range(0.04..0.16) * side;
            let b = rng.gen_range(0.04..0.16) * side;
            let theta = rng.gen_range(0.0..std::f64::consts::PI);
            let intensity = rng.gen_range(0.3..1.0);
            // edge softness in units of the normalized radius
            let soft = rng.gen_range(0.05..0.2);
            let (s, c) = theta.sin_cos();
            for y in 0..h {
                for x in 0..w {
                    let (dy, dx) = (y as f64 - cy, x as f64 - cx);
                    let u = (c * dx + s * dy) / a;
                    let v = (-s * dx + c * dy) / b;
                    let rho = (u * u + v * v).sqrt();
                    let val = intensity * sigmoid((1.0 - rho) / soft);
                    let p = &mut img[y * w + x];
                    if val > *p {
                        *p = val;
                    }
                }
            }
        }
        data.extend(img.into_iter().map(|v| T::from_f64(v.clamp(0.0, 1.0))));
    }
    Tensor::new([n, h, w, 1], data).expect("extent product")
}

pub const FOREGROUND_THRESHOLD: f64 = 0.1;

/// Fraction of pixels brighter than [`FOREGROUND_THRESHOLD`].
pub fn foreground_coverage<T: Real>(images: &Tensor<T>) -> f64 {
    let fg = images
        .data()
        .iter()
        .filter(|&&v| Real::to_f64(v) > FOREGROUND_THRESHOLD)
        .count();
    fg as f64 / images.len().max(1) as f64
}
