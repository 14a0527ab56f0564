//! Dense convolution matrices `n = H m`.

use serde::{Deserialize, Serialize};

use crate::error::{shape_err, Error, Result};
use crate::scalar::{Real, Scalar};
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MatrixGenerator {
    /// One Gaussian per source pixel with position-dependent offset and width.
    GaussianColumns { n: usize },
    /// Shift-invariant; `out[i] = sum_j kernel[j] in[i + j - k/2]`.
    Toeplitz { n: usize, k: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvolutionMatrix<T> {
    /// `[N, N]`, `h[x, x']`.
    pub h: Tensor<T>,
    pub generator: MatrixGenerator,
}

/// Offset and width of the Gaussian emitted by source pixel `x'`.
pub fn column_params(xp: usize, n: usize) -> (f64, f64) {
    let half = n as f64 / 2.0;
    let t = xp as f64 / half;
    if (xp as f64) < half {
        (1.0 - t, 0.5)
    } else {
        // negative past 3/4 of the way; only sigma^2 is used
        (0.0, 0.5 * (2.0 - t) + 2.0 * (1.0 - t))
    }
}

/// `H[x, x'] = exp(-(x - x' - delta(x'))^2 / (2 sigma(x')^2))`, each Gaussian
/// centred on the diagonal.
pub fn build_h_gaussian<T: Real>(n: usize) -> Result<ConvolutionMatrix<T>> {
    if n < 2 {
        return Err(Error::Config(format!("convolution matrix needs N >= 2, got {n}")));
    }
    let mut h = Tensor::zeros([n, n]);
    for xp in 0..n {
        let (delta, sigma) = column_params(xp, n);
        for x in 0..n {
            let d = x as f64 - xp as f64 - delta;
            h.data_mut()[x * n + xp] = T::from_f64((-(d * d) / (2.0 * sigma * sigma)).exp());
        }
    }
    Ok(ConvolutionMatrix {
        h,
        generator: MatrixGenerator::GaussianColumns { n },
    })
}

/// Banded Toeplitz matrix equal to a same-padded 1D cross-correlation.
pub fn build_toeplitz<T: Scalar>(kernel: &[T], n: usize) -> Result<ConvolutionMatrix<T>> {
    let k = kernel.len();
    if k.is_multiple_of(2) {
        return Err(shape_err!("Toeplitz kernel needs odd length, got {k}"));
    }
    let r = k / 2;
    let mut h = Tensor::zeros([n, n]);
    for i in 0..n {
        for (j, &v) in kernel.iter().enumerate() {
            let col = i + j;
            if col >= r && col - r < n {
                h.data_mut()[i * n + col - r] = v;
            }
        }
    }
    Ok(ConvolutionMatrix {
        h,
        generator: MatrixGenerator::Toeplitz { n, k },
    })
}

impl<T: Scalar> ConvolutionMatrix<T> {
    pub fn n(&self) -> usize {
        self.h.shape()[0]
    }

    pub fn at(&self, x: usize, xp: usize) -> T {
        self.h.data()[x * self.n() + xp]
    }

    pub fn is_toeplitz(&self) -> bool {
        let n = self.n();
        (0..n - 1).all(|i| (0..n - 1).all(|j| self.at(i, j) == self.at(i + 1, j + 1)))
    }
}

/// `n = H m` for `m` of shape `[N]`, `[S, N]` or `[S, N, 1]`.
pub fn apply_matrix<T: Scalar>(h: &ConvolutionMatrix<T>, m: &Tensor<T>) -> Result<Tensor<T>> {
    let n = h.n();
    let rows = match *m.shape() {
        [len] if len == n => 1,
        [s, len] | [s, len, 1] if len == n => s,
        ref s => return Err(shape_err!("H is {n}x{n}, signal is {s:?}")),
    };
    let mut out = vec![T::zero(); rows * n];
    // out[s, x] = sum_x' m[s, x'] H[x, x']  ->  M (rows x n) * H^T
    T::gemm(rows, n, n, m.data(), (n, 1), h.h.data(), (1, n), &mut out, (n, 1), false);
    Tensor::new(m.shape().to_vec(), out)
}
