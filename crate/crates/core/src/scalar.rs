//! Scalar abstractions.
//!
//! [`Scalar`] is everything the tensor engine and the autodiff tape need: ring
//! arithmetic, ordering and an exact embedding of the naturals. It is
//! implemented for `f32`, `f64` and [`Rational64`], so shape-level experiments
//! (tap counting, boundary propagation) can run in exact arithmetic through the
//! very same kernels used for training.
//!
//! [`Real`] adds the transcendental functions required by data generation,
//! metrics and optimization.

use std::fmt::{Debug, Display};
use std::str::FromStr;

use num_rational::Rational64;
use num_traits::{Float, Num, NumAssign};

pub trait Scalar:
    Copy + Num + NumAssign + PartialOrd + Debug + Display + FromStr + Send + Sync + 'static
{
    /// Exact conversion of a count.
    fn from_usize(n: usize) -> Self;

    fn abs_diff(self, other: Self) -> Self {
        if self >= other {
            self - other
        } else {
            other - self
        }
    }

    /// `c (+)= a · b` for strided `m×k` and `k×n` operands.
    ///
    /// Element `(i, j)` of a matrix `x` lives at `x[i * rs + j * cs]`.
    /// With `accumulate == false` the previous contents of `c` are ignored.
    #[allow(clippy::too_many_arguments)]
    fn gemm(
        m: usize,
        k: usize,
        n: usize,
        a: &[Self],
        (rsa, csa): (usize, usize),
        b: &[Self],
        (rsb, csb): (usize, usize),
        c: &mut [Self],
        (rsc, csc): (usize, usize),
        accumulate: bool,
    ) {
        check_extent(m, k, rsa, csa, a.len());
        check_extent(k, n, rsb, csb, b.len());
        check_extent(m, n, rsc, csc, c.len());
        for i in 0..m {
            for j in 0..n {
                let mut acc = if accumulate {
                    c[i * rsc + j * csc]
                } else {
                    Self::zero()
                };
                for p in 0..k {
                    acc += a[i * rsa + p * csa] * b[p * rsb + j * csb];
                }
                c[i * rsc + j * csc] = acc;
            }
        }
    }
}

fn check_extent(rows: usize, cols: usize, rs: usize, cs: usize, len: usize) {
    if rows == 0 || cols == 0 {
        return;
    }
    let last = (rows - 1) * rs + (cols - 1) * cs;
    assert!(
        last < len,
        "gemm operand of {rows}x{cols} (strides {rs},{cs}) overruns buffer of {len}"
    );
}

macro_rules! blas_gemm {
    ($t:ty, $kernel:path) => {
        impl Scalar for $t {
            fn from_usize(n: usize) -> Self {
                n as $t
            }

            fn gemm(
                m: usize,
                k: usize,
                n: usize,
                a: &[Self],
                (rsa, csa): (usize, usize),
                b: &[Self],
                (rsb, csb): (usize, usize),
                c: &mut [Self],
                (rsc, csc): (usize, usize),
                accumulate: bool,
            ) {
                if m == 0 || n == 0 {
                    return;
                }
                check_extent(m, n, rsc, csc, c.len());
                if k == 0 {
                    if !accumulate {
                        for i in 0..m {
                            for j in 0..n {
                                c[i * rsc + j * csc] = 0.0;
                            }
                        }
                    }
                    return;
                }
                check_extent(m, k, rsa, csa, a.len());
                check_extent(k, n, rsb, csb, b.len());
                let beta = if accumulate { 1.0 } else { 0.0 };
                // SAFETY: every operand extent was checked against its buffer above.
                unsafe {
                    $kernel(
                        m,
                        k,
                        n,
                        1.0,
                        a.as_ptr(),
                        rsa as isize,
                        csa as isize,
                        b.as_ptr(),
                        rsb as isize,
                        csb as isize,
                        beta,
                        c.as_mut_ptr(),
                        rsc as isize,
                        csc as isize,
                    );
                }
            }
        }
    };
}

blas_gemm!(f64, matrixmultiply::dgemm);
blas_gemm!(f32, matrixmultiply::sgemm);

impl Scalar for Rational64 {
    fn from_usize(n: usize) -> Self {
        Rational64::from_integer(n as i64)
    }
}

/// Floating-point scalars.
pub trait Real: Scalar + Float {
    fn from_f64(x: f64) -> Self;
    fn to_f64(self) -> f64;
}

impl Real for f64 {
    fn from_f64(x: f64) -> Self {
        x
    }
    fn to_f64(self) -> f64 {
        self
    }
}

impl Real for f32 {
    fn from_f64(x: f64) -> Self {
        x as f32
    }
    fn to_f64(self) -> f64 {
        self as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive<T: Scalar>(m: usize, k: usize, n: usize, a: &[T], b: &[T]) -> Vec<T> {
        let mut c = vec![T::zero(); m * n];
        for i in 0..m {
            for j in 0..n {
                for p in 0..k {
                    c[i * n + j] += a[i * k + p] * b[p * n + j];
                }
            }
        }
        c
    }

    #[test]
    fn blas_gemm_matches_naive_with_transposes() {
        let (m, k, n) = (5, 7, 3);
        let a: Vec<f64> = (0..m * k).map(|i| (i as f64 * 0.37).sin()).collect();
        let b: Vec<f64> = (0..k * n).map(|i| (i as f64 * 0.11).cos()).collect();
        let want = naive(m, k, n, &a, &b);

        let mut c = vec![0.0; m * n];
        f64::gemm(m, k, n, &a, (k, 1), &b, (n, 1), &mut c, (n, 1), false);
        for (x, y) in c.iter().zip(&want) {
            assert!((x - y).abs() < 1e-13);
        }

        // b stored transposed: element (p, j) at j * k + p
        let mut bt = vec![0.0; k * n];
        for p in 0..k {
            for j in 0..n {
                bt[j * k + p] = b[p * n + j];
            }
        }
        let mut c2 = vec![1.0; m * n];
        f64::gemm(m, k, n, &a, (k, 1), &bt, (1, k), &mut c2, (n, 1), true);
        for (x, y) in c2.iter().zip(&want) {
            assert!((x - 1.0 - y).abs() < 1e-13);
        }
    }

    #[test]
    fn rational_gemm_is_exact() {
        let third = Rational64::new(1, 3);
        let a = vec![third; 3];
        let b = vec![Rational64::from_integer(1); 3];
        let mut c = vec![Rational64::from_integer(0)];
        Rational64::gemm(1, 3, 1, &a, (3, 1), &b, (1, 1), &mut c, (1, 1), false);
        assert_eq!(c[0], Rational64::from_integer(1));
    }
}
