//! Convolution kernels (forward and adjoint) on channels-last buffers.
//!
//! Shared-weight convolution goes through im2col + gemm; the locally
//! connected variant is a direct loop since every output pixel owns its
//! kernel. Both are cross-correlations, no kernel flip.

use serde::{Deserialize, Serialize};

use crate::error::{shape_err, Result};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Padding {
    /// Zero padding, output extent equals input extent.
    SameZero,
    /// No padding, output shrinks by `k - 1`.
    Valid,
}

/// Geometry of a 1-D or 2-D convolution. 1-D data is handled as `h == 1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct ConvGeom {
    pub batch: usize,
    pub h: usize,
    pub w: usize,
    pub cin: usize,
    pub kh: usize,
    pub kw: usize,
    pub cout: usize,
    pub oh: usize,
    pub ow: usize,
    pub ph: usize,
    pub pw: usize,
}

/// Rows of im2col scratch processed per gemm call.
const CHUNK_ROWS: usize = 8192;

impl ConvGeom {
    /// `spatial_rank` is 1 or 2; `input` is `[b, (h,) w, cin]`, `kernel` is
    /// `[(kh,) kw, cin, cout]`.
    pub fn new(
        spatial_rank: usize,
        input: &[usize],
        kernel: &[usize],
        padding: Padding,
    ) -> Result<Self> {
        if input.len() != spatial_rank + 2 || kernel.len() != spatial_rank + 2 {
            return Err(shape_err!(
                "{spatial_rank}-d convolution needs rank-{} input and kernel, got {:?} and {:?}",
                spatial_rank + 2,
                input,
                kernel
            ));
        }
        let (batch, h, w, cin) = match spatial_rank {
            1 => (input[0], 1, input[1], input[2]),
            _ => (input[0], input[1], input[2], input[3]),
        };
        let (kh, kw, kcin, cout) = match spatial_rank {
            1 => (1, kernel[0], kernel[1], kernel[2]),
            _ => (kernel[0], kernel[1], kernel[2], kernel[3]),
        };
        if kcin != cin {
            return Err(shape_err!(
                "kernel expects {kcin} input channels, input has {cin}"
            ));
        }
        if kh % 2 == 0 || kw % 2 == 0 {
            return Err(shape_err!("kernel extent must be odd, got {kh}x{kw}"));
        }
        let (oh, ow, ph, pw) = match padding {
            Padding::SameZero => (h, w, kh / 2, kw / 2),
            Padding::Valid => {
                if kh > h || kw > w {
                    return Err(shape_err!(
                        "valid convolution with {kh}x{kw} kernel on {h}x{w} input"
                    ));
                }
                (h - kh + 1, w - kw + 1, 0, 0)
            }
        };
        Ok(Self {
            batch,
            h,
            w,
            cin,
            kh,
            kw,
            cout,
            oh,
            ow,
            ph,
            pw,
        })
    }

    pub fn patch(&self) -> usize {
        self.kh * self.kw * self.cin
    }

    pub fn out_pixels(&self) -> usize {
        self.oh * self.ow
    }

    pub fn output_shape(&self, spatial_rank: usize) -> Vec<usize> {
        match spatial_rank {
            1 => vec![self.batch, self.ow, self.cout],
            _ => vec![self.batch, self.oh, self.ow, self.cout],
        }
    }

    fn is_pointwise(&self) -> bool {
        self.kh == 1 && self.kw == 1
    }

    fn samples_per_chunk(&self) -> usize {
        (CHUNK_ROWS / self.out_pixels().max(1)).max(1)
    }

    /// Input pixel feeding tap `(dy, dx)` of output `(oy, ox)`, if in bounds.
    #[inline]
    fn source(&self, oy: usize, ox: usize, dy: usize, dx: usize) -> Option<(usize, usize)> {
        let iy = (oy + dy).checked_sub(self.ph)?;
        let ix = (ox + dx).checked_sub(self.pw)?;
        (iy < self.h && ix < self.w).then_some((iy, ix))
    }

    fn im2col<T: Scalar>(&self, input: &[T], first: usize, count: usize, cols: &mut [T]) {
        let patch = self.patch();
        let cin = self.cin;
        for s in 0..count {
            let sample = &input[(first + s) * self.h * self.w * cin..][..self.h * self.w * cin];
            for oy in 0..self.oh {
                for ox in 0..self.ow {
                    let row = (s * self.oh + oy) * self.ow + ox;
                    let dst = &mut cols[row * patch..(row + 1) * patch];
                    for dy in 0..self.kh {
                        for dx in 0..self.kw {
                            let tap = &mut dst[(dy * self.kw + dx) * cin..][..cin];
                            match self.source(oy, ox, dy, dx) {
                                Some((iy, ix)) => tap
                                    .copy_from_slice(&sample[(iy * self.w + ix) * cin..][..cin]),
                                None => tap.fill(T::zero()),
                            }
                        }
                    }
                }
            }
        }
    }

    fn col2im_add<T: Scalar>(&self, cols: &[T], first: usize, count: usize, dinput: &mut [T]) {
        let patch = self.patch();
        let cin = self.cin;
        for s in 0..count {
            let sample =
                &mut dinput[(first + s) * self.h * self.w * cin..][..self.h * self.w * cin];
            for oy in 0..self.oh {
                for ox in 0..self.ow {
                    let row = (s * self.oh + oy) * self.ow + ox;
                    let src = &cols[row * patch..(row + 1) * patch];
                    for dy in 0..self.kh {
                        for dx in 0..self.kw {
                            if let Some((iy, ix)) = self.source(oy, ox, dy, dx) {
                                let tap = &src[(dy * self.kw + dx) * cin..][..cin];
                                let dst = &mut sample[(iy * self.w + ix) * cin..][..cin];
                                for (d, &g) in dst.iter_mut().zip(tap) {
                                    *d += g;
                                }
                            }
                        }
                    }
                }
            }
        }
    }
}

pub(crate) fn conv_forward<T: Scalar>(
    g: &ConvGeom,
    input: &[T],
    kernel: &[T],
    bias: Option<&[T]>,
) -> Vec<T> {
    let patch = g.patch();
    let pix = g.out_pixels();
    let mut out = vec![T::zero(); g.batch * pix * g.cout];
    let per = g.samples_per_chunk();
    let mut scratch = Vec::new();
    let mut first = 0;
    while first < g.batch {
        let count = per.min(g.batch - first);
        let rows = count * pix;
        let cols: &[T] = if g.is_pointwise() {
            &input[first * pix * patch..][..rows * patch]
        } else {
            scratch.resize(rows * patch, T::zero());
            g.im2col(input, first, count, &mut scratch);
            &scratch
        };
        T::gemm(
            rows,
            patch,
            g.cout,
            cols,
            (patch, 1),
            kernel,
            (g.cout, 1),
            &mut out[first * pix * g.cout..][..rows * g.cout],
            (g.cout, 1),
            false,
        );
        first += count;
    }
    if let Some(bias) = bias {
        for px in out.chunks_exact_mut(g.cout) {
            for (o, &b) in px.iter_mut().zip(bias) {
                *o += b;
            }
        }
    }
    out
}

/// Gradients of the convolution with respect to input, kernel and bias.
/// Each is computed only when its slot is `Some`.
pub(crate) fn conv_backward<T: Scalar>(
    g: &ConvGeom,
    input: &[T],
    kernel: &[T],
    dout: &[T],
    dinput: Option<&mut [T]>,
    dkernel: Option<&mut [T]>,
    dbias: Option<&mut [T]>,
) {
    let patch = g.patch();
    let pix = g.out_pixels();
    if let Some(db) = dbias {
        for px in dout.chunks_exact(g.cout) {
            for (d, &v) in db.iter_mut().zip(px) {
                *d += v;
            }
        }
    }
    let per = g.samples_per_chunk();
    let mut scratch = Vec::new();
    if let Some(dk) = dkernel {
        let mut first = 0;
        while first < g.batch {
            let count = per.min(g.batch - first);
            let rows = count * pix;
            let cols: &[T] = if g.is_pointwise() {
                &input[first * pix * patch..][..rows * patch]
            } else {
                scratch.resize(rows * patch, T::zero());
                g.im2col(input, first, count, &mut scratch);
                &scratch
            };
            T::gemm(
                patch,
                rows,
                g.cout,
                cols,
                (1, patch),
                &dout[first * pix * g.cout..][..rows * g.cout],
                (g.cout, 1),
                dk,
                (g.cout, 1),
                true,
            );
            first += count;
        }
    }
    if let Some(dx) = dinput {
        let mut first = 0;
        while first < g.batch {
            let count = per.min(g.batch - first);
            let rows = count * pix;
            let dslice = &dout[first * pix * g.cout..][..rows * g.cout];
            if g.is_pointwise() {
                T::gemm(
                    rows,
                    g.cout,
                    patch,
                    dslice,
                    (g.cout, 1),
                    kernel,
                    (1, g.cout),
                    &mut dx[first * pix * patch..][..rows * patch],
                    (patch, 1),
                    true,
                );
            } else {
                scratch.resize(rows * patch, T::zero());
                T::gemm(
                    rows,
                    g.cout,
                    patch,
                    dslice,
                    (g.cout, 1),
                    kernel,
                    (1, g.cout),
                    &mut scratch,
                    (patch, 1),
                    false,
                );
                g.col2im_add(&scratch, first, count, dx);
            }
            first += count;
        }
    }
}

/// Locally connected layer: `kernels` is `[oh, ow, kh, kw, cin, cout]`
/// flattened, one kernel per output pixel, with a bias shared by all pixels.
pub(crate) fn lcn_forward<T: Scalar>(
    g: &ConvGeom,
    input: &[T],
    kernels: &[T],
    bias: Option<&[T]>,
) -> Vec<T> {
    let (cin, cout, patch) = (g.cin, g.cout, g.patch());
    let mut out = vec![T::zero(); g.batch * g.out_pixels() * cout];
    for s in 0..g.batch {
        for oy in 0..g.oh {
            for ox in 0..g.ow {
                let pixel = oy * g.ow + ox;
                let k = &kernels[pixel * patch * cout..][..patch * cout];
                let o = &mut out[(s * g.out_pixels() + pixel) * cout..][..cout];
                if let Some(b) = bias {
                    o.copy_from_slice(b);
                }
                for dy in 0..g.kh {
                    for dx in 0..g.kw {
                        let Some((iy, ix)) = g.source(oy, ox, dy, dx) else {
                            continue;
                        };
                        let x = &input[((s * g.h + iy) * g.w + ix) * cin..][..cin];
                        for (ci, &xv) in x.iter().enumerate() {
                            let row = &k[((dy * g.kw + dx) * cin + ci) * cout..][..cout];
                            for (ov, &kv) in o.iter_mut().zip(row) {
                                *ov += kv * xv;
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

pub(crate) fn lcn_backward<T: Scalar>(
    g: &ConvGeom,
    input: &[T],
    kernels: &[T],
    dout: &[T],
    mut dinput: Option<&mut [T]>,
    mut dkernels: Option<&mut [T]>,
    dbias: Option<&mut [T]>,
) {
    let (cin, cout, patch) = (g.cin, g.cout, g.patch());
    if let Some(db) = dbias {
        for px in dout.chunks_exact(cout) {
            for (d, &v) in db.iter_mut().zip(px) {
                *d += v;
            }
        }
    }
    for s in 0..g.batch {
        for oy in 0..g.oh {
            for ox in 0..g.ow {
                let pixel = oy * g.ow + ox;
                let go = &dout[(s * g.out_pixels() + pixel) * cout..][..cout];
                for dy in 0..g.kh {
                    for dx in 0..g.kw {
                        let Some((iy, ix)) = g.source(oy, ox, dy, dx) else {
                            continue;
                        };
                        let xoff = ((s * g.h + iy) * g.w + ix) * cin;
                        for ci in 0..cin {
                            let koff = pixel * patch * cout + ((dy * g.kw + dx) * cin + ci) * cout;
                            if let Some(dk) = dkernels.as_deref_mut() {
                                let xv = input[xoff + ci];
                                for (d, &gv) in dk[koff..koff + cout].iter_mut().zip(go) {
                                    *d += gv * xv;
                                }
                            }
                            if let Some(dx_buf) = dinput.as_deref_mut() {
                                let mut acc = T::zero();
                                for (&kv, &gv) in kernels[koff..koff + cout].iter().zip(go) {
                                    acc += kv * gv;
                                }
                                dx_buf[xoff + ci] += acc;
                            }
                        }
                    }
                }
            }
        }
    }
}
