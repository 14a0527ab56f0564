//! Reverse-mode automatic differentiation on a linear tape.
//!
//! Every operation appends a node holding its output value and enough
//! bookkeeping (input handles, argmax indices, geometry) to run its adjoint.
//! [`Tape::backward`] walks the nodes in reverse execution order once, then
//! leaves gradients on every leaf created with `requires_grad`. A tape is
//! single-use: after `backward` it must be [`Tape::clear`]ed before the next
//! forward pass.

mod conv;
pub mod gradcheck;

pub use conv::Padding;

use conv::ConvGeom;
use serde::{Deserialize, Serialize};

use crate::error::{shape_err, Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Resample {
    /// 2x2 max-pool.
    Down,
    /// Nearest-neighbour 2x repeat.
    Up,
}

#[derive(Debug)]
enum Op {
    Leaf,
    Conv {
        input: Var,
        kernel: Var,
        bias: Option<Var>,
        geom: ConvGeom,
    },
    Lcn {
        input: Var,
        kernels: Var,
        bias: Option<Var>,
        geom: ConvGeom,
    },
    Hadamard {
        a: Var,
        b: Var,
    },
    Add {
        a: Var,
        b: Var,
    },
    MatmulChannels {
        input: Var,
        weights: Var,
        bias: Option<Var>,
    },
    Relu {
        input: Var,
    },
    MaxPool {
        input: Var,
        argmax: Vec<usize>,
    },
    Upsample {
        input: Var,
        h: usize,
        w: usize,
        c: usize,
    },
    Concat {
        a: Var,
        b: Var,
        ca: usize,
        cb: usize,
    },
    Sum {
        input: Var,
    },
    Mse {
        pred: Var,
        target: Var,
    },
}

#[derive(Debug)]
struct Node<T> {
    value: Tensor<T>,
    requires_grad: bool,
    grad: Option<Tensor<T>>,
    op: Op,
}

#[derive(Debug)]
pub struct Tape<T> {
    nodes: Vec<Node<T>>,
    consumed: bool,
}

impl<T: Scalar> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

/// `b` either matches `a` exactly or is a single sample broadcast over `a`'s
/// leading (batch) axis.
fn broadcast_ok(a: &[usize], b: &[usize]) -> bool {
    a == b
        || (a.len() == b.len() && !b.is_empty() && b[0] == 1 && a[1..] == b[1..])
        || (b.len() + 1 == a.len() && a[1..] == *b)
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Self {
            nodes: Vec::new(),
            consumed: false,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Drops every node and cached intermediate; the tape is ready to record again.
    pub fn clear(&mut self) {
        self.nodes.clear();
        self.consumed = false;
    }

    pub fn leaf(&mut self, value: Tensor<T>, requires_grad: bool) -> Var {
        self.push(value, requires_grad, Op::Leaf)
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    /// Gradient of the last `backward` loss with respect to a leaf.
    pub fn grad(&self, v: Var) -> Option<&Tensor<T>> {
        self.nodes[v.0].grad.as_ref()
    }

    pub fn take_grad(&mut self, v: Var) -> Option<Tensor<T>> {
        self.nodes[v.0].grad.take()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn push(&mut self, value: Tensor<T>, requires_grad: bool, op: Op) -> Var {
        self.nodes.push(Node {
            value,
            requires_grad,
            grad: None,
            op,
        });
        Var(self.nodes.len() - 1)
    }

    fn recording(&self) -> Result<()> {
        if self.consumed {
            return Err(Error::Contract(
                "tape already consumed by backward; clear it before recording".into(),
            ));
        }
        Ok(())
    }

    fn any_grad(&self, vars: &[Option<Var>]) -> bool {
        vars.iter().flatten().any(|v| self.nodes[v.0].requires_grad)
    }

    fn bias_check(&self, bias: Option<Var>, cout: usize) -> Result<()> {
        if let Some(b) = bias {
            let shape = self.value(b).shape();
            if shape != [cout] {
                return Err(shape_err!("bias shape {shape:?}, expected [{cout}]"));
            }
        }
        Ok(())
    }

    fn conv(
        &mut self,
        spatial_rank: usize,
        input: Var,
        kernel: Var,
        bias: Option<Var>,
        padding: Padding,
    ) -> Result<Var> {
        self.recording()?;
        let geom = ConvGeom::new(
            spatial_rank,
            self.value(input).shape(),
            self.value(kernel).shape(),
            padding,
        )?;
        self.bias_check(bias, geom.cout)?;
        let out = conv::conv_forward(
            &geom,
            self.value(input).data(),
            self.value(kernel).data(),
            bias.map(|b| self.value(b).data()),
        );
        let value = Tensor::new(geom.output_shape(spatial_rank), out)?;
        let rg = self.any_grad(&[Some(input), Some(kernel), bias]);
        Ok(self.push(
            value,
            rg,
            Op::Conv {
                input,
                kernel,
                bias,
                geom,
            },
        ))
    }

    /// Cross-correlation of `[b, n, c_in]` with `[k, c_in, c_out]`.
    pub fn conv1d(
        &mut self,
        input: Var,
        kernel: Var,
        bias: Option<Var>,
        padding: Padding,
    ) -> Result<Var> {
        self.conv(1, input, kernel, bias, padding)
    }

    /// Cross-correlation of `[b, h, w, c_in]` with `[kh, kw, c_in, c_out]`.
    pub fn conv2d(
        &mut self,
        input: Var,
        kernel: Var,
        bias: Option<Var>,
        padding: Padding,
    ) -> Result<Var> {
        self.conv(2, input, kernel, bias, padding)
    }

    /// Locally connected layer with zero padding.
    ///
    /// For 2-D input `[b, h, w, c_in]` the kernels are `[h, w, kh, kw, c_in, c_out]`;
    /// for 1-D input `[b, n, c_in]` they are `[n, k, c_in, c_out]`. The bias is shared.
    pub fn lcn(&mut self, input: Var, kernels: Var, bias: Option<Var>) -> Result<Var> {
        self.recording()?;
        let xs = self.value(input).shape().to_vec();
        let ks = self.value(kernels).shape().to_vec();
        let spatial_rank = match xs.len() {
            3 => 1,
            4 => 2,
            _ => return Err(shape_err!("lcn input must be rank 3 or 4, got {xs:?}")),
        };
        if ks.len() != 2 * spatial_rank + 2 || ks[..spatial_rank] != xs[1..=spatial_rank] {
            return Err(shape_err!(
                "lcn kernel grid {ks:?} does not match spatial extent of {xs:?}"
            ));
        }
        let geom = ConvGeom::new(spatial_rank, &xs, &ks[spatial_rank..], Padding::SameZero)?;
        self.bias_check(bias, geom.cout)?;
        let out = conv::lcn_forward(
            &geom,
            self.value(input).data(),
            self.value(kernels).data(),
            bias.map(|b| self.value(b).data()),
        );
        let value = Tensor::new(geom.output_shape(spatial_rank), out)?;
        let rg = self.any_grad(&[Some(input), Some(kernels), bias]);
        Ok(self.push(
            value,
            rg,
            Op::Lcn {
                input,
                kernels,
                bias,
                geom,
            },
        ))
    }

    /// Elementwise product; `b` may be a single sample broadcast over the batch.
    pub fn hadamard(&mut self, a: Var, b: Var) -> Result<Var> {
        self.recording()?;
        let (av, bv) = (self.value(a), self.value(b));
        if !broadcast_ok(av.shape(), bv.shape()) {
            return Err(shape_err!(
                "hadamard of {:?} and {:?}",
                av.shape(),
                bv.shape()
            ));
        }
        let bl = bv.len();
        let data = av
            .data()
            .iter()
            .enumerate()
            .map(|(i, &x)| x * bv.data()[i % bl])
            .collect();
        let value = Tensor::new(av.shape(), data)?;
        let rg = self.any_grad(&[Some(a), Some(b)]);
        Ok(self.push(value, rg, Op::Hadamard { a, b }))
    }

    /// Elementwise sum; `b` may broadcast over the batch like in [`Tape::hadamard`].
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.recording()?;
        let (av, bv) = (self.value(a), self.value(b));
        if !broadcast_ok(av.shape(), bv.shape()) {
            return Err(shape_err!("add of {:?} and {:?}", av.shape(), bv.shape()));
        }
        let bl = bv.len();
        let data = av
            .data()
            .iter()
            .enumerate()
            .map(|(i, &x)| x + bv.data()[i % bl])
            .collect();
        let value = Tensor::new(av.shape(), data)?;
        let rg = self.any_grad(&[Some(a), Some(b)]);
        Ok(self.push(value, rg, Op::Add { a, b }))
    }

    /// Affine map of the channel axis, applied independently at every position
    /// (a 1x1 convolution). `weights` is `[c_in, c_out]`.
    pub fn matmul_channels(&mut self, input: Var, weights: Var, bias: Option<Var>) -> Result<Var> {
        self.recording()?;
        let xs = self.value(input).shape().to_vec();
        let ws = self.value(weights).shape().to_vec();
        let cin = *xs
            .last()
            .ok_or_else(|| shape_err!("matmul_channels on a rank-0 tensor"))?;
        if ws.len() != 2 || ws[0] != cin {
            return Err(shape_err!(
                "weights {ws:?} do not map {cin} input channels"
            ));
        }
        let cout = ws[1];
        self.bias_check(bias, cout)?;
        let rows = self.value(input).len() / cin.max(1);
        let mut out = vec![T::zero(); rows * cout];
        T::gemm(
            rows,
            cin,
            cout,
            self.value(input).data(),
            (cin, 1),
            self.value(weights).data(),
            (cout, 1),
            &mut out,
            (cout, 1),
            false,
        );
        if let Some(b) = bias {
            let bd = self.value(b).data();
            for px in out.chunks_exact_mut(cout) {
                for (o, &bv) in px.iter_mut().zip(bd) {
                    *o += bv;
                }
            }
        }
        let mut shape = xs;
        *shape.last_mut().unwrap() = cout;
        let value = Tensor::new(shape, out)?;
        let rg = self.any_grad(&[Some(input), Some(weights), bias]);
        Ok(self.push(
            value,
            rg,
            Op::MatmulChannels {
                input,
                weights,
                bias,
            },
        ))
    }

    pub fn relu(&mut self, input: Var) -> Result<Var> {
        self.recording()?;
        let value = self
            .value(input)
            .map(|x| if x > T::zero() { x } else { T::zero() });
        let rg = self.any_grad(&[Some(input)]);
        Ok(self.push(value, rg, Op::Relu { input }))
    }

    /// 2x down (max-pool) or up (nearest) resampling of `[b, h, w, c]`.
    pub fn resample2x(&mut self, input: Var, direction: Resample) -> Result<Var> {
        self.recording()?;
        let xs = self.value(input).shape().to_vec();
        let [b, h, w, c] = xs[..] else {
            return Err(shape_err!("resample2x needs [b, h, w, c], got {xs:?}"));
        };
        let rg = self.any_grad(&[Some(input)]);
        match direction {
            Resample::Down => {
                if h % 2 != 0 || w % 2 != 0 {
                    return Err(shape_err!("cannot max-pool odd extent {h}x{w}"));
                }
                let (oh, ow) = (h / 2, w / 2);
                let x = self.value(input).data();
                let mut out = Vec::with_capacity(b * oh * ow * c);
                let mut argmax = Vec::with_capacity(b * oh * ow * c);
                for s in 0..b {
                    for oy in 0..oh {
                        for ox in 0..ow {
                            for ch in 0..c {
                                // row-major window order; strict '>' keeps the first maximum
                                let mut best = ((s * h + 2 * oy) * w + 2 * ox) * c + ch;
                                for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                                    let idx = ((s * h + 2 * oy + dy) * w + 2 * ox + dx) * c + ch;
                                    if x[idx] > x[best] {
                                        best = idx;
                                    }
                                }
                                out.push(x[best]);
                                argmax.push(best);
                            }
                        }
                    }
                }
                let value = Tensor::new([b, oh, ow, c], out)?;
                Ok(self.push(value, rg, Op::MaxPool { input, argmax }))
            }
            Resample::Up => {
                let x = self.value(input).data();
                let (oh, ow) = (2 * h, 2 * w);
                let mut out = Vec::with_capacity(b * oh * ow * c);
                for s in 0..b {
                    for oy in 0..oh {
                        for ox in 0..ow {
                            let src = ((s * h + oy / 2) * w + ox / 2) * c;
                            out.extend_from_slice(&x[src..src + c]);
                        }
                    }
                }
                let value = Tensor::new([b, oh, ow, c], out)?;
                Ok(self.push(value, rg, Op::Upsample { input, h, w, c }))
            }
        }
    }

    /// Concatenation along the channel axis; `b` may broadcast over the batch.
    pub fn concat_channels(&mut self, a: Var, b: Var) -> Result<Var> {
        self.recording()?;
        let (av, bv) = (self.value(a), self.value(b));
        let (asz, bsz) = (av.shape(), bv.shape());
        if asz.is_empty() || bsz.is_empty() {
            return Err(shape_err!("concat of rank-0 tensors"));
        }
        let spatial = |s: &[usize]| s[..s.len() - 1].to_vec();
        if !broadcast_ok(&spatial(asz), &spatial(bsz)) {
            return Err(shape_err!("concat of {asz:?} and {bsz:?}: extents differ"));
        }
        let (ca, cb) = (av.channels(), bv.channels());
        let bpix = bv.len() / cb.max(1);
        let pixels = av.len() / ca.max(1);
        let mut data = Vec::with_capacity(pixels * (ca + cb));
        for p in 0..pixels {
            data.extend_from_slice(&av.data()[p * ca..(p + 1) * ca]);
            let q = p % bpix;
            data.extend_from_slice(&bv.data()[q * cb..(q + 1) * cb]);
        }
        let mut shape = asz.to_vec();
        *shape.last_mut().unwrap() = ca + cb;
        let value = Tensor::new(shape, data)?;
        let rg = self.any_grad(&[Some(a), Some(b)]);
        Ok(self.push(value, rg, Op::Concat { a, b, ca, cb }))
    }

    /// Sum of all elements, as a rank-0 tensor.
    pub fn sum(&mut self, input: Var) -> Result<Var> {
        self.recording()?;
        let value = Tensor::scalar(self.value(input).sum());
        let rg = self.any_grad(&[Some(input)]);
        Ok(self.push(value, rg, Op::Sum { input }))
    }

    /// Mean squared error over all elements, as a rank-0 tensor.
    pub fn mse_loss(&mut self, pred: Var, target: Var) -> Result<Var> {
        self.recording()?;
        let (p, t) = (self.value(pred), self.value(target));
        if p.shape() != t.shape() {
            return Err(shape_err!(
                "mse of {:?} against {:?}",
                p.shape(),
                t.shape()
            ));
        }
        let n = T::from_usize(p.len().max(1));
        let sq = p
            .data()
            .iter()
            .zip(t.data())
            .fold(T::zero(), |acc, (&a, &b)| acc + (a - b) * (a - b));
        let value = Tensor::scalar(sq / n);
        let rg = self.any_grad(&[Some(pred), Some(target)]);
        Ok(self.push(value, rg, Op::Mse { pred, target }))
    }

    /// Propagates d(loss)/d(node) back to every leaf with `requires_grad`.
    ///
    /// Leaves that do not influence the loss receive an all-zero gradient.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if self.consumed {
            return Err(Error::Contract(
                "backward called twice without a fresh forward pass".into(),
            ));
        }
        let lv = self.value(loss);
        if lv.len() != 1 {
            return Err(Error::Contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                lv.shape()
            )));
        }
        self.consumed = true;

        let mut grads: Vec<Option<Vec<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        if self.nodes[loss.0].requires_grad {
            grads[loss.0] = Some(vec![T::one()]);
        }
        for i in (0..=loss.0).rev() {
            let Some(gout) = grads[i].take() else {
                continue;
            };
            if matches!(self.nodes[i].op, Op::Leaf) {
                grads[i] = Some(gout);
                continue;
            }
            self.propagate(i, &gout, &mut grads);
        }

        for (node, g) in self.nodes.iter_mut().zip(grads) {
            if node.requires_grad && matches!(node.op, Op::Leaf) {
                let data = g.unwrap_or_else(|| vec![T::zero(); node.value.len()]);
                node.grad = Some(Tensor::new(node.value.shape(), data)?);
            }
        }
        Ok(())
    }

    /// Accumulation buffer of `v`'s gradient, or `None` when `v` needs none.
    fn slot<'g>(&self, grads: &'g mut [Option<Vec<T>>], v: Var) -> Option<&'g mut [T]> {
        if !self.nodes[v.0].requires_grad {
            return None;
        }
        let len = self.nodes[v.0].value.len();
        Some(grads[v.0].get_or_insert_with(|| vec![T::zero(); len]))
    }

    /// Moves `v`'s accumulation buffer out, to be handed back with [`store`].
    /// Operands of one node are distinct nodes, so taking them in turn is sound.
    fn take_slot(&self, grads: &mut [Option<Vec<T>>], v: Var) -> Option<Vec<T>> {
        if !self.nodes[v.0].requires_grad {
            return None;
        }
        let len = self.nodes[v.0].value.len();
        Some(grads[v.0].take().unwrap_or_else(|| vec![T::zero(); len]))
    }

    fn propagate(&self, i: usize, g: &[T], grads: &mut [Option<Vec<T>>]) {
        match self.nodes[i].op {
            Op::Leaf => {}
            Op::Conv {
                input,
                kernel,
                bias,
                ref geom,
            } => {
                let x = self.value(input).data();
                let k = self.value(kernel).data();
                let mut dx = self.take_slot(grads, input);
                let mut dk = self.take_slot(grads, kernel);
                let mut db = bias.and_then(|b| self.take_slot(grads, b));
                conv::conv_backward(
                    geom,
                    x,
                    k,
                    g,
                    dx.as_deref_mut(),
                    dk.as_deref_mut(),
                    db.as_deref_mut(),
                );
                store(grads, input, dx);
                store(grads, kernel, dk);
                if let Some(b) = bias {
                    store(grads, b, db);
                }
            }
            Op::Lcn {
                input,
                kernels,
                bias,
                ref geom,
            } => {
                let x = self.value(input).data();
                let k = self.value(kernels).data();
                let mut dx = self.take_slot(grads, input);
                let mut dk = self.take_slot(grads, kernels);
                let mut db = bias.and_then(|b| self.take_slot(grads, b));
                conv::lcn_backward(
                    geom,
                    x,
                    k,
                    g,
                    dx.as_deref_mut(),
                    dk.as_deref_mut(),
                    db.as_deref_mut(),
                );
                store(grads, input, dx);
                store(grads, kernels, dk);
                if let Some(b) = bias {
                    store(grads, b, db);
                }
            }
            Op::Hadamard { a, b } => {
                let av = self.value(a).data();
                let bv = self.value(b).data();
                let bl = bv.len();
                if let Some(da) = self.slot(grads, a) {
                    for (j, d) in da.iter_mut().enumerate() {
                        *d += g[j] * bv[j % bl];
                    }
                }
                if let Some(db) = self.slot(grads, b) {
                    for (j, &gv) in g.iter().enumerate() {
                        db[j % bl] += gv * av[j];
                    }
                }
            }
            Op::Add { a, b } => {
                let bl = self.value(b).len();
                if let Some(da) = self.slot(grads, a) {
                    for (d, &gv) in da.iter_mut().zip(g) {
                        *d += gv;
                    }
                }
                if let Some(db) = self.slot(grads, b) {
                    for (j, &gv) in g.iter().enumerate() {
                        db[j % bl] += gv;
                    }
                }
            }
            Op::MatmulChannels {
                input,
                weights,
                bias,
            } => {
                let ws = self.value(weights).shape();
                let (cin, cout) = (ws[0], ws[1]);
                let x = self.value(input).data();
                let w = self.value(weights).data();
                let rows = g.len() / cout.max(1);
                if let Some(b) = bias {
                    if let Some(db) = self.slot(grads, b) {
                        for px in g.chunks_exact(cout) {
                            for (d, &v) in db.iter_mut().zip(px) {
                                *d += v;
                            }
                        }
                    }
                }
                if let Some(dw) = self.slot(grads, weights) {
                    T::gemm(cin, rows, cout, x, (1, cin), g, (cout, 1), dw, (cout, 1), true);
                }
                if let Some(dx) = self.slot(grads, input) {
                    T::gemm(rows, cout, cin, g, (cout, 1), w, (1, cout), dx, (cin, 1), true);
                }
            }
            Op::Relu { input } => {
                let x = self.value(input).data();
                if let Some(dx) = self.slot(grads, input) {
                    for ((d, &gv), &xv) in dx.iter_mut().zip(g).zip(x) {
                        if xv > T::zero() {
                            *d += gv;
                        }
                    }
                }
            }
            Op::MaxPool { input, ref argmax } => {
                if let Some(dx) = self.slot(grads, input) {
                    for (&src, &gv) in argmax.iter().zip(g) {
                        dx[src] += gv;
                    }
                }
            }
            Op::Upsample { input, h, w, c } => {
                if let Some(dx) = self.slot(grads, input) {
                    let (oh, ow) = (2 * h, 2 * w);
                    let batch = g.len() / (oh * ow * c).max(1);
                    for s in 0..batch {
                        for oy in 0..oh {
                            for ox in 0..ow {
                                let src = ((s * h + oy / 2) * w + ox / 2) * c;
                                let dst = ((s * oh + oy) * ow + ox) * c;
                                for ch in 0..c {
                                    dx[src + ch] += g[dst + ch];
                                }
                            }
                        }
                    }
                }
            }
            Op::Concat { a, b, ca, cb } => {
                let pixels = g.len() / (ca + cb).max(1);
                if let Some(da) = self.slot(grads, a) {
                    for p in 0..pixels {
                        for ch in 0..ca {
                            da[p * ca + ch] += g[p * (ca + cb) + ch];
                        }
                    }
                }
                if let Some(db) = self.slot(grads, b) {
                    let bpix = db.len() / cb.max(1);
                    for p in 0..pixels {
                        let q = p % bpix;
                        for ch in 0..cb {
                            db[q * cb + ch] += g[p * (ca + cb) + ca + ch];
                        }
                    }
                }
            }
            Op::Sum { input } => {
                if let Some(dx) = self.slot(grads, input) {
                    for d in dx.iter_mut() {
                        *d += g[0];
                    }
                }
            }
            Op::Mse { pred, target } => {
                let p = self.value(pred).data();
                let t = self.value(target).data();
                let n = T::from_usize(p.len().max(1));
                let two = T::one() + T::one();
                let scale = two * g[0] / n;
                if let Some(dp) = self.slot(grads, pred) {
                    for ((d, &a), &b) in dp.iter_mut().zip(p).zip(t) {
                        *d += scale * (a - b);
                    }
                }
                if let Some(dt) = self.slot(grads, target) {
                    for ((d, &a), &b) in dt.iter_mut().zip(p).zip(t) {
                        *d -= scale * (a - b);
                    }
                }
            }
        }
    }
}

fn store<T>(grads: &mut [Option<Vec<T>>], v: Var, g: Option<Vec<T>>) {
    if g.is_some() {
        grads[v.0] = g;
    }
}
