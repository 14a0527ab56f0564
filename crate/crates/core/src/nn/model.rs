//! Building and running models described by a [`ModelSpec`].

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{Padding, Resample, Tape, Var};
use crate::error::{shape_err, Error, Result};
use crate::nn::coords::{make_coordinate_map, make_random_static_map};
use crate::nn::gate::{coordgate_forward, encode_gate, CoordGate, Dense, GateParams, GateSource, GatingMap};
use crate::nn::params::{init_uniform, Bound, ParamId, ParamStore};
use crate::nn::spec::{CoordPlacement, CoordSource, GateMode, ModelKind, ModelSpec};
use crate::scalar::Real;
use crate::snapshot;
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq)]
struct ConvLayer {
    kernel: ParamId,
    bias: ParamId,
    relu: bool,
    /// Concatenate the coordinate map of this level before convolving.
    coords: bool,
}

#[derive(Clone, Debug, PartialEq)]
struct UNetArch<T> {
    enc: Vec<[ConvLayer; 2]>,
    bottom: [ConvLayer; 2],
    /// Indexed by level, applied deepest first.
    dec: Vec<[ConvLayer; 2]>,
    enc_gates: Vec<Option<CoordGate<T>>>,
    dec_gates: Vec<Option<CoordGate<T>>>,
    head: ConvLayer,
    residual: bool,
}

#[derive(Clone, Debug, PartialEq)]
enum Arch<T> {
    Stack(Vec<ConvLayer>),
    Gated {
        block: Vec<ConvLayer>,
        gate: CoordGate<T>,
        head: ConvLayer,
    },
    Local {
        kernels: ParamId,
        bias: ParamId,
    },
    UNet(UNetArch<T>),
}

/// A parameterized network plus the static coordinate maps it reads.
#[derive(Clone, Debug, PartialEq)]
pub struct Model<T> {
    spec: ModelSpec,
    params: ParamStore<T>,
    arch: Arch<T>,
    /// One coordinate map per resolution level, `[1, (h,) w, dims]`.
    coords: Vec<Tensor<T>>,
}

struct Builder<'a, T> {
    spec: &'a ModelSpec,
    params: ParamStore<T>,
    rng: ChaCha8Rng,
}

impl<T: Real> Builder<'_, T> {
    fn taps(&self, k: usize) -> usize {
        k.pow(self.spec.dims() as u32)
    }

    fn kernel_shape(&self, k: usize, cin: usize, cout: usize) -> Vec<usize> {
        let mut s = vec![k; self.spec.dims()];
        s.extend([cin, cout]);
        s
    }

    fn conv(&mut self, name: &str, k: usize, cin: usize, cout: usize, relu: bool, coords: bool) -> ConvLayer {
        let fan_in = self.taps(k) * cin;
        let shape = self.kernel_shape(k, cin, cout);
        let kernel = init_uniform(&mut self.rng, &shape, fan_in);
        let bias = init_uniform(&mut self.rng, &[cout], fan_in);
        ConvLayer {
            kernel: self.params.add(format!("{name}.kernel"), kernel),
            bias: self.params.add(format!("{name}.bias"), bias),
            relu,
            coords,
        }
    }

    /// Encoder `dims -> width x (p-1) -> out`, output bias starting at 1 so
    /// a fresh gate passes features through roughly unchanged.
    fn gate(&mut self, name: &str, level: usize, width: usize, out: usize) -> CoordGate<T> {
        let params = match self.spec.gate_mode {
            GateMode::Direct => {
                let mut shape = vec![1];
                shape.extend(self.spec.level_extent(level));
                shape.push(out);
                GateParams::Direct(self.params.add(format!("{name}.map"), Tensor::ones(shape)))
            }
            GateMode::Encoded => {
                let mut widths = vec![self.spec.dims()];
                widths.extend(std::iter::repeat_n(width, self.spec.p.saturating_sub(1)));
                widths.push(out);
                let n = widths.len() - 1;
                let layers = widths
                    .windows(2)
                    .enumerate()
                    .map(|(i, w)| {
                        let weight = init_uniform(&mut self.rng, &[w[0], w[1]], w[0]);
                        let bias = if i + 1 == n {
                            Tensor::ones([w[1]])
                        } else {
                            init_uniform(&mut self.rng, &[w[1]], w[0])
                        };
                        Dense {
                            weight: self.params.add(format!("{name}.enc{i}.weight"), weight),
                            bias: self.params.add(format!("{name}.enc{i}.bias"), bias),
                        }
                    })
                    .collect();
                GateParams::Encoded(layers)
            }
        };
        CoordGate {
            params,
            level,
            channels: out,
        }
    }
}

impl<T: Real> Model<T> {
    /// Builds and initializes a model; `seed` fixes every initial value.
    pub fn build(spec: &ModelSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let mut b = Builder {
            spec,
            params: ParamStore::new(),
            rng: ChaCha8Rng::seed_from_u64(seed),
        };
        let (k, c, cin) = (spec.k, spec.c, spec.in_channels);
        let cd = spec.dims();
        let arch = match spec.kind {
            ModelKind::Cnn | ModelKind::Ccnn => {
                let layers = (0..spec.layers)
                    .map(|i| {
                        let last = i + 1 == spec.layers;
                        let coords = spec.kind == ModelKind::Ccnn
                            && (i == 0 || spec.coord_placement == CoordPlacement::EveryLayer);
                        let lin = if i == 0 { cin } else { c } + if coords { cd } else { 0 };
                        let lout = if last { 1 } else { c };
                        b.conv(&format!("conv{i}"), k, lin, lout, !last, coords)
                    })
                    .collect();
                Arch::Stack(layers)
            }
            ModelKind::Cg => {
                let block = (0..spec.layers)
                    .map(|i| {
                        let lin = if i == 0 { cin } else { c };
                        b.conv(&format!("conv{i}"), k, lin, c, i + 1 < spec.layers, false)
                    })
                    .collect();
                let gate = b.gate("gate", 0, c, c);
                let head = b.conv("head", 1, c, 1, false, false);
                Arch::Gated { block, gate, head }
            }
            ModelKind::Lcn => {
                let mut shape = spec.extent.clone();
                shape.extend(b.kernel_shape(k, cin, 1));
                let fan_in = b.taps(k) * cin;
                let kernels = init_uniform(&mut b.rng, &shape, fan_in);
                let bias = init_uniform(&mut b.rng, &[1], fan_in);
                Arch::Local {
                    kernels: b.params.add("lcn.kernels", kernels),
                    bias: b.params.add("lcn.bias", bias),
                }
            }
            ModelKind::Unet => {
                let d = spec.depth;
                let cc = if spec.coordconv { cd } else { 0 };
                let ch = |l: usize| spec.unet_channels(l);
                let block = |b: &mut Builder<T>, name: &str, lin: usize, lout: usize| {
                    [
                        b.conv(&format!("{name}.conv0"), k, lin + cc, lout, true, spec.coordconv),
                        b.conv(&format!("{name}.conv1"), k, lout, lout, true, false),
                    ]
                };
                let mut enc = Vec::new();
                let mut enc_gates = Vec::new();
                for l in 0..d {
                    let lin = if l == 0 { cin } else { ch(l - 1) };
                    enc.push(block(&mut b, &format!("enc{l}"), lin, ch(l)));
                    enc_gates.push(
                        spec.is_gated()
                            .then(|| b.gate(&format!("enc{l}.gate"), l, spec.encoder_width, ch(l))),
                    );
                }
                let bottom = block(&mut b, "bottom", ch(d - 1), ch(d));
                let mut dec: Vec<Option<[ConvLayer; 2]>> = vec![None; d];
                let mut dec_gates: Vec<Option<CoordGate<T>>> = vec![None; d];
                for l in (0..d).rev() {
                    dec[l] = Some(block(&mut b, &format!("dec{l}"), ch(l + 1) + ch(l), ch(l)));
                    dec_gates[l] = spec
                        .is_gated()
                        .then(|| b.gate(&format!("dec{l}.gate"), l, spec.encoder_width, ch(l)));
                }
                let head = b.conv("head", 1, ch(0), cin, false, false);
                Arch::UNet(UNetArch {
                    enc,
                    bottom,
                    dec: dec.into_iter().map(Option::unwrap).collect(),
                    enc_gates,
                    dec_gates,
                    head,
                    residual: spec.residual,
                })
            }
        };
        let levels = if spec.kind == ModelKind::Unet { spec.depth + 1 } else { 1 };
        let coords = (0..levels)
            .map(|l| {
                let ext = spec.level_extent(l);
                let map = match spec.coord_source {
                    CoordSource::Grid => make_coordinate_map(&ext)?,
                    CoordSource::Random => {
                        make_random_static_map(&ext, spec.coord_seed.wrapping_add(l as u64))?
                    }
                };
                Ok(map.values)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            spec: spec.clone(),
            params: b.params,
            arch,
            coords,
        })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn name(&self) -> String {
        self.spec.display_name()
    }

    pub fn params(&self) -> &ParamStore<T> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore<T> {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.count()
    }

    pub fn coordinate_map(&self, level: usize) -> &Tensor<T> {
        &self.coords[level]
    }

    /// Records the parameters on `tape`.
    pub fn bind(&self, tape: &mut Tape<T>, requires_grad: bool) -> Bound {
        self.params.bind(tape, requires_grad)
    }

    fn conv(&self, tape: &mut Tape<T>, bound: &Bound, coords: &[Var], level: usize, layer: &ConvLayer, x: Var) -> Result<Var> {
        let x = if layer.coords {
            tape.concat_channels(x, coords[level])?
        } else {
            x
        };
        let y = match self.spec.dims() {
            1 => tape.conv1d(x, bound.var(layer.kernel), Some(bound.var(layer.bias)), Padding::SameZero)?,
            _ => tape.conv2d(x, bound.var(layer.kernel), Some(bound.var(layer.bias)), Padding::SameZero)?,
        };
        if layer.relu {
            tape.relu(y)
        } else {
            Ok(y)
        }
    }

    fn gate(&self, tape: &mut Tape<T>, bound: &Bound, coords: &[Var], gate: &CoordGate<T>, x: Var) -> Result<Var> {
        let g = gate.gate_var(tape, bound, coords[gate.level])?;
        coordgate_forward(tape, x, g)
    }

    fn check_input(&self, shape: &[usize]) -> Result<()> {
        let mut want = self.spec.extent.clone();
        want.push(self.spec.in_channels);
        if shape.len() != want.len() + 1 || shape[1..] != want[..] {
            return Err(shape_err!(
                "{} expects [batch, {:?}], got {:?}",
                self.name(),
                want,
                shape
            ));
        }
        Ok(())
    }

    /// Runs the network on `x` (`[batch, extent.., in_channels]`).
    pub fn forward(&self, tape: &mut Tape<T>, bound: &Bound, x: Var) -> Result<Var> {
        self.check_input(tape.value(x).shape())?;
        let coords: Vec<Var> = self.coords.iter().map(|c| tape.leaf(c.clone(), false)).collect();
        match &self.arch {
            Arch::Stack(layers) => layers
                .iter()
                .try_fold(x, |h, l| self.conv(tape, bound, &coords, 0, l, h)),
            Arch::Gated { block, gate, head } => {
                let h = block
                    .iter()
                    .try_fold(x, |h, l| self.conv(tape, bound, &coords, 0, l, h))?;
                let h = self.gate(tape, bound, &coords, gate, h)?;
                self.conv(tape, bound, &coords, 0, head, h)
            }
            Arch::Local { kernels, bias } => tape.lcn(x, bound.var(*kernels), Some(bound.var(*bias))),
            Arch::UNet(u) => {
                let d = u.enc.len();
                let mut h = x;
                let mut skips = Vec::with_capacity(d);
                for l in 0..d {
                    for layer in &u.enc[l] {
                        h = self.conv(tape, bound, &coords, l, layer, h)?;
                    }
                    if let Some(g) = &u.enc_gates[l] {
                        h = self.gate(tape, bound, &coords, g, h)?;
                    }
                    skips.push(h);
                    h = tape.resample2x(h, Resample::Down)?;
                }
                for layer in &u.bottom {
                    h = self.conv(tape, bound, &coords, d, layer, h)?;
                }
                for l in (0..d).rev() {
                    h = tape.resample2x(h, Resample::Up)?;
                    h = tape.concat_channels(h, skips[l])?;
                    for layer in &u.dec[l] {
                        h = self.conv(tape, bound, &coords, l, layer, h)?;
                    }
                    if let Some(g) = &u.dec_gates[l] {
                        h = self.gate(tape, bound, &coords, g, h)?;
                    }
                }
                let out = self.conv(tape, bound, &coords, 0, &u.head, h)?;
                if u.residual {
                    tape.add(out, x)
                } else {
                    Ok(out)
                }
            }
        }
    }

    /// Inference on a batch without recording gradients.
    pub fn predict(&self, input: &Tensor<T>) -> Result<Tensor<T>> {
        let mut tape = Tape::new();
        let bound = self.bind(&mut tape, false);
        let x = tape.leaf(input.clone(), false);
        let y = self.forward(&mut tape, &bound, x)?;
        Ok(tape.value(y).clone())
    }

    fn gates(&self) -> Vec<&CoordGate<T>> {
        match &self.arch {
            Arch::Gated { gate, .. } => vec![gate],
            Arch::UNet(u) => u.enc_gates.iter().chain(&u.dec_gates).flatten().collect(),
            _ => Vec::new(),
        }
    }

    fn gates_mut(&mut self) -> Vec<&mut CoordGate<T>> {
        match &mut self.arch {
            Arch::Gated { gate, .. } => vec![gate],
            Arch::UNet(u) => u
                .enc_gates
                .iter_mut()
                .chain(u.dec_gates.iter_mut())
                .flatten()
                .collect(),
            _ => Vec::new(),
        }
    }

    /// Current values of every gating map (encoder gates first, then decoder).
    pub fn gating_maps(&self) -> Result<Vec<GatingMap<T>>> {
        self.gates()
            .into_iter()
            .map(|g| self.materialize(g))
            .collect()
    }

    fn materialize(&self, gate: &CoordGate<T>) -> Result<GatingMap<T>> {
        match &gate.params {
            GateParams::Encoded(layers) => {
                let weights: Vec<_> = layers
                    .iter()
                    .map(|d| (self.params.get(d.weight).clone(), self.params.get(d.bias).clone()))
                    .collect();
                let coords = crate::nn::coords::CoordinateMap {
                    values: self.coords[gate.level].clone(),
                    is_static: true,
                };
                encode_gate(&coords, &weights)
            }
            GateParams::Direct(id) => Ok(GatingMap {
                values: self.params.get(*id).clone(),
                source: GateSource::Direct,
            }),
            GateParams::Frozen(map) => Ok(GatingMap {
                values: map.clone(),
                source: GateSource::Frozen,
            }),
        }
    }

    /// Replaces every gate by its materialized map and drops the parameters
    /// that produced it. Inference afterwards is a plain elementwise product.
    pub fn export_gating_map(&mut self) -> Result<Vec<GatingMap<T>>> {
        if self.gates().is_empty() {
            return Err(Error::Contract(format!("{} has no CoordGate to export", self.name())));
        }
        let maps = self.gating_maps()?;
        let mut dropped = Vec::new();
        for (gate, map) in self.gates_mut().into_iter().zip(&maps) {
            match &gate.params {
                GateParams::Encoded(layers) => {
                    dropped.extend(layers.iter().flat_map(|d| [d.weight, d.bias]));
                }
                GateParams::Direct(id) => dropped.push(*id),
                GateParams::Frozen(_) => {}
            }
            gate.params = GateParams::Frozen(map.values.clone());
        }
        for id in dropped {
            self.params.remove(id);
        }
        Ok(maps
            .into_iter()
            .map(|m| GatingMap {
                source: GateSource::Frozen,
                ..m
            })
            .collect())
    }

    pub fn save_checkpoint(&self, path: &Path) -> Result<()> {
        let entries: Vec<(String, Tensor<T>)> = self
            .params
            .iter()
            .map(|(_, p)| (p.name.clone(), p.value.clone()))
            .collect();
        snapshot::write_checkpoint(path, &entries)
    }

    pub fn load_checkpoint(&mut self, path: &Path) -> Result<()> {
        for (name, value) in snapshot::read_checkpoint::<T>(path)? {
            self.params.set(&name, value)?;
        }
        Ok(())
    }
}
