//! CoordGate: a convolution block's channels multiplied pixel-wise by a
//! gating map that depends only on position.

use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Var};
use crate::error::{shape_err, Result};
use crate::nn::coords::CoordinateMap;
use crate::nn::params::{Bound, ParamId};
use crate::scalar::{Real, Scalar};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateSource {
    /// Output of the coordinate encoder `g(C)`.
    Encoded,
    /// Trainable map.
    Direct,
    /// Materialized after training; no parameters behind it.
    Frozen,
}

/// Per-pixel, per-channel multiplicative mask, `[1, (h,) w, c]`.
#[derive(Clone, Debug, PartialEq)]
pub struct GatingMap<T> {
    pub values: Tensor<T>,
    pub source: GateSource,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct Dense {
    pub weight: ParamId,
    pub bias: ParamId,
}

#[derive(Clone, Debug, PartialEq)]
pub(crate) enum GateParams<T> {
    Encoded(Vec<Dense>),
    Direct(ParamId),
    Frozen(Tensor<T>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct CoordGate<T> {
    pub(crate) params: GateParams<T>,
    /// Index of the coordinate map (resolution level) this gate reads.
    pub(crate) level: usize,
    pub channels: usize,
}

impl<T: Scalar> CoordGate<T> {
    pub fn source(&self) -> GateSource {
        match self.params {
            GateParams::Encoded(_) => GateSource::Encoded,
            GateParams::Direct(_) => GateSource::Direct,
            GateParams::Frozen(_) => GateSource::Frozen,
        }
    }

    /// Records the gating map on `tape`. The network input never enters here.
    pub(crate) fn gate_var(&self, tape: &mut Tape<T>, bound: &Bound, coords: Var) -> Result<Var> {
        match &self.params {
            GateParams::Encoded(layers) => {
                let vars: Vec<(Var, Var)> = layers
                    .iter()
                    .map(|d| (bound.var(d.weight), bound.var(d.bias)))
                    .collect();
                coord_encoder_forward(tape, coords, &vars)
            }
            GateParams::Direct(id) => Ok(bound.var(*id)),
            GateParams::Frozen(map) => Ok(tape.leaf(map.clone(), false)),
        }
    }
}

/// Pixel-wise MLP over coordinate channels: affine layers with ReLU between
/// them and a linear output, so gates can exceed 1 and change sign.
pub fn coord_encoder_forward<T: Scalar>(
    tape: &mut Tape<T>,
    coords: Var,
    layers: &[(Var, Var)],
) -> Result<Var> {
    if layers.is_empty() {
        return Err(shape_err!("coordinate encoder needs at least one layer"));
    }
    let mut h = coords;
    for (i, &(w, b)) in layers.iter().enumerate() {
        h = tape.matmul_channels(h, w, Some(b))?;
        if i + 1 < layers.len() {
            h = tape.relu(h)?;
        }
    }
    Ok(h)
}

/// `y[i, a] = features[i, a] * gate[i, a]`, the gate broadcast over the batch.
pub fn coordgate_forward<T: Scalar>(tape: &mut Tape<T>, features: Var, gate: Var) -> Result<Var> {
    let fs = tape.value(features).shape();
    let gs = tape.value(gate).shape();
    if fs.last() != gs.last() {
        return Err(shape_err!(
            "gate has {:?} channels, features {:?}",
            gs.last(),
            fs.last()
        ));
    }
    if fs.len() != gs.len() || fs[1..] != gs[1..] {
        return Err(shape_err!("gate {gs:?} does not cover features {fs:?}"));
    }
    tape.hadamard(features, gate)
}

/// Evaluates the encoder on a coordinate map outside of any training tape.
pub fn encode_gate<T: Real>(
    coords: &CoordinateMap<T>,
    layers: &[(Tensor<T>, Tensor<T>)],
) -> Result<GatingMap<T>> {
    let mut tape = Tape::new();
    let c = tape.leaf(coords.values.clone(), false);
    let vars: Vec<(Var, Var)> = layers
        .iter()
        .map(|(w, b)| (tape.leaf(w.clone(), false), tape.leaf(b.clone(), false)))
        .collect();
    let out = coord_encoder_forward(&mut tape, c, &vars)?;
    Ok(GatingMap {
        values: tape.value(out).clone(),
        source: GateSource::Encoded,
    })
}
