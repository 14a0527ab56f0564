//! Model zoo: plain CNN stacks, CoordConv, CoordGate, locally connected
//! layers and U-Nets, all built from a declarative [`ModelSpec`].

pub mod coords;
pub mod gate;
mod model;
pub mod params;
pub mod spec;

pub use coords::{make_coordinate_map, make_random_static_map, CoordinateMap};
pub use gate::{coord_encoder_forward, coordgate_forward, encode_gate, GateSource, GatingMap};
pub use model::Model;
pub use params::{Bound, Param, ParamId, ParamStore};
pub use spec::{CoordPlacement, CoordSource, GateMode, GatePlacement, ModelKind, ModelSpec};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// The `k*k` one-hot kernels `[k, k, 1, k*k]`; output channel `a` picks
/// tap `(a / k, a % k)`.
pub fn pixel_basis_kernels<T: Scalar>(k: usize) -> Result<Tensor<T>> {
    if k.is_multiple_of(2) {
        return Err(Error::Shape(format!("pixel basis needs odd k, got {k}")));
    }
    let n = k * k;
    Ok(Tensor::from_fn([k, k, 1, n], |i| {
        // flat index = tap * n + channel
        if i / n == i % n {
            T::one()
        } else {
            T::zero()
        }
    }))
}
