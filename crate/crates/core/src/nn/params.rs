use rand::Rng;

use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::scalar::{Real, Scalar};
use crate::tensor::Tensor;

/// Stable handle into a [`ParamStore`]. Ids survive removal of other entries.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ParamId(pub(crate) usize);

#[derive(Clone, Debug, PartialEq)]
pub struct Param<T> {
    /// Layer path, e.g. `unet.enc1.conv0.kernel`.
    pub name: String,
    pub value: Tensor<T>,
}

/// Named trainable tensors. Removed entries leave a hole so ids stay valid.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore<T> {
    slots: Vec<Option<Param<T>>>,
}

impl<T: Scalar> ParamStore<T> {
    pub fn new() -> Self {
        Self { slots: Vec::new() }
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor<T>) -> ParamId {
        self.slots.push(Some(Param {
            name: name.into(),
            value,
        }));
        ParamId(self.slots.len() - 1)
    }

    pub fn slots(&self) -> usize {
        self.slots.len()
    }

    pub fn get(&self, id: ParamId) -> &Tensor<T> {
        &self.slots[id.0].as_ref().expect("removed parameter").value
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor<T> {
        &mut self.slots[id.0].as_mut().expect("removed parameter").value
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.slots
            .iter()
            .position(|s| s.as_ref().is_some_and(|p| p.name == name))
            .map(ParamId)
    }

    /// Replaces a parameter's value, keeping its shape.
    pub fn set(&mut self, name: &str, value: Tensor<T>) -> Result<()> {
        let id = self
            .find(name)
            .ok_or_else(|| Error::Contract(format!("no parameter named {name}")))?;
        let slot = self.get_mut(id);
        if slot.shape() != value.shape() {
            return Err(Error::Shape(format!(
                "parameter {name} has shape {:?}, got {:?}",
                slot.shape(),
                value.shape()
            )));
        }
        *slot = value;
        Ok(())
    }

    pub fn remove(&mut self, id: ParamId) -> Option<Param<T>> {
        self.slots.get_mut(id.0).and_then(Option::take)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Param<T>)> {
        self.slots
            .iter()
            .enumerate()
            .filter_map(|(i, s)| s.as_ref().map(|p| (ParamId(i), p)))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (ParamId, &mut Param<T>)> {
        self.slots
            .iter_mut()
            .enumerate()
            .filter_map(|(i, s)| s.as_mut().map(|p| (ParamId(i), p)))
    }

    pub fn is_live(&self, id: ParamId) -> bool {
        self.slots.get(id.0).is_some_and(Option::is_some)
    }

    /// Total number of scalar parameters.
    pub fn count(&self) -> usize {
        self.iter().map(|(_, p)| p.value.len()).sum()
    }

    /// Values of the live parameters in slot order.
    pub fn values(&self) -> Vec<Tensor<T>> {
        self.iter().map(|(_, p)| p.value.clone()).collect()
    }

    /// Binds externally recorded leaves, one per live parameter in slot
    /// order (as returned by [`ParamStore::values`]).
    pub fn bind_vars(&self, vars: &[Var]) -> Result<Bound> {
        let live = self.iter().count();
        if vars.len() != live {
            return Err(Error::Contract(format!("{} vars for {live} parameters", vars.len())));
        }
        let mut it = vars.iter();
        Ok(Bound {
            vars: self
                .slots
                .iter()
                .map(|s| s.as_ref().map(|_| *it.next().unwrap()))
                .collect(),
        })
    }

    /// Records every parameter as a leaf of `tape`.
    pub fn bind(&self, tape: &mut Tape<T>, requires_grad: bool) -> Bound {
        Bound {
            vars: self
                .slots
                .iter()
                .map(|s| {
                    s.as_ref()
                        .map(|p| tape.leaf(p.value.clone(), requires_grad))
                })
                .collect(),
        }
    }
}

/// Tape handles of a bound [`ParamStore`], indexed like the store.
#[derive(Clone, Debug)]
pub struct Bound {
    vars: Vec<Option<Var>>,
}

impl Bound {
    pub fn var(&self, id: ParamId) -> Var {
        self.vars[id.0].expect("parameter removed before binding")
    }

    /// Moves the gradients out of `tape` after `backward`.
    pub fn grads<T: Scalar>(&self, tape: &mut Tape<T>) -> Vec<Option<Tensor<T>>> {
        self.vars
            .iter()
            .map(|v| v.and_then(|v| tape.take_grad(v)))
            .collect()
    }
}

/// Uniform fan-in initialization in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`.
pub fn init_uniform<T: Real, R: Rng>(rng: &mut R, shape: &[usize], fan_in: usize) -> Tensor<T> {
    let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
    Tensor::from_fn(shape.to_vec(), |_| T::from_f64(rng.gen_range(-bound..=bound)))
}
