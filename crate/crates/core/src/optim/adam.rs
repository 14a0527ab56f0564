use serde::{Deserialize, Serialize};

use crate::error::{shape_err, Error, Result};
use crate::nn::ParamStore;
use crate::scalar::Real;
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam with bias correction. Moments are indexed like the parameter store.
#[derive(Clone, Debug)]
pub struct Adam<T> {
    pub config: AdamConfig,
    t: u64,
    m: Vec<Option<Tensor<T>>>,
    v: Vec<Option<Tensor<T>>>,
}

impl<T: Real> Adam<T> {
    pub fn new(config: AdamConfig) -> Self {
        Self {
            config,
            t: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn set_lr(&mut self, lr: f64) {
        self.config.lr = lr;
    }

    /// Second moment of slot `i`, if it has been touched.
    pub fn second_moment(&self, i: usize) -> Option<&Tensor<T>> {
        self.v.get(i).and_then(Option::as_ref)
    }

    /// One update of every live parameter. `grads` is indexed like the store.
    pub fn step(&mut self, params: &mut ParamStore<T>, grads: &[Option<Tensor<T>>]) -> Result<()> {
        let n = params.slots();
        self.m.resize(n, None);
        self.v.resize(n, None);
        // validate before touching anything
        for (id, p) in params.iter() {
            let g = grads
                .get(id.0)
                .and_then(Option::as_ref)
                .ok_or_else(|| Error::Contract(format!("missing gradient for {}", p.name)))?;
            if g.shape() != p.value.shape() {
                return Err(shape_err!(
                    "gradient {:?} for {} of shape {:?}",
                    g.shape(),
                    p.name,
                    p.value.shape()
                ));
            }
        }
        self.t += 1;
        let c = self.config;
        let b1 = T::from_f64(c.beta1);
        let b2 = T::from_f64(c.beta2);
        let one = T::one();
        let eps = T::from_f64(c.eps);
        let bc1 = T::from_f64(1.0 - c.beta1.powi(self.t as i32));
        let bc2 = T::from_f64(1.0 - c.beta2.powi(self.t as i32));
        let lr = T::from_f64(c.lr);
        for (id, p) in params.iter_mut() {
            let g = grads[id.0].as_ref().unwrap();
            let shape = p.value.shape().to_vec();
            let m = self.m[id.0].get_or_insert_with(|| Tensor::zeros(shape.clone()));
            let v = self.v[id.0].get_or_insert_with(|| Tensor::zeros(shape));
            for (((w, &g), m), v) in p
                .value
                .data_mut()
                .iter_mut()
                .zip(g.data())
                .zip(m.data_mut())
                .zip(v.data_mut())
            {
                *m = b1 * *m + (one - b1) * g;
                *v = b2 * *v + (one - b2) * g * g;
                let mhat = *m / bc1;
                let vhat = *v / bc2;
                *w -= lr * mhat / (vhat.sqrt() + eps);
            }
        }
        Ok(())
    }
}
