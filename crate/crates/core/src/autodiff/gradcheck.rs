//! Central finite-difference checks of tape gradients.

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{Tape, Var};
use crate::error::Result;
use crate::scalar::Real;
use crate::tensor::Tensor;

/// Per-parameter comparison of autodiff against central differences.
#[derive(Clone, Debug)]
pub struct GradCheckReport {
    /// Max relative error for each parameter tensor, in input order.
    pub max_rel_error: Vec<f64>,
    pub tol: f64,
}

impl GradCheckReport {
    pub fn worst(&self) -> f64 {
        self.max_rel_error.iter().copied().fold(0.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.max_rel_error.iter().all(|&e| e < self.tol)
    }
}

/// Relative error with the denominator floored at `floor`, so gradients that
/// are zero on both sides do not divide by zero.
pub fn rel_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

pub const DEFAULT_FLOOR: f64 = 1e-6;

/// Gradients of `forward`'s scalar output with respect to every parameter.
pub fn analytic_gradients<T, F>(params: &[Tensor<T>], forward: &F) -> Result<Vec<Tensor<T>>>
where
    T: Real,
    F: Fn(&mut Tape<T>, &[Var]) -> Result<Var>,
{
    let mut tape = Tape::new();
    let vars: Vec<Var> = params.iter().map(|p| tape.leaf(p.clone(), true)).collect();
    let loss = forward(&mut tape, &vars)?;
    tape.backward(loss)?;
    Ok(vars
        .iter()
        .map(|&v| tape.take_grad(v).expect("leaf gradient after backward"))
        .collect())
}

fn evaluate<T, F>(params: &[Tensor<T>], forward: &F) -> Result<T>
where
    T: Real,
    F: Fn(&mut Tape<T>, &[Var]) -> Result<Var>,
{
    let mut tape = Tape::new();
    let vars: Vec<Var> = params.iter().map(|p| tape.leaf(p.clone(), false)).collect();
    let out = forward(&mut tape, &vars)?;
    tape.value(out).item()
}

fn central_difference<T, F>(work: &mut [Tensor<T>], forward: &F, p: usize, i: usize, eps: T) -> Result<T>
where
    T: Real,
    F: Fn(&mut Tape<T>, &[Var]) -> Result<Var>,
{
    let orig = work[p].data()[i];
    work[p].data_mut()[i] = orig + eps;
    let up = evaluate(work, forward)?;
    work[p].data_mut()[i] = orig - eps;
    let down = evaluate(work, forward)?;
    work[p].data_mut()[i] = orig;
    Ok((up - down) / ((T::one() + T::one()) * eps))
}

/// Central differences `(f(p + eps) - f(p - eps)) / 2 eps`, element by element.
pub fn numeric_gradients<T, F>(params: &[Tensor<T>], forward: &F, eps: T) -> Result<Vec<Tensor<T>>>
where
    T: Real,
    F: Fn(&mut Tape<T>, &[Var]) -> Result<Var>,
{
    let mut work: Vec<Tensor<T>> = params.to_vec();
    let mut out = Vec::with_capacity(params.len());
    for p in 0..params.len() {
        let mut g = Tensor::zeros(params[p].shape());
        for i in 0..params[p].len() {
            g.data_mut()[i] = central_difference(&mut work, forward, p, i, eps)?;
        }
        out.push(g);
    }
    Ok(out)
}

pub fn compare<T: Real>(
    analytic: &[Tensor<T>],
    numeric: &[Tensor<T>],
    tol: f64,
    floor: f64,
) -> GradCheckReport {
    let max_rel_error = analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| {
            a.data()
                .iter()
                .zip(n.data())
                .map(|(&x, &y)| rel_error(x.to_f64(), y.to_f64(), floor))
                .fold(0.0, f64::max)
        })
        .collect();
    GradCheckReport { max_rel_error, tol }
}

/// Runs `forward` (which must return a scalar) on a tape, backpropagates, and
/// compares each parameter gradient with central differences of step `eps`.
pub fn grad_check<T, F>(params: &[Tensor<T>], forward: F, eps: T, tol: f64) -> Result<GradCheckReport>
where
    T: Real,
    F: Fn(&mut Tape<T>, &[Var]) -> Result<Var>,
{
    let analytic = analytic_gradients(params, &forward)?;
    let numeric = numeric_gradients(params, &forward, eps)?;
    Ok(compare(&analytic, &numeric, tol, DEFAULT_FLOOR))
}

/// Like [`grad_check`], but differences at most `per_tensor` entries of each
/// parameter, drawn without replacement from a generator seeded by `seed`.
/// Tensors no larger than `per_tensor` are checked completely.
///
/// Each entry is differenced with steps `eps` and `eps / 10` and scored by
/// the closer of the two. A wrong gradient disagrees at both; a ReLU kink
/// inside the larger step, or round-off at the smaller one, only at one.
pub fn grad_check_sampled<T, F>(
    params: &[Tensor<T>],
    forward: F,
    eps: T,
    tol: f64,
    per_tensor: usize,
    seed: u64,
) -> Result<GradCheckReport>
where
    T: Real,
    F: Fn(&mut Tape<T>, &[Var]) -> Result<Var>,
{
    let analytic = analytic_gradients(params, &forward)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut work: Vec<Tensor<T>> = params.to_vec();
    let mut max_rel_error = Vec::with_capacity(params.len());
    for p in 0..params.len() {
        let n = params[p].len();
        let picks = index::sample(&mut rng, n, per_tensor.min(n));
        let mut worst = 0.0f64;
        for i in picks.iter() {
            let a = analytic[p].data()[i].to_f64();
            let coarse = central_difference(&mut work, &forward, p, i, eps)?.to_f64();
            let fine = central_difference(&mut work, &forward, p, i, eps / T::from_f64(10.0))?.to_f64();
            let err = rel_error(a, coarse, DEFAULT_FLOOR).min(rel_error(a, fine, DEFAULT_FLOOR));
            worst = worst.max(err);
        }
        max_rel_error.push(worst);
    }
    Ok(GradCheckReport { max_rel_error, tol })
}
