//! Central-difference gradient checks for every taped op and model family.

use coordgate::autodiff::gradcheck::{grad_check, GradCheckReport};
use coordgate::nn::{GateMode, Model, ModelSpec};
use coordgate::{Padding, Resample, Result, Tape, Tensor, Var};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const EPS: f64 = 1e-5;
const TOL: f64 = 1e-4;

fn rand_t(shape: &[usize], seed: u64) -> Tensor<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Tensor::from_fn(shape.to_vec(), |_| rng.gen_range(-1.0..1.0))
}

/// Random tensor whose entries stay at least 1e-2 away from zero, so ReLU
/// kinks are not straddled by the finite difference.
fn rand_away(shape: &[usize], seed: u64) -> Tensor<f64> {
    rand_t(shape, seed).map(|v| if v.abs() < 1e-2 { v + 0.05 } else { v })
}

fn check<F>(params: &[Tensor<f64>], f: F) -> GradCheckReport
where
    F: Fn(&mut Tape<f64>, &[Var]) -> Result<Var>,
{
    let r = grad_check(params, f, EPS, TOL).unwrap();
    assert!(r.passed(), "worst relative error {:e}: {:?}", r.worst(), r.max_rel_error);
    r
}

/// Contracts `y` with fixed random weights so every output element matters.
fn weighted_sum(tape: &mut Tape<f64>, y: Var, seed: u64) -> Result<Var> {
    let w = rand_t(tape.value(y).shape(), seed);
    let w = tape.leaf(w, false);
    let p = tape.hadamard(y, w)?;
    tape.sum(p)
}

#[test]
fn conv1d_all_paddings() {
    for (pad, n) in [(Padding::SameZero, 9), (Padding::Valid, 11)] {
        let params = [rand_t(&[2, n, 3], 1), rand_t(&[5, 3, 4], 2), rand_t(&[4], 3)];
        check(&params, |t, v| {
            let y = t.conv1d(v[0], v[1], Some(v[2]), pad)?;
            weighted_sum(t, y, 4)
        });
    }
}

#[test]
fn conv2d_all_paddings() {
    for pad in [Padding::SameZero, Padding::Valid] {
        let params = [rand_t(&[2, 6, 7, 2], 5), rand_t(&[3, 3, 2, 3], 6), rand_t(&[3], 7)];
        check(&params, |t, v| {
            let y = t.conv2d(v[0], v[1], Some(v[2]), pad)?;
            weighted_sum(t, y, 8)
        });
    }
    // pointwise fast path
    let params = [rand_t(&[2, 4, 4, 3], 9), rand_t(&[1, 1, 3, 2], 10), rand_t(&[2], 11)];
    check(&params, |t, v| {
        let y = t.conv2d(v[0], v[1], Some(v[2]), Padding::SameZero)?;
        weighted_sum(t, y, 12)
    });
}

#[test]
fn composite_conv_relu_mse() {
    let target = rand_t(&[1, 6, 6, 1], 13);
    let params = [
        rand_t(&[1, 6, 6, 1], 14),
        rand_t(&[3, 3, 1, 4], 15),
        rand_t(&[4], 16),
        rand_t(&[3, 3, 4, 1], 17),
        rand_t(&[1], 18),
    ];
    check(&params, |t, v| {
        let h = t.conv2d(v[0], v[1], Some(v[2]), Padding::SameZero)?;
        let h = t.relu(h)?;
        let y = t.conv2d(h, v[3], Some(v[4]), Padding::SameZero)?;
        let tg = t.leaf(target.clone(), false);
        t.mse_loss(y, tg)
    });
}

#[test]
fn lcn_layer() {
    let params = [rand_t(&[2, 5, 6, 2], 19), rand_t(&[5, 6, 3, 3, 2, 2], 20), rand_t(&[2], 21)];
    check(&params, |t, v| {
        let y = t.lcn(v[0], v[1], Some(v[2]))?;
        weighted_sum(t, y, 22)
    });
}

#[test]
fn hadamard_plain_and_broadcast() {
    let params = [rand_t(&[3, 4, 4, 2], 23), rand_t(&[3, 4, 4, 2], 24)];
    check(&params, |t, v| {
        let y = t.hadamard(v[0], v[1])?;
        weighted_sum(t, y, 25)
    });
    let params = [rand_t(&[3, 4, 4, 2], 26), rand_t(&[1, 4, 4, 2], 27)];
    check(&params, |t, v| {
        let y = t.hadamard(v[0], v[1])?;
        weighted_sum(t, y, 28)
    });
}

#[test]
fn add_and_matmul_channels() {
    let params = [rand_t(&[2, 3, 5, 3], 29), rand_t(&[3, 4], 30), rand_t(&[4], 31), rand_t(&[1, 3, 5, 4], 32)];
    check(&params, |t, v| {
        let y = t.matmul_channels(v[0], v[1], Some(v[2]))?;
        let y = t.add(y, v[3])?;
        weighted_sum(t, y, 33)
    });
}

#[test]
fn relu_matches_finite_differences_tightly() {
    let params = [rand_away(&[4, 5, 3], 34)];
    let r = check(&params, |t, v| {
        let y = t.relu(v[0])?;
        weighted_sum(t, y, 35)
    });
    assert!(r.worst() < 1e-6, "{}", r.worst());
}

#[test]
fn resample_both_directions() {
    let params = [rand_t(&[2, 4, 6, 2], 36)];
    check(&params, |t, v| {
        let y = t.resample2x(v[0], Resample::Down)?;
        weighted_sum(t, y, 37)
    });
    check(&params, |t, v| {
        let y = t.resample2x(v[0], Resample::Up)?;
        weighted_sum(t, y, 38)
    });
}

#[test]
fn concat_splits_gradient() {
    let params = [rand_t(&[2, 4, 4, 3], 39), rand_t(&[2, 4, 4, 2], 40)];
    check(&params, |t, v| {
        let y = t.concat_channels(v[0], v[1])?;
        weighted_sum(t, y, 41)
    });
}

#[test]
fn mse_gradient_tight() {
    let target = rand_t(&[3, 7], 42);
    let params = [rand_t(&[3, 7], 43)];
    let r = check(&params, |t, v| {
        let tg = t.leaf(target.clone(), false);
        t.mse_loss(v[0], tg)
    });
    assert!(r.worst() < 1e-6);
}

#[test]
fn corrupted_gradient_fails() {
    use coordgate::autodiff::gradcheck::{analytic_gradients, compare, numeric_gradients};
    let params = [rand_t(&[4], 44)];
    let f = |t: &mut Tape<f64>, v: &[Var]| {
        let y = t.hadamard(v[0], v[0])?;
        t.sum(y)
    };
    let mut a = analytic_gradients(&params, &f).unwrap();
    let n = numeric_gradients(&params, &f, EPS).unwrap();
    assert!(compare(&a, &n, TOL, 1e-8).passed());
    a[0].data_mut()[2] *= 1.01;
    assert!(!compare(&a, &n, TOL, 1e-8).passed());
}

/// Checks the gradient of an MSE loss with respect to every model parameter.
fn check_model(spec: &ModelSpec, batch: usize, seed: u64) {
    let model = Model::<f64>::build(spec, seed).unwrap();
    let mut shape = vec![batch];
    shape.extend(&spec.extent);
    shape.push(spec.in_channels);
    let x = rand_t(&shape, seed + 100).map(|v| 0.5 * (v + 1.0));
    let y = rand_t(&shape, seed + 200);
    let params = model.params().values();
    let r = grad_check(
        &params,
        |t, v| {
            let bound = model.params().bind_vars(v)?;
            let xv = t.leaf(x.clone(), false);
            let out = model.forward(t, &bound, xv)?;
            let yv = t.leaf(y.clone(), false);
            t.mse_loss(out, yv)
        },
        EPS,
        TOL,
    )
    .unwrap();
    assert!(
        r.passed(),
        "{}: worst relative error {:e}",
        model.name(),
        r.worst()
    );
}

#[test]
fn model_families() {
    check_model(&ModelSpec::cnn(3, 5, 3, &[12]), 3, 1);
    check_model(&ModelSpec::ccnn(3, 5, 3, &[12]), 3, 2);
    check_model(&ModelSpec::cg(1, 7, 3, 2, &[14]), 3, 3);
    check_model(&ModelSpec::cg(2, 3, 3, 3, &[8, 8]), 2, 4);
    check_model(&ModelSpec::lcn(3, &[6, 6]), 2, 5);
    check_model(&ModelSpec::unet(2, &[8, 8]), 1, 6);
    // seed 7 puts a bottleneck pre-activation within EPS of the ReLU kink
    check_model(&ModelSpec::cg_unet(2, &[8, 8]), 1, 17);
    check_model(&ModelSpec::coordconv_unet(2, &[8, 8]), 1, 8);
    let direct = ModelSpec {
        gate_mode: GateMode::Direct,
        ..ModelSpec::cg(1, 3, 3, 2, &[10])
    };
    check_model(&direct, 2, 9);
}

#[test]
fn cg_on_thirty_samples() {
    check_model(&ModelSpec::cg(1, 7, 3, 2, &[30]), 30, 10);
}

#[test]
fn disconnected_parameter_gets_zero() {
    let mut t = Tape::<f64>::new();
    let a = t.leaf(rand_t(&[3], 1), true);
    let b = t.leaf(rand_t(&[3], 2), true);
    let y = t.hadamard(a, a).unwrap();
    let s = t.sum(y).unwrap();
    t.backward(s).unwrap();
    assert!(t.grad(b).unwrap().data().iter().all(|&g| g == 0.0));
    let ga = t.grad(a).unwrap().clone();
    let av = t.value(a).clone();
    for (g, v) in ga.data().iter().zip(av.data()) {
        assert_eq!(*g, 2.0 * v);
    }
    assert!(t.backward(s).is_err());
}

#[test]
fn sampled_check_agrees_with_full_check() {
    use coordgate::autodiff::gradcheck::grad_check_sampled;
    let params = [rand_t(&[2, 6, 6, 2], 50), rand_t(&[3, 3, 2, 3], 51)];
    let f = |t: &mut Tape<f64>, v: &[Var]| {
        let y = t.conv2d(v[0], v[1], None, Padding::SameZero)?;
        let y = t.hadamard(y, y)?;
        t.sum(y)
    };
    let full = grad_check(&params, f, EPS, TOL).unwrap();
    let sampled = grad_check_sampled(&params, f, EPS, TOL, 1000, 0).unwrap();
    assert!(full.passed() && sampled.passed());
    assert!(sampled.worst() <= full.worst());
    let few = grad_check_sampled(&params, f, EPS, TOL, 5, 0).unwrap();
    assert!(few.passed());
    assert!(few.worst() <= sampled.worst());
}

#[test]
fn sampled_check_catches_a_wrong_gradient() {
    use coordgate::autodiff::gradcheck::grad_check_sampled;
    let params = [rand_t(&[30], 52)];
    let f = |t: &mut Tape<f64>, v: &[Var]| {
        let y = t.relu(v[0])?;
        let y = t.hadamard(y, y)?;
        t.sum(y)
    };
    assert!(grad_check_sampled(&params, f, EPS, TOL, 10, 1).unwrap().passed());
    let wrong = |t: &mut Tape<f64>, v: &[Var]| {
        // forward differs from what the tape differentiates: the detached
        // copy contributes to the value but not to the gradient
        let y = t.hadamard(v[0], v[0])?;
        let c = t.leaf(t.value(v[0]).clone(), false);
        let z = t.hadamard(c, v[0])?;
        let s = t.add(y, z)?;
        t.sum(s)
    };
    assert!(!grad_check_sampled(&params, wrong, EPS, TOL, 10, 1).unwrap().passed());
}
