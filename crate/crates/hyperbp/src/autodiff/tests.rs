use std::sync::Arc;

use super::*;
use crate::channel::stream_rng;
use rand::Rng;

fn assert_close(a: f64, b: f64, rel: f64, ctx: &str) {
    let scale = 1.0f64.max(a.abs()).max(b.abs());
    assert!((a - b).abs() <= rel * scale, "{ctx}: {a} vs {b}");
}

/// Run `build` twice: once to get the loss value as a function of the flat
/// parameter vector (for finite differences), once for autodiff gradients.
fn gradcheck<F>(point: &[f64], rel: f64, build: F, ctx: &str)
where
    F: Fn(&mut Tape, NodeId) -> NodeId,
{
    let f = |p: &[f64]| {
        let mut tape = Tape::new();
        let x = tape.param(Tensor::vector(p.to_vec()));
        let loss = build(&mut tape, x);
        tape.value(loss).item()
    };
    let fd = finite_difference_gradient(f, point, None);
    let mut tape = Tape::new();
    let x = tape.param(Tensor::vector(point.to_vec()));
    let loss = build(&mut tape, x);
    tape.backward(loss).unwrap();
    let auto = tape.grad(x).unwrap();
    for (i, (a, b)) in auto.data().iter().zip(&fd).enumerate() {
        assert_close(*a, *b, rel, &format!("{ctx}[{i}]"));
    }
}

fn random_point(rng: &mut impl Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(lo..hi)).collect()
}

#[test]
fn per_op_gradients_match_finite_differences() {
    let mut rng = stream_rng(100, 0, 0);
    for trial in 0..20 {
        let p = random_point(&mut rng, 6, -0.9, 0.9);

        gradcheck(&p, 1e-6, |t, x| {
            let y = t.tanh(x);
            t.sum(y)
        }, &format!("tanh/{trial}"));

        gradcheck(&p, 1e-6, |t, x| {
            let y = t.sigmoid(x);
            t.sum(y)
        }, &format!("sigmoid/{trial}"));

        // abs: sampled away from the kink.
        let p_abs: Vec<f64> = p.iter().map(|v| v + 1.0f64.copysign(*v)).collect();
        gradcheck(&p_abs, 1e-6, |t, x| {
            let y = t.abs(x);
            let z = t.tanh(y);
            t.sum(z)
        }, &format!("abs/{trial}"));

        // log: positive inputs.
        let p_log: Vec<f64> = p.iter().map(|v| v.abs() + 0.5).collect();
        gradcheck(&p_log, 1e-6, |t, x| {
            let y = t.log(x);
            t.sum(y)
        }, &format!("log/{trial}"));

        gradcheck(&p, 1e-6, |t, x| {
            let y = t.scale(x, -1.7);
            let z = t.add_scalar(y, 0.3);
            t.sum(z)
        }, &format!("scale+add_scalar/{trial}"));

        gradcheck(&p, 1e-6, |t, x| {
            let y = t.mul(x, x).unwrap();
            let z = t.add(y, x).unwrap();
            let w = t.sub(z, y).unwrap();
            t.sum(w)
        }, &format!("mul/add/sub/{trial}"));

        gradcheck(&p, 1e-6, |t, x| {
            let y = t.taylor_odd_poly(x, 25);
            t.sum(y)
        }, &format!("taylor/{trial}"));

        gradcheck(&p, 1e-6, |t, x| {
            let y = t.atanh2(x);
            t.sum(y)
        }, &format!("atanh2/{trial}"));

        // clamp: keep samples off the boundary.
        gradcheck(&p, 1e-6, |t, x| {
            let y = t.clamp(x, -0.95, 0.95);
            t.sum(y)
        }, &format!("clamp/{trial}"));

        // matmul as a [2,3]x[3,?]: reuse the 6-vector as a 2x3 matrix times a
        // fixed constant matrix.
        gradcheck(&p, 1e-6, |t, x| {
            let xm = t.reshape(x, vec![2, 3]).unwrap();
            let w = t.leaf(Tensor::matrix(3, 2, vec![0.5, -1.0, 0.25, 2.0, -0.75, 0.1]));
            let y = t.matmul(xm, w).unwrap();
            let z = t.tanh(y);
            t.sum(z)
        }, &format!("matmul-left/{trial}"));

        gradcheck(&p, 1e-6, |t, x| {
            let xm = t.reshape(x, vec![3, 2]).unwrap();
            let a = t.leaf(Tensor::matrix(2, 3, vec![0.5, -1.0, 0.25, 2.0, -0.75, 0.1]));
            let y = t.matmul(a, xm).unwrap();
            let z = t.sigmoid(y);
            t.sum(z)
        }, &format!("matmul-right/{trial}"));

        gradcheck(&p, 1e-6, |t, x| {
            let idx = Arc::new(vec![0usize, 2, 2, 5, 1]);
            let y = t.gather(x, idx, vec![5]).unwrap();
            let z = t.tanh(y);
            t.sum(z)
        }, &format!("gather/{trial}"));

        gradcheck(&p, 1e-6, |t, x| {
            let idx = Arc::new(vec![0usize, 1, 0, 2, 1, 0]);
            let y = t.scatter_add(x, idx, 3).unwrap();
            let z = t.tanh(y);
            t.sum(z)
        }, &format!("scatter_add/{trial}"));

        gradcheck(&p, 1e-6, |t, x| {
            let seg = Arc::new(Segments { offsets: vec![0, 4, 6], members: vec![0, 1, 2, 3, 4, 5] });
            let y = t.loo_product(x, seg).unwrap();
            let z = t.tanh(y);
            t.sum(z)
        }, &format!("loo_product/{trial}"));

        gradcheck(&p, 1e-6, |t, x| {
            let y = t.tanh(x);
            let c = t.concat(&[x, y]).unwrap();
            let z = t.sigmoid(c);
            t.sum(z)
        }, &format!("concat/{trial}"));
    }
}

#[test]
fn tanh_derivative_at_zero_is_one() {
    let mut tape = Tape::new();
    let x = tape.param(Tensor::scalar(0.0));
    let y = tape.tanh(x);
    let loss = tape.sum(y);
    tape.backward(loss).unwrap();
    assert_eq!(tape.grad(x).unwrap().data(), &[1.0]);
}

#[test]
fn abs_subgradient_at_zero_is_zero() {
    let mut tape = Tape::new();
    let x = tape.param(Tensor::vector(vec![0.0, -2.0, 3.0]));
    let y = tape.abs(x);
    let loss = tape.sum(y);
    tape.backward(loss).unwrap();
    assert_eq!(tape.grad(x).unwrap().data(), &[0.0, -1.0, 1.0]);
}

#[test]
fn loo_product_hand_gradient() {
    // Inputs [2,3,4]: d out_0 / d in_1 = 4.
    let mut tape = Tape::new();
    let x = tape.param(Tensor::vector(vec![2.0, 3.0, 4.0]));
    let seg = Arc::new(Segments { offsets: vec![0, 3], members: vec![0, 1, 2] });
    let y = tape.loo_product(x, seg).unwrap();
    assert_eq!(tape.value(y).data(), &[12.0, 8.0, 6.0]);
    // Take loss = out_0 only, via a selector mask.
    let mask = tape.leaf(Tensor::vector(vec![1.0, 0.0, 0.0]));
    let sel = tape.mul(y, mask).unwrap();
    let loss = tape.sum(sel);
    tape.backward(loss).unwrap();
    assert_eq!(tape.grad(x).unwrap().data(), &[0.0, 4.0, 3.0]);
}

#[test]
fn sum_backward_is_ones() {
    let mut tape = Tape::new();
    let x = tape.param(Tensor::vector(vec![1.0, 2.0, 3.0, 4.0]));
    let loss = tape.sum(x);
    tape.backward(loss).unwrap();
    assert_eq!(tape.grad(x).unwrap().data(), &[1.0; 4]);
}

#[test]
fn composite_sigmoid_tanh_gradient() {
    let f = |p: &[f64]| {
        let mut t = Tape::new();
        let x = t.param(Tensor::vector(p.to_vec()));
        let y = t.tanh(x);
        let z = t.sigmoid(y);
        t.value(z).item()
    };
    let fd = finite_difference_gradient(f, &[0.3], None);

    let mut tape = Tape::new();
    let x = tape.param(Tensor::scalar(0.3));
    let y = tape.tanh(x);
    let z = tape.sigmoid(y);
    tape.backward(z).unwrap();
    assert_close(tape.grad(x).unwrap().data()[0], fd[0], 1e-6, "sigmoid(tanh(x))");
}

#[test]
fn non_scalar_loss_rejected() {
    let mut tape = Tape::new();
    let x = tape.param(Tensor::vector(vec![1.0, 2.0]));
    let y = tape.tanh(x);
    assert!(matches!(tape.backward(y), Err(GradError::NonScalarLoss { numel: 2 })));
}

#[test]
fn repeated_backward_rejected() {
    let mut tape = Tape::new();
    let x = tape.param(Tensor::scalar(1.0));
    let loss = tape.sum(x);
    tape.backward(loss).unwrap();
    assert!(matches!(tape.backward(loss), Err(GradError::BackwardDone)));
}

#[test]
fn shape_mismatch_errors() {
    let mut tape = Tape::new();
    let a = tape.param(Tensor::vector(vec![1.0, 2.0]));
    let b = tape.param(Tensor::vector(vec![1.0, 2.0, 3.0]));
    assert!(matches!(tape.add(a, b), Err(GradError::Shape { op: "add", .. })));
    let m = tape.leaf(Tensor::matrix(2, 2, vec![1.0; 4]));
    let n = tape.leaf(Tensor::matrix(3, 2, vec![1.0; 6]));
    assert!(matches!(tape.matmul(m, n), Err(GradError::Shape { op: "matmul", .. })));
}

#[test]
fn replay_is_deterministic() {
    let build = || {
        let mut tape = Tape::new();
        let x = tape.param(Tensor::vector(vec![0.3, -0.7, 0.9]));
        let w = tape.param(Tensor::matrix(3, 2, vec![0.1, 0.2, -0.3, 0.4, 0.5, -0.6]));
        let xm = tape.reshape(x, vec![1, 3]).unwrap();
        let h = tape.matmul(xm, w).unwrap();
        let h = tape.tanh(h);
        let loss = tape.sum(h);
        tape.backward(loss).unwrap();
        (
            tape.value(loss).item(),
            tape.grad(x).unwrap().data().to_vec(),
            tape.grad(w).unwrap().data().to_vec(),
        )
    };
    let (l1, gx1, gw1) = build();
    let (l2, gx2, gw2) = build();
    assert_eq!(l1, l2);
    assert_eq!(gx1, gx2);
    assert_eq!(gw1, gw2);
}

#[test]
fn adam_zero_gradient_keeps_params() {
    let mut p0 = Tensor::vector(vec![1.0, -2.0]);
    let before = p0.clone();
    let grads = vec![Tensor::vector(vec![0.0, 0.0])];
    let mut state = AdamState::new(&[vec![2]], 1e-4);
    state.step(&mut [&mut p0], &grads).unwrap();
    assert_eq!(p0, before);
}

#[test]
fn adam_first_step_magnitude() {
    // Constant gradient 1 on a scalar: the first update is ~ lr.
    let mut p0 = Tensor::scalar(0.5);
    let grads = vec![Tensor::scalar(1.0)];
    let mut state = AdamState::new(&[vec![1]], 1e-4);
    state.step(&mut [&mut p0], &grads).unwrap();
    let delta = 0.5 - p0.item();
    assert!((delta - 1e-4).abs() < 1e-9, "delta = {delta}");
}

#[test]
fn adam_is_deterministic() {
    let run = || {
        let mut p0 = Tensor::vector(vec![0.1, 0.2, 0.3]);
        let mut state = AdamState::new(&[vec![3]], 1e-3);
        for step in 0..50 {
            let g: Vec<f64> =
                p0.data().iter().map(|p| (p * 3.0).sin() + step as f64 * 0.01).collect();
            let grads = vec![Tensor::vector(g)];
            state.step(&mut [&mut p0], &grads).unwrap();
        }
        p0.data().to_vec()
    };
    assert_eq!(run(), run());
}

#[test]
fn grad_norm_clip() {
    let mut grads = vec![Tensor::vector(vec![3.0, 4.0])];
    let norm = clip_grad_norm(&mut grads, 1.0);
    assert!((norm - 5.0).abs() < 1e-12);
    assert!((grads[0].norm() - 1.0).abs() < 1e-12);
    // Below the threshold: untouched.
    let mut grads = vec![Tensor::vector(vec![0.3, 0.4])];
    clip_grad_norm(&mut grads, 1.0);
    assert_eq!(grads[0].data(), &[0.3, 0.4]);
}
