//! Finite-difference checks of every layer's backward pass.
//!
//! The oracle is central differencing of a scalar loss L = Σ w·y over the
//! graph output, evaluated in f64, entirely independent of the analytic
//! backward code it checks.

#![cfg(test)]

use ndarray::Array4;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::graph::{Graph, INPUT};
use super::init::Initializer;
use super::layers::*;
use super::Trainable;

fn rand_input(shape: (usize, usize, usize, usize), seed: u64) -> Array4<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Array4::from_shape_fn(shape, |_| rng.gen_range(-1.0..1.0))
}

/// Verify dL/dinput and dL/dparams against central differences.
fn check_graph(graph: &mut Graph<f64>, input: Array4<f64>, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabcd);
    let loss_of = |g: &mut Graph<f64>, x: &Array4<f64>, w: &Array4<f64>| -> f64 {
        let tape = g.forward(x.clone(), true);
        (tape.output() * w).sum()
    };

    // fixed random projection defines the scalar loss
    let tape = graph.forward(input.clone(), true);
    let w = Array4::from_shape_fn(tape.output().raw_dim(), |_| rng.gen_range(-1.0..1.0));

    graph.zero_grads();
    let tape = graph.forward(input.clone(), true);
    let gx = graph.backward(&tape, w.clone());

    let eps = 1e-5;
    let tol = |analytic: f64| 1e-6 + 1e-4 * analytic.abs();

    // input gradient
    let mut x = input.clone();
    let n = x.len();
    let stride = (n / 40).max(1);
    let idxs: Vec<usize> = (0..n).step_by(stride).collect();
    for &flat in &idxs {
        let orig = x.as_slice_mut().unwrap()[flat];
        x.as_slice_mut().unwrap()[flat] = orig + eps;
        let lp = loss_of(graph, &x, &w);
        x.as_slice_mut().unwrap()[flat] = orig - eps;
        let lm = loss_of(graph, &x, &w);
        x.as_slice_mut().unwrap()[flat] = orig;
        let fd = (lp - lm) / (2.0 * eps);
        let an = gx.as_slice().unwrap()[flat];
        assert!(
            (fd - an).abs() < tol(an),
            "input grad mismatch at {flat}: fd={fd} analytic={an}"
        );
    }

    // parameter gradients: probe a few elements of every parameter tensor
    let mut analytic_grads: Vec<Vec<(usize, f64)>> = Vec::new();
    graph.visit_params(&mut |p| {
        let step = (p.value.len() / 7).max(1);
        let probes: Vec<(usize, f64)> = (0..p.value.len())
            .step_by(step)
            .map(|i| (i, p.grad.as_slice().unwrap()[i]))
            .collect();
        analytic_grads.push(probes);
    });
    for (pi, probes) in analytic_grads.iter().enumerate() {
        for &(flat, an) in probes {
            let mut lp = 0.0;
            let mut lm = 0.0;
            for (sign, target) in [(1.0, &mut lp), (-1.0, &mut lm)] {
                let mut k = 0;
                graph.visit_params(&mut |p| {
                    if k == pi {
                        p.value.as_slice_mut().unwrap()[flat] += sign * eps;
                    }
                    k += 1;
                });
                *target = loss_of(graph, &input, &w);
                let mut k = 0;
                graph.visit_params(&mut |p| {
                    if k == pi {
                        p.value.as_slice_mut().unwrap()[flat] -= sign * eps;
                    }
                    k += 1;
                });
            }
            let fd = (lp - lm) / (2.0 * eps);
            assert!(
                (fd - an).abs() < tol(an),
                "param {pi} grad mismatch at {flat}: fd={fd} analytic={an}"
            );
        }
    }
}

#[test]
fn conv_gradients() {
    let mut init = Initializer::new(1);
    let mut g = Graph::new();
    g.add(
        Conv2d::new(3, 5, (3, 3), 1, (1, 1), 1, true, &mut init),
        vec![INPUT],
    );
    check_graph(&mut g, rand_input((2, 3, 6, 6), 10), 1);
}

#[test]
fn strided_asymmetric_conv_gradients() {
    let mut init = Initializer::new(2);
    let mut g = Graph::new();
    g.add(
        Conv2d::new(4, 6, (1, 3), 2, (0, 1), 1, false, &mut init),
        vec![INPUT],
    );
    check_graph(&mut g, rand_input((2, 4, 7, 7), 11), 2);
}

#[test]
fn depthwise_conv_gradients() {
    let mut init = Initializer::new(3);
    let mut g = Graph::new();
    g.add(
        Conv2d::new(6, 6, (3, 3), 1, (1, 1), 6, false, &mut init),
        vec![INPUT],
    );
    check_graph(&mut g, rand_input((2, 6, 5, 5), 12), 3);
}

#[test]
fn batch_norm_gradients() {
    let mut g = Graph::new();
    g.add(BatchNorm2d::new(4), vec![INPUT]);
    check_graph(&mut g, rand_input((3, 4, 4, 4), 13), 4);
}

#[test]
fn activation_gradients() {
    for act in [Activation::relu, Activation::silu, Activation::sigmoid] {
        let mut g = Graph::new();
        g.add(act(), vec![INPUT]);
        check_graph(&mut g, rand_input((2, 3, 4, 4), 14), 5);
    }
}

#[test]
fn pooling_gradients() {
    let mut g = Graph::new();
    g.add(MaxPool2d::new(2, 2, 0), vec![INPUT]);
    check_graph(&mut g, rand_input((2, 3, 6, 6), 15), 6);

    let mut g = Graph::new();
    g.add(AvgPool2d::new(3, 1, 1), vec![INPUT]);
    check_graph(&mut g, rand_input((2, 3, 5, 5), 16), 7);

    let mut g = Graph::new();
    g.add(GlobalAvgPool, vec![INPUT]);
    check_graph(&mut g, rand_input((2, 5, 4, 4), 17), 8);
}

#[test]
fn residual_and_concat_gradients() {
    // x -> conv -> bn; add(x branch conv) topology with a concat on top
    let mut init = Initializer::new(4);
    let mut g = Graph::new();
    let a = g.add(
        Conv2d::new(3, 4, (3, 3), 1, (1, 1), 1, false, &mut init),
        vec![INPUT],
    );
    let b = g.add(
        Conv2d::new(3, 4, (1, 1), 1, (0, 0), 1, false, &mut init),
        vec![INPUT],
    );
    let sum = g.add(ElementAdd, vec![a, b]);
    let act = g.add(Activation::silu(), vec![sum]);
    g.add(ConcatChannels, vec![act, sum]);
    check_graph(&mut g, rand_input((2, 3, 5, 5), 18), 9);
}

#[test]
fn squeeze_excite_gradients() {
    // GAP -> 1x1 conv -> silu -> 1x1 conv -> sigmoid -> channel gate
    let mut init = Initializer::new(5);
    let mut g = Graph::new();
    let z = g.add(GlobalAvgPool, vec![INPUT]);
    let r = g.add(Conv2d::pointwise(6, 2, true, &mut init), vec![z]);
    let r = g.add(Activation::silu(), vec![r]);
    let e = g.add(Conv2d::pointwise(2, 6, true, &mut init), vec![r]);
    let gate = g.add(Activation::sigmoid(), vec![e]);
    g.add(MulBroadcast, vec![INPUT, gate]);
    check_graph(&mut g, rand_input((2, 6, 4, 4), 19), 20);
}

#[test]
fn linear_gradients() {
    let mut init = Initializer::new(6);
    let mut lin = Linear::<f64>::new(5, 3, &mut init);
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let x = ndarray::Array2::from_shape_fn((4, 5), |_| rng.gen_range(-1.0..1.0));
    let w = ndarray::Array2::from_shape_fn((4, 3), |_| rng.gen_range(-1.0..1.0));

    let gx = lin.backward(&x, &w);
    let eps = 1e-6;
    // input gradient
    for i in 0..4 {
        for j in 0..5 {
            let mut xp = x.clone();
            xp[[i, j]] += eps;
            let lp = (lin.forward(&xp) * &w).sum();
            xp[[i, j]] -= 2.0 * eps;
            let lm = (lin.forward(&xp) * &w).sum();
            let fd = (lp - lm) / (2.0 * eps);
            assert!((fd - gx[[i, j]]).abs() < 1e-6);
        }
    }
    // weight gradient
    let grad_w = lin.weight.grad.clone();
    for flat in 0..lin.weight.value.len() {
        lin.weight.value.as_slice_mut().unwrap()[flat] += eps;
        let lp = (lin.forward(&x) * &w).sum();
        lin.weight.value.as_slice_mut().unwrap()[flat] -= 2.0 * eps;
        let lm = (lin.forward(&x) * &w).sum();
        lin.weight.value.as_slice_mut().unwrap()[flat] += eps;
        let fd = (lp - lm) / (2.0 * eps);
        let an = grad_w.as_slice().unwrap()[flat];
        assert!((fd - an).abs() < 1e-6, "fd {fd} vs {an}");
    }
}

#[test]
fn batch_norm_eval_uses_running_stats() {
    let mut bn = BatchNorm2d::<f64>::new(2);
    let x = rand_input((4, 2, 3, 3), 30);
    use super::graph::GraphOp;
    // train forwards accumulate running stats
    for _ in 0..200 {
        let _ = bn.forward(&[&x], true);
    }
    let y_eval = bn.forward(&[&x], false);
    // after many identical batches running stats converge to batch stats,
    // so eval output approaches train output
    let y_train = bn.forward(&[&x], true);
    let max_diff = (&y_eval - &y_train)
        .iter()
        .fold(0.0f64, |a, &v| a.max(v.abs()));
    assert!(max_diff < 1e-3, "eval/train divergence {max_diff}");
}
