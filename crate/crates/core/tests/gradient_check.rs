//! Finite-difference verification of the analytic gradients.
//!
//! The oracle is deliberately independent of the backward pass: it perturbs
//! parameters through `flat_params`/`set_flat_params` and re-evaluates the
//! loss with forward passes only. A small hand-rolled affine stack (reading
//! the same flat layout) supplies pre-activation values so relu networks are
//! only checked at points safely away from the kink.

use modegan_core::nn::{
    binary_cross_entropy, binary_cross_entropy_grad, categorical_cross_entropy,
    categorical_cross_entropy_grad, one_hot, Activation, Mlp,
};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const FD_STEP: f64 = 1e-5;
const REL_TOL: f64 = 1e-4;

#[derive(Clone, Copy, PartialEq)]
enum LossKind {
    /// 0.5 * mean squared error against a fixed target.
    Square,
    Binary,
    Categorical,
}

struct Case {
    net: Mlp<f64>,
    sizes: Vec<usize>,
    activations: Vec<Activation>,
    batch: Array2<f64>,
    target: Array2<f64>,
    loss: LossKind,
}

fn loss_value(case: &Case, net: &Mlp<f64>) -> f64 {
    let out = net.forward(&case.batch).unwrap();
    match case.loss {
        LossKind::Square => {
            let n = out.nrows() as f64;
            out.iter()
                .zip(case.target.iter())
                .map(|(&o, &t)| 0.5 * (o - t) * (o - t))
                .sum::<f64>()
                / n
        }
        LossKind::Binary => binary_cross_entropy(&out, &case.target).unwrap(),
        LossKind::Categorical => categorical_cross_entropy(&out, &case.target).unwrap(),
    }
}

fn analytic_gradient(case: &Case) -> Vec<f64> {
    let tape = case.net.forward_traced(&case.batch).unwrap();
    let out = tape.output();
    let out_grad = match case.loss {
        LossKind::Square => {
            let n = out.nrows() as f64;
            let mut g = out.clone();
            g.zip_mut_with(&case.target, |o, &t| *o = (*o - t) / n);
            g
        }
        LossKind::Binary => binary_cross_entropy_grad(out, &case.target).unwrap(),
        LossKind::Categorical => categorical_cross_entropy_grad(out, &case.target).unwrap(),
    };
    let (grads, _) = case.net.backward(&tape, &out_grad).unwrap();
    grads.flat()
}

fn numeric_gradient(case: &Case) -> Vec<f64> {
    let base = case.net.flat_params();
    let mut out = Vec::with_capacity(base.len());
    let mut probe = case.net.clone();
    for k in 0..base.len() {
        let mut plus = base.clone();
        plus[k] += FD_STEP;
        probe.set_flat_params(&plus).unwrap();
        let up = loss_value(case, &probe);

        let mut minus = base.clone();
        minus[k] -= FD_STEP;
        probe.set_flat_params(&minus).unwrap();
        let down = loss_value(case, &probe);

        out.push((up - down) / (2.0 * FD_STEP));
    }
    probe.set_flat_params(&base).unwrap();
    out
}

/// Pre-activations of every layer, recomputed from the flat parameter layout
/// without touching the library's forward pass.
fn pre_activations(case: &Case) -> Vec<Vec<f64>> {
    let params = case.net.flat_params();
    let mut offset = 0;
    let mut activations: Vec<Vec<f64>> = case
        .batch
        .rows()
        .into_iter()
        .map(|r| r.to_vec())
        .collect();
    let mut all_pre = Vec::new();
    for (l, act) in case.activations.iter().enumerate() {
        let (n_in, n_out) = (case.sizes[l], case.sizes[l + 1]);
        let weights = &params[offset..offset + n_in * n_out];
        let bias = &params[offset + n_in * n_out..offset + n_in * n_out + n_out];
        offset += n_in * n_out + n_out;
        let mut next = Vec::with_capacity(activations.len());
        for row in &activations {
            let mut pre = vec![0.0; n_out];
            for (j, p) in pre.iter_mut().enumerate() {
                *p = bias[j];
                for i in 0..n_in {
                    *p += row[i] * weights[i * n_out + j];
                }
            }
            all_pre.extend(pre.iter().cloned());
            let post: Vec<f64> = match act {
                Activation::Identity => pre.clone(),
                Activation::Relu => pre.iter().map(|&v| v.max(0.0)).collect(),
                Activation::Tanh => pre.iter().map(|&v| v.tanh()).collect(),
                Activation::Sigmoid => pre.iter().map(|&v| 1.0 / (1.0 + (-v).exp())).collect(),
                Activation::Softmax => {
                    let max = pre.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    let exps: Vec<f64> = pre.iter().map(|&v| (v - max).exp()).collect();
                    let sum: f64 = exps.iter().sum();
                    exps.iter().map(|&e| e / sum).collect()
                }
            };
            next.push(post);
        }
        activations = next;
    }
    vec![all_pre]
}

fn check_case(case: &Case, label: &str) {
    let analytic = analytic_gradient(case);
    let numeric = numeric_gradient(case);
    for (k, (&a, &n)) in analytic.iter().zip(&numeric).enumerate() {
        let rel = (a - n).abs() / (a.abs() + n.abs()).max(1e-3);
        assert!(
            rel < REL_TOL,
            "{label}: component {k}: analytic {a:.10e} vs numeric {n:.10e} (rel {rel:.3e})"
        );
    }
}

fn random_case(rng: &mut ChaCha8Rng, allow_relu: bool) -> Case {
    let depth = rng.random_range(1..=3usize);
    let mut sizes = vec![rng.random_range(1..=6usize)];
    for _ in 0..depth {
        sizes.push(rng.random_range(1..=10usize));
    }
    let hidden_pool: &[Activation] = if allow_relu {
        &[Activation::Relu, Activation::Tanh, Activation::Sigmoid, Activation::Identity]
    } else {
        &[Activation::Tanh, Activation::Sigmoid, Activation::Identity]
    };
    let mut activations: Vec<Activation> = (0..depth - 1)
        .map(|_| hidden_pool[rng.random_range(0..hidden_pool.len())])
        .collect();

    let loss = match rng.random_range(0..3) {
        0 => LossKind::Square,
        1 => LossKind::Binary,
        _ => LossKind::Categorical,
    };
    let last = sizes.len() - 1;
    match loss {
        LossKind::Binary => {
            sizes[last] = 1;
            activations.push(Activation::Sigmoid);
        }
        LossKind::Categorical => {
            sizes[last] = sizes[last].max(2);
            activations.push(Activation::Softmax);
        }
        LossKind::Square => {
            activations.push(hidden_pool[rng.random_range(0..hidden_pool.len())]);
        }
    }

    let net = Mlp::new(&sizes, &activations, rng).unwrap();
    let batch_size = rng.random_range(1..=6usize);
    let batch = Array2::from_shape_fn((batch_size, sizes[0]), |_| rng.random::<f64>() * 2.0 - 1.0);
    let out_dim = *sizes.last().unwrap();
    let target = match loss {
        LossKind::Square => {
            Array2::from_shape_fn((batch_size, out_dim), |_| rng.random::<f64>() * 2.0 - 1.0)
        }
        LossKind::Binary => {
            Array2::from_shape_fn((batch_size, 1), |_| f64::from(rng.random_range(0..2)))
        }
        LossKind::Categorical => {
            let labels: Vec<usize> = (0..batch_size).map(|_| rng.random_range(0..out_dim)).collect();
            one_hot(&labels, out_dim).unwrap()
        }
    };
    Case {
        net,
        sizes,
        activations,
        batch,
        target,
        loss,
    }
}

/// Relu kinks make finite differences invalid in a shrinking neighbourhood of
/// zero pre-activation, so relu cases are resampled until every unit is at a
/// safe margin.
fn relu_safe(case: &Case) -> bool {
    if !case.activations.contains(&Activation::Relu) {
        return true;
    }
    pre_activations(case)[0].iter().all(|&p| p.abs() > 1e-2)
}

#[test]
fn gradients_match_finite_differences_on_100_networks() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut checked = 0;
    while checked < 100 {
        let case = random_case(&mut rng, true);
        if !relu_safe(&case) {
            continue;
        }
        check_case(&case, &format!("case {checked}"));
        checked += 1;
    }
}

#[test]
fn gradients_match_on_a_wide_network() {
    // One case at the width bound of the sweep (64 units).
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let sizes = vec![4, 64, 64, 3];
    let activations = vec![Activation::Tanh, Activation::Sigmoid, Activation::Softmax];
    let net = Mlp::new(&sizes, &activations, &mut rng).unwrap();
    let batch = Array2::from_shape_fn((4, 4), |_| rng.random::<f64>() * 2.0 - 1.0);
    let labels: Vec<usize> = (0..4).map(|_| rng.random_range(0..3)).collect();
    let case = Case {
        net,
        sizes,
        activations,
        batch,
        target: one_hot(&labels, 3).unwrap(),
        loss: LossKind::Categorical,
    };
    check_case(&case, "wide");
}

#[test]
fn gradients_match_on_relu_stacks() {
    // All-relu hidden stacks, resampled away from the kink margin.
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut checked = 0;
    while checked < 10 {
        let sizes = vec![3, rng.random_range(4..=12), rng.random_range(4..=12), 2];
        let activations = vec![Activation::Relu, Activation::Relu, Activation::Identity];
        let net = Mlp::new(&sizes, &activations, &mut rng).unwrap();
        let batch = Array2::from_shape_fn((3, 3), |_| rng.random::<f64>() * 2.0 - 1.0);
        let target = Array2::from_shape_fn((3, 2), |_| rng.random::<f64>());
        let case = Case {
            net,
            sizes,
            activations,
            batch,
            target,
            loss: LossKind::Square,
        };
        if !relu_safe(&case) {
            continue;
        }
        check_case(&case, &format!("relu case {checked}"));
        checked += 1;
    }
}
