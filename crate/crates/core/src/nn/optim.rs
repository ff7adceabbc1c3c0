//! Parameter update rules: plain SGD and bias-corrected Adam.

use ndarray::{Array1, Array2};

use super::{Gradients, Mlp};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OptimizerMethod {
    Sgd,
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

/// Optimizer state. Moment buffers mirror the parameter shapes and are
/// allocated on the first step.
#[derive(Debug, Clone)]
pub struct Optimizer<F> {
    method: OptimizerMethod,
    lr: F,
    step_count: u64,
    first_moment: Vec<(Array2<F>, Array1<F>)>,
    second_moment: Vec<(Array2<F>, Array1<F>)>,
}

impl<F: Scalar> Optimizer<F> {
    pub fn sgd(lr: f64) -> Self {
        Self::new(OptimizerMethod::Sgd, lr)
    }

    /// Adam with the defaults used throughout this crate:
    /// beta1 = 0.5, beta2 = 0.999, eps = 1e-8.
    pub fn adam(lr: f64) -> Self {
        Self::new(
            OptimizerMethod::Adam {
                beta1: 0.5,
                beta2: 0.999,
                eps: 1e-8,
            },
            lr,
        )
    }

    pub fn new(method: OptimizerMethod, lr: f64) -> Self {
        Self {
            method,
            lr: F::of(lr),
            step_count: 0,
            first_moment: Vec::new(),
            second_moment: Vec::new(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    fn ensure_moments(&mut self, net: &Mlp<F>) {
        if self.first_moment.is_empty() {
            for layer in net.layers() {
                self.first_moment.push((
                    Array2::zeros(layer.weights.dim()),
                    Array1::zeros(layer.bias.len()),
                ));
                self.second_moment.push((
                    Array2::zeros(layer.weights.dim()),
                    Array1::zeros(layer.bias.len()),
                ));
            }
        }
    }

    /// Applies one update to `net` in place.
    pub fn step(&mut self, net: &mut Mlp<F>, grads: &Gradients<F>) -> Result<()> {
        if grads.d_weights.len() != net.num_layers() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} layers", net.num_layers()),
                got: format!("{} layers", grads.d_weights.len()),
            });
        }
        for (layer, dw) in net.layers().iter().zip(&grads.d_weights) {
            if layer.weights.dim() != dw.dim() {
                return Err(Error::ShapeMismatch {
                    expected: format!("{:?}", layer.weights.dim()),
                    got: format!("{:?}", dw.dim()),
                });
            }
        }
        self.ensure_moments(net);
        self.step_count += 1;
        match self.method {
            OptimizerMethod::Sgd => {
                let lr = self.lr;
                for (layer, (dw, db)) in net
                    .layers_mut()
                    .iter_mut()
                    .zip(grads.d_weights.iter().zip(&grads.d_bias))
                {
                    layer.weights.zip_mut_with(dw, |p, &g| *p = *p - lr * g);
                    layer.bias.zip_mut_with(db, |p, &g| *p = *p - lr * g);
                }
            }
            OptimizerMethod::Adam { beta1, beta2, eps } => {
                let lr = self.lr;
                let b1 = F::of(beta1);
                let b2 = F::of(beta2);
                let eps = F::of(eps);
                let t = self.step_count as i32;
                let bc1 = F::one() - b1.powi(t);
                let bc2 = F::one() - b2.powi(t);
                for (idx, layer) in net.layers_mut().iter_mut().enumerate() {
                    let (m_w, m_b) = &mut self.first_moment[idx];
                    let (v_w, v_b) = &mut self.second_moment[idx];
                    adam_update(
                        &mut layer.weights,
                        &grads.d_weights[idx],
                        m_w,
                        v_w,
                        lr,
                        b1,
                        b2,
                        eps,
                        bc1,
                        bc2,
                    );
                    adam_update_1d(
                        &mut layer.bias,
                        &grads.d_bias[idx],
                        m_b,
                        v_b,
                        lr,
                        b1,
                        b2,
                        eps,
                        bc1,
                        bc2,
                    );
                }
            }
        }
        Ok(())
    }
}

#[allow(clippy::too_many_arguments)]
fn adam_update<F: Scalar>(
    params: &mut Array2<F>,
    grad: &Array2<F>,
    m: &mut Array2<F>,
    v: &mut Array2<F>,
    lr: F,
    b1: F,
    b2: F,
    eps: F,
    bc1: F,
    bc2: F,
) {
    for (((p, &g), m), v) in params
        .iter_mut()
        .zip(grad.iter())
        .zip(m.iter_mut())
        .zip(v.iter_mut())
    {
        *m = b1 * *m + (F::one() - b1) * g;
        *v = b2 * *v + (F::one() - b2) * g * g;
        let m_hat = *m / bc1;
        let v_hat = *v / bc2;
        *p = *p - lr * m_hat / (v_hat.sqrt() + eps);
    }
}

#[allow(clippy::too_many_arguments)]
fn adam_update_1d<F: Scalar>(
    params: &mut Array1<F>,
    grad: &Array1<F>,
    m: &mut Array1<F>,
    v: &mut Array1<F>,
    lr: F,
    b1: F,
    b2: F,
    eps: F,
    bc1: F,
    bc2: F,
) {
    for (((p, &g), m), v) in params
        .iter_mut()
        .zip(grad.iter())
        .zip(m.iter_mut())
        .zip(v.iter_mut())
    {
        *m = b1 * *m + (F::one() - b1) * g;
        *v = b2 * *v + (F::one() - b2) * g * g;
        let m_hat = *m / bc1;
        let v_hat = *v / bc2;
        *p = *p - lr * m_hat / (v_hat.sqrt() + eps);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Activation;
    use ndarray::{Array1, Array2};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn one_param_net(value: f64) -> Mlp<f64> {
        Mlp::from_layers(vec![super::super::Layer {
            weights: Array2::from_elem((1, 1), value),
            bias: Array1::zeros(1),
            activation: Activation::Identity,
        }])
    }

    fn unit_grads() -> Gradients<f64> {
        Gradients {
            d_weights: vec![Array2::from_elem((1, 1), 1.0)],
            d_bias: vec![Array1::zeros(1)],
        }
    }

    #[test]
    fn sgd_definition() {
        let mut net = one_param_net(1.0);
        let mut opt = Optimizer::sgd(0.1);
        opt.step(&mut net, &unit_grads()).unwrap();
        assert!((net.flat_params()[0] - 0.9).abs() < 1e-15);
    }

    #[test]
    fn adam_first_step_magnitude_is_lr() {
        // Bias correction makes m_hat / sqrt(v_hat) = 1 at t = 1.
        let mut net = one_param_net(1.0);
        let mut opt = Optimizer::adam(0.01);
        opt.step(&mut net, &unit_grads()).unwrap();
        let delta = 1.0 - net.flat_params()[0];
        assert!((delta - 0.01).abs() < 1e-6, "first Adam step {delta}");
    }

    #[test]
    fn zero_gradient_leaves_sgd_params_unchanged() {
        let mut net = one_param_net(0.75);
        let before = net.flat_params();
        let mut opt = Optimizer::sgd(0.5);
        let grads = Gradients {
            d_weights: vec![Array2::zeros((1, 1))],
            d_bias: vec![Array1::zeros(1)],
        };
        opt.step(&mut net, &grads).unwrap();
        assert_eq!(net.flat_params(), before);
        // Adam with zero gradients only decays moments; parameters stay put.
        let mut net = one_param_net(0.75);
        let mut opt = Optimizer::adam(0.5);
        opt.step(&mut net, &grads).unwrap();
        assert_eq!(net.flat_params(), before);
    }

    #[test]
    fn step_rejects_mismatched_shapes() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut net = Mlp::<f64>::new(&[2, 3], &[Activation::Identity], &mut rng).unwrap();
        let grads = Gradients {
            d_weights: vec![Array2::zeros((2, 4))],
            d_bias: vec![Array1::zeros(4)],
        };
        let mut opt = Optimizer::sgd(0.1);
        assert!(opt.step(&mut net, &grads).is_err());
    }
}
