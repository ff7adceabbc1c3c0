//! Minimal dense feed-forward engine with hand-written backpropagation.
//!
//! Just enough to train the generator, discriminator, and inverter at desk
//! scale: dense layers, a handful of nonlinearities, cross-entropy losses,
//! and SGD/Adam. Gradients are verified against central finite differences in
//! the test suite.

mod loss;
mod optim;

pub use loss::{
    binary_cross_entropy, binary_cross_entropy_grad, categorical_cross_entropy,
    categorical_cross_entropy_grad, one_hot, PROB_CLAMP,
};
pub use optim::{Optimizer, OptimizerMethod};

use ndarray::{Array1, Array2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Per-layer nonlinearity. Softmax is only valid as the final activation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Identity,
    Relu,
    Tanh,
    Sigmoid,
    Softmax,
}

impl Activation {
    pub(crate) fn tag(self) -> u8 {
        match self {
            Activation::Identity => 0,
            Activation::Relu => 1,
            Activation::Tanh => 2,
            Activation::Sigmoid => 3,
            Activation::Softmax => 4,
        }
    }

    pub(crate) fn from_tag(tag: u8) -> Result<Self> {
        Ok(match tag {
            0 => Activation::Identity,
            1 => Activation::Relu,
            2 => Activation::Tanh,
            3 => Activation::Sigmoid,
            4 => Activation::Softmax,
            other => return Err(Error::Checkpoint(format!("unknown activation tag {other}"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Layer<F> {
    /// `n_in x n_out`.
    pub weights: Array2<F>,
    pub bias: Array1<F>,
    pub activation: Activation,
}

impl<F: Scalar> Layer<F> {
    fn apply(&self, input: &Array2<F>) -> Array2<F> {
        let mut z = input.dot(&self.weights);
        z += &self.bias;
        match self.activation {
            Activation::Identity => {}
            Activation::Relu => z.mapv_inplace(|v| v.max(F::zero())),
            Activation::Tanh => z.mapv_inplace(|v| v.tanh()),
            Activation::Sigmoid => z.mapv_inplace(sigmoid),
            Activation::Softmax => softmax_rows(&mut z),
        }
        z
    }
}

fn sigmoid<F: Scalar>(v: F) -> F {
    F::one() / (F::one() + (-v).exp())
}

fn softmax_rows<F: Scalar>(z: &mut Array2<F>) {
    for mut row in z.rows_mut() {
        let max = row.iter().cloned().fold(F::neg_infinity(), F::max);
        let mut sum = F::zero();
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v = *v / sum;
        }
    }
}

/// Dense feed-forward network.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp<F> {
    layers: Vec<Layer<F>>,
}

/// Activations recorded by a traced forward pass; required by [`Mlp::backward`].
/// Holding a tape is the proof that a forward pass happened for this batch.
#[derive(Debug, Clone)]
pub struct Tape<F> {
    input: Array2<F>,
    outputs: Vec<Array2<F>>,
}

impl<F: Scalar> Tape<F> {
    pub fn output(&self) -> &Array2<F> {
        self.outputs.last().expect("tape has at least one layer")
    }

    pub fn batch_size(&self) -> usize {
        self.input.nrows()
    }
}

/// Parameter gradients, one `(dW, db)` pair per layer.
#[derive(Debug, Clone)]
pub struct Gradients<F> {
    pub(crate) d_weights: Vec<Array2<F>>,
    pub(crate) d_bias: Vec<Array1<F>>,
}

impl<F: Scalar> Gradients<F> {
    /// Accumulates `other` into `self`; shapes must match.
    pub fn add_assign(&mut self, other: &Gradients<F>) -> Result<()> {
        if self.d_weights.len() != other.d_weights.len() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} layers", self.d_weights.len()),
                got: format!("{} layers", other.d_weights.len()),
            });
        }
        for (a, b) in self.d_weights.iter_mut().zip(&other.d_weights) {
            *a += b;
        }
        for (a, b) in self.d_bias.iter_mut().zip(&other.d_bias) {
            *a += b;
        }
        Ok(())
    }

    /// Flattened copy of every gradient component, layer by layer.
    pub fn flat(&self) -> Vec<F> {
        let mut out = Vec::new();
        for (w, b) in self.d_weights.iter().zip(&self.d_bias) {
            out.extend(w.iter().cloned());
            out.extend(b.iter().cloned());
        }
        out
    }
}

impl<F: Scalar> Mlp<F> {
    /// Builds a network from layer sizes and one activation per layer.
    /// Weights are initialized U(-s, s) with `s = sqrt(6 / (n_in + n_out))`,
    /// biases at zero.
    pub fn new<R: Rng + ?Sized>(
        sizes: &[usize],
        activations: &[Activation],
        rng: &mut R,
    ) -> Result<Self> {
        if sizes.len() < 2 {
            return Err(Error::InvalidConfig(
                "an MLP needs at least an input and an output size".into(),
            ));
        }
        if activations.len() != sizes.len() - 1 {
            return Err(Error::InvalidConfig(format!(
                "{} sizes require {} activations, got {}",
                sizes.len(),
                sizes.len() - 1,
                activations.len()
            )));
        }
        if sizes.iter().any(|&s| s == 0) {
            return Err(Error::InvalidConfig("zero-width layer".into()));
        }
        for (i, act) in activations.iter().enumerate() {
            if *act == Activation::Softmax && i != activations.len() - 1 {
                return Err(Error::InvalidConfig(
                    "softmax is only valid as the final activation".into(),
                ));
            }
        }
        let mut layers = Vec::with_capacity(sizes.len() - 1);
        for (i, &act) in activations.iter().enumerate() {
            let (n_in, n_out) = (sizes[i], sizes[i + 1]);
            let scale = (6.0 / (n_in + n_out) as f64).sqrt();
            let weights = Array2::from_shape_fn((n_in, n_out), |_| {
                F::of((rng.random::<f64>() * 2.0 - 1.0) * scale)
            });
            layers.push(Layer {
                weights,
                bias: Array1::from_elem(n_out, F::zero()),
                activation: act,
            });
        }
        Ok(Self { layers })
    }

    pub(crate) fn from_layers(layers: Vec<Layer<F>>) -> Self {
        Self { layers }
    }

    pub(crate) fn layers(&self) -> &[Layer<F>] {
        &self.layers
    }

    pub(crate) fn layers_mut(&mut self) -> &mut [Layer<F>] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].weights.nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("non-empty").weights.ncols()
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.bias.len())
            .sum()
    }

    /// Flattened copy of all parameters; used for bitwise comparisons.
    /// Layout: per layer, weights row-major, then the bias.
    pub fn flat_params(&self) -> Vec<F> {
        let mut out = Vec::with_capacity(self.param_count());
        for layer in &self.layers {
            out.extend(layer.weights.iter().cloned());
            out.extend(layer.bias.iter().cloned());
        }
        out
    }

    /// Overwrites every parameter from a flat slice laid out as in
    /// [`flat_params`](Self::flat_params).
    pub fn set_flat_params(&mut self, values: &[F]) -> Result<()> {
        if values.len() != self.param_count() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} parameters", self.param_count()),
                got: format!("{}", values.len()),
            });
        }
        let mut it = values.iter();
        for layer in &mut self.layers {
            for w in layer.weights.iter_mut() {
                *w = *it.next().expect("length checked");
            }
            for b in layer.bias.iter_mut() {
                *b = *it.next().expect("length checked");
            }
        }
        Ok(())
    }

    fn check_input(&self, batch: &Array2<F>) -> Result<()> {
        if batch.ncols() != self.input_dim() {
            return Err(Error::ShapeMismatch {
                expected: format!("batch width {}", self.input_dim()),
                got: format!("{}", batch.ncols()),
            });
        }
        Ok(())
    }

    /// Plain forward pass.
    pub fn forward(&self, batch: &Array2<F>) -> Result<Array2<F>> {
        self.check_input(batch)?;
        let mut a = batch.clone();
        for layer in &self.layers {
            a = layer.apply(&a);
        }
        Ok(a)
    }

    /// Forward pass that records per-layer outputs for backpropagation.
    pub fn forward_traced(&self, batch: &Array2<F>) -> Result<Tape<F>> {
        self.check_input(batch)?;
        let mut outputs = Vec::with_capacity(self.layers.len());
        let mut a = batch.clone();
        for layer in &self.layers {
            a = layer.apply(&a);
            outputs.push(a.clone());
        }
        Ok(Tape {
            input: batch.clone(),
            outputs,
        })
    }

    /// Backpropagates `out_grad` (dLoss/dOutput for the tape's batch) through
    /// the recorded pass. Returns parameter gradients and dLoss/dInput.
    pub fn backward(&self, tape: &Tape<F>, out_grad: &Array2<F>) -> Result<(Gradients<F>, Array2<F>)> {
        let out = tape.output();
        if out_grad.dim() != out.dim() {
            return Err(Error::ShapeMismatch {
                expected: format!("{:?}", out.dim()),
                got: format!("{:?}", out_grad.dim()),
            });
        }
        let mut d_weights = vec![Array2::zeros((0, 0)); self.layers.len()];
        let mut d_bias = vec![Array1::zeros(0); self.layers.len()];
        let mut grad = out_grad.clone();
        for idx in (0..self.layers.len()).rev() {
            let layer = &self.layers[idx];
            let post = &tape.outputs[idx];
            let pre_input = if idx == 0 {
                &tape.input
            } else {
                &tape.outputs[idx - 1]
            };
            let dz = activation_backward(layer.activation, post, &grad);
            d_weights[idx] = pre_input.t().dot(&dz);
            d_bias[idx] = dz.sum_axis(Axis(0));
            grad = dz.dot(&layer.weights.t());
        }
        Ok((Gradients { d_weights, d_bias }, grad))
    }
}

/// dLoss/dPreactivation from the post-activation values and dLoss/dPost.
fn activation_backward<F: Scalar>(
    activation: Activation,
    post: &Array2<F>,
    grad: &Array2<F>,
) -> Array2<F> {
    match activation {
        Activation::Identity => grad.clone(),
        // relu'(z) taken as 0 at the kink (post == 0).
        Activation::Relu => {
            let mut dz = grad.clone();
            dz.zip_mut_with(post, |g, &a| {
                if !(a > F::zero()) {
                    *g = F::zero();
                }
            });
            dz
        }
        Activation::Tanh => {
            let mut dz = grad.clone();
            dz.zip_mut_with(post, |g, &a| *g = *g * (F::one() - a * a));
            dz
        }
        Activation::Sigmoid => {
            let mut dz = grad.clone();
            dz.zip_mut_with(post, |g, &a| *g = *g * a * (F::one() - a));
            dz
        }
        Activation::Softmax => {
            let mut dz = grad.clone();
            for (mut dz_row, s_row) in dz.rows_mut().into_iter().zip(post.rows()) {
                let dot: F = dz_row
                    .iter()
                    .zip(s_row.iter())
                    .map(|(&g, &s)| g * s)
                    .sum();
                for (g, &s) in dz_row.iter_mut().zip(s_row.iter()) {
                    *g = s * (*g - dot);
                }
            }
            dz
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn identity_net(dim: usize) -> Mlp<f64> {
        let mut layers = Vec::new();
        layers.push(Layer {
            weights: Array2::eye(dim),
            bias: Array1::zeros(dim),
            activation: Activation::Identity,
        });
        Mlp::from_layers(layers)
    }

    #[test]
    fn identity_layer_passes_input_through() {
        let net = identity_net(3);
        let batch = array![[1.0, -2.0, 0.5], [0.0, 4.0, -1.0]];
        assert_eq!(net.forward(&batch).unwrap(), batch);
    }

    #[test]
    fn softmax_head_rows_sum_to_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let net = Mlp::<f64>::new(
            &[4, 8, 5],
            &[Activation::Tanh, Activation::Softmax],
            &mut rng,
        )
        .unwrap();
        let batch = Array2::from_shape_fn((6, 4), |_| rng.random::<f64>() * 4.0 - 2.0);
        let out = net.forward(&batch).unwrap();
        for row in out.rows() {
            let sum: f64 = row.sum();
            assert!((sum - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn zero_weights_sigmoid_outputs_half() {
        let net = Mlp::from_layers(vec![Layer {
            weights: Array2::zeros((3, 2)),
            bias: Array1::zeros(2),
            activation: Activation::Sigmoid,
        }]);
        let out = net.forward(&array![[1.0, 2.0, 3.0]]).unwrap();
        assert_eq!(out, array![[0.5, 0.5]]);
    }

    #[test]
    fn forward_rejects_wrong_width() {
        let net = identity_net(3);
        assert!(matches!(
            net.forward(&Array2::zeros((2, 4))),
            Err(Error::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn softmax_only_allowed_at_the_head() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        assert!(Mlp::<f64>::new(
            &[3, 4, 2],
            &[Activation::Softmax, Activation::Identity],
            &mut rng
        )
        .is_err());
    }

    #[test]
    fn zero_loss_grad_gives_zero_param_grads() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let net = Mlp::<f64>::new(
            &[3, 5, 2],
            &[Activation::Tanh, Activation::Sigmoid],
            &mut rng,
        )
        .unwrap();
        let batch = Array2::from_shape_fn((4, 3), |_| rng.random::<f64>());
        let tape = net.forward_traced(&batch).unwrap();
        let (grads, d_in) = net.backward(&tape, &Array2::zeros((4, 2))).unwrap();
        assert!(grads.flat().iter().all(|&g| g == 0.0));
        assert!(d_in.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn backward_is_linear_in_the_loss_grad() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let net = Mlp::<f64>::new(
            &[3, 6, 4],
            &[Activation::Relu, Activation::Softmax],
            &mut rng,
        )
        .unwrap();
        let batch = Array2::from_shape_fn((5, 3), |_| rng.random::<f64>() - 0.5);
        let tape = net.forward_traced(&batch).unwrap();
        let g1 = Array2::from_shape_fn((5, 4), |_| rng.random::<f64>() - 0.5);
        let g2 = g1.mapv(|v| v * 2.0);
        let (grads1, _) = net.backward(&tape, &g1).unwrap();
        let (grads2, _) = net.backward(&tape, &g2).unwrap();
        for (a, b) in grads1.flat().iter().zip(grads2.flat()) {
            assert!((2.0 * a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn backward_rejects_mismatched_grad_shape() {
        let net = identity_net(2);
        let tape = net.forward_traced(&Array2::zeros((3, 2))).unwrap();
        assert!(net.backward(&tape, &Array2::zeros((3, 5))).is_err());
    }

    #[test]
    fn param_count_matches_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let net = Mlp::<f64>::new(
            &[7, 11, 3],
            &[Activation::Relu, Activation::Identity],
            &mut rng,
        )
        .unwrap();
        assert_eq!(net.param_count(), (7 + 1) * 11 + (11 + 1) * 3);
    }

    #[test]
    fn forward_is_seed_deterministic() {
        let build = || {
            let mut rng = ChaCha8Rng::seed_from_u64(17);
            let net = Mlp::<f64>::new(
                &[4, 8, 2],
                &[Activation::Tanh, Activation::Identity],
                &mut rng,
            )
            .unwrap();
            let batch = Array2::from_shape_fn((3, 4), |_| rng.random::<f64>());
            net.forward(&batch).unwrap()
        };
        let (a, b) = (build(), build());
        assert!(a.iter().zip(b.iter()).all(|(x, y)| x.to_bits() == y.to_bits()));
    }
}
