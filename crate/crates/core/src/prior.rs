//! Learning unknown mode priors from sparse supervision.
//!
//! The inverter is an estimator of the cluster-assignment posterior, so its
//! marginal over data estimates the cluster masses. Retraining it on a small
//! labelled set anchors the class indices to the true labels; the marginal
//! over a probe set then yields a target the prior logits are fitted to in
//! closed form.

use ndarray::{Array2, Axis};
use rand::Rng;

use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::latent::ModePriorParams;
use crate::nn::{categorical_cross_entropy, categorical_cross_entropy_grad, one_hot, Mlp, Optimizer};
use crate::scalar::Scalar;
use crate::train::GanModel;

/// A small labelled sample of real data.
#[derive(Debug, Clone)]
pub struct LabeledSubset<F> {
    pub points: Array2<F>,
    pub labels: Vec<usize>,
    /// Share of the full dataset this subset represents.
    pub fraction: f64,
}

impl<F: Scalar> LabeledSubset<F> {
    pub fn new(points: Array2<F>, labels: Vec<usize>, fraction: f64) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::EmptyInput("labeled subset"));
        }
        if points.nrows() != labels.len() {
            return Err(Error::LengthMismatch {
                left: points.nrows(),
                right: labels.len(),
            });
        }
        Ok(Self {
            points,
            labels,
            fraction,
        })
    }

    /// Uniform sample (without replacement) of `ceil(fraction * len)` rows.
    pub fn from_dataset<R: Rng + ?Sized>(
        ds: &LabeledDataset<F>,
        fraction: f64,
        rng: &mut R,
    ) -> Result<Self> {
        if !(0.0 < fraction && fraction <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "labelled fraction must lie in (0, 1], got {fraction}"
            )));
        }
        let count = ((ds.len() as f64 * fraction).ceil() as usize).max(1);
        let (points, labels) = ds.sample_rows(count, rng);
        Self::new(points, labels, fraction)
    }
}

/// Mean of the inverter's softmax outputs over `samples`: an estimate of the
/// cluster-marginal the model currently believes in.
pub fn estimate_posterior_marginal<F: Scalar>(h: &Mlp<F>, samples: &Array2<F>) -> Result<Vec<F>> {
    if samples.nrows() == 0 {
        return Err(Error::EmptyInput("posterior marginal samples"));
    }
    let out = h.forward(samples)?;
    let mean = out.mean_axis(Axis(0)).expect("non-empty batch");
    Ok(mean.to_vec())
}

/// Outcome of an inverter retraining run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetrainReport {
    pub epochs_run: usize,
    pub train_accuracy: f64,
    /// Whether the 95% training-accuracy bar was reached before the cap.
    pub converged: bool,
}

const RETRAIN_TARGET_ACCURACY: f64 = 0.95;

/// Full-batch retraining of the inverter on the labelled subset. Only `h`
/// changes. Stops early once training accuracy reaches 95%; hitting the epoch
/// cap is reported, not fatal.
pub fn retrain_inverter<F: Scalar>(
    h: &mut Mlp<F>,
    ws: &LabeledSubset<F>,
    epochs: usize,
    lr: f64,
) -> Result<RetrainReport> {
    let num_classes = h.output_dim();
    if let Some(&bad) = ws.labels.iter().find(|&&l| l >= num_classes) {
        return Err(Error::Domain(format!(
            "label {bad} out of range for {num_classes} classes"
        )));
    }
    let targets = one_hot::<F>(&ws.labels, num_classes)?;
    let mut opt = Optimizer::adam(lr);
    let mut report = RetrainReport {
        epochs_run: 0,
        train_accuracy: training_accuracy(h, ws)?,
        converged: false,
    };
    if report.train_accuracy >= RETRAIN_TARGET_ACCURACY {
        report.converged = true;
        return Ok(report);
    }
    for epoch in 0..epochs {
        let tape = h.forward_traced(&ws.points)?;
        let grad = categorical_cross_entropy_grad(tape.output(), &targets)?;
        let (grads, _) = h.backward(&tape, &grad)?;
        opt.step(h, &grads)?;
        report.epochs_run = epoch + 1;
        report.train_accuracy = training_accuracy(h, ws)?;
        if report.train_accuracy >= RETRAIN_TARGET_ACCURACY {
            report.converged = true;
            break;
        }
    }
    let _ = categorical_cross_entropy(&h.forward(&ws.points)?, &targets)?;
    Ok(report)
}

fn training_accuracy<F: Scalar>(h: &Mlp<F>, ws: &LabeledSubset<F>) -> Result<f64> {
    let out = h.forward(&ws.points)?;
    let mut hits = 0usize;
    for (row, &label) in out.rows().into_iter().zip(&ws.labels) {
        let mut best = 0;
        for (i, &v) in row.iter().enumerate() {
            if v > row[best] {
                best = i;
            }
        }
        if best == label {
            hits += 1;
        }
    }
    Ok(hits as f64 / ws.labels.len() as f64)
}

/// Result of fitting prior logits to a target probability vector.
#[derive(Debug, Clone)]
pub struct FittedPriors<F> {
    pub params: ModePriorParams<F>,
    /// L1 distance between `softmax(alpha)` and the target.
    pub l1_residual: f64,
    /// Whether any target entry was floored away from zero.
    pub floored: bool,
}

/// Fits logits so that their softmax reproduces `target`. Log-probabilities
/// solve this exactly; entries at zero are floored to 1e-6 first (softmax
/// cannot produce a hard zero) and a short descent pass then polishes the L1
/// residual, which stays within ~2e-6 per floored entry.
pub fn fit_alpha<F: Scalar>(target: &[F]) -> Result<FittedPriors<F>> {
    let floored = target.iter().any(|p| p.as_f64() < 1e-6);
    let (params, l1_residual) = ModePriorParams::from_probs(target)?;
    if l1_residual <= 1e-6 {
        return Ok(FittedPriors {
            params,
            l1_residual,
            floored,
        });
    }
    let polished = l1_descent(params, target, 500, 0.05);
    Ok(FittedPriors {
        l1_residual: residual(&polished, target),
        params: polished,
        floored,
    })
}

fn residual<F: Scalar>(params: &ModePriorParams<F>, target: &[F]) -> f64 {
    params
        .softmax()
        .iter()
        .zip(target)
        .map(|(a, b)| (a.as_f64() - b.as_f64()).abs())
        .sum()
}

/// Subgradient descent on `||softmax(alpha) - target||_1`; keeps the best
/// iterate. Only reachable when the closed form was floored.
fn l1_descent<F: Scalar>(
    start: ModePriorParams<F>,
    target: &[F],
    iterations: usize,
    lr: f64,
) -> ModePriorParams<F> {
    let m = start.num_modes();
    let mut alpha: Vec<f64> = start.logits().iter().map(|a| a.as_f64()).collect();
    let mut best = start.clone();
    let mut best_res = residual(&start, target);
    for _ in 0..iterations {
        let current = match ModePriorParams::<F>::new(alpha.iter().map(|&a| F::of(a)).collect()) {
            Ok(p) => p,
            Err(_) => break,
        };
        let s: Vec<f64> = current.softmax().iter().map(|v| v.as_f64()).collect();
        let res = residual(&current, target);
        if res < best_res {
            best_res = res;
            best = current.clone();
        }
        let sign: Vec<f64> = s
            .iter()
            .zip(target)
            .map(|(&si, t)| (si - t.as_f64()).signum())
            .collect();
        let dot: f64 = sign.iter().zip(&s).map(|(&g, &si)| g * si).sum();
        for k in 0..m {
            let grad = s[k] * (sign[k] - dot);
            alpha[k] -= lr * grad;
        }
    }
    best
}

/// Options for the prior-learning pipeline.
#[derive(Debug, Clone, Copy)]
pub struct PriorLearnOptions {
    pub retrain_epochs: usize,
    pub retrain_lr: f64,
}

impl Default for PriorLearnOptions {
    fn default() -> Self {
        Self {
            retrain_epochs: 200,
            retrain_lr: 1e-3,
        }
    }
}

/// Everything the prior-learning pipeline produces.
#[derive(Debug, Clone)]
pub struct LearnedPriors<F> {
    pub params: ModePriorParams<F>,
    /// The retrained inverter's marginal over the probe set (the fit target).
    pub posterior_marginal: Vec<F>,
    pub retrain: RetrainReport,
    pub l1_residual: f64,
}

/// Retrains a private copy of the inverter on the labelled subset, estimates
/// its marginal over the probe set, and fits prior logits to that marginal.
/// The model passed in is left untouched.
pub fn learn_priors<F: Scalar>(
    model: &GanModel<F>,
    ws: &LabeledSubset<F>,
    probe: &Array2<F>,
    options: PriorLearnOptions,
) -> Result<LearnedPriors<F>> {
    let mut h = model.inverter.clone();
    let retrain = retrain_inverter(&mut h, ws, options.retrain_epochs, options.retrain_lr)?;
    let posterior_marginal = estimate_posterior_marginal(&h, probe)?;
    let fitted = fit_alpha(&posterior_marginal)?;
    Ok(LearnedPriors {
        params: fitted.params,
        posterior_marginal,
        retrain,
        l1_residual: fitted.l1_residual,
    })
}
