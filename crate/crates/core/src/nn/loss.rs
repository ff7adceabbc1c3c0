//! Cross-entropy losses and their gradients with respect to the predictions.
//!
//! Predictions are clamped into `[PROB_CLAMP, 1 - PROB_CLAMP]` in both the
//! loss and its gradient, so the two stay consistent and every loss value is
//! finite.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Probability clamp applied before taking logs.
pub const PROB_CLAMP: f64 = 1e-7;

fn clamp<F: Scalar>(p: F) -> F {
    p.max(F::of(PROB_CLAMP)).min(F::of(1.0 - PROB_CLAMP))
}

fn check_same_shape<F>(pred: &Array2<F>, target: &Array2<F>) -> Result<()> {
    if pred.dim() != target.dim() {
        return Err(Error::ShapeMismatch {
            expected: format!("{:?}", pred.dim()),
            got: format!("{:?}", target.dim()),
        });
    }
    if pred.nrows() == 0 {
        return Err(Error::EmptyInput("loss batch"));
    }
    Ok(())
}

/// Mean over the batch of `-[t log p + (1 - t) log(1 - p)]`.
pub fn binary_cross_entropy<F: Scalar>(pred: &Array2<F>, target: &Array2<F>) -> Result<F> {
    check_same_shape(pred, target)?;
    let n = F::of_usize(pred.nrows());
    let mut total = F::zero();
    for (&p, &t) in pred.iter().zip(target.iter()) {
        let p = clamp(p);
        total += -(t * p.ln() + (F::one() - t) * (F::one() - p).ln());
    }
    Ok(total / n)
}

/// Gradient of [`binary_cross_entropy`] with respect to the predictions.
pub fn binary_cross_entropy_grad<F: Scalar>(
    pred: &Array2<F>,
    target: &Array2<F>,
) -> Result<Array2<F>> {
    check_same_shape(pred, target)?;
    let n = F::of_usize(pred.nrows());
    let mut grad = pred.clone();
    grad.zip_mut_with(target, |p, &t| {
        let c = clamp(*p);
        *p = (-t / c + (F::one() - t) / (F::one() - c)) / n;
    });
    Ok(grad)
}

/// Mean over the batch of `-sum_i t_i log p_i` for row-stochastic predictions
/// and one-hot targets.
pub fn categorical_cross_entropy<F: Scalar>(pred: &Array2<F>, target: &Array2<F>) -> Result<F> {
    check_same_shape(pred, target)?;
    let n = F::of_usize(pred.nrows());
    let mut total = F::zero();
    for (&p, &t) in pred.iter().zip(target.iter()) {
        if t > F::zero() {
            total += -(t * clamp(p).ln());
        }
    }
    Ok(total / n)
}

/// Gradient of [`categorical_cross_entropy`] with respect to the predictions.
pub fn categorical_cross_entropy_grad<F: Scalar>(
    pred: &Array2<F>,
    target: &Array2<F>,
) -> Result<Array2<F>> {
    check_same_shape(pred, target)?;
    let n = F::of_usize(pred.nrows());
    let mut grad = pred.clone();
    grad.zip_mut_with(target, |p, &t| {
        *p = if t > F::zero() {
            -t / clamp(*p) / n
        } else {
            F::zero()
        };
    });
    Ok(grad)
}

/// One-hot encodes `labels` into a `len x num_classes` matrix.
pub fn one_hot<F: Scalar>(labels: &[usize], num_classes: usize) -> Result<Array2<F>> {
    let mut out = Array2::zeros((labels.len(), num_classes));
    for (row, &label) in labels.iter().enumerate() {
        if label >= num_classes {
            return Err(Error::Domain(format!(
                "label {label} out of range for {num_classes} classes"
            )));
        }
        out[(row, label)] = F::one();
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn bce_hand_value() {
        let pred = array![[0.5]];
        let target = array![[1.0]];
        let loss: f64 = binary_cross_entropy(&pred, &target).unwrap();
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn cce_uniform_pred_gives_log_m() {
        for m in [2usize, 5, 10] {
            let pred = Array2::from_elem((1, m), 1.0 / m as f64);
            let target = one_hot::<f64>(&[m - 1], m).unwrap();
            let loss = categorical_cross_entropy(&pred, &target).unwrap();
            assert!((loss - (m as f64).ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn cce_hand_value_half_half() {
        let pred = array![[0.5, 0.5]];
        let target = array![[1.0, 0.0]];
        let loss: f64 = categorical_cross_entropy(&pred, &target).unwrap();
        assert!((loss - 0.6931471805599453).abs() < 1e-12);
    }

    #[test]
    fn perfect_prediction_has_negligible_loss() {
        let pred = array![[1.0, 0.0], [0.0, 1.0]];
        let target = pred.clone();
        let loss = categorical_cross_entropy(&pred, &target).unwrap();
        assert!(loss >= 0.0 && loss <= 1e-6);
        let bin_pred = array![[1.0], [0.0]];
        let bin_target = array![[1.0], [0.0]];
        let loss = binary_cross_entropy(&bin_pred, &bin_target).unwrap();
        assert!(loss >= 0.0 && loss <= 1e-6);
    }

    #[test]
    fn losses_stay_finite_at_the_extremes() {
        let pred: ndarray::Array2<f64> = array![[0.0], [1.0]];
        let target = array![[1.0], [0.0]];
        let loss = binary_cross_entropy(&pred, &target).unwrap();
        assert!(loss.is_finite() && loss > 0.0);
        let grad = binary_cross_entropy_grad(&pred, &target).unwrap();
        assert!(grad.iter().all(|g| g.is_finite()));
    }

    #[test]
    fn one_hot_rejects_out_of_range() {
        assert!(one_hot::<f64>(&[3], 3).is_err());
        let t = one_hot::<f64>(&[0, 2], 3).unwrap();
        assert_eq!(t, array![[1.0, 0.0, 0.0], [0.0, 0.0, 1.0]]);
    }
}
