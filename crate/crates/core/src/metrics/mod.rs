//! Clustering and generation quality metrics.

mod hungarian;

pub use hungarian::min_cost_assignment;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Contingency table between two labelings plus the marginal counts.
struct Contingency {
    table: Vec<Vec<usize>>,
    pred_counts: Vec<usize>,
    truth_counts: Vec<usize>,
    n: usize,
}

fn contingency(pred: &[usize], truth: &[usize]) -> Result<Contingency> {
    if pred.len() != truth.len() {
        return Err(Error::LengthMismatch {
            left: pred.len(),
            right: truth.len(),
        });
    }
    if pred.is_empty() {
        return Err(Error::EmptyInput("labelings"));
    }
    let k_pred = pred.iter().max().unwrap() + 1;
    let k_truth = truth.iter().max().unwrap() + 1;
    let mut table = vec![vec![0usize; k_truth]; k_pred];
    let mut pred_counts = vec![0usize; k_pred];
    let mut truth_counts = vec![0usize; k_truth];
    for (&p, &t) in pred.iter().zip(truth) {
        table[p][t] += 1;
        pred_counts[p] += 1;
        truth_counts[t] += 1;
    }
    Ok(Contingency {
        table,
        pred_counts,
        truth_counts,
        n: pred.len(),
    })
}

/// Clustering accuracy: the best fraction of agreeing labels over all
/// bijective relabelings, found by min-cost assignment on the negated
/// contingency counts. Equals the brute-force permutation maximum.
pub fn clustering_accuracy(pred: &[usize], truth: &[usize]) -> Result<f64> {
    let c = contingency(pred, truth)?;
    let k = c.table.len().max(c.table[0].len());
    let mut cost = vec![vec![0i64; k]; k];
    for (i, row) in c.table.iter().enumerate() {
        for (j, &count) in row.iter().enumerate() {
            cost[i][j] = -(count as i64);
        }
    }
    let assign = min_cost_assignment(&cost);
    let matched: i64 = assign
        .iter()
        .enumerate()
        .map(|(i, &j)| -cost[i][j])
        .sum();
    Ok(matched as f64 / c.n as f64)
}

fn entropy(counts: &[usize], n: usize) -> f64 {
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n as f64;
            -p * p.ln()
        })
        .sum()
}

/// Normalized mutual information with geometric-mean normalization.
/// Two single-cluster partitions score 1; if exactly one side has zero
/// entropy the partitions differ and the score is 0.
pub fn nmi(pred: &[usize], truth: &[usize]) -> Result<f64> {
    let c = contingency(pred, truth)?;
    let h_pred = entropy(&c.pred_counts, c.n);
    let h_truth = entropy(&c.truth_counts, c.n);
    if h_pred == 0.0 && h_truth == 0.0 {
        return Ok(1.0);
    }
    if h_pred == 0.0 || h_truth == 0.0 {
        return Ok(0.0);
    }
    let n = c.n as f64;
    let mut mi = 0.0;
    for (i, row) in c.table.iter().enumerate() {
        for (j, &count) in row.iter().enumerate() {
            if count > 0 {
                let joint = count as f64 / n;
                mi += joint
                    * ((count as f64 * n)
                        / (c.pred_counts[i] as f64 * c.truth_counts[j] as f64))
                        .ln();
            }
        }
    }
    Ok((mi / (h_pred * h_truth).sqrt()).clamp(0.0, 1.0))
}

fn comb2(v: usize) -> f64 {
    let v = v as f64;
    v * (v - 1.0) / 2.0
}

/// Adjusted Rand index from the standard pair-counting formula.
pub fn ari(pred: &[usize], truth: &[usize]) -> Result<f64> {
    let c = contingency(pred, truth)?;
    let sum_pairs: f64 = c
        .table
        .iter()
        .flat_map(|row| row.iter())
        .map(|&v| comb2(v))
        .sum();
    let sum_pred: f64 = c.pred_counts.iter().map(|&v| comb2(v)).sum();
    let sum_truth: f64 = c.truth_counts.iter().map(|&v| comb2(v)).sum();
    let total = comb2(c.n);
    if total == 0.0 {
        return Ok(1.0);
    }
    let expected = sum_pred * sum_truth / total;
    let max_index = 0.5 * (sum_pred + sum_truth);
    let denom = max_index - expected;
    if denom == 0.0 {
        Ok(1.0)
    } else {
        Ok((sum_pairs - expected) / denom)
    }
}

/// Discrete KL divergence in nats, with `0 log 0 := 0`. Errors where `q` has
/// a zero entry under positive `p` mass.
pub fn kl_divergence<F: Scalar>(p: &[F], q: &[F]) -> Result<F> {
    if p.len() != q.len() {
        return Err(Error::LengthMismatch {
            left: p.len(),
            right: q.len(),
        });
    }
    let mut total = F::zero();
    for (index, (&pi, &qi)) in p.iter().zip(q).enumerate() {
        if pi > F::zero() {
            if !(qi > F::zero()) {
                return Err(Error::SupportViolation { index });
            }
            total += pi * (pi / qi).ln();
        }
    }
    Ok(total)
}

/// Empirical cluster masses of a tagged sample. The last entry is defined as
/// one minus the rest, so the output sums to exactly 1.
pub fn modal_mass<F: Scalar>(tags: &[usize], num_clusters: usize) -> Result<Vec<F>> {
    if tags.is_empty() {
        return Err(Error::EmptyInput("modal mass tags"));
    }
    let mut counts = vec![0usize; num_clusters];
    for &t in tags {
        if t >= num_clusters {
            return Err(Error::Domain(format!(
                "tag {t} out of range for {num_clusters} clusters"
            )));
        }
        counts[t] += 1;
    }
    let n = F::of_usize(tags.len());
    let mut masses: Vec<F> = counts.iter().map(|&c| F::of_usize(c) / n).collect();
    let head: F = masses[..num_clusters - 1].iter().cloned().sum();
    masses[num_clusters - 1] = F::one() - head;
    Ok(masses)
}

/// Index of the nearest row of `centers` for each row of `samples`.
pub fn assign_nearest_center<F: Scalar>(samples: &Array2<F>, centers: &Array2<F>) -> Vec<usize> {
    samples
        .rows()
        .into_iter()
        .map(|s| {
            let mut best = 0;
            let mut best_d = F::infinity();
            for (k, c) in centers.rows().into_iter().enumerate() {
                let d: F = s
                    .iter()
                    .zip(c.iter())
                    .map(|(&a, &b)| (a - b) * (a - b))
                    .sum();
                if d < best_d {
                    best_d = d;
                    best = k;
                }
            }
            best
        })
        .collect()
}

/// Mode coverage: a centre counts as covered once it receives at least
/// `max(10, 0.02 n)` samples within `threshold_radius`. Also returns the
/// fraction of samples within the radius of any centre.
pub fn mode_coverage<F: Scalar>(
    samples: &Array2<F>,
    centers: &Array2<F>,
    threshold_radius: F,
) -> (usize, f64) {
    let n = samples.nrows();
    if n == 0 || centers.nrows() == 0 {
        return (0, 0.0);
    }
    let assign = assign_nearest_center(samples, centers);
    let r2 = threshold_radius * threshold_radius;
    let mut hits = vec![0usize; centers.nrows()];
    let mut close = 0usize;
    for (row, &k) in samples.rows().into_iter().zip(&assign) {
        let d2: F = row
            .iter()
            .zip(centers.row(k).iter())
            .map(|(&a, &b)| (a - b) * (a - b))
            .sum();
        if d2 <= r2 {
            hits[k] += 1;
            close += 1;
        }
    }
    let needed = 10usize.max((0.02 * n as f64).ceil() as usize);
    let covered = hits.iter().filter(|&&h| h >= needed).count();
    (covered, close as f64 / n as f64)
}

fn pairwise_sq_dist<F: Scalar>(a: &ndarray::ArrayView1<F>, b: &ndarray::ArrayView1<F>) -> F {
    a.iter()
        .zip(b.iter())
        .map(|(&x, &y)| (x - y) * (x - y))
        .sum()
}

/// Median pairwise distance over the pooled sample (the median heuristic for
/// the RBF bandwidth). Falls back to 1 when the median degenerates to 0.
fn median_bandwidth<F: Scalar>(x: &Array2<F>, y: &Array2<F>) -> F {
    let mut dists: Vec<f64> = Vec::new();
    let rows: Vec<_> = x.rows().into_iter().chain(y.rows()).collect();
    for i in 0..rows.len() {
        for j in (i + 1)..rows.len() {
            dists.push(pairwise_sq_dist(&rows[i], &rows[j]).as_f64().sqrt());
        }
    }
    if dists.is_empty() {
        return F::one();
    }
    dists.sort_by(|a, b| a.partial_cmp(b).expect("finite distances"));
    let median = dists[dists.len() / 2];
    if median > 0.0 {
        F::of(median)
    } else {
        F::one()
    }
}

fn rbf<F: Scalar>(d2: F, two_sigma_sq: F) -> F {
    (-d2 / two_sigma_sq).exp()
}

/// Unbiased squared maximum mean discrepancy with an RBF kernel whose
/// bandwidth is the median pooled pairwise distance. Can dip slightly below
/// zero on identical distributions, as unbiased estimators do.
pub fn mmd<F: Scalar>(x: &Array2<F>, y: &Array2<F>) -> Result<F> {
    mmd_impl(x, y, false)
}

/// Biased V-statistic variant (includes the diagonal terms); exactly zero on
/// identical sample sets.
pub fn mmd_biased<F: Scalar>(x: &Array2<F>, y: &Array2<F>) -> Result<F> {
    mmd_impl(x, y, true)
}

fn mmd_impl<F: Scalar>(x: &Array2<F>, y: &Array2<F>, biased: bool) -> Result<F> {
    if x.nrows() == 0 || y.nrows() == 0 {
        return Err(Error::EmptyInput("mmd sample set"));
    }
    if x.ncols() != y.ncols() {
        return Err(Error::ShapeMismatch {
            expected: format!("dimension {}", x.ncols()),
            got: format!("{}", y.ncols()),
        });
    }
    let sigma = median_bandwidth(x, y);
    let two_sigma_sq = F::of(2.0) * sigma * sigma;
    let m = x.nrows();
    let n = y.nrows();

    let mut k_xx = F::zero();
    for i in 0..m {
        for j in 0..m {
            if biased || i != j {
                k_xx += rbf(pairwise_sq_dist(&x.row(i), &x.row(j)), two_sigma_sq);
            }
        }
    }
    let mut k_yy = F::zero();
    for i in 0..n {
        for j in 0..n {
            if biased || i != j {
                k_yy += rbf(pairwise_sq_dist(&y.row(i), &y.row(j)), two_sigma_sq);
            }
        }
    }
    let mut k_xy = F::zero();
    for i in 0..m {
        for j in 0..n {
            k_xy += rbf(pairwise_sq_dist(&x.row(i), &y.row(j)), two_sigma_sq);
        }
    }

    let (m_f, n_f) = (F::of_usize(m), F::of_usize(n));
    let (norm_xx, norm_yy) = if biased {
        (m_f * m_f, n_f * n_f)
    } else {
        (m_f * (m_f - F::one()), n_f * (n_f - F::one()))
    };
    Ok(k_xx / norm_xx + k_yy / norm_yy - F::of(2.0) * k_xy / (m_f * n_f))
}

/// Checks the divergence identity that holds when latent and generated modal
/// masses agree: `KL(p_yhat || p_y) == KL(p_yhat || p_xhat)` whenever
/// `p_y == p_xhat` entrywise, so substituting one for the other changes
/// nothing. Returns whether the two divergences agree within 1e-9.
pub fn lemma3_identity_check<F: Scalar>(p_yhat: &[F], p_y: &[F], p_xhat: &[F]) -> Result<bool> {
    let lhs = kl_divergence(p_yhat, p_y)?;
    let rhs = kl_divergence(p_yhat, p_xhat)?;
    Ok((lhs - rhs).abs().as_f64() <= 1e-9)
}

/// Metrics for one evaluated model, serializable for reports.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ClusterMetricsReport {
    pub acc: f64,
    pub nmi: f64,
    pub ari: f64,
    pub mmd: f64,
    pub modal_mass: Vec<f64>,
    pub modes_covered: usize,
    /// Largest real class mass: the trivial-assignment accuracy baseline,
    /// reported alongside ACC but never enforced.
    pub majority_mass: f64,
}
