//! Labeled datasets: synthetic 2-D generators, IDX image ingestion, and the
//! skew/merge transforms used to build imbalanced variants.

mod csv;
mod idx;

pub use csv::{read_labeled_csv, read_samples_csv, write_labeled_csv, write_samples_csv};
pub use idx::{encode_idx, load_idx, parse_idx, write_idx};

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Class grouping that folds the ten MNIST digits into five clusters of
/// masses [0.3, 0.1, 0.4, 0.1, 0.1].
pub const MNIST5_GROUPS: [&[usize]; 5] = [&[3, 5, 8], &[2], &[1, 4, 7, 9], &[6], &[0]];

/// The analogous five-cluster grouping for Fashion-MNIST
/// ({sandal, sneaker, ankle boot}, {bag}, {t-shirt, dress},
/// {pullover, coat, shirt}, {trouser}).
pub const FMNIST5_GROUPS: [&[usize]; 5] = [&[5, 7, 9], &[8], &[0, 3], &[2, 4, 6], &[1]];

/// Points with ground-truth cluster labels and the per-class masses.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset<F> {
    points: Array2<F>,
    labels: Vec<usize>,
    num_classes: usize,
    class_masses: Vec<F>,
}

impl<F: Scalar> LabeledDataset<F> {
    /// Validates that every class `0..=max(labels)` is non-empty and that
    /// there are at least as many points as classes.
    pub fn new(points: Array2<F>, labels: Vec<usize>) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::EmptyInput("dataset"));
        }
        if points.nrows() != labels.len() {
            return Err(Error::LengthMismatch {
                left: points.nrows(),
                right: labels.len(),
            });
        }
        let num_classes = labels.iter().max().unwrap() + 1;
        if labels.len() < num_classes {
            return Err(Error::InsufficientSamples(format!(
                "{} points for {num_classes} classes",
                labels.len()
            )));
        }
        let mut counts = vec![0usize; num_classes];
        for &l in &labels {
            counts[l] += 1;
        }
        if let Some(empty) = counts.iter().position(|&c| c == 0) {
            return Err(Error::InsufficientSamples(format!("class {empty} is empty")));
        }
        let class_masses = masses_from_counts(&counts, labels.len());
        Ok(Self {
            points,
            labels,
            num_classes,
            class_masses,
        })
    }

    pub fn points(&self) -> &Array2<F> {
        &self.points
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points.ncols()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    /// Empirical class masses; sums to exactly 1.
    pub fn class_masses(&self) -> &[F] {
        &self.class_masses
    }

    /// Per-class mean points.
    pub fn class_centers(&self) -> Array2<F> {
        let mut centers = Array2::zeros((self.num_classes, self.dim()));
        let mut counts = vec![0usize; self.num_classes];
        for (row, &label) in self.points.rows().into_iter().zip(&self.labels) {
            let mut c = centers.row_mut(label);
            c += &row;
            counts[label] += 1;
        }
        for (k, &count) in counts.iter().enumerate() {
            let inv = F::one() / F::of_usize(count);
            centers.row_mut(k).mapv_inplace(|v| v * inv);
        }
        centers
    }

    /// Label of the nearest dataset point for each query row (1-NN oracle).
    pub fn nearest_labels(&self, queries: &Array2<F>) -> Vec<usize> {
        queries
            .rows()
            .into_iter()
            .map(|q| {
                let mut best = 0usize;
                let mut best_d = F::infinity();
                for (i, row) in self.points.rows().into_iter().enumerate() {
                    let d: F = q
                        .iter()
                        .zip(row.iter())
                        .map(|(&a, &b)| (a - b) * (a - b))
                        .sum();
                    if d < best_d {
                        best_d = d;
                        best = i;
                    }
                }
                self.labels[best]
            })
            .collect()
    }

    /// Uniformly samples `count` rows without replacement.
    pub fn sample_rows<R: Rng + ?Sized>(&self, count: usize, rng: &mut R) -> (Array2<F>, Vec<usize>) {
        let count = count.min(self.len()).max(1);
        let mut indices: Vec<usize> = (0..self.len()).collect();
        indices.shuffle(rng);
        indices.truncate(count);
        let points = self.points.select(Axis(0), &indices);
        let labels = indices.iter().map(|&i| self.labels[i]).collect();
        (points, labels)
    }
}

fn masses_from_counts<F: Scalar>(counts: &[usize], n: usize) -> Vec<F> {
    let n_f = F::of_usize(n);
    let mut masses: Vec<F> = counts.iter().map(|&c| F::of_usize(c) / n_f).collect();
    if masses.len() > 1 {
        let head: F = masses[..masses.len() - 1].iter().cloned().sum();
        let last = masses.len() - 1;
        masses[last] = F::one() - head;
    }
    masses
}

/// Splits `n` into class counts proportional to `ratios`, adjusting the
/// largest class by the rounding remainder so the counts sum to `n`.
fn proportional_counts(n: usize, ratios: &[f64]) -> Result<Vec<usize>> {
    let total: f64 = ratios.iter().sum();
    if ratios.iter().any(|&r| r <= 0.0) || (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidConfig(format!(
            "ratios must be positive and sum to 1, got {ratios:?}"
        )));
    }
    let mut counts: Vec<usize> = ratios.iter().map(|&r| (n as f64 * r).round() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let largest = ratios
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).expect("finite ratios"))
        .map(|(i, _)| i)
        .expect("non-empty ratios");
    if assigned < n {
        counts[largest] += n - assigned;
    } else {
        let excess = assigned - n;
        if counts[largest] <= excess {
            return Err(Error::InsufficientSamples(format!(
                "cannot realize ratios {ratios:?} with {n} points"
            )));
        }
        counts[largest] -= excess;
    }
    if counts.iter().any(|&c| c == 0) {
        return Err(Error::InsufficientSamples(format!(
            "a class would be empty for ratios {ratios:?} at n = {n}"
        )));
    }
    Ok(counts)
}

/// Two interleaved half-circle arcs with Gaussian jitter. Arc 0 is the upper
/// unit half-circle at the origin; arc 1 is its reflection offset by
/// (0.5, -0.25). Class counts follow `ratio` up to rounding.
pub fn two_moons<F: Scalar>(
    n: usize,
    ratio: [f64; 2],
    noise_sigma: f64,
    seed: u64,
) -> Result<LabeledDataset<F>> {
    if n < 2 {
        return Err(Error::InvalidConfig("two_moons needs n >= 2".into()));
    }
    let counts = proportional_counts(n, &ratio)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, noise_sigma.max(0.0)).map_err(|e| {
        Error::InvalidConfig(format!("invalid noise sigma {noise_sigma}: {e}"))
    })?;
    let mut points = Array2::zeros((n, 2));
    let mut labels = Vec::with_capacity(n);
    let mut row = 0;
    for (class, &count) in counts.iter().enumerate() {
        for _ in 0..count {
            let t = rng.random::<f64>() * std::f64::consts::PI;
            let (x, y) = if class == 0 {
                (t.cos(), t.sin())
            } else {
                (0.5 + t.cos(), -0.25 - t.sin())
            };
            points[(row, 0)] = F::of(x + noise.sample(&mut rng));
            points[(row, 1)] = F::of(y + noise.sample(&mut rng));
            labels.push(class);
            row += 1;
        }
    }
    LabeledDataset::new(points, labels)
}

/// `k` isotropic Gaussian blobs with means evenly spaced on a circle; equal
/// masses up to counting rounding.
pub fn gmm_ring<F: Scalar>(
    n: usize,
    k: usize,
    radius: f64,
    sigma: f64,
    seed: u64,
) -> Result<LabeledDataset<F>> {
    if k < 2 {
        return Err(Error::InvalidConfig("gmm_ring needs k >= 2".into()));
    }
    if n < k {
        return Err(Error::InsufficientSamples(format!("{n} points for {k} blobs")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, sigma.max(0.0))
        .map_err(|e| Error::InvalidConfig(format!("invalid sigma {sigma}: {e}")))?;
    let mut points = Array2::zeros((n, 2));
    let mut labels = Vec::with_capacity(n);
    for row in 0..n {
        let class = row % k;
        let angle = 2.0 * std::f64::consts::PI * class as f64 / k as f64;
        points[(row, 0)] = F::of(radius * angle.cos() + noise.sample(&mut rng));
        points[(row, 1)] = F::of(radius * angle.sin() + noise.sample(&mut rng));
        labels.push(class);
    }
    LabeledDataset::new(points, labels)
}

/// Keeps only `classes` (relabelled to 0..len), subsampling the
/// over-represented ones without replacement so the empirical masses match
/// `ratios` within 1/N of the retained total.
pub fn subsample_classes<F: Scalar>(
    ds: &LabeledDataset<F>,
    classes: &[usize],
    ratios: &[f64],
    seed: u64,
) -> Result<LabeledDataset<F>> {
    if classes.len() != ratios.len() {
        return Err(Error::LengthMismatch {
            left: classes.len(),
            right: ratios.len(),
        });
    }
    let mut seen = std::collections::HashSet::new();
    for &c in classes {
        if c >= ds.num_classes() {
            return Err(Error::InvalidConfig(format!("class {c} not present")));
        }
        if !seen.insert(c) {
            return Err(Error::InvalidConfig(format!("class {c} listed twice")));
        }
    }
    let total: f64 = ratios.iter().sum();
    if ratios.iter().any(|&r| r <= 0.0) || (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidConfig(format!(
            "ratios must be positive and sum to 1, got {ratios:?}"
        )));
    }

    // Per-class index pools in dataset order.
    let mut pools: Vec<Vec<usize>> = classes.iter().map(|_| Vec::new()).collect();
    for (i, &label) in ds.labels().iter().enumerate() {
        if let Some(pos) = classes.iter().position(|&c| c == label) {
            pools[pos].push(i);
        }
    }

    // Largest total that every class can supply at its requested ratio; the
    // binding class keeps all of its samples and the others are subsampled.
    let feasible_total = pools
        .iter()
        .zip(ratios)
        .map(|(pool, &r)| (pool.len() as f64 / r).floor() as usize)
        .min()
        .expect("at least one class");
    let mut targets = proportional_counts(feasible_total.max(1), ratios).map_err(|_| {
        Error::InsufficientSamples(format!(
            "ratios {ratios:?} unattainable from class sizes {:?}",
            pools.iter().map(Vec::len).collect::<Vec<_>>()
        ))
    })?;
    // Rounding can nudge a target past the pool; clamp it back.
    for (target, pool) in targets.iter_mut().zip(&pools) {
        *target = (*target).min(pool.len());
        if *target == 0 {
            return Err(Error::InsufficientSamples(format!(
                "ratios {ratios:?} leave a class empty"
            )));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut keep: Vec<(usize, usize)> = Vec::new(); // (dataset row, new label)
    for (new_label, (pool, &target)) in pools.iter().zip(&targets).enumerate() {
        let mut pool = pool.clone();
        pool.shuffle(&mut rng);
        pool.truncate(target);
        pool.sort_unstable();
        keep.extend(pool.into_iter().map(|row| (row, new_label)));
    }
    keep.sort_unstable();

    let rows: Vec<usize> = keep.iter().map(|&(r, _)| r).collect();
    let labels: Vec<usize> = keep.iter().map(|&(_, l)| l).collect();
    let points = ds.points().select(Axis(0), &rows);
    LabeledDataset::new(points, labels)
}

/// Relabels each class to the index of its group; `groups` must partition the
/// present labels exactly.
pub fn merge_classes<F: Scalar>(
    ds: &LabeledDataset<F>,
    groups: &[Vec<usize>],
) -> Result<LabeledDataset<F>> {
    let mut mapping = vec![usize::MAX; ds.num_classes()];
    for (group_idx, group) in groups.iter().enumerate() {
        for &label in group {
            if label >= ds.num_classes() {
                return Err(Error::InvalidConfig(format!(
                    "group label {label} not present in dataset"
                )));
            }
            if mapping[label] != usize::MAX {
                return Err(Error::InvalidConfig(format!(
                    "label {label} appears in more than one group"
                )));
            }
            mapping[label] = group_idx;
        }
    }
    if let Some(missing) = mapping.iter().position(|&m| m == usize::MAX) {
        return Err(Error::InvalidConfig(format!(
            "label {missing} is not covered by any group"
        )));
    }
    let labels: Vec<usize> = ds.labels().iter().map(|&l| mapping[l]).collect();
    LabeledDataset::new(ds.points().clone(), labels)
}
