//! Multimodal latent space construction.
//!
//! A uniform draw is reparameterized through learnable logits into a
//! multinoulli mode index, which is then embedded as a scaled one-hot and
//! mixed additively with compact-support uniform noise. With the noise
//! half-width below half the mode spacing the per-mode supports are pairwise
//! disjoint, so the mode of any valid point can be recovered exactly.

use rand::Rng;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Learnable logits parameterizing the mode priors through a softmax.
#[derive(Debug, Clone, PartialEq)]
pub struct ModePriorParams<F> {
    alpha: Vec<F>,
}

impl<F: Scalar> ModePriorParams<F> {
    /// Requires at least two modes, finite logits, and a softmax with all
    /// entries strictly inside (0, 1).
    pub fn new(alpha: Vec<F>) -> Result<Self> {
        if alpha.len() < 2 {
            return Err(Error::InvalidPriors(format!(
                "need at least 2 modes, got {}",
                alpha.len()
            )));
        }
        if alpha.iter().any(|a| !a.is_finite()) {
            return Err(Error::InvalidPriors("non-finite logit".into()));
        }
        let params = Self { alpha };
        let probs = params.softmax();
        if probs.iter().any(|&p| !(p > F::zero()) || !(p < F::one())) {
            return Err(Error::InvalidPriors(
                "softmax entry outside (0, 1); logit spread too extreme".into(),
            ));
        }
        Ok(params)
    }

    /// Uniform priors: all logits zero.
    pub fn uniform(num_modes: usize) -> Result<Self> {
        Self::new(vec![F::zero(); num_modes])
    }

    /// Logits whose softmax reproduces `probs` (up to a floor on zeros).
    /// Returns the params together with the achieved L1 residual.
    pub fn from_probs(probs: &[F]) -> Result<(Self, f64)> {
        const FLOOR: f64 = 1e-6;
        if probs.len() < 2 {
            return Err(Error::InvalidPriors("need at least 2 probabilities".into()));
        }
        let total: f64 = probs.iter().map(|p| p.as_f64()).sum();
        if probs.iter().any(|p| p.as_f64() < 0.0) || (total - 1.0).abs() > 1e-6 {
            return Err(Error::InvalidPriors(format!(
                "target is not a probability vector (sum {total})"
            )));
        }
        let alpha: Vec<F> = probs
            .iter()
            .map(|p| F::of(p.as_f64().max(FLOOR).ln()))
            .collect();
        let params = Self::new(alpha)?;
        let fitted = params.softmax();
        let residual: f64 = fitted
            .iter()
            .zip(probs)
            .map(|(a, b)| (a.as_f64() - b.as_f64()).abs())
            .sum();
        Ok((params, residual))
    }

    pub fn num_modes(&self) -> usize {
        self.alpha.len()
    }

    pub fn logits(&self) -> &[F] {
        &self.alpha
    }

    /// Prior probabilities, computed with the max-logit shift so arbitrarily
    /// large logits do not overflow.
    pub fn softmax(&self) -> Vec<F> {
        let max = self
            .alpha
            .iter()
            .cloned()
            .fold(F::neg_infinity(), F::max);
        let exps: Vec<F> = self.alpha.iter().map(|&a| (a - max).exp()).collect();
        let sum: F = exps.iter().cloned().sum();
        exps.into_iter().map(|e| e / sum).collect()
    }

    /// Cumulative breakpoints of the prior. Monotone non-decreasing with the
    /// last entry pinned to exactly 1, so the reparameterization partitions
    /// [0, 1] for every input.
    pub fn breakpoints(&self) -> Vec<F> {
        let probs = self.softmax();
        let mut out = Vec::with_capacity(probs.len());
        let mut running = F::zero();
        for &p in &probs {
            running = (running + p).min(F::one());
            out.push(running);
        }
        *out.last_mut().expect("at least two modes") = F::one();
        out
    }
}

/// Indicator vector of the mode selected by `nu1`: the unit-step differences
/// of the breakpoints. Exactly one entry is 1 and the rest are 0. The step is
/// right-closed (`step(0) = 1`), which makes boundary inputs deterministic.
pub fn reparam_indicator<F: Scalar>(params: &ModePriorParams<F>, nu1: F) -> Result<Vec<F>> {
    if !(nu1 >= F::zero() && nu1 <= F::one()) {
        return Err(Error::Domain(format!("nu1 must lie in [0, 1], got {nu1}")));
    }
    let step = |t: F| if t >= F::zero() { F::one() } else { F::zero() };
    let breaks = params.breakpoints();
    let mut f = Vec::with_capacity(breaks.len());
    f.push(step(breaks[0] - nu1));
    for i in 1..breaks.len() {
        f.push(step(breaks[i] - nu1) - step(breaks[i - 1] - nu1));
    }
    Ok(f)
}

/// Mode selected by a given uniform draw: argmax of the indicator, lowest
/// index on (measure-zero) ties.
pub fn mode_at<F: Scalar>(params: &ModePriorParams<F>, nu1: F) -> Result<usize> {
    let f = reparam_indicator(params, nu1)?;
    Ok(argmax_lowest(&f))
}

/// Draws a mode index; its distribution equals `params.softmax()`.
pub fn sample_mode<F: Scalar, R: Rng + ?Sized>(params: &ModePriorParams<F>, rng: &mut R) -> usize {
    let nu1 = F::of(rng.random::<f64>());
    mode_at(params, nu1).expect("uniform draw lies in [0, 1]")
}

/// Geometry of the latent space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatentConfig<F> {
    pub num_modes: usize,
    /// Distance between neighbouring mode centres along their one-hot axes.
    pub mode_spacing: F,
    /// Half-width of the uniform noise cube added around each centre.
    pub noise_halfwidth: F,
    /// Extra unconstrained U[-1, 1] coordinates appended after the mode axes.
    pub extra_dims: usize,
}

impl<F: Scalar> LatentConfig<F> {
    /// `noise_halfwidth < mode_spacing / 2` keeps the mode supports disjoint.
    pub fn new(
        num_modes: usize,
        mode_spacing: F,
        noise_halfwidth: F,
        extra_dims: usize,
    ) -> Result<Self> {
        if num_modes < 2 {
            return Err(Error::InvalidConfig(format!(
                "need at least 2 latent modes, got {num_modes}"
            )));
        }
        if !(mode_spacing > F::zero()) || !(noise_halfwidth > F::zero()) {
            return Err(Error::InvalidConfig(
                "mode_spacing and noise_halfwidth must be positive".into(),
            ));
        }
        if !(noise_halfwidth < mode_spacing / F::of(2.0)) {
            return Err(Error::InvalidConfig(format!(
                "noise_halfwidth {noise_halfwidth} must be < mode_spacing/2 = {}",
                mode_spacing / F::of(2.0)
            )));
        }
        Ok(Self {
            num_modes,
            mode_spacing,
            noise_halfwidth,
            extra_dims,
        })
    }

    /// Defaults: spacing 1, noise half-width 0.25, no extra dimensions.
    pub fn with_defaults(num_modes: usize) -> Result<Self> {
        Self::new(num_modes, F::of(1.0), F::of(0.25), 0)
    }

    /// Total latent dimensionality.
    pub fn dim(&self) -> usize {
        self.num_modes + self.extra_dims
    }
}

/// A latent point together with the mode that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentSample<F> {
    pub mode: usize,
    pub point: Vec<F>,
}

/// Draws a mode from the priors and places a point inside that mode's cube:
/// scaled one-hot centre plus uniform noise, extra coordinates U[-1, 1].
pub fn sample_latent<F: Scalar, R: Rng + ?Sized>(
    config: &LatentConfig<F>,
    params: &ModePriorParams<F>,
    rng: &mut R,
) -> LatentSample<F> {
    let mode = sample_mode(params, rng);
    let mut point = Vec::with_capacity(config.dim());
    for i in 0..config.num_modes {
        let centre = if i == mode {
            config.mode_spacing
        } else {
            F::zero()
        };
        let noise = config.noise_halfwidth * F::of(rng.random::<f64>() * 2.0 - 1.0);
        point.push(centre + noise);
    }
    for _ in 0..config.extra_dims {
        point.push(F::of(rng.random::<f64>() * 2.0 - 1.0));
    }
    LatentSample { mode, point }
}

/// Unimodal replacement draw: U[-1, 1] over the full latent dimensionality.
/// The tag is the argmax of the mode axes so downstream code still gets a
/// label, but the supports overlap (nothing is disjoint here).
pub fn sample_unimodal<F: Scalar, R: Rng + ?Sized>(
    config: &LatentConfig<F>,
    rng: &mut R,
) -> LatentSample<F> {
    let point: Vec<F> = (0..config.dim())
        .map(|_| F::of(rng.random::<f64>() * 2.0 - 1.0))
        .collect();
    let mode = argmax_lowest(&point[..config.num_modes]);
    LatentSample { mode, point }
}

/// Recovers the mode of a latent point: argmax over the mode axes. Errors if
/// the top two coordinates tie, which cannot happen for points drawn from
/// disjoint mode supports and therefore signals corrupted input.
pub fn mode_of<F: Scalar>(point: &[F], config: &LatentConfig<F>) -> Result<usize> {
    if point.len() < config.num_modes {
        return Err(Error::ShapeMismatch {
            expected: format!(">= {} coordinates", config.num_modes),
            got: format!("{}", point.len()),
        });
    }
    let axes = &point[..config.num_modes];
    let best = argmax_lowest(axes);
    for (i, &v) in axes.iter().enumerate() {
        if i != best && v == axes[best] {
            return Err(Error::AmbiguousMode(v.as_f64()));
        }
    }
    Ok(best)
}

fn argmax_lowest<F: Scalar>(values: &[F]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}
