//! Adversarial training of the generator/discriminator/inverter triple.
//!
//! One iteration alternates a discriminator update (real vs generated, the
//! usual log loss) with a joint generator/inverter update. The generator
//! minimizes the non-saturating surrogate `-E[log d(g(z))]`; the minimax form
//! has the same fixed points but starves the generator of gradient early on.
//! The inverter is trained with cross-entropy against the sampled latent mode,
//! which pressures the generator to keep latent modes separated in data space
//! and to carry their masses across.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::latent::{
    mode_of, sample_latent, sample_unimodal, LatentConfig, LatentSample, ModePriorParams,
};
use crate::nn::{
    binary_cross_entropy, binary_cross_entropy_grad, categorical_cross_entropy,
    categorical_cross_entropy_grad, one_hot, Activation, Mlp, Optimizer,
};
use crate::scalar::Scalar;

/// The three ablation switches: a multimodal latent space, the presence of a
/// trained inverter, and priors matched to the data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConditionToggles {
    /// Off: latent draws become unimodal U[-1, 1] over the full dimension.
    pub multimodal_latent: bool,
    /// Off: the inverter is frozen and contributes no loss term.
    pub use_inverter: bool,
    /// Off: the prior logits are forced uniform regardless of the data.
    pub matched_prior: bool,
}

impl ConditionToggles {
    pub fn all_on() -> Self {
        Self {
            multimodal_latent: true,
            use_inverter: true,
            matched_prior: true,
        }
    }

    /// The five combinations the ablation matrix studies. Matched priors only
    /// make sense on top of a multimodal latent plus inverter, so the three
    /// remaining combinations are rejected by the CLI.
    pub fn is_studied_combination(&self) -> bool {
        match (self.multimodal_latent, self.use_inverter, self.matched_prior) {
            (false, false, false)
            | (true, false, false)
            | (false, true, false)
            | (true, true, false)
            | (true, true, true) => true,
            _ => false,
        }
    }

    /// Compact label, uppercase for satisfied conditions: `C1c2c3` means a
    /// multimodal latent with no inverter and unmatched priors.
    pub fn label(&self) -> String {
        let f = |on: bool, name: &str| {
            if on {
                name.to_uppercase()
            } else {
                name.to_lowercase()
            }
        };
        format!(
            "{}{}{}",
            f(self.multimodal_latent, "c1"),
            f(self.use_inverter, "c2"),
            f(self.matched_prior, "c3")
        )
    }

    /// Parses the [`label`](Self::label) form.
    pub fn parse_label(s: &str) -> Result<Self> {
        let valid = |c: &str, lower: &str, upper: &str| -> Result<bool> {
            if c == upper {
                Ok(true)
            } else if c == lower {
                Ok(false)
            } else {
                Err(Error::InvalidConfig(format!(
                    "bad condition token '{c}' in '{s}'"
                )))
            }
        };
        if s.len() != 6 {
            return Err(Error::InvalidConfig(format!(
                "condition label must look like 'C1C2c3', got '{s}'"
            )));
        }
        Ok(Self {
            multimodal_latent: valid(&s[0..2], "c1", "C1")?,
            use_inverter: valid(&s[2..4], "c2", "C2")?,
            matched_prior: valid(&s[4..6], "c3", "C3")?,
        })
    }
}

/// Hyperparameters for one training run.
#[derive(Debug, Clone)]
pub struct TrainConfig<F> {
    pub latent: LatentConfig<F>,
    /// Requested priors; forced uniform when `toggles.matched_prior` is off.
    pub alpha: ModePriorParams<F>,
    pub batch_size: usize,
    pub steps: usize,
    pub lr_g: f64,
    pub lr_d: f64,
    pub lr_h: f64,
    /// Weight of the inverter cross-entropy term in the generator objective.
    pub inverter_weight: f64,
    /// Discriminator updates per generator/inverter update.
    pub d_steps: usize,
    /// Target value for real samples in the discriminator loss; values below
    /// 1 apply one-sided label smoothing.
    pub real_label_target: f64,
    pub hidden_units: usize,
    pub hidden_activation: Activation,
    /// Sigmoid generator head for pixel data in [0, 1]; identity otherwise.
    pub sigmoid_generator_head: bool,
    pub trace_every: usize,
    pub seed: u64,
    pub toggles: ConditionToggles,
}

impl<F: Scalar> TrainConfig<F> {
    /// Defaults sized for the 2-D synthetic tasks; image-scale data (100+
    /// dimensions) gets wider layers and a sigmoid generator head.
    pub fn for_data(data_dim: usize, num_modes: usize, seed: u64) -> Result<Self> {
        let image_like = data_dim >= 100;
        Ok(Self {
            latent: LatentConfig::with_defaults(num_modes)?,
            alpha: ModePriorParams::uniform(num_modes)?,
            batch_size: 128,
            steps: 5000,
            lr_g: 2e-4,
            lr_d: 2e-4,
            lr_h: 2e-4,
            inverter_weight: 1.0,
            d_steps: 1,
            real_label_target: 1.0,
            hidden_units: if image_like { 256 } else { 64 },
            hidden_activation: Activation::Relu,
            sigmoid_generator_head: image_like,
            trace_every: 100,
            seed,
            toggles: ConditionToggles::all_on(),
        })
    }

    fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be positive".into()));
        }
        if self.alpha.num_modes() != self.latent.num_modes {
            return Err(Error::InvalidConfig(format!(
                "{} prior logits for {} latent modes",
                self.alpha.num_modes(),
                self.latent.num_modes
            )));
        }
        if self.lr_g <= 0.0 || self.lr_d <= 0.0 || self.lr_h <= 0.0 {
            return Err(Error::InvalidConfig("learning rates must be positive".into()));
        }
        if self.inverter_weight < 0.0 {
            return Err(Error::InvalidConfig("inverter_weight must be >= 0".into()));
        }
        if self.d_steps == 0 {
            return Err(Error::InvalidConfig("d_steps must be positive".into()));
        }
        if !(0.5 < self.real_label_target && self.real_label_target <= 1.0) {
            return Err(Error::InvalidConfig(
                "real_label_target must lie in (0.5, 1]".into(),
            ));
        }
        if self.trace_every == 0 {
            return Err(Error::InvalidConfig("trace_every must be positive".into()));
        }
        Ok(())
    }

    /// The prior actually used for sampling, after the matched-prior toggle.
    pub fn effective_alpha(&self) -> Result<ModePriorParams<F>> {
        if self.toggles.matched_prior {
            Ok(self.alpha.clone())
        } else {
            ModePriorParams::uniform(self.latent.num_modes)
        }
    }
}

/// Generator, discriminator, and inverter networks.
#[derive(Debug, Clone, PartialEq)]
pub struct GanModel<F> {
    pub generator: Mlp<F>,
    pub discriminator: Mlp<F>,
    pub inverter: Mlp<F>,
}

impl<F: Scalar> GanModel<F> {
    /// Two hidden relu layers everywhere; sigmoid discriminator head, softmax
    /// inverter head, identity or sigmoid generator head.
    pub fn new<R: Rng + ?Sized>(
        latent_dim: usize,
        data_dim: usize,
        num_modes: usize,
        hidden: usize,
        hidden_activation: Activation,
        sigmoid_generator_head: bool,
        rng: &mut R,
    ) -> Result<Self> {
        let g_head = if sigmoid_generator_head {
            Activation::Sigmoid
        } else {
            Activation::Identity
        };
        let act = hidden_activation;
        let generator = Mlp::new(&[latent_dim, hidden, hidden, data_dim], &[act, act, g_head], rng)?;
        let discriminator = Mlp::new(
            &[data_dim, hidden, hidden, 1],
            &[act, act, Activation::Sigmoid],
            rng,
        )?;
        let inverter = Mlp::new(
            &[data_dim, hidden, hidden, num_modes],
            &[act, act, Activation::Softmax],
            rng,
        )?;
        Ok(Self {
            generator,
            discriminator,
            inverter,
        })
    }
}

/// Stacks latent samples into a `B x dim` matrix plus the mode tags.
pub fn latent_to_matrix<F: Scalar>(batch: &[LatentSample<F>]) -> (Array2<F>, Vec<usize>) {
    let dim = batch.first().map_or(0, |s| s.point.len());
    let points = Array2::from_shape_fn((batch.len(), dim), |(i, j)| batch[i].point[j]);
    let modes = batch.iter().map(|s| s.mode).collect();
    (points, modes)
}

/// One loss sample on the trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub step: usize,
    pub d_loss: f64,
    pub g_loss: f64,
    pub inv_loss: f64,
}

/// Losses recorded during training plus the first latent batch, kept so the
/// latent construction of a finished run can be audited.
#[derive(Debug, Clone, Default)]
pub struct TrainingTrace<F> {
    pub rows: Vec<TraceRow>,
    pub latent_probe: Vec<LatentSample<F>>,
}

/// A trained triple plus everything needed to sample from it.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel<F> {
    pub model: GanModel<F>,
    pub alpha: ModePriorParams<F>,
    pub latent: LatentConfig<F>,
    pub toggles: ConditionToggles,
}

impl<F: Scalar> TrainedModel<F> {
    /// Draws a latent batch consistent with how the model was trained.
    pub fn latent_batch<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<LatentSample<F>> {
        (0..n)
            .map(|_| {
                if self.toggles.multimodal_latent {
                    sample_latent(&self.latent, &self.alpha, rng)
                } else {
                    sample_unimodal(&self.latent, rng)
                }
            })
            .collect()
    }

    /// Generates `n` data points, each tagged with the latent mode that
    /// produced it. The tags partition the sample set.
    pub fn generate<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<(Array2<F>, Vec<usize>)> {
        if n == 0 {
            return Ok((Array2::zeros((0, self.model.generator.output_dim())), Vec::new()));
        }
        let batch = self.latent_batch(n, rng);
        let (z, modes) = latent_to_matrix(&batch);
        let x = self.model.generator.forward(&z)?;
        Ok((x, modes))
    }

    /// Fraction of fresh latent draws whose mode the inverter recovers from
    /// the generated point.
    pub fn inverter_consistency<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<f64> {
        let batch = self.latent_batch(n, rng);
        let (z, _) = latent_to_matrix(&batch);
        let x = self.model.generator.forward(&z)?;
        let h = self.model.inverter.forward(&x)?;
        let mut agree = 0usize;
        for (sample, h_row) in batch.iter().zip(h.rows()) {
            let predicted = argmax(h_row.iter().cloned());
            let target = if self.toggles.multimodal_latent {
                mode_of(&sample.point, &self.latent)?
            } else {
                sample.mode
            };
            if predicted == target {
                agree += 1;
            }
        }
        Ok(agree as f64 / n as f64)
    }
}

fn argmax<F: Scalar>(values: impl Iterator<Item = F>) -> usize {
    let mut best = 0;
    let mut best_v = F::neg_infinity();
    for (i, v) in values.enumerate() {
        if v > best_v {
            best_v = v;
            best = i;
        }
    }
    best
}

/// Owns the model and optimizer state during a run.
pub struct Trainer<F> {
    pub model: GanModel<F>,
    config: TrainConfig<F>,
    alpha: ModePriorParams<F>,
    opt_g: Optimizer<F>,
    opt_d: Optimizer<F>,
    opt_h: Optimizer<F>,
    steps_taken: usize,
}

impl<F: Scalar> Trainer<F> {
    pub fn new(config: TrainConfig<F>, data_dim: usize, rng: &mut impl Rng) -> Result<Self> {
        config.validate()?;
        let alpha = config.effective_alpha()?;
        let model = GanModel::new(
            config.latent.dim(),
            data_dim,
            config.latent.num_modes,
            config.hidden_units,
            config.hidden_activation,
            config.sigmoid_generator_head,
            rng,
        )?;
        Ok(Self {
            opt_g: Optimizer::adam(config.lr_g),
            opt_d: Optimizer::adam(config.lr_d),
            opt_h: Optimizer::adam(config.lr_h),
            alpha,
            model,
            config,
            steps_taken: 0,
        })
    }

    pub fn effective_alpha(&self) -> &ModePriorParams<F> {
        &self.alpha
    }

    /// Network outputs must stay finite. Losses alone cannot flag divergence
    /// because the probability clamp hides NaN predictions, so the raw
    /// outputs are checked before clamping.
    fn ensure_finite(&self, outputs: &[&Array2<F>]) -> Result<()> {
        for out in outputs {
            if out.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    step: self.steps_taken,
                    d_loss: f64::NAN,
                    g_loss: f64::NAN,
                    inv_loss: f64::NAN,
                });
            }
        }
        Ok(())
    }

    /// Draws one latent batch according to the multimodal toggle.
    pub fn draw_latent<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<LatentSample<F>> {
        (0..self.config.batch_size)
            .map(|_| {
                if self.config.toggles.multimodal_latent {
                    sample_latent(&self.config.latent, &self.alpha, rng)
                } else {
                    sample_unimodal(&self.config.latent, rng)
                }
            })
            .collect()
    }

    /// Updates only the discriminator towards separating `real` from
    /// generated samples; returns the minimized loss value.
    pub fn discriminator_step(
        &mut self,
        real: &Array2<F>,
        latent: &[LatentSample<F>],
    ) -> Result<F> {
        if real.nrows() == 0 || latent.is_empty() {
            return Err(Error::EmptyInput("discriminator batch"));
        }
        let (z, _) = latent_to_matrix(latent);
        let fake = self.model.generator.forward(&z)?;

        let ones = Array2::from_elem((real.nrows(), 1), F::of(self.config.real_label_target));
        let zeros = Array2::zeros((fake.nrows(), 1));

        let tape_real = self.model.discriminator.forward_traced(real)?;
        let tape_fake = self.model.discriminator.forward_traced(&fake)?;
        self.ensure_finite(&[&fake, tape_real.output(), tape_fake.output()])?;
        let loss = binary_cross_entropy(tape_real.output(), &ones)?
            + binary_cross_entropy(tape_fake.output(), &zeros)?;

        let grad_real = binary_cross_entropy_grad(tape_real.output(), &ones)?;
        let grad_fake = binary_cross_entropy_grad(tape_fake.output(), &zeros)?;
        let (mut grads, _) = self.model.discriminator.backward(&tape_real, &grad_real)?;
        let (grads_fake, _) = self.model.discriminator.backward(&tape_fake, &grad_fake)?;
        grads.add_assign(&grads_fake)?;
        self.opt_d.step(&mut self.model.discriminator, &grads)?;
        Ok(loss)
    }

    /// Joint generator/inverter update on one latent batch; returns the
    /// generator loss and the (unweighted) inverter cross-entropy. With the
    /// inverter disabled the second component is reported as zero and the
    /// inverter parameters are left untouched.
    pub fn generator_inverter_step(&mut self, latent: &[LatentSample<F>]) -> Result<(F, F)> {
        if latent.is_empty() {
            return Err(Error::EmptyInput("generator batch"));
        }
        let (z, modes) = latent_to_matrix(latent);
        let tape_g = self.model.generator.forward_traced(&z)?;
        let x = tape_g.output().clone();

        let ones = Array2::from_elem((x.nrows(), 1), F::one());
        let tape_d = self.model.discriminator.forward_traced(&x)?;
        self.ensure_finite(&[&x, tape_d.output()])?;
        let gen_loss = binary_cross_entropy(tape_d.output(), &ones)?;
        let d_grad = binary_cross_entropy_grad(tape_d.output(), &ones)?;
        let (_, mut dx) = self.model.discriminator.backward(&tape_d, &d_grad)?;

        let weight = F::of(self.config.inverter_weight);
        let mut inv_loss = F::zero();
        let mut h_grads = None;
        if self.config.toggles.use_inverter {
            let targets = one_hot(&modes, self.config.latent.num_modes)?;
            let tape_h = self.model.inverter.forward_traced(&x)?;
            self.ensure_finite(&[tape_h.output()])?;
            inv_loss = categorical_cross_entropy(tape_h.output(), &targets)?;
            let mut ce_grad = categorical_cross_entropy_grad(tape_h.output(), &targets)?;
            ce_grad.mapv_inplace(|v| v * weight);
            let (grads, dx_h) = self.model.inverter.backward(&tape_h, &ce_grad)?;
            dx += &dx_h;
            h_grads = Some(grads);
        }

        let (g_grads, _) = self.model.generator.backward(&tape_g, &dx)?;
        self.opt_g.step(&mut self.model.generator, &g_grads)?;
        if let Some(grads) = h_grads {
            if self.config.inverter_weight > 0.0 {
                self.opt_h.step(&mut self.model.inverter, &grads)?;
            }
        }
        self.steps_taken += 1;
        Ok((gen_loss, inv_loss))
    }
}

/// Runs the full alternating loop. Reproducible: every random draw comes from
/// one stream seeded with `config.seed`. Aborts with a diagnostic error the
/// moment any loss goes non-finite.
pub fn train<F: Scalar>(
    config: &TrainConfig<F>,
    data: &crate::data::LabeledDataset<F>,
) -> Result<(TrainedModel<F>, TrainingTrace<F>)> {
    if data.is_empty() {
        return Err(Error::EmptyInput("training dataset"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut trainer = Trainer::new(config.clone(), data.dim(), &mut rng)?;
    let mut trace = TrainingTrace::default();

    let n = data.len();
    for step in 0..config.steps {
        let mut d_loss = F::zero();
        for sub in 0..config.d_steps {
            let real_rows: Vec<usize> = (0..config.batch_size)
                .map(|_| rng.random_range(0..n))
                .collect();
            let real = data.points().select(ndarray::Axis(0), &real_rows);
            let latent_d = trainer.draw_latent(&mut rng);
            if step == 0 && sub == 0 {
                trace.latent_probe = latent_d.clone();
            }
            d_loss = trainer.discriminator_step(&real, &latent_d)?;
        }

        let latent_g = trainer.draw_latent(&mut rng);
        let (g_loss, inv_loss) = trainer.generator_inverter_step(&latent_g)?;

        let (d_loss, g_loss, inv_loss) = (d_loss.as_f64(), g_loss.as_f64(), inv_loss.as_f64());
        if !d_loss.is_finite() || !g_loss.is_finite() || !inv_loss.is_finite() {
            return Err(Error::NonFinite {
                step,
                d_loss,
                g_loss,
                inv_loss,
            });
        }
        if step % config.trace_every == 0 || step + 1 == config.steps {
            trace.rows.push(TraceRow {
                step,
                d_loss,
                g_loss,
                inv_loss,
            });
        }
    }

    let trained = TrainedModel {
        alpha: trainer.alpha.clone(),
        latent: config.latent,
        toggles: config.toggles,
        model: trainer.model,
    };
    Ok((trained, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::two_moons;

    fn small_config(seed: u64) -> TrainConfig<f64> {
        let mut cfg = TrainConfig::for_data(2, 2, seed).unwrap();
        cfg.steps = 50;
        cfg.batch_size = 32;
        cfg
    }

    fn bits(params: &[f64]) -> Vec<u64> {
        params.iter().map(|p| p.to_bits()).collect()
    }

    #[test]
    fn condition_labels_round_trip() {
        for toggles in [
            ConditionToggles {
                multimodal_latent: false,
                use_inverter: false,
                matched_prior: false,
            },
            ConditionToggles {
                multimodal_latent: true,
                use_inverter: false,
                matched_prior: false,
            },
            ConditionToggles::all_on(),
        ] {
            assert_eq!(
                ConditionToggles::parse_label(&toggles.label()).unwrap(),
                toggles
            );
        }
        assert!(ConditionToggles::parse_label("C1x2C3").is_err());
    }

    #[test]
    fn studied_combinations() {
        let mk = |a, b, c| ConditionToggles {
            multimodal_latent: a,
            use_inverter: b,
            matched_prior: c,
        };
        assert!(mk(false, false, false).is_studied_combination());
        assert!(mk(true, true, true).is_studied_combination());
        assert!(mk(false, true, false).is_studied_combination());
        assert!(!mk(false, false, true).is_studied_combination());
        assert!(!mk(true, false, true).is_studied_combination());
    }

    #[test]
    fn zero_steps_returns_initialized_model() {
        let data = two_moons::<f64>(200, [0.8, 0.2], 0.08, 1).unwrap();
        let mut cfg = small_config(3);
        cfg.steps = 0;
        let (trained, trace) = train(&cfg, &data).unwrap();
        assert!(trace.rows.is_empty());

        // Same seed, fresh build: the parameters must be the untouched init.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let fresh = Trainer::new(cfg, data.dim(), &mut rng).unwrap();
        assert_eq!(
            bits(&trained.model.generator.flat_params()),
            bits(&fresh.model.generator.flat_params())
        );
    }

    #[test]
    fn training_is_seed_deterministic() {
        let data = two_moons::<f64>(200, [0.8, 0.2], 0.08, 1).unwrap();
        let cfg = small_config(7);
        let (a, trace_a) = train(&cfg, &data).unwrap();
        let (b, trace_b) = train(&cfg, &data).unwrap();
        assert_eq!(trace_a.rows, trace_b.rows);
        assert_eq!(
            bits(&a.model.generator.flat_params()),
            bits(&b.model.generator.flat_params())
        );
        assert_eq!(
            bits(&a.model.inverter.flat_params()),
            bits(&b.model.inverter.flat_params())
        );
    }

    #[test]
    fn inverter_off_never_touches_h() {
        let data = two_moons::<f64>(200, [0.8, 0.2], 0.08, 1).unwrap();
        let mut cfg = small_config(5);
        cfg.toggles.use_inverter = false;
        cfg.toggles.matched_prior = false;

        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let init = Trainer::new(cfg.clone(), data.dim(), &mut rng).unwrap();
        let h_before = bits(&init.model.inverter.flat_params());

        let (trained, trace) = train(&cfg, &data).unwrap();
        assert_eq!(bits(&trained.model.inverter.flat_params()), h_before);
        assert!(trace.rows.iter().all(|r| r.inv_loss == 0.0));
    }

    #[test]
    fn zero_weight_matches_plain_gan_generator_updates() {
        // With lambda = 0 the generator update must be identical whether the
        // inverter participates or not, and h must not move.
        let data = two_moons::<f64>(100, [0.5, 0.5], 0.08, 2).unwrap();
        let build = |use_inverter: bool| {
            let mut cfg = small_config(11);
            cfg.inverter_weight = 0.0;
            cfg.toggles.use_inverter = use_inverter;
            cfg.toggles.matched_prior = false;
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            let mut t = Trainer::new(cfg, data.dim(), &mut rng).unwrap();
            let latent = t.draw_latent(&mut rng);
            let h_before = bits(&t.model.inverter.flat_params());
            t.generator_inverter_step(&latent).unwrap();
            (bits(&t.model.generator.flat_params()), h_before, bits(&t.model.inverter.flat_params()))
        };
        let (g_with, h_init, h_after) = build(true);
        let (g_without, _, _) = build(false);
        assert_eq!(g_with, g_without);
        assert_eq!(h_init, h_after);
    }

    #[test]
    fn unmatched_prior_forces_uniform_alpha() {
        let mut cfg = small_config(1);
        cfg.alpha = ModePriorParams::new(vec![0.7f64.ln(), 0.3f64.ln()]).unwrap();
        cfg.toggles.matched_prior = false;
        let alpha = cfg.effective_alpha().unwrap();
        assert_eq!(alpha.softmax(), vec![0.5, 0.5]);
        cfg.toggles.matched_prior = true;
        let alpha = cfg.effective_alpha().unwrap();
        assert!((alpha.softmax()[0] - 0.7).abs() < 1e-12);
    }

    #[test]
    fn constant_half_discriminator_loss_is_two_ln_two() {
        // A fresh discriminator with zeroed final layer outputs exactly 0.5,
        // so the combined real+fake loss lands at 2 ln 2.
        let data = two_moons::<f64>(64, [0.5, 0.5], 0.08, 9).unwrap();
        let cfg = small_config(9);
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut t = Trainer::new(cfg, data.dim(), &mut rng).unwrap();
        for layer in t.model.discriminator.layers_mut().last_mut() {
            layer.weights.fill(0.0);
            layer.bias.fill(0.0);
        }
        let latent = t.draw_latent(&mut rng);
        let loss = t
            .discriminator_step(&data.points().slice(ndarray::s![..32, ..]).to_owned(), &latent)
            .unwrap();
        assert!((loss - 2.0 * std::f64::consts::LN_2).abs() < 1e-9);
    }

    #[test]
    fn nan_training_aborts_with_diagnostics() {
        let data = two_moons::<f64>(100, [0.5, 0.5], 0.08, 2).unwrap();
        let mut cfg = small_config(4);
        cfg.lr_g = f64::INFINITY;
        cfg.steps = 20;
        match train(&cfg, &data) {
            Err(Error::NonFinite { .. }) => {}
            other => panic!("expected NonFinite abort, got {other:?}"),
        }
    }

    #[test]
    fn generate_tags_partition_and_empty_case() {
        let data = two_moons::<f64>(100, [0.5, 0.5], 0.08, 2).unwrap();
        let mut cfg = small_config(8);
        cfg.steps = 5;
        let (trained, _) = train(&cfg, &data).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (x, tags) = trained.generate(500, &mut rng).unwrap();
        assert_eq!(x.nrows(), 500);
        assert_eq!(tags.len(), 500);
        assert!(tags.iter().all(|&t| t < 2));
        let (x, tags) = trained.generate(0, &mut rng).unwrap();
        assert_eq!(x.nrows(), 0);
        assert!(tags.is_empty());
    }

    #[test]
    fn generated_tag_mass_tracks_alpha() {
        let data = two_moons::<f64>(100, [0.7, 0.3], 0.08, 2).unwrap();
        let mut cfg = small_config(12);
        cfg.steps = 1;
        cfg.alpha = ModePriorParams::new(vec![0.7f64.ln(), 0.3f64.ln()]).unwrap();
        let (trained, _) = train(&cfg, &data).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let (_, tags) = trained.generate(100_000, &mut rng).unwrap();
        let zero_frac = tags.iter().filter(|&&t| t == 0).count() as f64 / 100_000.0;
        assert!((zero_frac - 0.7).abs() < 0.006, "tag mass {zero_frac}");
    }

    #[test]
    fn trace_rows_follow_the_schedule() {
        let data = two_moons::<f64>(100, [0.5, 0.5], 0.08, 2).unwrap();
        let mut cfg = small_config(6);
        cfg.steps = 250;
        cfg.trace_every = 100;
        let (_, trace) = train(&cfg, &data).unwrap();
        let steps: Vec<usize> = trace.rows.iter().map(|r| r.step).collect();
        assert_eq!(steps, vec![0, 100, 200, 249]);
    }
}
