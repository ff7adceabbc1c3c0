//! Clustered data generation with GANs.
//!
//! The pieces fit together like this: [`latent`] builds a multimodal latent
//! space whose mode masses are a softmax of learnable logits, [`nn`] provides
//! the dense networks and optimizers, [`train`] runs the adversarial game for
//! a generator/discriminator/inverter triple, [`prior`] recovers unknown mode
//! priors from a small labelled set, [`data`] supplies synthetic and
//! IDX-format datasets, and [`metrics`] scores the result (accuracy under
//! optimal matching, NMI, ARI, KL, modal masses, mode coverage, MMD).
//!
//! Everything numeric is generic over [`Scalar`]; the `Real*` aliases pin the
//! default `f64` instantiations used by the CLI and tests.

pub mod checkpoint;
pub mod data;
pub mod error;
pub mod latent;
pub mod metrics;
pub mod nn;
pub mod prior;
pub mod scalar;
pub mod train;

pub use error::{Error, IdxError, Result};
pub use scalar::Scalar;

/// Default scalar for binaries and tests.
pub type Real = f64;

pub type RealMlp = nn::Mlp<Real>;
pub type RealPriors = latent::ModePriorParams<Real>;
pub type RealLatentConfig = latent::LatentConfig<Real>;
pub type RealDataset = data::LabeledDataset<Real>;
pub type RealGan = train::GanModel<Real>;
pub type RealTrainConfig = train::TrainConfig<Real>;
pub type RealTrained = train::TrainedModel<Real>;
