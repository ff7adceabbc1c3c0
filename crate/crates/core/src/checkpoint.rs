//! Binary checkpoint container.
//!
//! Little-endian layout, documented in the README:
//!
//! ```text
//! magic   b"MGCK"          version u32 = 1     scalar width u32 (4 | 8)
//! toggles u8 x 3            (multimodal, inverter, matched prior)
//! latent  num_modes u32, extra_dims u32, mode_spacing F, noise_halfwidth F
//! alpha   num_modes x F
//! nets    generator, discriminator, inverter, each:
//!         num_layers u32, then per layer
//!           n_in u32, n_out u32, activation u8,
//!           weights row-major (n_in * n_out x F), bias (n_out x F)
//! ```
//!
//! Values are raw IEEE bit patterns, so save/load round-trips bit-exactly.

use std::path::Path;

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::latent::{LatentConfig, ModePriorParams};
use crate::nn::{Activation, Mlp};
use crate::scalar::Scalar;
use crate::train::{ConditionToggles, GanModel, TrainedModel};

const MAGIC: &[u8; 4] = b"MGCK";
const VERSION: u32 = 1;

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, count: usize) -> Result<&'a [u8]> {
        if self.pos + count > self.bytes.len() {
            return Err(Error::Checkpoint(format!(
                "truncated: needed {} bytes, have {}",
                self.pos + count,
                self.bytes.len()
            )));
        }
        let s = &self.bytes[self.pos..self.pos + count];
        self.pos += count;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn scalar<F: Scalar>(&mut self) -> Result<F> {
        Ok(F::read_le(self.take(F::WIDTH)?))
    }
}

fn write_mlp<F: Scalar>(out: &mut Vec<u8>, net: &Mlp<F>) {
    out.extend_from_slice(&(net.num_layers() as u32).to_le_bytes());
    for layer in net.layers() {
        out.extend_from_slice(&(layer.weights.nrows() as u32).to_le_bytes());
        out.extend_from_slice(&(layer.weights.ncols() as u32).to_le_bytes());
        out.push(layer.activation.tag());
        for &w in layer.weights.iter() {
            w.write_le(out);
        }
        for &b in layer.bias.iter() {
            b.write_le(out);
        }
    }
}

fn read_mlp<F: Scalar>(cur: &mut Cursor) -> Result<Mlp<F>> {
    let num_layers = cur.u32()? as usize;
    if num_layers == 0 {
        return Err(Error::Checkpoint("network with zero layers".into()));
    }
    let mut layers = Vec::with_capacity(num_layers);
    for _ in 0..num_layers {
        let n_in = cur.u32()? as usize;
        let n_out = cur.u32()? as usize;
        let activation = Activation::from_tag(cur.u8()?)?;
        let mut weights = Array2::zeros((n_in, n_out));
        for w in weights.iter_mut() {
            *w = cur.scalar::<F>()?;
        }
        let mut bias = Array1::zeros(n_out);
        for b in bias.iter_mut() {
            *b = cur.scalar::<F>()?;
        }
        layers.push(crate::nn::Layer {
            weights,
            bias,
            activation,
        });
    }
    Ok(Mlp::from_layers(layers))
}

/// Serializes a trained model to bytes.
pub fn encode<F: Scalar>(trained: &TrainedModel<F>) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(F::WIDTH as u32).to_le_bytes());
    out.push(trained.toggles.multimodal_latent as u8);
    out.push(trained.toggles.use_inverter as u8);
    out.push(trained.toggles.matched_prior as u8);
    out.extend_from_slice(&(trained.latent.num_modes as u32).to_le_bytes());
    out.extend_from_slice(&(trained.latent.extra_dims as u32).to_le_bytes());
    trained.latent.mode_spacing.write_le(&mut out);
    trained.latent.noise_halfwidth.write_le(&mut out);
    for &a in trained.alpha.logits() {
        a.write_le(&mut out);
    }
    write_mlp(&mut out, &trained.model.generator);
    write_mlp(&mut out, &trained.model.discriminator);
    write_mlp(&mut out, &trained.model.inverter);
    out
}

/// Parses checkpoint bytes back into a trained model.
pub fn decode<F: Scalar>(bytes: &[u8]) -> Result<TrainedModel<F>> {
    let mut cur = Cursor { bytes, pos: 0 };
    if cur.take(4)? != MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let version = cur.u32()?;
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let width = cur.u32()? as usize;
    if width != F::WIDTH {
        return Err(Error::Checkpoint(format!(
            "scalar width {width} does not match the requested type ({})",
            F::WIDTH
        )));
    }
    let toggles = ConditionToggles {
        multimodal_latent: cur.u8()? != 0,
        use_inverter: cur.u8()? != 0,
        matched_prior: cur.u8()? != 0,
    };
    let num_modes = cur.u32()? as usize;
    let extra_dims = cur.u32()? as usize;
    let mode_spacing = cur.scalar::<F>()?;
    let noise_halfwidth = cur.scalar::<F>()?;
    let latent = LatentConfig::new(num_modes, mode_spacing, noise_halfwidth, extra_dims)?;
    let mut logits = Vec::with_capacity(num_modes);
    for _ in 0..num_modes {
        logits.push(cur.scalar::<F>()?);
    }
    let alpha = ModePriorParams::new(logits)?;
    let generator = read_mlp(&mut cur)?;
    let discriminator = read_mlp(&mut cur)?;
    let inverter = read_mlp(&mut cur)?;
    if cur.pos != bytes.len() {
        return Err(Error::Checkpoint(format!(
            "{} trailing bytes",
            bytes.len() - cur.pos
        )));
    }
    Ok(TrainedModel {
        model: GanModel {
            generator,
            discriminator,
            inverter,
        },
        alpha,
        latent,
        toggles,
    })
}

/// Writes a checkpoint file.
pub fn save<F: Scalar>(trained: &TrainedModel<F>, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, encode(trained))?;
    Ok(())
}

/// Reads a checkpoint file.
pub fn load<F: Scalar>(path: impl AsRef<Path>) -> Result<TrainedModel<F>> {
    let bytes = std::fs::read(path)?;
    decode(&bytes)
}
