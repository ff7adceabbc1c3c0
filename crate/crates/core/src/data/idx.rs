//! IDX container parsing and writing (the MNIST on-disk format).
//!
//! Layout is big-endian throughout: a u32 magic (0x00000803 for image files,
//! 0x00000801 for label files), one u32 per dimension size, then the raw
//! unsigned-byte payload.

use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, IdxError, Result};
use crate::scalar::Scalar;

use super::LabeledDataset;

pub const IMAGE_MAGIC: u32 = 0x0000_0803;
pub const LABEL_MAGIC: u32 = 0x0000_0801;

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: String,
}

impl<'a> Reader<'a> {
    fn take(&mut self, count: usize) -> Result<&'a [u8]> {
        if self.pos + count > self.bytes.len() {
            return Err(IdxError::Truncated {
                path: self.path.clone(),
                needed: self.pos + count,
                available: self.bytes.len(),
            }
            .into());
        }
        let slice = &self.bytes[self.pos..self.pos + count];
        self.pos += count;
        Ok(slice)
    }

    fn read_u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
    }
}

/// Parses a pair of in-memory IDX buffers into a dataset with pixels scaled
/// to [0, 1].
pub fn parse_idx<F: Scalar>(
    image_bytes: &[u8],
    label_bytes: &[u8],
    image_path: &str,
    label_path: &str,
) -> Result<LabeledDataset<F>> {
    let mut images = Reader {
        bytes: image_bytes,
        pos: 0,
        path: image_path.to_string(),
    };
    let magic = images.read_u32()?;
    if magic != IMAGE_MAGIC {
        return Err(IdxError::BadMagic {
            path: image_path.to_string(),
            expected: IMAGE_MAGIC,
            found: magic,
        }
        .into());
    }
    let n = images.read_u32()? as usize;
    let rows = images.read_u32()? as usize;
    let cols = images.read_u32()? as usize;
    let dim = rows * cols;
    let payload = images.take(n * dim)?;

    let mut labels = Reader {
        bytes: label_bytes,
        pos: 0,
        path: label_path.to_string(),
    };
    let magic = labels.read_u32()?;
    if magic != LABEL_MAGIC {
        return Err(IdxError::BadMagic {
            path: label_path.to_string(),
            expected: LABEL_MAGIC,
            found: magic,
        }
        .into());
    }
    let n_labels = labels.read_u32()? as usize;
    if n_labels != n {
        return Err(IdxError::CountMismatch {
            images: n,
            labels: n_labels,
        }
        .into());
    }
    let label_payload = labels.take(n_labels)?;

    let scale = F::one() / F::of(255.0);
    let points = Array2::from_shape_fn((n, dim), |(i, j)| {
        F::of_usize(payload[i * dim + j] as usize) * scale
    });
    let labels: Vec<usize> = label_payload.iter().map(|&b| b as usize).collect();
    LabeledDataset::new(points, labels)
}

/// Loads an image/label file pair from disk.
pub fn load_idx<F: Scalar>(
    images_path: impl AsRef<Path>,
    labels_path: impl AsRef<Path>,
) -> Result<LabeledDataset<F>> {
    let image_bytes = std::fs::read(&images_path)?;
    let label_bytes = std::fs::read(&labels_path)?;
    parse_idx(
        &image_bytes,
        &label_bytes,
        &images_path.as_ref().display().to_string(),
        &labels_path.as_ref().display().to_string(),
    )
}

/// Serializes a dataset back to IDX bytes. Pixel values are rescaled to
/// bytes with rounding, so a dataset parsed from IDX re-encodes to the exact
/// original payload. `rows`/`cols` must multiply to the dataset dimension.
pub fn encode_idx<F: Scalar>(
    ds: &LabeledDataset<F>,
    rows: usize,
    cols: usize,
) -> Result<(Vec<u8>, Vec<u8>)> {
    if rows * cols != ds.dim() {
        return Err(Error::ShapeMismatch {
            expected: format!("rows * cols == {}", ds.dim()),
            got: format!("{rows} * {cols}"),
        });
    }
    let n = ds.len();
    let mut image_bytes = Vec::with_capacity(16 + n * ds.dim());
    image_bytes.extend_from_slice(&IMAGE_MAGIC.to_be_bytes());
    image_bytes.extend_from_slice(&(n as u32).to_be_bytes());
    image_bytes.extend_from_slice(&(rows as u32).to_be_bytes());
    image_bytes.extend_from_slice(&(cols as u32).to_be_bytes());
    for &v in ds.points().iter() {
        let byte = (v.as_f64() * 255.0).round().clamp(0.0, 255.0) as u8;
        image_bytes.push(byte);
    }

    let mut label_bytes = Vec::with_capacity(8 + n);
    label_bytes.extend_from_slice(&LABEL_MAGIC.to_be_bytes());
    label_bytes.extend_from_slice(&(n as u32).to_be_bytes());
    for &l in ds.labels() {
        if l > u8::MAX as usize {
            return Err(Error::Domain(format!("label {l} does not fit in a byte")));
        }
        label_bytes.push(l as u8);
    }
    Ok((image_bytes, label_bytes))
}

/// Writes a dataset to an IDX file pair on disk.
pub fn write_idx<F: Scalar>(
    ds: &LabeledDataset<F>,
    rows: usize,
    cols: usize,
    images_path: impl AsRef<Path>,
    labels_path: impl AsRef<Path>,
) -> Result<()> {
    let (image_bytes, label_bytes) = encode_idx(ds, rows, cols)?;
    std::fs::write(images_path, image_bytes)?;
    std::fs::write(labels_path, label_bytes)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn synthetic_archive(n: usize, rows: usize, cols: usize, seed: u64) -> (Vec<u8>, Vec<u8>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut images = Vec::new();
        images.extend_from_slice(&IMAGE_MAGIC.to_be_bytes());
        images.extend_from_slice(&(n as u32).to_be_bytes());
        images.extend_from_slice(&(rows as u32).to_be_bytes());
        images.extend_from_slice(&(cols as u32).to_be_bytes());
        for _ in 0..n * rows * cols {
            images.push(rng.random::<u8>());
        }
        let mut labels = Vec::new();
        labels.extend_from_slice(&LABEL_MAGIC.to_be_bytes());
        labels.extend_from_slice(&(n as u32).to_be_bytes());
        for i in 0..n {
            labels.push((i % 10) as u8);
        }
        (images, labels)
    }

    #[test]
    fn parses_standard_layout() {
        let (images, labels) = synthetic_archive(50, 28, 28, 1);
        let ds = parse_idx::<f64>(&images, &labels, "img", "lbl").unwrap();
        assert_eq!(ds.len(), 50);
        assert_eq!(ds.dim(), 784);
        assert_eq!(ds.num_classes(), 10);
        assert!(ds.points().iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn bad_magic_is_distinguishable() {
        let (mut images, labels) = synthetic_archive(5, 4, 4, 2);
        images[..4].copy_from_slice(&0u32.to_be_bytes());
        let err = parse_idx::<f64>(&images, &labels, "img", "lbl").unwrap_err();
        assert!(matches!(err, Error::Idx(IdxError::BadMagic { .. })), "{err}");
    }

    #[test]
    fn truncation_is_distinguishable() {
        let (images, labels) = synthetic_archive(5, 4, 4, 3);
        let cut = &images[..images.len() - 7];
        let err = parse_idx::<f64>(cut, &labels, "img", "lbl").unwrap_err();
        assert!(matches!(err, Error::Idx(IdxError::Truncated { .. })), "{err}");
    }

    #[test]
    fn count_mismatch_is_distinguishable() {
        let (images, mut labels) = synthetic_archive(5, 4, 4, 4);
        labels[4..8].copy_from_slice(&4u32.to_be_bytes());
        labels.truncate(8 + 4);
        let err = parse_idx::<f64>(&images, &labels, "img", "lbl").unwrap_err();
        assert!(
            matches!(err, Error::Idx(IdxError::CountMismatch { images: 5, labels: 4 })),
            "{err}"
        );
    }

    #[test]
    fn round_trip_reproduces_bytes() {
        let (images, labels) = synthetic_archive(30, 6, 5, 5);
        let ds = parse_idx::<f64>(&images, &labels, "img", "lbl").unwrap();
        let (re_images, re_labels) = encode_idx(&ds, 6, 5).unwrap();
        assert_eq!(re_images, images);
        assert_eq!(re_labels, labels);
    }

    #[test]
    fn disk_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let (images, labels) = synthetic_archive(12, 3, 3, 6);
        let img_path = dir.path().join("images.idx");
        let lbl_path = dir.path().join("labels.idx");
        std::fs::write(&img_path, &images).unwrap();
        std::fs::write(&lbl_path, &labels).unwrap();
        let ds = load_idx::<f64>(&img_path, &lbl_path).unwrap();
        let img2 = dir.path().join("images2.idx");
        let lbl2 = dir.path().join("labels2.idx");
        write_idx(&ds, 3, 3, &img2, &lbl2).unwrap();
        assert_eq!(std::fs::read(&img2).unwrap(), images);
        assert_eq!(std::fs::read(&lbl2).unwrap(), labels);
    }
}
