//! Labelled datasets and their file formats.
//!
//! `PDHD` layout (all integers little-endian):
//!
//! ```text
//! "PDHD" | version u32 (= 1) | N_p u32 | shape tag u8
//!   tag 0: m u32          (flat samples)
//!   tag 1: H u32 W u32 C u32  (HWC images)
//! N_c u32 | N_p * numel x f32 | N_p x u16 labels
//! ```
//!
//! MNIST IDX files are big-endian: images magic `0x00000803` followed by
//! count, rows, cols; labels magic `0x00000801` followed by count. Pixels
//! are scaled by 1/255.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{PdhError, Result};
use crate::model::InputShape;

pub const DATASET_MAGIC: &[u8; 4] = b"PDHD";
pub const DATASET_VERSION: u32 = 1;
pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    shape: InputShape,
    num_classes: usize,
    images: Vec<f64>,
    labels: Vec<u16>,
}

impl LabeledDataset {
    /// `images` holds `labels.len()` samples of `shape.numel()` values each.
    pub fn new(shape: InputShape, num_classes: usize, images: Vec<f64>, labels: Vec<u16>) -> Result<Self> {
        let numel = shape.numel();
        if numel == 0 {
            return Err(PdhError::InvalidArgument("samples have zero size".into()));
        }
        if images.len() != labels.len() * numel {
            return Err(PdhError::LengthMismatch { left: images.len(), right: labels.len() * numel });
        }
        if let Some(&bad) = labels.iter().find(|&&l| l as usize >= num_classes) {
            return Err(PdhError::ClassOutOfRange { class: bad as usize, num_classes });
        }
        if let Some(pos) = images.iter().position(|v| !v.is_finite()) {
            return Err(PdhError::NonFinite(format!("sample value {pos}")));
        }
        Ok(Self { shape, num_classes, images, labels })
    }

    pub fn shape(&self) -> InputShape {
        self.shape
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn image(&self, k: usize) -> &[f64] {
        let n = self.shape.numel();
        &self.images[k * n..(k + 1) * n]
    }

    pub fn label(&self, k: usize) -> u16 {
        self.labels[k]
    }

    pub fn labels(&self) -> &[u16] {
        &self.labels
    }

    /// Sample indices of each class, in dataset order.
    pub fn class_indices(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.num_classes];
        for (k, &l) in self.labels.iter().enumerate() {
            out[l as usize].push(k);
        }
        out
    }

    /// The first `per_class` samples of every class, in dataset order.
    pub fn take_per_class(&self, per_class: usize) -> LabeledDataset {
        let mut seen = vec![0usize; self.num_classes];
        let mut images = Vec::new();
        let mut labels = Vec::new();
        for k in 0..self.len() {
            let l = self.labels[k] as usize;
            if seen[l] < per_class {
                seen[l] += 1;
                images.extend_from_slice(self.image(k));
                labels.push(self.labels[k]);
            }
        }
        LabeledDataset { shape: self.shape, num_classes: self.num_classes, images, labels }
    }
}

fn u32_le(v: usize) -> Result<[u8; 4]> {
    u32::try_from(v)
        .map(u32::to_le_bytes)
        .map_err(|_| PdhError::Format(format!("{v} does not fit in u32")))
}

pub fn write_dataset<W: Write>(w: &mut W, ds: &LabeledDataset) -> Result<()> {
    w.write_all(DATASET_MAGIC)?;
    w.write_all(&DATASET_VERSION.to_le_bytes())?;
    w.write_all(&u32_le(ds.len())?)?;
    match ds.shape {
        InputShape::Flat(m) => {
            w.write_all(&[0])?;
            w.write_all(&u32_le(m)?)?;
        }
        InputShape::Image { height, width, channels } => {
            w.write_all(&[1])?;
            w.write_all(&u32_le(height)?)?;
            w.write_all(&u32_le(width)?)?;
            w.write_all(&u32_le(channels)?)?;
        }
    }
    w.write_all(&u32_le(ds.num_classes)?)?;
    for &v in &ds.images {
        w.write_all(&(v as f32).to_le_bytes())?;
    }
    for &l in &ds.labels {
        w.write_all(&l.to_le_bytes())?;
    }
    Ok(())
}

fn read_u32_le<R: Read>(r: &mut R) -> Result<usize> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b) as usize)
}

pub fn read_dataset<R: Read>(r: &mut R) -> Result<LabeledDataset> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != DATASET_MAGIC {
        return Err(PdhError::Format(format!("bad dataset magic {magic:?}")));
    }
    let version = read_u32_le(r)?;
    if version != DATASET_VERSION as usize {
        return Err(PdhError::Format(format!("unsupported dataset version {version}")));
    }
    let count = read_u32_le(r)?;
    let mut tag = [0u8; 1];
    r.read_exact(&mut tag)?;
    let shape = match tag[0] {
        0 => InputShape::Flat(read_u32_le(r)?),
        1 => InputShape::Image { height: read_u32_le(r)?, width: read_u32_le(r)?, channels: read_u32_le(r)? },
        t => return Err(PdhError::Format(format!("unknown shape tag {t}"))),
    };
    let num_classes = read_u32_le(r)?;
    let total = count
        .checked_mul(shape.numel())
        .ok_or_else(|| PdhError::Format("dataset size overflows".into()))?;
    let mut raw = vec![0u8; total * 4];
    r.read_exact(&mut raw)?;
    let images = raw
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    let mut raw = vec![0u8; count * 2];
    r.read_exact(&mut raw)?;
    let labels = raw.chunks_exact(2).map(|c| u16::from_le_bytes([c[0], c[1]])).collect();
    if r.read(&mut [0u8; 1])? != 0 {
        return Err(PdhError::Format("trailing bytes after dataset".into()));
    }
    LabeledDataset::new(shape, num_classes, images, labels).map_err(|e| PdhError::Format(e.to_string()))
}

pub fn save_dataset(path: &Path, ds: &LabeledDataset) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_dataset(&mut w, ds)?;
    w.flush()?;
    Ok(())
}

pub fn load_dataset(path: &Path) -> Result<LabeledDataset> {
    read_dataset(&mut BufReader::new(File::open(path)?))
}

fn read_u32_be<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_be_bytes(b))
}

/// Raw IDX image file: `(rows, cols, pixels)` with pixels row-major per image.
pub fn read_idx_images<R: Read>(r: &mut R) -> Result<(usize, usize, Vec<u8>)> {
    let magic = read_u32_be(r)?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(PdhError::Format(format!("IDX images magic {magic:#010x} != {IDX_IMAGES_MAGIC:#010x}")));
    }
    let count = read_u32_be(r)? as usize;
    let rows = read_u32_be(r)? as usize;
    let cols = read_u32_be(r)? as usize;
    let mut pixels = vec![0u8; count * rows * cols];
    r.read_exact(&mut pixels)?;
    Ok((rows, cols, pixels))
}

pub fn read_idx_labels<R: Read>(r: &mut R) -> Result<Vec<u8>> {
    let magic = read_u32_be(r)?;
    if magic != IDX_LABELS_MAGIC {
        return Err(PdhError::Format(format!("IDX labels magic {magic:#010x} != {IDX_LABELS_MAGIC:#010x}")));
    }
    let count = read_u32_be(r)? as usize;
    let mut labels = vec![0u8; count];
    r.read_exact(&mut labels)?;
    Ok(labels)
}

/// Builds a dataset from an IDX image/label pair. The class count is
/// `max label + 1`.
pub fn dataset_from_idx<R1: Read, R2: Read>(images: &mut R1, labels: &mut R2) -> Result<LabeledDataset> {
    let (rows, cols, pixels) = read_idx_images(images)?;
    let labels = read_idx_labels(labels)?;
    if pixels.len() != labels.len() * rows * cols {
        return Err(PdhError::Format(format!(
            "{} images but {} labels",
            pixels.len() / (rows * cols).max(1),
            labels.len()
        )));
    }
    let num_classes = labels.iter().copied().max().map_or(0, |m| m as usize + 1);
    LabeledDataset::new(
        InputShape::Image { height: rows, width: cols, channels: 1 },
        num_classes,
        pixels.iter().map(|&p| p as f64 / 255.0).collect(),
        labels.iter().map(|&l| l as u16).collect(),
    )
}

pub fn load_idx(images: &Path, labels: &Path) -> Result<LabeledDataset> {
    dataset_from_idx(&mut BufReader::new(File::open(images)?), &mut BufReader::new(File::open(labels)?))
}

/// Standard MNIST file names inside `dir`: `(train, test)`.
pub fn load_mnist_dir(dir: &Path) -> Result<(LabeledDataset, LabeledDataset)> {
    Ok((
        load_idx(&dir.join("train-images-idx3-ubyte"), &dir.join("train-labels-idx1-ubyte"))?,
        load_idx(&dir.join("t10k-images-idx3-ubyte"), &dir.join("t10k-labels-idx1-ubyte"))?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn idx_parsing() {
        let mut images = vec![0, 0, 8, 3, 0, 0, 0, 2, 0, 0, 0, 2, 0, 0, 0, 1];
        images.extend_from_slice(&[0, 255, 51, 102, 255, 255, 0, 0]);
        let labels = vec![0, 0, 8, 1, 0, 0, 0, 2, 3, 1];
        let ds = dataset_from_idx(&mut images.as_slice(), &mut labels.as_slice()).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.num_classes(), 4);
        assert_eq!(ds.shape(), InputShape::Image { height: 2, width: 1, channels: 1 });
        assert_eq!(ds.image(0), &[0.0, 1.0]);
        assert_eq!(ds.image(1), &[0.2, 0.4]);
        assert_eq!(ds.labels(), &[3, 1]);

        let mut wrong = images.clone();
        wrong[3] = 1;
        assert!(dataset_from_idx(&mut wrong.as_slice(), &mut labels.as_slice()).is_err());
        assert!(dataset_from_idx(&mut images.as_slice(), &mut images.as_slice()).is_err());
    }

    #[test]
    fn take_per_class_keeps_order() {
        let ds = LabeledDataset::new(InputShape::Flat(1), 2, (0..6).map(f64::from).collect(), vec![0, 1, 0, 0, 1, 1]).unwrap();
        let sub = ds.take_per_class(2);
        assert_eq!(sub.labels(), &[0, 1, 0, 1]);
        assert_eq!(sub.image(2), &[2.0]);
    }

    #[test]
    fn header_bytes() {
        let ds = LabeledDataset::new(
            InputShape::Image { height: 1, width: 2, channels: 1 },
            3,
            vec![0.5, 1.0],
            vec![2],
        )
        .unwrap();
        let mut bytes = Vec::new();
        write_dataset(&mut bytes, &ds).unwrap();
        let mut want = b"PDHD".to_vec();
        for v in [1u32, 1] {
            want.extend_from_slice(&v.to_le_bytes());
        }
        want.push(1);
        for v in [1u32, 2, 1, 3] {
            want.extend_from_slice(&v.to_le_bytes());
        }
        want.extend_from_slice(&0.5f32.to_le_bytes());
        want.extend_from_slice(&1.0f32.to_le_bytes());
        want.extend_from_slice(&2u16.to_le_bytes());
        assert_eq!(bytes, want);
    }

    proptest! {
        #[test]
        fn round_trip_is_exact_for_f32_values(
            vals in proptest::collection::vec(-100.0f32..100.0, 0..40),
            flat in any::<bool>(),
        ) {
            let count = vals.len() / 4;
            let images: Vec<f64> = vals[..count * 4].iter().map(|&v| v as f64).collect();
            let labels: Vec<u16> = (0..count).map(|k| (k % 3) as u16).collect();
            let shape = if flat { InputShape::Flat(4) } else { InputShape::Image { height: 2, width: 2, channels: 1 } };
            let ds = LabeledDataset::new(shape, 3, images, labels).unwrap();
            let mut bytes = Vec::new();
            write_dataset(&mut bytes, &ds).unwrap();
            prop_assert_eq!(read_dataset(&mut bytes.as_slice()).unwrap(), ds);
        }
    }
}
