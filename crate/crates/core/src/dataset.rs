//! IDX ingestion for MNIST-style image/label files.

use std::fs::File;
use std::io::Read;
use std::path::Path;

use flate2::read::GzDecoder;
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

const MAGIC_LABELS: u32 = 0x0000_0801;
const MAGIC_IMAGES: u32 = 0x0000_0803;

/// An unsigned-byte tensor read from an IDX container.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IdxTensor {
    pub dims: Vec<usize>,
    pub data: Vec<u8>,
}

fn parse_err(offset: usize, message: impl Into<String>) -> Error {
    Error::Parse { offset, message: message.into() }
}

fn read_u32(bytes: &[u8], offset: usize, what: &str) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| parse_err(bytes.len(), format!("truncated header while reading {what}")))
}

/// Parses an IDX byte stream holding rank-1 labels (`0x801`) or rank-3
/// images (`0x803`).
pub fn parse_idx(bytes: &[u8]) -> Result<IdxTensor> {
    let magic = read_u32(bytes, 0, "the magic number")?;
    if magic != MAGIC_LABELS && magic != MAGIC_IMAGES {
        return Err(parse_err(0, format!("unsupported magic number {magic:#010x}")));
    }
    let rank = (magic & 0xff) as usize;
    let mut dims = Vec::with_capacity(rank);
    for i in 0..rank {
        dims.push(read_u32(bytes, 4 + 4 * i, "a dimension")? as usize);
    }
    let header = 4 + 4 * rank;
    let count = dims
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| parse_err(4, "element count overflows"))?;
    let end = header
        .checked_add(count)
        .ok_or_else(|| parse_err(4, "element count overflows"))?;
    if bytes.len() < end {
        return Err(parse_err(
            bytes.len(),
            format!("truncated payload: expected {count} items, found {}", bytes.len() - header),
        ));
    }
    if bytes.len() > end {
        return Err(parse_err(end, format!("{} trailing bytes", bytes.len() - end)));
    }
    Ok(IdxTensor { dims, data: bytes[header..].to_vec() })
}

/// Serializes an unsigned-byte tensor of rank 1 to 3 as IDX.
pub fn write_idx(t: &IdxTensor) -> Result<Vec<u8>> {
    let rank = t.dims.len();
    if !(1..=3).contains(&rank) {
        return Err(Error::InvalidArgument(format!("unsupported rank {rank}")));
    }
    if t.dims.iter().product::<usize>() != t.data.len() {
        return Err(Error::InvalidArgument("dims do not match the data length".into()));
    }
    let mut out = Vec::with_capacity(4 + 4 * rank + t.data.len());
    out.extend_from_slice(&(0x0800u32 | rank as u32).to_be_bytes());
    for &d in &t.dims {
        let d = u32::try_from(d).map_err(|_| Error::InvalidArgument(format!("dimension {d} too large")))?;
        out.extend_from_slice(&d.to_be_bytes());
    }
    out.extend_from_slice(&t.data);
    Ok(out)
}

/// Reads and parses an IDX file, decompressing it when the name ends in `.gz`.
pub fn read_idx_file(path: &Path) -> Result<IdxTensor> {
    let mut bytes = Vec::new();
    let file = File::open(path)?;
    if path.extension().is_some_and(|e| e == "gz") {
        GzDecoder::new(file).read_to_end(&mut bytes)?;
    } else {
        let mut file = file;
        file.read_to_end(&mut bytes)?;
    }
    parse_idx(&bytes)
}

/// Images scaled to `[0, 1]` and one-hot labels, both row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub images: Vec<f64>,
    pub labels: Vec<f64>,
    pub n: usize,
    pub d: usize,
    pub k: usize,
}

impl Dataset {
    /// Builds a dataset from raw pixels and class indices, validating both.
    pub fn from_raw(pixels: &[u8], d: usize, classes: &[usize], k: usize) -> Result<Self> {
        let n = classes.len();
        if d == 0 || k == 0 {
            return Err(Error::Validation("image size and class count must be positive".into()));
        }
        if pixels.len() != n * d {
            return Err(Error::Validation(format!(
                "{} images but {n} labels",
                pixels.len() / d
            )));
        }
        let mut labels = vec![0.0; n * k];
        for (i, &c) in classes.iter().enumerate() {
            if c >= k {
                return Err(Error::Validation(format!("label {c} at index {i} is not below K = {k}")));
            }
            labels[i * k + c] = 1.0;
        }
        let images = pixels.iter().map(|&p| f64::from(p) / 255.0).collect();
        Ok(Self { images, labels, n, d, k })
    }

    pub fn image(&self, i: usize) -> &[f64] {
        &self.images[i * self.d..(i + 1) * self.d]
    }

    pub fn label(&self, i: usize) -> &[f64] {
        &self.labels[i * self.k..(i + 1) * self.k]
    }

    /// Index of the unit entry of label `i`.
    pub fn class(&self, i: usize) -> usize {
        self.label(i).iter().position(|&v| v == 1.0).expect("one-hot label")
    }

    /// Number of observations per class.
    pub fn class_histogram(&self) -> Vec<usize> {
        let mut h = vec![0; self.k];
        for i in 0..self.n {
            h[self.class(i)] += 1;
        }
        h
    }

    /// Observations at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Self {
        let mut images = Vec::with_capacity(indices.len() * self.d);
        let mut labels = Vec::with_capacity(indices.len() * self.k);
        for &i in indices {
            images.extend_from_slice(self.image(i));
            labels.extend_from_slice(self.label(i));
        }
        Self { images, labels, n: indices.len(), d: self.d, k: self.k }
    }
}

/// Loads an image/label IDX pair with 0-indexed labels.
pub fn load_dataset(image_path: &Path, label_path: &Path, k: usize) -> Result<Dataset> {
    load_dataset_shifted(image_path, label_path, k, 0)
}

/// Like [`load_dataset`], subtracting `label_offset` from every raw label
/// (1 for the 1-indexed EMNIST letters split).
pub fn load_dataset_shifted(image_path: &Path, label_path: &Path, k: usize, label_offset: u8) -> Result<Dataset> {
    let images = read_idx_file(image_path)?;
    let labels = read_idx_file(label_path)?;
    if images.dims.len() != 3 {
        return Err(Error::Validation(format!("{} is not an image file", image_path.display())));
    }
    if labels.dims.len() != 1 {
        return Err(Error::Validation(format!("{} is not a label file", label_path.display())));
    }
    if images.dims[0] != labels.dims[0] {
        return Err(Error::Validation(format!(
            "{} images but {} labels",
            images.dims[0], labels.dims[0]
        )));
    }
    let classes = labels
        .data
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            v.checked_sub(label_offset)
                .map(usize::from)
                .ok_or_else(|| Error::Validation(format!("label {v} at index {i} is below the offset {label_offset}")))
        })
        .collect::<Result<Vec<_>>>()?;
    Dataset::from_raw(&images.data, images.dims[1] * images.dims[2], &classes, k)
}

/// Indices of a uniform sample of `size` observations without replacement.
pub fn subset_indices(n: usize, size: usize, seed: u64) -> Result<Vec<usize>> {
    if size > n {
        return Err(Error::InvalidArgument(format!("subset of {size} from {n} observations")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(index::sample(&mut rng, n, size).into_vec())
}

/// A deterministic random subset of `size` observations.
pub fn subset(ds: &Dataset, size: usize, seed: u64) -> Result<Dataset> {
    Ok(ds.select(&subset_indices(ds.n, size, seed)?))
}
