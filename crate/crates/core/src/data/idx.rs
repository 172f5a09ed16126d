use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::DenseTensor;

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

/// Inputs scaled to `[0, 1]` with integer class labels.
#[derive(Debug, Clone)]
pub struct Dataset<T> {
    /// `(S, I)`.
    pub inputs: DenseTensor<T>,
    pub labels: Vec<usize>,
    pub num_classes: usize,
    pub meta: String,
}

impl<T: Scalar> Dataset<T> {
    pub fn new(inputs: DenseTensor<T>, labels: Vec<usize>, num_classes: usize, meta: impl Into<String>) -> Result<Self> {
        let (s, _) = inputs.as_matrix_dims("dataset inputs")?;
        if labels.len() != s {
            return Err(Error::dim(format!("{s} samples but {} labels", labels.len())));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= num_classes) {
            return Err(Error::arg(format!("label {bad} out of range for {num_classes} classes")));
        }
        Ok(Dataset {
            inputs,
            labels,
            num_classes,
            meta: meta.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn width(&self) -> usize {
        self.inputs.dims()[1]
    }

    /// First `n` samples (or all of them if fewer).
    pub fn truncated(&self, n: usize) -> Result<Self> {
        let n = n.min(self.len());
        let rows: Vec<usize> = (0..n).collect();
        Dataset::new(
            self.inputs.select_rows(&rows)?,
            self.labels[..n].to_vec(),
            self.num_classes,
            format!("{} (first {n})", self.meta),
        )
    }
}

fn read_all(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn be_u32(bytes: &[u8], at: usize, path: &Path) -> Result<u32> {
    let word = bytes.get(at..at + 4).ok_or_else(|| Error::Length {
        path: path.to_path_buf(),
        expected: at + 4,
        found: bytes.len(),
    })?;
    Ok(u32::from_be_bytes(word.try_into().expect("4 bytes")))
}

/// Parses the header and returns `(dims, payload)`.
fn parse_idx<'a>(bytes: &'a [u8], path: &Path, magic: u32) -> Result<(Vec<usize>, &'a [u8])> {
    let found = be_u32(bytes, 0, path)?;
    if found != magic {
        return Err(Error::Format {
            path: path.to_path_buf(),
            msg: format!("magic {found:#010x}, expected {magic:#010x}"),
        });
    }
    let ndims = (magic & 0xff) as usize;
    let mut dims = Vec::with_capacity(ndims);
    for k in 0..ndims {
        dims.push(be_u32(bytes, 4 + 4 * k, path)? as usize);
    }
    let header = 4 + 4 * ndims;
    let expected = header + dims.iter().product::<usize>();
    if bytes.len() < expected {
        return Err(Error::Length {
            path: path.to_path_buf(),
            expected,
            found: bytes.len(),
        });
    }
    Ok((dims, &bytes[header..expected]))
}

/// Reads an IDX image file as `(S, rows * cols)`, pixels scaled by `1/255`.
pub fn read_idx_images<T: Scalar>(path: impl AsRef<Path>) -> Result<DenseTensor<T>> {
    let path = path.as_ref();
    let bytes = read_all(path)?;
    let (dims, payload) = parse_idx(&bytes, path, IMAGES_MAGIC)?;
    let scale = 1.0 / 255.0;
    let data = payload.iter().map(|&p| T::from_f64(p as f64 * scale)).collect();
    DenseTensor::from_vec(vec![dims[0], dims[1] * dims[2]], data).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        msg: e.to_string(),
    })
}

pub fn read_idx_labels(path: impl AsRef<Path>) -> Result<Vec<usize>> {
    let path = path.as_ref();
    let bytes = read_all(path)?;
    let (_, payload) = parse_idx(&bytes, path, LABELS_MAGIC)?;
    Ok(payload.iter().map(|&l| l as usize).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    fn file_prefix(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "t10k",
        }
    }
}

/// Loads `{train,t10k}-{images-idx3,labels-idx1}-ubyte` from `dir`.
pub fn load_mnist<T: Scalar>(dir: impl AsRef<Path>, split: Split) -> Result<Dataset<T>> {
    let dir = dir.as_ref();
    let file = |kind: &str| -> PathBuf { dir.join(format!("{}-{kind}-ubyte", split.file_prefix())) };
    let images = read_idx_images(file("images-idx3"))?;
    let labels = read_idx_labels(file("labels-idx1"))?;
    Dataset::new(images, labels, 10, format!("MNIST {:?} from {}", split, dir.display()))
}
