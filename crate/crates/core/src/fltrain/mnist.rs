//! IDX (MNIST) reader and class-balanced partitioning.

use std::io::Read;
use std::path::Path;

use byteorder::{BigEndian, ReadBytesExt};
use rand::seq::SliceRandom;
use thiserror::Error;

use super::task::DeviceData;
use crate::rng::{stream, tags};

const IMAGE_MAGIC: u32 = 0x0000_0803;
const LABEL_MAGIC: u32 = 0x0000_0801;

#[derive(Debug, Error)]
pub enum MnistError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: bad magic number {found:#010x}, expected {expected:#010x}")]
    Magic { path: String, found: u32, expected: u32 },
    #[error("{path}: truncated file, expected {expected} payload bytes, found {found}")]
    Truncated { path: String, expected: usize, found: usize },
    #[error("{path}: {found} trailing bytes after payload")]
    Trailing { path: String, found: usize },
    #[error("image/label count mismatch: {images} images, {labels} labels")]
    CountMismatch { images: usize, labels: usize },
    #[error("cannot partition: {0}")]
    Partition(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImageSet {
    pub rows: usize,
    pub cols: usize,
    /// Pixels scaled to `[0, 1]`, one image per `rows * cols` chunk.
    pub pixels: Vec<f32>,
    pub labels: Vec<u8>,
}

impl ImageSet {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn image(&self, i: usize) -> &[f32] {
        let n = self.rows * self.cols;
        &self.pixels[i * n..(i + 1) * n]
    }

    /// All samples as a single dataset (e.g. a test set).
    pub fn to_device_data(&self) -> DeviceData {
        self.subset(&(0..self.len()).collect::<Vec<_>>())
    }

    fn subset(&self, idx: &[usize]) -> DeviceData {
        let mut features = Vec::with_capacity(idx.len() * self.rows * self.cols);
        for &i in idx {
            features.extend_from_slice(self.image(i));
        }
        DeviceData {
            features,
            num_features: self.rows * self.cols,
            targets: idx.iter().map(|&i| self.labels[i] as f64).collect(),
        }
    }
}

fn read_all(path: &Path) -> Result<Vec<u8>, MnistError> {
    let mut buf = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut buf))
        .map_err(|source| MnistError::Io {
            path: path.display().to_string(),
            source,
        })?;
    Ok(buf)
}

/// Parses header dimensions and checks the payload length exactly.
fn parse_idx(bytes: &[u8], path: &str, magic: u32, ndims: usize) -> Result<(Vec<usize>, Vec<u8>), MnistError> {
    let mut cur = bytes;
    let truncated = |found: usize, expected: usize| MnistError::Truncated {
        path: path.to_string(),
        expected,
        found,
    };
    let found = cur.read_u32::<BigEndian>().map_err(|_| truncated(bytes.len(), 4 + 4 * ndims))?;
    if found != magic {
        return Err(MnistError::Magic {
            path: path.to_string(),
            found,
            expected: magic,
        });
    }
    let mut dims = Vec::with_capacity(ndims);
    for _ in 0..ndims {
        dims.push(cur.read_u32::<BigEndian>().map_err(|_| truncated(bytes.len(), 4 + 4 * ndims))? as usize);
    }
    let expected: usize = dims.iter().product();
    if cur.len() < expected {
        return Err(truncated(cur.len(), expected));
    }
    if cur.len() > expected {
        return Err(MnistError::Trailing {
            path: path.to_string(),
            found: cur.len() - expected,
        });
    }
    Ok((dims, cur.to_vec()))
}

/// Reads an IDX image file and its label file.
pub fn load_mnist_idx(images: &Path, labels: &Path) -> Result<ImageSet, MnistError> {
    let ip = images.display().to_string();
    let lp = labels.display().to_string();
    let (idims, raw) = parse_idx(&read_all(images)?, &ip, IMAGE_MAGIC, 3)?;
    let (ldims, lab) = parse_idx(&read_all(labels)?, &lp, LABEL_MAGIC, 1)?;
    if idims[0] != ldims[0] {
        return Err(MnistError::CountMismatch {
            images: idims[0],
            labels: ldims[0],
        });
    }
    Ok(ImageSet {
        rows: idims[1],
        cols: idims[2],
        pixels: raw.iter().map(|&p| p as f32 / 255.0).collect(),
        labels: lab,
    })
}

/// Splits `set` over `num_devices` devices so that every device receives
/// each class within one sample of every other device. With
/// `samples_per_device`, each device keeps only that many samples (taken
/// class-interleaved so balance is preserved).
pub fn partition_balanced(
    set: &ImageSet,
    num_devices: usize,
    samples_per_device: Option<usize>,
    seed: u64,
) -> Result<Vec<DeviceData>, MnistError> {
    if num_devices == 0 {
        return Err(MnistError::Partition("zero devices".into()));
    }
    let classes = set.labels.iter().map(|&l| l as usize + 1).max().unwrap_or(0);
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); classes];
    for (i, &l) in set.labels.iter().enumerate() {
        by_class[l as usize].push(i);
    }
    let mut rng = stream(seed, tags::DATA, 7);
    let mut assigned: Vec<Vec<usize>> = vec![Vec::new(); num_devices];
    let mut next = 0usize;
    for idx in by_class.iter_mut() {
        idx.shuffle(&mut rng);
        for &i in idx.iter() {
            assigned[next % num_devices].push(i);
            next += 1;
        }
    }
    if let Some(n) = samples_per_device {
        for dev in assigned.iter_mut() {
            if dev.len() < n {
                return Err(MnistError::Partition(format!("only {} samples per device available", dev.len())));
            }
            // Interleave classes before truncating.
            let mut per: Vec<Vec<usize>> = vec![Vec::new(); classes];
            for &i in dev.iter() {
                per[set.labels[i] as usize].push(i);
            }
            let mut mixed = Vec::with_capacity(dev.len());
            let longest = per.iter().map(Vec::len).max().unwrap_or(0);
            for r in 0..longest {
                for c in per.iter() {
                    if let Some(&i) = c.get(r) {
                        mixed.push(i);
                    }
                }
            }
            mixed.truncate(n);
            *dev = mixed;
        }
    }
    Ok(assigned.iter().map(|idx| set.subset(idx)).collect())
}
