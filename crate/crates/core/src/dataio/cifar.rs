//! CIFAR-10 binary distribution.
//!
//! Each record is one label byte followed by 1024 red, 1024 green and 1024
//! blue bytes, each plane in row-major order. Files hold whole records only.

use std::path::{Path, PathBuf};

use super::{ImageDataset, IMAGE_CHANNELS, IMAGE_SIDE, NUM_CLASSES};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

const PIXELS: usize = IMAGE_CHANNELS * IMAGE_SIDE * IMAGE_SIDE;
pub const CIFAR_RECORD_BYTES: usize = 1 + PIXELS;

pub const CIFAR_TRAIN_FILES: [&str; 5] = [
    "data_batch_1.bin",
    "data_batch_2.bin",
    "data_batch_3.bin",
    "data_batch_4.bin",
    "data_batch_5.bin",
];
pub const CIFAR_TEST_FILE: &str = "test_batch.bin";

fn read_all(path: &Path) -> Result<Vec<u8>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.is_empty() {
        return Err(Error::parse(path, "empty file"));
    }
    if bytes.len() % CIFAR_RECORD_BYTES != 0 {
        return Err(Error::TruncatedFile {
            path: path.to_path_buf(),
            len: bytes.len() as u64,
            record: CIFAR_RECORD_BYTES,
        });
    }
    Ok(bytes)
}

/// Parses and concatenates the given batch files. Either every record of
/// every file is valid or an error is returned.
pub fn load_cifar10_binary<P: AsRef<Path>>(paths: &[P]) -> Result<ImageDataset> {
    if paths.is_empty() {
        return Err(Error::DatasetMissing(
            "no CIFAR-10 batch files given".into(),
        ));
    }
    let mut pixels = Vec::new();
    let mut labels = Vec::new();
    for path in paths {
        let path = path.as_ref();
        let bytes = read_all(path)?;
        pixels.reserve(bytes.len() / CIFAR_RECORD_BYTES * PIXELS);
        for (record, chunk) in bytes.chunks_exact(CIFAR_RECORD_BYTES).enumerate() {
            let label = chunk[0];
            if label as usize >= NUM_CLASSES {
                return Err(Error::BadLabel {
                    path: path.to_path_buf(),
                    record,
                    label,
                });
            }
            labels.push(label as usize);
            pixels.extend(chunk[1..].iter().map(|&b| b as f32 / 255.0));
        }
    }
    let images = Tensor::from_vec(
        vec![labels.len(), IMAGE_CHANNELS, IMAGE_SIDE, IMAGE_SIDE],
        pixels,
    )?;
    ImageDataset::new(images, labels)
}

/// Loads `(train, test)` from an extracted `cifar-10-batches-bin` directory.
pub fn load_cifar10_dir(dir: impl AsRef<Path>) -> Result<(ImageDataset, ImageDataset)> {
    let dir = dir.as_ref();
    let train: Vec<PathBuf> = CIFAR_TRAIN_FILES.iter().map(|f| dir.join(f)).collect();
    let test = dir.join(CIFAR_TEST_FILE);
    for p in train.iter().chain([&test]) {
        if !p.is_file() {
            return Err(Error::DatasetMissing(format!("{} not found", p.display())));
        }
    }
    Ok((load_cifar10_binary(&train)?, load_cifar10_binary(&[test])?))
}
