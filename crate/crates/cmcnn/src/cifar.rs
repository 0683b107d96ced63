//! CIFAR-10 binary archives on disk.
//!
//! Expects `data_batch_1.bin` .. `data_batch_5.bin` and `test_batch.bin`,
//! either directly in the given directory or in its `cifar-10-batches-bin`
//! subdirectory (the layout of the official tarball).

use std::fs;
use std::path::{Path, PathBuf};

use cmcnn_core::data::{
    append_cifar_batch, encode_cifar_records, CIFAR_CLASSES, CIFAR_RECORDS_PER_BATCH, CIFAR_SHAPE,
    CIFAR_TEST_BATCH, CIFAR_TRAIN_BATCHES,
};
use cmcnn_core::{LabeledImageSet, Tensor4};

use crate::error::{io_at, Error, Result};

pub const TRAIN_FILES: [&str; 5] = CIFAR_TRAIN_BATCHES;
pub const TEST_FILE: &str = CIFAR_TEST_BATCH;
pub const ARCHIVE_SUBDIR: &str = "cifar-10-batches-bin";

/// `dir` itself if it holds the batch files, else its archive subdirectory
/// when that does.
pub fn resolve_dir(dir: &Path) -> PathBuf {
    let nested = dir.join(ARCHIVE_SUBDIR);
    if !dir.join(TEST_FILE).exists() && nested.join(TEST_FILE).exists() {
        nested
    } else {
        dir.to_path_buf()
    }
}

fn read_batches(dir: &Path, files: &[&str]) -> Result<LabeledImageSet> {
    let (c, h, w) = CIFAR_SHAPE;
    let mut images = Vec::new();
    let mut labels = Vec::new();
    for name in files {
        let path = dir.join(name);
        let bytes = fs::read(&path).map_err(io_at(&path))?;
        append_cifar_batch(&bytes, &mut images, &mut labels).map_err(|e| Error::File {
            path: path.clone(),
            message: e.to_string(),
        })?;
    }
    let images = Tensor4::from_vec([labels.len(), c, h, w], images)?;
    Ok(LabeledImageSet::new(images, labels, CIFAR_CLASSES)?)
}

/// Loads the 50000 training images (batches 1-5 in file order) and the 10000
/// test images. Any missing, truncated or corrupt file fails the whole load.
pub fn load_cifar10(dir: &Path) -> Result<(LabeledImageSet, LabeledImageSet)> {
    let dir = resolve_dir(dir);
    let train = read_batches(&dir, &TRAIN_FILES)?;
    let test = read_batches(&dir, &[TEST_FILE])?;
    Ok((train, test))
}

pub fn load_batch_file(path: &Path) -> Result<LabeledImageSet> {
    let dir = path.parent().unwrap_or(Path::new("."));
    let name = path
        .file_name()
        .and_then(|n| n.to_str())
        .ok_or_else(|| Error::Config(format!("not a file path: {}", path.display())))?;
    read_batches(dir, &[name])
}

/// Writes exactly one batch (10000 records) in the wire format.
pub fn write_batch_file(path: &Path, set: &LabeledImageSet) -> Result<()> {
    if set.len() != CIFAR_RECORDS_PER_BATCH {
        return Err(Error::File {
            path: path.to_path_buf(),
            message: format!(
                "a batch holds {CIFAR_RECORDS_PER_BATCH} records, got {}",
                set.len()
            ),
        });
    }
    let bytes = encode_cifar_records(set)?;
    fs::write(path, bytes).map_err(io_at(path))
}

/// Writes a complete archive: five training batches and one test batch.
pub fn write_cifar_archive(
    dir: &Path,
    train: &LabeledImageSet,
    test: &LabeledImageSet,
) -> Result<()> {
    let per = CIFAR_RECORDS_PER_BATCH;
    if train.len() != per * TRAIN_FILES.len() || test.len() != per {
        return Err(Error::Config(format!(
            "an archive needs {} training and {per} test records, got {} and {}",
            per * TRAIN_FILES.len(),
            train.len(),
            test.len()
        )));
    }
    fs::create_dir_all(dir).map_err(io_at(dir))?;
    for (i, name) in TRAIN_FILES.iter().enumerate() {
        write_batch_file(&dir.join(name), &train.slice(i * per..(i + 1) * per))?;
    }
    write_batch_file(&dir.join(TEST_FILE), test)
}
