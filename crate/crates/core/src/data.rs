//! Labeled image sets, the two deterministic partition methods, synthetic
//! blob datasets and the CIFAR-10 binary record codec.
//!
//! File access lives in the std companion crate; this module only turns
//! bytes into sets and back.

use alloc::vec::Vec;
use core::ops::Range;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor4;

pub const CIFAR_CLASSES: usize = 10;
pub const CIFAR_SHAPE: (usize, usize, usize) = (3, 32, 32);
pub const CIFAR_PIXELS: usize = 3 * 32 * 32;
/// One label byte followed by 1024 R, 1024 G and 1024 B bytes.
pub const CIFAR_RECORD_BYTES: usize = 1 + CIFAR_PIXELS;
pub const CIFAR_RECORDS_PER_BATCH: usize = 10_000;
pub const CIFAR_BATCH_BYTES: usize = CIFAR_RECORD_BYTES * CIFAR_RECORDS_PER_BATCH;
pub const CIFAR_TRAIN_BATCHES: [&str; 5] = [
    "data_batch_1.bin",
    "data_batch_2.bin",
    "data_batch_3.bin",
    "data_batch_4.bin",
    "data_batch_5.bin",
];
pub const CIFAR_TEST_BATCH: &str = "test_batch.bin";

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledImageSet {
    images: Tensor4<f32>,
    labels: Vec<usize>,
    num_classes: usize,
}

impl LabeledImageSet {
    pub fn new(images: Tensor4<f32>, labels: Vec<usize>, num_classes: usize) -> Result<Self> {
        if images.batch() != labels.len() {
            return Err(Error::Shape(alloc::format!(
                "{} images but {} labels",
                images.batch(),
                labels.len()
            )));
        }
        if let Some(&label) = labels.iter().find(|&&l| l >= num_classes) {
            return Err(Error::Label { label, num_classes });
        }
        Ok(Self {
            images,
            labels,
            num_classes,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn images(&self) -> &Tensor4<f32> {
        &self.images
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn sample_shape(&self) -> (usize, usize, usize) {
        self.images.sample_shape()
    }

    /// Copy of samples `range`, order preserved.
    pub fn slice(&self, range: Range<usize>) -> Self {
        let [_, c, h, w] = self.images.shape();
        let len = self.images.sample_len();
        let data = self.images.data()[range.start * len..range.end * len].to_vec();
        Self {
            images: Tensor4::from_vec([range.len(), c, h, w], data).expect("slice of valid set"),
            labels: self.labels[range].to_vec(),
            num_classes: self.num_classes,
        }
    }

    /// Batch tensor and labels for the given sample indices.
    pub fn gather(&self, indices: &[usize]) -> (Tensor4<f32>, Vec<usize>) {
        let [_, c, h, w] = self.images.shape();
        let mut data = Vec::with_capacity(indices.len() * self.images.sample_len());
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            data.extend_from_slice(self.images.sample(i));
            labels.push(self.labels[i]);
        }
        let batch = Tensor4::from_vec([indices.len(), c, h, w], data).expect("gathered batch");
        (batch, labels)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PartitionMethod {
    /// Prefixes `D[1..N_train]`, `T[1..N_test]`.
    First,
    /// Suffixes `D[len-K_train+1..len]`, `T[len-K_test+1..len]`.
    Second,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionSpec {
    pub method: PartitionMethod,
    pub train_count: usize,
    pub test_count: usize,
}

impl PartitionSpec {
    pub fn apply(
        &self,
        train: &LabeledImageSet,
        test: &LabeledImageSet,
    ) -> Result<(LabeledImageSet, LabeledImageSet)> {
        match self.method {
            PartitionMethod::First => {
                partition_first(train, test, self.train_count, self.test_count)
            }
            PartitionMethod::Second => {
                partition_second(train, test, self.train_count, self.test_count)
            }
        }
    }
}

fn check_count(what: &str, count: usize, available: usize) -> Result<()> {
    if count == 0 || count > available {
        return Err(Error::Partition(alloc::format!(
            "{what} count {count} outside 1..={available}"
        )));
    }
    Ok(())
}

/// First `n_train` training and first `n_test` test samples.
pub fn partition_first(
    train: &LabeledImageSet,
    test: &LabeledImageSet,
    n_train: usize,
    n_test: usize,
) -> Result<(LabeledImageSet, LabeledImageSet)> {
    check_count("train", n_train, train.len())?;
    check_count("test", n_test, test.len())?;
    Ok((train.slice(0..n_train), test.slice(0..n_test)))
}

/// Last `k_train` training and last `k_test` test samples.
pub fn partition_second(
    train: &LabeledImageSet,
    test: &LabeledImageSet,
    k_train: usize,
    k_test: usize,
) -> Result<(LabeledImageSet, LabeledImageSet)> {
    check_count("train", k_train, train.len())?;
    check_count("test", k_test, test.len())?;
    Ok((
        train.slice(train.len() - k_train..train.len()),
        test.slice(test.len() - k_test..test.len()),
    ))
}

/// Gaussian blobs. Class `c` has a constant mean level per channel, scaled
/// by `separation`, and samples add unit-variance noise per pixel. On channel
/// 0 the levels are evenly spaced in `[-separation, separation]` in class
/// order; other channels use seeded permutations of the same levels.
pub fn synthetic_blobs(
    num_classes: usize,
    samples_per_class: usize,
    shape: (usize, usize, usize),
    separation: f32,
    seed: u64,
) -> Result<LabeledImageSet> {
    let (c, h, w) = shape;
    if num_classes == 0 || samples_per_class == 0 || c == 0 || h == 0 || w == 0 {
        return Err(Error::Config(
            "synthetic dataset dimensions must be positive".into(),
        ));
    }
    if !(separation > 0.0 && separation.is_finite()) {
        return Err(Error::Config(alloc::format!(
            "separation must be positive, got {separation}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let levels: Vec<f32> = (0..num_classes)
        .map(|k| {
            if num_classes == 1 {
                0.0
            } else {
                separation * (2.0 * k as f32 / (num_classes - 1) as f32 - 1.0)
            }
        })
        .collect();
    // means[class][channel]
    let orders: Vec<Vec<usize>> = (0..c)
        .map(|ch| {
            let mut order: Vec<usize> = (0..num_classes).collect();
            if ch > 0 {
                order.shuffle(&mut rng);
            }
            order
        })
        .collect();
    let means: Vec<Vec<f32>> = (0..num_classes)
        .map(|class| orders.iter().map(|o| levels[o[class]]).collect())
        .collect();
    let plane = h * w;
    let total = num_classes * samples_per_class;
    let mut data = Vec::with_capacity(total * c * plane);
    let mut labels = Vec::with_capacity(total);
    // Interleave classes so prefixes stay class-balanced.
    for _ in 0..samples_per_class {
        for (class, mean) in means.iter().enumerate() {
            for &mu in mean {
                data.extend((0..plane).map(|_| {
                    let noise: f32 = rng.sample(StandardNormal);
                    mu + noise
                }));
            }
            labels.push(class);
        }
    }
    LabeledImageSet::new(
        Tensor4::from_vec([total, c, h, w], data)?,
        labels,
        num_classes,
    )
}

/// Decodes one complete CIFAR-10 batch (exactly 10000 records), scaling
/// pixels by 1/255. Nothing is returned unless the whole batch is valid.
pub fn decode_cifar_batch(bytes: &[u8]) -> Result<LabeledImageSet> {
    let mut images = Vec::new();
    let mut labels = Vec::new();
    append_cifar_batch(bytes, &mut images, &mut labels)?;
    LabeledImageSet::new(
        Tensor4::from_vec([labels.len(), 3, 32, 32], images)?,
        labels,
        CIFAR_CLASSES,
    )
}

/// Validates a whole batch, then appends its pixels and labels.
pub fn append_cifar_batch(
    bytes: &[u8],
    images: &mut Vec<f32>,
    labels: &mut Vec<usize>,
) -> Result<()> {
    if bytes.len() != CIFAR_BATCH_BYTES {
        return Err(Error::Format(alloc::format!(
            "batch is {} bytes, expected {CIFAR_BATCH_BYTES}",
            bytes.len()
        )));
    }
    if let Some((i, rec)) = bytes
        .chunks_exact(CIFAR_RECORD_BYTES)
        .enumerate()
        .find(|(_, rec)| rec[0] as usize >= CIFAR_CLASSES)
    {
        return Err(Error::Format(alloc::format!(
            "corrupt label {} in record {i}",
            rec[0]
        )));
    }
    images.reserve(CIFAR_RECORDS_PER_BATCH * CIFAR_PIXELS);
    labels.reserve(CIFAR_RECORDS_PER_BATCH);
    for rec in bytes.chunks_exact(CIFAR_RECORD_BYTES) {
        labels.push(rec[0] as usize);
        images.extend(rec[1..].iter().map(|&b| b as f32 / 255.0));
    }
    Ok(())
}

/// Encodes a 3x32x32, at most 10-class set in the CIFAR-10 record format.
/// Pixels are clamped to [0,1] and rounded to the nearest byte, so sets
/// produced by [`decode_cifar_batch`] re-encode to identical bytes.
pub fn encode_cifar_records(set: &LabeledImageSet) -> Result<Vec<u8>> {
    if set.sample_shape() != CIFAR_SHAPE {
        return Err(Error::Shape(alloc::format!(
            "CIFAR records need 3x32x32 samples, got {:?}",
            set.sample_shape()
        )));
    }
    if set.num_classes() > CIFAR_CLASSES {
        return Err(Error::Format(alloc::format!(
            "{} classes do not fit the CIFAR-10 label byte range",
            set.num_classes()
        )));
    }
    let mut out = Vec::with_capacity(set.len() * CIFAR_RECORD_BYTES);
    for i in 0..set.len() {
        out.push(set.labels()[i] as u8);
        out.extend(
            set.images()
                .sample(i)
                .iter()
                .map(|&v| num_traits::Float::round(v.clamp(0.0, 1.0) * 255.0) as u8),
        );
    }
    Ok(out)
}
