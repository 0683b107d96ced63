//! The compressed architecture family `CM^n`.
//!
//! `n` blocks of 3x3 conv (stride 1, same padding) followed by the block's
//! activation, with a 2x2 max-pool after every second block. Channels start
//! at `base_channels` and double after each pool, capped at
//! [`CHANNEL_CAP`]. The head is global average pooling and a dense layer
//! into softmax.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CHANNEL_CAP: usize = 128;
pub const KERNEL: usize = 3;
pub const BYTES_PER_PARAM: u64 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ArchSpec {
    pub n_conv_layers: usize,
    /// Depth of the uncompressed reference network (`m`).
    pub reference_layers: usize,
    pub base_channels: usize,
    pub num_classes: usize,
    /// `(channels, height, width)`.
    pub input_shape: (usize, usize, usize),
}

/// Shape bookkeeping for one conv block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockPlan {
    pub in_channels: usize,
    pub out_channels: usize,
    pub height: usize,
    pub width: usize,
    pub pool_after: bool,
}

impl ArchSpec {
    /// `CM^n` for 32x32 RGB inputs, 10 classes, reference depth 10.
    pub fn cifar(n_conv_layers: usize) -> Self {
        Self {
            n_conv_layers,
            reference_layers: 10,
            base_channels: 16,
            num_classes: 10,
            input_shape: (3, 32, 32),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (c, h, w) = self.input_shape;
        if self.n_conv_layers == 0 {
            return Err(Error::Config(
                "architecture needs at least one conv layer".into(),
            ));
        }
        if self.reference_layers == 0 || self.n_conv_layers > self.reference_layers {
            return Err(Error::Config(alloc::format!(
                "n_conv_layers {} must be in 1..={}",
                self.n_conv_layers,
                self.reference_layers
            )));
        }
        if self.base_channels == 0 || self.num_classes == 0 || c == 0 || h == 0 || w == 0 {
            return Err(Error::Config(
                "architecture dimensions must be positive".into(),
            ));
        }
        let pools = self.n_conv_layers / 2;
        if (h >> pools) == 0 || (w >> pools) == 0 {
            return Err(Error::Config(alloc::format!(
                "{h}x{w} input cannot be pooled {pools} times"
            )));
        }
        Ok(())
    }

    pub fn blocks(&self) -> Vec<BlockPlan> {
        let (mut channels, mut h, mut w) = self.input_shape;
        let mut out = self.base_channels;
        let mut plan = Vec::with_capacity(self.n_conv_layers);
        for i in 0..self.n_conv_layers {
            let pool_after = i % 2 == 1;
            plan.push(BlockPlan {
                in_channels: channels,
                out_channels: out,
                height: h,
                width: w,
                pool_after,
            });
            channels = out;
            if pool_after {
                h /= 2;
                w /= 2;
                out = (out * 2).min(CHANNEL_CAP);
            }
        }
        plan
    }

    /// Channels entering global average pooling.
    pub fn feature_channels(&self) -> usize {
        self.blocks()
            .last()
            .map_or(self.input_shape.0, |b| b.out_channels)
    }

    pub fn param_count(&self) -> usize {
        let conv: usize = self
            .blocks()
            .iter()
            .map(|b| b.out_channels * b.in_channels * KERNEL * KERNEL + b.out_channels)
            .sum();
        conv + self.feature_channels() * self.num_classes + self.num_classes
    }

    pub fn param_bytes(&self) -> u64 {
        self.param_count() as u64 * BYTES_PER_PARAM
    }
}
