//! Mini-batch SGD with momentum and batched prediction.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::LabeledImageSet;
use crate::error::{Error, Result};
use crate::model::{Model, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 10,
            batch_size: 32,
            learning_rate: 0.01,
            momentum: 0.9,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config("epochs and batch_size must be >= 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Config("momentum must be in [0,1)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainStats {
    /// Mean mini-batch loss per epoch.
    pub epoch_losses: Vec<f64>,
}

/// Trains `model`: shuffles once per epoch from `cfg.seed`,
/// then applies `v <- momentum*v - lr*grad; w <- w + v` per mini-batch.
/// Fails if the loss stops being finite.
pub fn train<T: Scalar>(
    mut model: Model<T>,
    data: &LabeledImageSet,
    cfg: &TrainConfig,
) -> Result<(Model<T>, TrainStats)> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let lr = T::from(cfg.learning_rate).unwrap();
    let momentum = T::from(cfg.momentum).unwrap();
    let mut velocity = vec![T::zero(); model.param_count()];
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut stats = TrainStats::default();
    for epoch in 0..cfg.epochs {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(epoch as u64);
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            let (batch, labels) = data.gather(chunk);
            let lg = model.backward(&batch.cast::<T>(), &labels)?;
            let loss = lg.loss.to_f64().unwrap_or(f64::NAN);
            if !loss.is_finite() {
                return Err(Error::Domain(alloc::format!(
                    "training diverged in epoch {epoch}"
                )));
            }
            for ((w, v), &g) in model
                .params_mut()
                .iter_mut()
                .zip(velocity.iter_mut())
                .zip(&lg.gradient)
            {
                *v = momentum * *v - lr * g;
                *w = *w + *v;
            }
            loss_sum += loss;
            batches += 1;
        }
        stats.epoch_losses.push(loss_sum / batches as f64);
    }
    if !model.params().iter().all(|p| p.is_finite()) {
        return Err(Error::Domain("training produced non-finite weights".into()));
    }
    Ok((model, stats))
}

const PREDICT_CHUNK: usize = 256;

/// Arg-max class per sample; ties go to the lowest class index.
pub fn predict<T: Scalar>(model: &Model<T>, data: &LabeledImageSet) -> Result<Vec<usize>> {
    if data.sample_shape() != model.arch().input_shape {
        return Err(Error::Shape(alloc::format!(
            "dataset samples are {:?}, model expects {:?}",
            data.sample_shape(),
            model.arch().input_shape
        )));
    }
    let mut out = Vec::with_capacity(data.len());
    let indices: Vec<usize> = (0..data.len()).collect();
    for chunk in indices.chunks(PREDICT_CHUNK) {
        let (batch, _) = data.gather(chunk);
        out.extend(model.forward(&batch.cast::<T>())?.argmax());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arch::ArchSpec;
    use crate::data::synthetic_blobs;
    use crate::genome::Genome;
    use crate::metrics::{f1_score, Averaging};
    use crate::model::build_model;
    use crate::tensor::Tensor4;

    fn tiny_arch(classes: usize) -> ArchSpec {
        ArchSpec {
            n_conv_layers: 2,
            reference_layers: 10,
            base_channels: 4,
            num_classes: classes,
            input_shape: (1, 6, 6),
        }
    }

    #[test]
    fn rejects_empty_data_and_bad_config() {
        let arch = tiny_arch(2);
        let g = Genome::uniform(crate::Activation::Relu, 2).unwrap();
        let m = build_model::<f32>(&arch, &g, 0).unwrap();
        let empty = LabeledImageSet::new(Tensor4::zeros([0, 1, 6, 6]), vec![], 2).unwrap();
        assert!(matches!(
            train(m.clone(), &empty, &TrainConfig::default()),
            Err(Error::EmptyDataset)
        ));
        let data = synthetic_blobs(2, 2, (1, 6, 6), 1.0, 0).unwrap();
        let bad = TrainConfig {
            epochs: 0,
            ..TrainConfig::default()
        };
        assert!(matches!(train(m, &data, &bad), Err(Error::Config(_))));
    }

    #[test]
    fn one_step_moves_against_the_gradient() {
        let arch = tiny_arch(2);
        let g: Genome = "TANH-ELU".parse().unwrap();
        let m = build_model::<f64>(&arch, &g, 4).unwrap();
        let data = synthetic_blobs(2, 1, (1, 6, 6), 1.0, 3)
            .unwrap()
            .slice(0..1);
        let (batch, labels) = data.gather(&[0]);
        let grad = m.backward(&batch.cast(), &labels).unwrap().gradient;
        let cfg = TrainConfig {
            epochs: 1,
            batch_size: 1,
            learning_rate: 0.05,
            momentum: 0.9,
            seed: 0,
        };
        let (trained, _) = train(m.clone(), &data, &cfg).unwrap();
        for ((after, before), g) in trained.params().iter().zip(m.params()).zip(&grad) {
            assert!((after - (before - 0.05 * g)).abs() < 1e-12);
        }
    }

    #[test]
    fn separable_blobs_are_learned() {
        let arch = tiny_arch(2);
        let data = synthetic_blobs(2, 40, (1, 6, 6), 1.0, 8).unwrap();
        let g: Genome = "RELU-TANH".parse().unwrap();
        let m = build_model::<f32>(&arch, &g, 1).unwrap();
        let cfg = TrainConfig {
            epochs: 20,
            batch_size: 8,
            ..TrainConfig::default()
        };
        let (m, stats) = train(m, &data, &cfg).unwrap();
        assert!(stats.epoch_losses.last().unwrap() < &stats.epoch_losses[0]);
        let pred = predict(&m, &data).unwrap();
        let f1 = f1_score(data.labels(), &pred, 2, Averaging::Macro).unwrap();
        assert!(f1 >= 0.95, "f1 {f1}");
    }

    #[test]
    fn training_is_deterministic() {
        let arch = tiny_arch(3);
        let data = synthetic_blobs(3, 6, (1, 6, 6), 1.0, 2).unwrap();
        let g: Genome = "SIG-ELU".parse().unwrap();
        let cfg = TrainConfig {
            epochs: 3,
            batch_size: 4,
            seed: 17,
            ..TrainConfig::default()
        };
        let a = train(build_model::<f32>(&arch, &g, 5).unwrap(), &data, &cfg)
            .unwrap()
            .0;
        let b = train(build_model::<f32>(&arch, &g, 5).unwrap(), &data, &cfg)
            .unwrap()
            .0;
        assert_eq!(a.params(), b.params());
    }

    #[test]
    fn predict_is_stable_and_ties_go_low() {
        let arch = tiny_arch(4);
        let g = Genome::uniform(crate::Activation::Sig, 2).unwrap();
        let m = crate::Model::<f32>::zeroed(&arch, &g).unwrap();
        let data = synthetic_blobs(4, 3, (1, 6, 6), 1.0, 2).unwrap();
        let p = predict(&m, &data).unwrap();
        assert_eq!(p.len(), 12);
        assert!(p.iter().all(|&c| c == 0));
        assert_eq!(p, predict(&m, &data).unwrap());
    }
}
