//! Training loop, micro-averaged evaluation and single-image prediction.

use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::adam::{AdamConfig, AdamState};
use crate::dataset::Sample;
use crate::error::{Error, Result};
use crate::metrics::{sig6, ConfusionCounts, MetricsReport};
use crate::nn::{soft_dice_loss, DiceSums};
use crate::raster::{BinaryMask, GrayImage};
use crate::tensor::Tensor4;
use crate::unet::{unet_backward, unet_forward, Model};

pub const DEFAULT_THRESHOLD: f32 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    /// Save a checkpoint every this many epochs; 0 disables periodic saves.
    pub checkpoint_every: usize,
    /// Stop after this many epochs without a validation IoU improvement.
    pub early_stop: Option<usize>,
    pub threshold: f32,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            batch_size: 2,
            learning_rate: 1e-4,
            seed: 0,
            checkpoint_every: 0,
            early_stop: None,
            threshold: DEFAULT_THRESHOLD,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::ConfigInvalid("epochs and batch_size must be >= 1".into()));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::ConfigInvalid(format!("learning_rate must be > 0, got {}", self.learning_rate)));
        }
        if self.early_stop == Some(0) {
            return Err(Error::ConfigInvalid("early_stop patience must be >= 1".into()));
        }
        if !self.threshold.is_finite() {
            return Err(Error::ConfigInvalid("threshold must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    pub train_loss: f64,
    pub val: MetricsReport,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub records: Vec<EpochRecord>,
    /// Wall-clock seconds spent in the training loop.
    pub tt: f64,
}

pub const HISTORY_HEADER: [&str; 7] = ["epoch", "train_loss", "val_is", "val_acc", "val_rec", "val_dl", "val_dc"];

impl TrainHistory {
    pub fn losses(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.train_loss).collect()
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(HISTORY_HEADER)?;
        for r in &self.records {
            let v = &r.val;
            let row = [r.train_loss, v.is_, v.acc, v.rec, v.dl, v.dc];
            let mut fields = vec![r.epoch.to_string()];
            fields.extend(row.iter().map(|&x| sig6(x)));
            w.write_record(&fields)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()?)
            .map_err(|e| Error::WriteFailure { path: path.to_path_buf(), reason: e.to_string() })
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters after the epoch with the highest validation IoU (earliest on ties).
    pub best: Model,
    pub best_epoch: usize,
    /// Parameters after the last completed epoch.
    pub last: Model,
    pub optimizer: AdamState,
    pub history: TrainHistory,
}

/// Called after every epoch with the record, the current model and optimizer.
pub type EpochObserver<'a> = dyn FnMut(&EpochRecord, &Model, &AdamState) -> Result<()> + 'a;

pub fn image_tensor(images: &[&GrayImage]) -> Result<Tensor4> {
    let (w, h) = images.first().ok_or(Error::EmptyImage)?.dims();
    let mut data = Vec::with_capacity(images.len() * w * h);
    for img in images {
        if img.dims() != (w, h) {
            return Err(Error::DimensionMismatch((w, h), img.dims()));
        }
        data.extend_from_slice(img.data());
    }
    Tensor4::from_vec([images.len(), 1, h, w], data)
}

pub fn mask_tensor(masks: &[&BinaryMask]) -> Result<Tensor4> {
    let (w, h) = masks.first().ok_or(Error::EmptyImage)?.dims();
    let mut data = Vec::with_capacity(masks.len() * w * h);
    for m in masks {
        if m.dims() != (w, h) {
            return Err(Error::DimensionMismatch((w, h), m.dims()));
        }
        data.extend(m.data().iter().map(|&v| v as f32));
    }
    Tensor4::from_vec([masks.len(), 1, h, w], data)
}

/// Trains with Adam on soft Dice loss. `val` is evaluated after every epoch.
pub fn train(model: Model, train_set: &[Sample], val: &[Sample], tc: &TrainConfig) -> Result<TrainOutcome> {
    train_observed(model, train_set, val, tc, &mut |_, _, _| Ok(()))
}

pub fn train_observed(
    mut model: Model,
    train_set: &[Sample],
    val: &[Sample],
    tc: &TrainConfig,
    observer: &mut EpochObserver<'_>,
) -> Result<TrainOutcome> {
    tc.validate()?;
    if train_set.is_empty() {
        return Err(Error::EmptyTrainSet);
    }
    if val.is_empty() {
        return Err(Error::EmptyEvalSet);
    }
    for s in train_set.iter().chain(val) {
        model.config().check_spatial(s.image.height(), s.image.width())?;
    }
    let mut optimizer = AdamState::new(AdamConfig::with_lr(tc.learning_rate));
    let mut rng = ChaCha8Rng::seed_from_u64(tc.seed);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut history = TrainHistory::default();
    let mut best: Option<(f64, usize, Model)> = None;
    let start = Instant::now();

    for epoch in 1..=tc.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut steps = 0usize;
        for (step, chunk) in order.chunks(tc.batch_size).enumerate() {
            let images: Vec<&GrayImage> = chunk.iter().map(|&i| &train_set[i].image).collect();
            let masks: Vec<&BinaryMask> = chunk.iter().map(|&i| &train_set[i].mask).collect();
            let (x, t) = (image_tensor(&images)?, mask_tensor(&masks)?);
            let (probs, cache) = unet_forward(&model, &x, true)?;
            let (loss, dprobs) = soft_dice_loss(&probs, &t)?;
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, step: step + 1 });
            }
            let grads = unet_backward(&model, cache.as_ref(), &dprobs)
                .map_err(|e| nonfinite_as_loss(e, epoch, step + 1))?;
            optimizer.step(model.updates(&grads)?).map_err(|e| nonfinite_as_loss(e, epoch, step + 1))?;
            loss_sum += loss;
            steps += 1;
        }
        let record = EpochRecord { epoch, train_loss: loss_sum / steps as f64, val: evaluate(&model, val, tc.threshold)? };
        if best.as_ref().is_none_or(|(iou, _, _)| record.val.is_ > *iou) {
            best = Some((record.val.is_, epoch, model.clone()));
        }
        observer(&record, &model, &optimizer)?;
        history.records.push(record);
        if let (Some(patience), Some((_, best_epoch, _))) = (tc.early_stop, &best) {
            if epoch - best_epoch >= patience {
                break;
            }
        }
    }
    history.tt = start.elapsed().as_secs_f64();
    let (_, best_epoch, best) = best.expect("at least one epoch ran");
    Ok(TrainOutcome { best, best_epoch, last: model, optimizer, history })
}

fn nonfinite_as_loss(e: Error, epoch: usize, step: usize) -> Error {
    match e {
        Error::NonFiniteValue(_) => Error::NonFiniteLoss { epoch, step },
        other => other,
    }
}

/// Sigmoid probabilities for one image, row-major.
pub fn predict_probs(model: &Model, img: &GrayImage) -> Result<Vec<f32>> {
    let x = image_tensor(&[img])?;
    let (probs, _) = unet_forward(model, &x, false)?;
    Ok(probs.into_data())
}

/// `1` where `p ≥ threshold`.
pub fn binarize(probs: &[f32], width: usize, height: usize, threshold: f32) -> Result<BinaryMask> {
    BinaryMask::new(width, height, probs.iter().map(|&p| u8::from(p >= threshold)).collect())
}

pub fn predict(model: &Model, img: &GrayImage, threshold: f32) -> Result<BinaryMask> {
    let probs = predict_probs(model, img)?;
    binarize(&probs, img.width(), img.height(), threshold)
}

/// Micro-averaged metrics: one confusion matrix and one set of soft Dice sums
/// over every pixel of every sample. `tt` is left at zero.
pub fn evaluate(model: &Model, samples: &[Sample], threshold: f32) -> Result<MetricsReport> {
    if samples.is_empty() {
        return Err(Error::EmptyEvalSet);
    }
    let mut counts = ConfusionCounts::default();
    let mut dice = DiceSums::default();
    for s in samples {
        let probs = predict_probs(model, &s.image)?;
        let pred = binarize(&probs, s.image.width(), s.image.height(), threshold)?;
        counts += crate::metrics::confusion(&pred, &s.mask)?;
        dice.add_f32(&probs, s.mask.data());
    }
    MetricsReport::from_parts(&counts, &dice, 0.0)
}
