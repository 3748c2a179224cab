//! Segmentation metrics. Vessel pixels (mask value 1) are the positive class.

use std::fmt::Write as _;
use std::ops::AddAssign;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::DiceSums;
use crate::raster::BinaryMask;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    /// Counts one prediction/truth pixel pair.
    #[inline]
    pub fn record(&mut self, pred: bool, truth: bool) {
        match (pred, truth) {
            (true, true) => self.tp += 1,
            (true, false) => self.fp += 1,
            (false, false) => self.tn += 1,
            (false, true) => self.fn_ += 1,
        }
    }
}

impl AddAssign for ConfusionCounts {
    fn add_assign(&mut self, o: Self) {
        self.tp += o.tp;
        self.fp += o.fp;
        self.tn += o.tn;
        self.fn_ += o.fn_;
    }
}

pub fn confusion(pred: &BinaryMask, gt: &BinaryMask) -> Result<ConfusionCounts> {
    if pred.dims() != gt.dims() {
        return Err(Error::DimensionMismatch(pred.dims(), gt.dims()));
    }
    let mut c = ConfusionCounts::default();
    for (&p, &g) in pred.data().iter().zip(gt.data()) {
        c.record(p != 0, g != 0);
    }
    Ok(c)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HardMetrics {
    pub iou: f64,
    pub accuracy: f64,
    pub recall: f64,
    pub dice: f64,
}

fn ratio_or_one(num: u64, den: u64) -> f64 {
    if den == 0 {
        1.0
    } else {
        num as f64 / den as f64
    }
}

/// IoU, accuracy, recall and hard Dice. Empty denominators (both sets
/// empty) score 1.0.
pub fn hard_metrics(c: &ConfusionCounts) -> Result<HardMetrics> {
    let total = c.total();
    if total == 0 {
        return Err(Error::EmptyConfusion);
    }
    Ok(HardMetrics {
        iou: ratio_or_one(c.tp, c.tp + c.fp + c.fn_),
        accuracy: (c.tp + c.tn) as f64 / total as f64,
        recall: ratio_or_one(c.tp, c.tp + c.fn_),
        dice: ratio_or_one(2 * c.tp, 2 * c.tp + c.fp + c.fn_),
    })
}

/// IoU score divided by Dice loss.
pub fn efficacy_ratio(iou: f64, dice_loss: f64) -> Result<f64> {
    if dice_loss.is_nan() || dice_loss <= 0.0 {
        return Err(Error::ZeroDiceLoss);
    }
    Ok(iou / dice_loss)
}

/// Soft Dice coefficient and loss with the training loss's smoothing term.
pub fn soft_dice_metric(probs: &[f32], gt: &BinaryMask) -> Result<(f64, f64)> {
    if probs.len() != gt.data().len() {
        return Err(Error::ShapeMismatch(format!("{} probabilities for {} mask pixels", probs.len(), gt.data().len())));
    }
    let mut sums = DiceSums::default();
    sums.add_f32(probs, gt.data());
    let dc = sums.coefficient();
    Ok((dc, 1.0 - dc))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    #[serde(rename = "is")]
    pub is_: f64,
    pub acc: f64,
    pub rec: f64,
    pub dl: f64,
    pub dc: f64,
    pub tt: f64,
    /// `+inf` when the Dice loss is zero.
    pub er: f64,
}

impl MetricsReport {
    /// Builds a report from hard counts and accumulated soft Dice sums.
    pub fn from_parts(c: &ConfusionCounts, dice: &DiceSums, tt: f64) -> Result<Self> {
        let h = hard_metrics(c)?;
        let dc = dice.coefficient();
        let dl = 1.0 - dc;
        let er = efficacy_ratio(h.iou, dl).unwrap_or(f64::INFINITY);
        Ok(Self { is_: h.iou, acc: h.accuracy, rec: h.recall, dl, dc, tt, er })
    }

    pub fn with_tt(self, tt: f64) -> Self {
        Self { tt, ..self }
    }

    /// Metric columns in report order: IS, Acc, Rec, DL, DC, TT, ER.
    pub fn columns(&self) -> [f64; 7] {
        [self.is_, self.acc, self.rec, self.dl, self.dc, self.tt, self.er]
    }

    /// `model,approach,IS,Acc,Rec,DL,DC,TT_s,ER` without a trailing newline.
    pub fn csv_row(&self, model: &str, approach: &str) -> String {
        let mut s = format!("{model},{approach}");
        for v in self.columns() {
            let _ = write!(s, ",{}", sig6(v));
        }
        s
    }
}

pub const CSV_HEADER: &str = "model,approach,IS,Acc,Rec,DL,DC,TT_s,ER";

/// Formats with six significant digits; non-finite values print as `inf`, `-inf`, `nan`.
pub fn sig6(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0".into();
    }
    let exp = v.abs().log10().floor() as i32;
    if !(-4..6).contains(&exp) {
        return format!("{v:.5e}");
    }
    let decimals = (5 - exp).max(0) as usize;
    let s = format!("{v:.decimals$}");
    // rounding may have carried into a new digit, e.g. 9.999996 -> 10.00000
    let s = if s.trim_start_matches('-').replace('.', "").trim_start_matches('0').len() > 6 && decimals > 0 {
        format!("{v:.prec$}", prec = decimals - 1)
    } else {
        s
    };
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}
