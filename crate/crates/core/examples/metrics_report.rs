//! Scores masks with the segmentation metrics and renders a results table in
//! both report formats.
//!
//! cargo run --example metrics_report

use retseg::filters::Approach;
use retseg::metrics::{confusion, efficacy_ratio, hard_metrics, soft_dice_metric, ConfusionCounts, MetricsReport};
use retseg::nn::DiceSums;
use retseg::pipeline::{emit_report, ReportFormat, ReportRow};
use retseg::raster::BinaryMask;
use retseg::synthetic::{synthetic_pair, SyntheticConfig};
use retseg::unet::ModelKind;

fn main() -> retseg::Result<()> {
    let (_, gt) = synthetic_pair(1, &SyntheticConfig::default());
    // a prediction that misses the left third of the image
    let pred = BinaryMask::from_fn(gt.width(), gt.height(), |x, y| x > gt.width() / 3 && gt.get(x, y) == 1)?;
    let c = confusion(&pred, &gt)?;
    let h = hard_metrics(&c)?;
    println!("{c:?}");
    println!("IoU {:.4}  accuracy {:.4}  recall {:.4}  hard Dice {:.4}", h.iou, h.accuracy, h.recall, h.dice);

    let probs: Vec<f32> = pred.data().iter().map(|&v| if v == 1 { 0.9 } else { 0.05 }).collect();
    let (dc, dl) = soft_dice_metric(&probs, &gt)?;
    println!("soft DC {dc:.4}  DL {dl:.4}  ER {:.4}", efficacy_ratio(h.iou, dl)?);

    let mut rows = Vec::new();
    for (k, approach) in Approach::ALL.into_iter().enumerate() {
        for model in ModelKind::ALL {
            let mut dice = DiceSums::default();
            dice.add_f32(&probs, gt.data());
            let mut counts = ConfusionCounts::default();
            counts += c;
            let metrics = MetricsReport::from_parts(&counts, &dice, 60.0 * (k + 1) as f64)?;
            rows.push(ReportRow { model, approach, metrics });
        }
    }
    println!("\n{}", emit_report(&rows, ReportFormat::Markdown)?);
    print!("{}", emit_report(&rows, ReportFormat::Csv)?);
    Ok(())
}
