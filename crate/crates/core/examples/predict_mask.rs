//! Trains briefly, then segments an unseen image from disk exactly as
//! `retseg predict` does and writes the mask.
//!
//! cargo run --release --example predict_mask -- out/pred.png

use std::path::PathBuf;

use retseg::checkpoint::save_checkpoint;
use retseg::dataset::Sample;
use retseg::filters::apply_approach;
use retseg::metrics::{confusion, hard_metrics};
use retseg::pipeline::{run_predict, PipelineConfig};
use retseg::raster::{load_mask, save_image};
use retseg::synthetic::{synthetic_pair, synthetic_set, SyntheticConfig};
use retseg::trainer::{train, TrainConfig};
use retseg::unet::build_unet;

fn main() -> retseg::Result<()> {
    let output = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("retseg-pred.png"));
    let syn = SyntheticConfig::default();
    // raw images are already at target size, so preprocessing is only the filter
    let cfg = PipelineConfig { target_size: (syn.size, syn.size), width_scale: 16, ..Default::default() };
    let data = synthetic_set(6, 10, &syn)
        .into_iter()
        .enumerate()
        .map(|(i, (raw, mask))| {
            let image = apply_approach(&raw, cfg.approach, &cfg.filters)?;
            Ok(Sample { name: format!("s{i}"), image, mask })
        })
        .collect::<retseg::Result<Vec<_>>>()?;

    let train_cfg = TrainConfig { epochs: 150, learning_rate: 1e-3, ..Default::default() };
    let out = train(build_unet(&cfg.unet_config(), 0)?, &data[..4], &data[4..], &train_cfg)?;

    let dir = std::env::temp_dir();
    let (checkpoint, input) = (dir.join("retseg-predict.rseg"), dir.join("retseg-input.png"));
    save_checkpoint(&out.best, None, &checkpoint)?;
    let (img, gt) = synthetic_pair(999, &syn);
    save_image(&img, &input)?;
    run_predict(&cfg, &checkpoint, &input, &output)?;

    let h = hard_metrics(&confusion(&load_mask(&output, 0.5, None)?, &gt)?)?;
    println!("wrote {}; IoU against ground truth {:.4}", output.display(), h.iou);
    Ok(())
}
