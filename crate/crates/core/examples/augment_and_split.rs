//! Preprocess, augment and split a small dataset, comparing the default
//! split with the grouped one that keeps each original's variants together.
//!
//! cargo run --example augment_and_split

use std::collections::HashSet;

use retseg::augment::SplitManifest;
use retseg::pipeline::{run_augment, run_preprocess, run_split, PipelineConfig, SplitConfig};
use retseg::synthetic::{write_synthetic_dataset, SyntheticConfig};

fn leaked(s: &SplitManifest) -> usize {
    let train: HashSet<usize> = s.train.iter().map(|e| e.origin_id).collect();
    s.val.iter().chain(&s.test).map(|e| e.origin_id).filter(|o| train.contains(o)).collect::<HashSet<_>>().len()
}

fn main() -> retseg::Result<()> {
    let root = std::env::temp_dir().join("retseg-augment-example");
    let _ = std::fs::remove_dir_all(&root);
    write_synthetic_dataset(&root.join("data"), 40, 0, &SyntheticConfig::default())?;
    let mut cfg = PipelineConfig {
        dataset_root: root.join("data"),
        target_size: (64, 64),
        width_scale: 16,
        out_dir: root.join("runs"),
        ..Default::default()
    };
    println!("originals: {}", run_preprocess(&cfg)?.len());
    println!("augmented: {}", run_augment(&cfg)?.len());

    for grouped in [false, true] {
        cfg.split = SplitConfig { grouped, ..SplitConfig::default() };
        let s = run_split(&cfg)?;
        println!(
            "grouped={grouped:<5} train/val/test = {}/{}/{}  originals shared with train: {}",
            s.train.len(),
            s.val.len(),
            s.test.len(),
            leaked(&s)
        );
    }
    Ok(())
}
