//! Runs the three preprocessing approaches on one synthetic fundus-like image
//! and saves the inputs and outputs side by side.
//!
//! cargo run --example preprocess_approaches -- out/filters

use std::path::PathBuf;

use retseg::filters::{apply_approach, Approach, FilterConfig};
use retseg::raster::save_image;
use retseg::synthetic::{synthetic_pair, SyntheticConfig};

fn main() -> retseg::Result<()> {
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("retseg-filters"));
    std::fs::create_dir_all(&out)?;
    let (img, mask) = synthetic_pair(3, &SyntheticConfig { size: 128, ..Default::default() });
    save_image(&img, &out.join("input.png"))?;
    save_image(&mask, &out.join("mask.png"))?;

    let filters = FilterConfig::default();
    for approach in Approach::ALL {
        let result = apply_approach(&img, approach, &filters)?;
        let (lo, hi) = result.min_max();
        let path = out.join(format!("{}.png", approach.name()));
        save_image(&result, &path)?;
        println!("{:<30} range [{lo:.3}, {hi:.3}] -> {}", approach.title(), path.display());
    }
    Ok(())
}
