//! Writes a DRIVE-shaped synthetic dataset (`images/`, `masks/`) that every
//! `retseg` subcommand accepts.
//!
//! cargo run --example synthetic_dataset -- data/synthetic 40

use std::path::PathBuf;

use retseg::synthetic::{write_synthetic_dataset, SyntheticConfig};

fn main() -> retseg::Result<()> {
    let mut args = std::env::args().skip(1);
    let root = args.next().map(PathBuf::from).unwrap_or_else(|| PathBuf::from("data/synthetic"));
    let count: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(40);
    let cfg = SyntheticConfig { size: 64, ..Default::default() };
    write_synthetic_dataset(&root, count, 0, &cfg)?;
    println!("wrote {count} image/mask pairs of {0}x{0} under {1}", cfg.size, root.display());
    Ok(())
}
