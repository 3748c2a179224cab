//! Seeded synthetic fundus-like images: dark curvilinear vessels on a
//! vignetted, noisy background, with exact ground-truth masks.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::raster::{save_image, BinaryMask, GrayImage};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticConfig {
    pub size: usize,
    pub vessels: usize,
    /// Standard deviation of the additive background noise.
    pub noise: f32,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self { size: 64, vessels: 4, noise: 0.03 }
    }
}

/// One image/mask pair, fully determined by `seed` and `cfg`.
pub fn synthetic_pair(seed: u64, cfg: &SyntheticConfig) -> (GrayImage, BinaryMask) {
    let n = cfg.size.max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // distance to the nearest vessel centreline, in units of that vessel's half-width
    let mut closeness = vec![f32::INFINITY; n * n];
    let nf = n as f32;
    for _ in 0..cfg.vessels {
        let half_width = rng.gen_range(0.7f32..1.6) * (nf / 64.0).max(0.5);
        let mut x = rng.gen_range(0.0..nf);
        let mut y = rng.gen_range(0.0..nf);
        let mut angle = rng.gen_range(0.0..std::f32::consts::TAU);
        let mut turn = 0.0f32;
        let steps = (3 * n).max(8);
        for _ in 0..steps {
            turn = 0.9 * turn + rng.gen_range(-0.04f32..0.04);
            angle += turn;
            x += 0.5 * angle.cos();
            y += 0.5 * angle.sin();
            if !(-4.0..nf + 4.0).contains(&x) || !(-4.0..nf + 4.0).contains(&y) {
                break;
            }
            let r = half_width.ceil() as isize + 1;
            let (cx, cy) = (x.floor() as isize, y.floor() as isize);
            for py in (cy - r).max(0)..=(cy + r).min(n as isize - 1) {
                for px in (cx - r).max(0)..=(cx + r).min(n as isize - 1) {
                    let d = ((px as f32 + 0.5 - x).powi(2) + (py as f32 + 0.5 - y).powi(2)).sqrt() / half_width;
                    let slot = &mut closeness[py as usize * n + px as usize];
                    *slot = slot.min(d);
                }
            }
        }
    }
    let mask = BinaryMask::from_fn(n, n, |x, y| closeness[y * n + x] <= 1.0).expect("non-empty size");
    let c = (nf - 1.0) / 2.0;
    let data = (0..n * n)
        .map(|i| {
            let (x, y) = ((i % n) as f32, (i / n) as f32);
            let r2 = ((x - c).powi(2) + (y - c).powi(2)) / (c * c).max(1.0);
            let background = 0.75 - 0.2 * r2;
            let d = closeness[i];
            let depth = if d <= 1.0 { 0.35 } else { 0.35 * (-(d - 1.0) * 2.0).exp() };
            let noise: f32 = cfg.noise * (rng.gen::<f32>() + rng.gen::<f32>() + rng.gen::<f32>() - 1.5) * 2.0;
            background - depth + noise
        })
        .collect();
    let image = GrayImage::from_clamped(n, n, data).expect("non-empty size");
    (image, mask)
}

/// `count` seeded pairs, pair `i` drawn with seed `seed + i`.
pub fn synthetic_set(count: usize, seed: u64, cfg: &SyntheticConfig) -> Vec<(GrayImage, BinaryMask)> {
    (0..count as u64).map(|i| synthetic_pair(seed.wrapping_add(i), cfg)).collect()
}

/// Writes `<root>/images/synth_NNN.png` and `<root>/masks/synth_NNN.png`.
pub fn write_synthetic_dataset(root: &Path, count: usize, seed: u64, cfg: &SyntheticConfig) -> Result<()> {
    let (img_dir, mask_dir) = (root.join("images"), root.join("masks"));
    for d in [&img_dir, &mask_dir] {
        fs::create_dir_all(d).map_err(|e| Error::WriteFailure { path: d.clone(), reason: e.to_string() })?;
    }
    for (i, (img, mask)) in synthetic_set(count, seed, cfg).iter().enumerate() {
        let name = format!("synth_{i:03}.png");
        save_image(img, &img_dir.join(&name))?;
        save_image(mask, &mask_dir.join(&name))?;
    }
    Ok(())
}
