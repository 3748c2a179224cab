//! Deterministic augmentation (horizontal flip, vertical flip, rotation) and
//! train/val/test splitting.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{load_pair, write_json, read_json, DatasetManifest, ManifestEntry, Transform};
use crate::error::{Error, Result};
use crate::raster::{save_image, BinaryMask, GrayImage, GrayMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    /// Reverse column order.
    Horizontal,
    /// Reverse row order.
    Vertical,
}

/// Rasters that can be mirrored without resampling.
pub trait Flip: Sized {
    fn flip(&self, axis: Axis) -> Self;
}

fn flip_rows<T: Copy>(data: &[T], w: usize, h: usize, axis: Axis) -> Vec<T> {
    let mut out = Vec::with_capacity(data.len());
    for y in 0..h {
        let sy = match axis {
            Axis::Vertical => h - 1 - y,
            Axis::Horizontal => y,
        };
        let row = &data[sy * w..(sy + 1) * w];
        match axis {
            Axis::Horizontal => out.extend(row.iter().rev()),
            Axis::Vertical => out.extend_from_slice(row),
        }
    }
    out
}

impl Flip for GrayImage {
    fn flip(&self, axis: Axis) -> Self {
        let (w, h) = self.dims();
        GrayImage::new(w, h, flip_rows(self.data(), w, h, axis)).expect("flip preserves validity")
    }
}

impl Flip for BinaryMask {
    fn flip(&self, axis: Axis) -> Self {
        let (w, h) = self.dims();
        BinaryMask::new(w, h, flip_rows(self.data(), w, h, axis)).expect("flip preserves validity")
    }
}

pub fn flip<R: Flip>(r: &R, axis: Axis) -> R {
    r.flip(axis)
}

/// Inverse-maps output pixel `(x, y)` to a source coordinate for a rotation
/// of `degrees` counter-clockwise (as displayed) about the image centre.
fn rotation_source(w: usize, h: usize, degrees: f32) -> impl Fn(usize, usize) -> Option<(f64, f64)> {
    let (sin, cos) = (degrees as f64).to_radians().sin_cos();
    let (cx, cy) = ((w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0);
    move |x, y| {
        let (dx, dy) = (x as f64 - cx, y as f64 - cy);
        let sx = cx + cos * dx - sin * dy;
        let sy = cy + sin * dx + cos * dy;
        let inside = (-0.5..=w as f64 - 0.5).contains(&sx) && (-0.5..=h as f64 - 0.5).contains(&sy);
        inside.then_some((sx.clamp(0.0, (w - 1) as f64), sy.clamp(0.0, (h - 1) as f64)))
    }
}

/// Bilinear rotation; samples falling outside the frame become 0.
pub fn rotate(img: &GrayImage, degrees: f32) -> GrayImage {
    let (w, h) = img.dims();
    let src = rotation_source(w, h, degrees);
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            out.push(match src(x, y) {
                None => 0.0,
                Some((sx, sy)) => {
                    let (x0, y0) = (sx.floor() as usize, sy.floor() as usize);
                    let (x1, y1) = ((x0 + 1).min(w - 1), (y0 + 1).min(h - 1));
                    let (fx, fy) = (sx - x0 as f64, sy - y0 as f64);
                    let p = |x, y| img.get(x, y) as f64;
                    let top = p(x0, y0) * (1.0 - fx) + p(x1, y0) * fx;
                    let bottom = p(x0, y1) * (1.0 - fx) + p(x1, y1) * fx;
                    (top * (1.0 - fy) + bottom * fy) as f32
                }
            });
        }
    }
    GrayImage::from_clamped(w, h, out).expect("same dimensions")
}

/// Nearest-neighbour rotation for label masks; out-of-frame samples become 0.
pub fn rotate_mask(mask: &BinaryMask, degrees: f32) -> BinaryMask {
    let (w, h) = mask.dims();
    let src = rotation_source(w, h, degrees);
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            out.push(match src(x, y) {
                None => 0,
                Some((sx, sy)) => mask.get(sx.round() as usize, sy.round() as usize),
            });
        }
    }
    BinaryMask::new(w, h, out).expect("same dimensions")
}

/// The three augmented variants of one pair, in `hflip, vflip, rot` order.
pub fn augment_pair(
    img: &GrayImage,
    mask: &BinaryMask,
    rotation_degrees: f32,
) -> Result<[(Transform, GrayImage, BinaryMask); 3]> {
    if img.dims() != mask.dims() {
        return Err(Error::PairDimensionMismatch { image: img.dims(), mask: mask.dims() });
    }
    Ok([
        (Transform::HFlip, img.flip(Axis::Horizontal), mask.flip(Axis::Horizontal)),
        (Transform::VFlip, img.flip(Axis::Vertical), mask.flip(Axis::Vertical)),
        (Transform::Rotate(rotation_degrees), rotate(img, rotation_degrees), rotate_mask(mask, rotation_degrees)),
    ])
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}{suffix}.png"))
}

/// Expands every original into its three variants, writing each beside its
/// source as `<name>__hflip.png`, `<name>__vflip.png`, `<name>__rot<deg>.png`.
/// Originals are not carried over, so `N` entries become `3N`.
pub fn augment_dataset(manifest: &DatasetManifest, rotation_degrees: f32, gray: GrayMode) -> Result<DatasetManifest> {
    let mut entries = Vec::with_capacity(3 * manifest.len());
    for e in &manifest.entries {
        let (img, mask) = load_pair(e, gray)?;
        for (transform, timg, tmask) in augment_pair(&img, &mask, rotation_degrees)? {
            let suffix = transform.suffix();
            let image = sibling(&e.image, &suffix);
            let mask = sibling(&e.mask, &suffix);
            save_image(&timg, &image)?;
            save_image(&tmask, &mask)?;
            entries.push(ManifestEntry { image, mask, origin_id: e.origin_id, transform });
        }
    }
    Ok(DatasetManifest { entries })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub train: Vec<ManifestEntry>,
    pub val: Vec<ManifestEntry>,
    pub test: Vec<ManifestEntry>,
    pub seed: u64,
}

impl SplitManifest {
    pub fn save(&self, path: &Path) -> Result<()> {
        write_json(self, path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        read_json(path)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitCounts {
    pub train: usize,
    pub val: usize,
    pub test: usize,
}

impl SplitCounts {
    pub const fn new(train: usize, val: usize, test: usize) -> Self {
        Self { train, val, test }
    }

    pub fn total(&self) -> usize {
        self.train + self.val + self.test
    }

    fn tuple(&self) -> (usize, usize, usize) {
        (self.train, self.val, self.test)
    }
}

impl Default for SplitCounts {
    fn default() -> Self {
        Self::new(80, 20, 20)
    }
}

// ChaCha8 keyed by the seed, then a Fisher–Yates shuffle: portable and
// reproducible for a fixed `rand`/`rand_chacha` version.
fn shuffled<T>(mut items: Vec<T>, seed: u64) -> Vec<T> {
    items.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    items
}

/// Seeded shuffle of all entries, then consecutive train/val/test partitions.
pub fn split_dataset(manifest: &DatasetManifest, counts: SplitCounts, seed: u64) -> Result<SplitManifest> {
    if counts.total() != manifest.len() {
        return Err(Error::CountMismatch { counts: counts.tuple(), available: manifest.len() });
    }
    let mut order = shuffled(manifest.entries.clone(), seed).into_iter();
    let train = order.by_ref().take(counts.train).collect();
    let val = order.by_ref().take(counts.val).collect();
    let test = order.collect();
    Ok(SplitManifest { train, val, test, seed })
}

/// Like [`split_dataset`] but keeps every variant of one original in the same
/// partition, so no original leaks across splits. Whole groups go, in seeded
/// order, to the partition with the largest remaining deficit; each partition
/// therefore lands within one group size of its target.
pub fn split_grouped(manifest: &DatasetManifest, counts: SplitCounts, seed: u64) -> Result<SplitManifest> {
    if counts.total() != manifest.len() {
        return Err(Error::CountMismatch { counts: counts.tuple(), available: manifest.len() });
    }
    let mut groups: BTreeMap<usize, Vec<ManifestEntry>> = BTreeMap::new();
    for e in &manifest.entries {
        groups.entry(e.origin_id).or_default().push(e.clone());
    }
    let targets = [counts.train, counts.val, counts.test];
    let mut parts: [Vec<ManifestEntry>; 3] = Default::default();
    for g in shuffled(groups.into_values().collect::<Vec<_>>(), seed) {
        let deficit = |i: usize| targets[i] as isize - parts[i].len() as isize;
        let slot = (0..3).fold(0, |best, i| if deficit(i) > deficit(best) { i } else { best });
        parts[slot].extend(g);
    }
    let [train, val, test] = parts;
    Ok(SplitManifest { train, val, test, seed })
}
