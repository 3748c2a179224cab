use serde::{Deserialize, Serialize};

use super::{Border, Field};
use crate::error::{Error, Result};
use crate::raster::{BinaryMask, GrayImage};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SobelPruneParams {
    /// Edge cut-off as a fraction of the maximum gradient magnitude.
    pub edge_threshold: f32,
    pub spur_iterations: usize,
}

impl Default for SobelPruneParams {
    fn default() -> Self {
        Self { edge_threshold: 0.15, spur_iterations: 3 }
    }
}

impl SobelPruneParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.edge_threshold) {
            return Err(Error::ConfigInvalid(format!(
                "sobel edge_threshold must be in [0,1], got {}",
                self.edge_threshold
            )));
        }
        Ok(())
    }
}

/// `sqrt(gx² + gy²)` from the 3×3 Sobel pair with replicate borders. Unclamped.
pub fn sobel_magnitude(img: &GrayImage) -> Result<Field> {
    let (w, h) = img.dims();
    if w == 0 || h == 0 {
        return Err(Error::EmptyImage);
    }
    let b = Border::Replicate;
    let px = |x: isize, y: isize| img.get(b.index(x, w), b.index(y, h));
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h as isize {
        for x in 0..w as isize {
            let gx = (px(x + 1, y - 1) + 2.0 * px(x + 1, y) + px(x + 1, y + 1))
                - (px(x - 1, y - 1) + 2.0 * px(x - 1, y) + px(x - 1, y + 1));
            let gy = (px(x - 1, y + 1) + 2.0 * px(x, y + 1) + px(x + 1, y + 1))
                - (px(x - 1, y - 1) + 2.0 * px(x, y - 1) + px(x + 1, y - 1));
            out.push((gx * gx + gy * gy).sqrt());
        }
    }
    Field::new(w, h, out)
}

fn neighbour_count(m: &BinaryMask, x: usize, y: usize) -> usize {
    let (w, h) = m.dims();
    let mut n = 0;
    for dy in -1isize..=1 {
        for dx in -1isize..=1 {
            if dx == 0 && dy == 0 {
                continue;
            }
            let (nx, ny) = (x as isize + dx, y as isize + dy);
            if nx >= 0 && ny >= 0 && (nx as usize) < w && (ny as usize) < h && m.get(nx as usize, ny as usize) == 1 {
                n += 1;
            }
        }
    }
    n
}

/// Spur pruning: each iteration simultaneously deletes every foreground
/// pixel with at most one 8-connected foreground neighbour.
pub fn prune_spurs(mask: &BinaryMask, iterations: usize) -> BinaryMask {
    let (w, h) = mask.dims();
    let mut cur = mask.clone();
    for _ in 0..iterations {
        let data: Vec<u8> = (0..h)
            .flat_map(|y| (0..w).map(move |x| (x, y)))
            .map(|(x, y)| (cur.get(x, y) == 1 && neighbour_count(&cur, x, y) >= 2) as u8)
            .collect();
        let next = BinaryMask::new(w, h, data).expect("same dimensions");
        if next == cur {
            break;
        }
        cur = next;
    }
    cur
}

/// Sobel magnitude, thresholded at `edge_threshold · max`, then spur-pruned.
/// Returns a `{0, 1}` image; a flat input yields all zeros.
pub fn sobel_prune(img: &GrayImage, p: &SobelPruneParams) -> Result<GrayImage> {
    p.validate()?;
    let mag = sobel_magnitude(img)?;
    let max = mag.max();
    let cut = p.edge_threshold * max;
    let edges = BinaryMask::new(
        mag.width,
        mag.height,
        mag.data.iter().map(|&m| (max > 0.0 && m >= cut) as u8).collect(),
    )?;
    Ok(prune_spurs(&edges, p.spur_iterations).to_gray())
}
