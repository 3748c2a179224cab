//! Preprocessing approaches and the convolution engine they share.

mod gabor;
mod gaussian;
mod sobel;

pub use gabor::{gabor_kernel, gabor_response, GaborBankConfig, GaborParams};
pub use gaussian::{gaussian_blur, gaussian_kernel, gaussian_kernel_1d, GaussianParams};
pub use sobel::{prune_spurs, sobel_magnitude, sobel_prune, SobelPruneParams};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::GrayImage;

/// Unclamped scalar field; the output type of linear filtering.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f32>,
}

impl Field {
    pub fn new(width: usize, height: usize, data: Vec<f32>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::EmptyImage);
        }
        if data.len() != width * height {
            return Err(Error::ShapeMismatch(format!("{} values for {width}x{height}", data.len())));
        }
        Ok(Self { width, height, data })
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.data[y * self.width + x]
    }

    pub fn max(&self) -> f32 {
        self.data.iter().copied().fold(f32::NEG_INFINITY, f32::max)
    }

    pub fn min(&self) -> f32 {
        self.data.iter().copied().fold(f32::INFINITY, f32::min)
    }

    pub fn to_gray_clamped(&self) -> GrayImage {
        GrayImage::from_clamped(self.width, self.height, self.data.clone())
            .expect("field dimensions are non-zero")
    }

    pub fn transpose(&self) -> Field {
        let mut data = Vec::with_capacity(self.data.len());
        for x in 0..self.width {
            for y in 0..self.height {
                data.push(self.get(x, y));
            }
        }
        Field { width: self.height, height: self.width, data }
    }
}

impl From<&GrayImage> for Field {
    fn from(img: &GrayImage) -> Self {
        Field { width: img.width(), height: img.height(), data: img.data().to_vec() }
    }
}

/// Square kernel of side `2r + 1`, row-major. `at(i, j)` addresses the
/// horizontal offset `i` and vertical offset `j`, both in `-r..=r`.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel2D {
    radius: usize,
    weights: Vec<f32>,
}

impl Kernel2D {
    pub fn new(radius: usize, weights: Vec<f32>) -> Result<Self> {
        let side = 2 * radius + 1;
        if weights.len() != side * side {
            return Err(Error::ShapeMismatch(format!(
                "{} weights for a {side}x{side} kernel",
                weights.len()
            )));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::NonFiniteValue("Kernel2D::new"));
        }
        Ok(Self { radius, weights })
    }

    pub fn identity() -> Self {
        Self { radius: 0, weights: vec![1.0] }
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn side(&self) -> usize {
        2 * self.radius + 1
    }

    pub fn weights(&self) -> &[f32] {
        &self.weights
    }

    #[inline]
    pub fn at(&self, i: isize, j: isize) -> f32 {
        let r = self.radius as isize;
        self.weights[((j + r) * (2 * r + 1) + (i + r)) as usize]
    }

    pub fn sum(&self) -> f32 {
        self.weights.iter().sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Border {
    #[default]
    Replicate,
    /// Mirror about the edge pixel (`-1 -> 1`).
    Reflect,
}

impl Border {
    #[inline]
    pub fn index(self, i: isize, n: usize) -> usize {
        let n = n as isize;
        match self {
            Border::Replicate => i.clamp(0, n - 1) as usize,
            Border::Reflect => {
                if n == 1 {
                    return 0;
                }
                let period = 2 * (n - 1);
                let m = i.rem_euclid(period);
                (if m < n { m } else { period - m }) as usize
            }
        }
    }
}

/// True 2-D convolution, `out(x, y) = Σ k(i, j) · f(x − i, y − j)`, with
/// border extension. Per-pixel accumulation follows the kernel in row-major
/// order. The output is not clamped.
pub fn convolve2d(f: &Field, k: &Kernel2D, border: Border) -> Result<Field> {
    let (w, h) = (f.width, f.height);
    if w == 0 || h == 0 || f.data.is_empty() {
        return Err(Error::EmptyImage);
    }
    let r = k.radius() as isize;
    // column source index for every horizontal offset
    let col_maps: Vec<Vec<usize>> = (-r..=r)
        .map(|i| (0..w).map(|x| border.index(x as isize - i, w)).collect())
        .collect();
    let mut out = vec![0.0f32; w * h];
    // f64 row accumulator: the output is rounded to f32 once
    let mut acc = vec![0.0f64; w];
    for y in 0..h {
        acc.fill(0.0);
        for j in -r..=r {
            let sy = border.index(y as isize - j, h);
            let row = &f.data[sy * w..(sy + 1) * w];
            for (ii, i) in (-r..=r).enumerate() {
                let weight = k.at(i, j) as f64;
                let map = &col_maps[ii];
                for (a, &sx) in acc.iter_mut().zip(map) {
                    *a += weight * row[sx] as f64;
                }
            }
        }
        for (o, &a) in out[y * w..(y + 1) * w].iter_mut().zip(&acc) {
            *o = a as f32;
        }
    }
    Field::new(w, h, out)
}

/// Which preprocessing route feeds the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Approach {
    Gaussian,
    Gabor,
    Sobel,
}

impl Approach {
    pub const ALL: [Approach; 3] = [Approach::Gaussian, Approach::Gabor, Approach::Sobel];

    pub fn name(self) -> &'static str {
        match self {
            Approach::Gaussian => "gaussian",
            Approach::Gabor => "gabor",
            Approach::Sobel => "sobel",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            Approach::Gaussian => "Gaussian Blur",
            Approach::Gabor => "Gabor Filtering",
            Approach::Sobel => "Edge Detection by Sobel and Pruning",
        }
    }
}

impl fmt::Display for Approach {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Approach {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(Approach::Gaussian),
            "gabor" => Ok(Approach::Gabor),
            "sobel" => Ok(Approach::Sobel),
            other => Err(Error::ConfigInvalid(format!("unknown approach {other:?}"))),
        }
    }
}

/// Parameter blocks for all three approaches.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterConfig {
    pub gaussian: GaussianParams,
    pub gabor: GaborBankConfig,
    pub sobel: SobelPruneParams,
}

impl FilterConfig {
    pub fn validate(&self) -> Result<()> {
        self.gaussian.validate()?;
        for p in self.gabor.bank() {
            p.validate()?;
        }
        self.sobel.validate()
    }
}

/// Runs one approach; the output always has the input's dimensions and lies in `[0, 1]`.
pub fn apply_approach(img: &GrayImage, approach: Approach, cfg: &FilterConfig) -> Result<GrayImage> {
    match approach {
        Approach::Gaussian => gaussian_blur(img, &cfg.gaussian),
        Approach::Gabor => gabor_response(img, &cfg.gabor.bank()),
        Approach::Sobel => sobel_prune(img, &cfg.sobel),
    }
}
