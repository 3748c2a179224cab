use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{convolve2d, Border, Field, Kernel2D};
use crate::error::{Error, Result};
use crate::raster::GrayImage;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaborParams {
    /// Carrier wavelength λ in pixels.
    pub wavelength: f32,
    /// Orientation θ in radians.
    pub orientation: f32,
    /// Envelope standard deviation σ in pixels.
    pub sigma: f32,
    /// Spatial aspect ratio γ.
    pub aspect: f32,
    /// Phase offset ψ in radians.
    pub phase: f32,
    pub radius: usize,
}

impl GaborParams {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f32| v > 0.0 && v.is_finite();
        if !positive(self.wavelength) || !positive(self.sigma) || !positive(self.aspect) {
            return Err(Error::ConfigInvalid(format!(
                "gabor wavelength/sigma/aspect must be > 0: {self:?}"
            )));
        }
        if !self.orientation.is_finite() || !self.phase.is_finite() {
            return Err(Error::ConfigInvalid("gabor orientation/phase must be finite".into()));
        }
        Ok(())
    }
}

/// A bank of evenly spaced orientations `θ_k = kπ/n` sharing every other parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GaborBankConfig {
    pub orientations: usize,
    pub wavelength: f32,
    pub sigma: f32,
    pub aspect: f32,
    pub phase: f32,
    pub radius: usize,
}

impl Default for GaborBankConfig {
    fn default() -> Self {
        Self { orientations: 8, wavelength: 8.0, sigma: 3.0, aspect: 0.5, phase: 0.0, radius: 9 }
    }
}

impl GaborBankConfig {
    pub fn bank(&self) -> Vec<GaborParams> {
        (0..self.orientations)
            .map(|k| GaborParams {
                wavelength: self.wavelength,
                orientation: (k as f64 * PI / self.orientations as f64) as f32,
                sigma: self.sigma,
                aspect: self.aspect,
                phase: self.phase,
                radius: self.radius,
            })
            .collect()
    }
}

/// Real (even) Gabor kernel, unnormalised:
/// `w(x, y) = exp(−(x'² + γ²y'²) / 2σ²) · cos(2πx'/λ + ψ)` with
/// `x' = x cosθ + y sinθ`, `y' = −x sinθ + y cosθ`.
pub fn gabor_kernel(p: &GaborParams) -> Result<Kernel2D> {
    p.validate()?;
    let r = p.radius as isize;
    let (sin, cos) = (p.orientation as f64).sin_cos();
    let (lambda, sigma, gamma, psi) = (p.wavelength as f64, p.sigma as f64, p.aspect as f64, p.phase as f64);
    let mut w = Vec::with_capacity(((2 * r + 1) * (2 * r + 1)) as usize);
    for y in -r..=r {
        for x in -r..=r {
            let (x, y) = (x as f64, y as f64);
            let xr = x * cos + y * sin;
            let yr = -x * sin + y * cos;
            let envelope = (-(xr * xr + gamma * gamma * yr * yr) / (2.0 * sigma * sigma)).exp();
            w.push((envelope * (2.0 * PI * xr / lambda + psi).cos()) as f32);
        }
    }
    Kernel2D::new(p.radius, w)
}

/// Per-pixel maximum of the bank's responses, before any rescaling.
pub fn gabor_max_response(img: &GrayImage, bank: &[GaborParams]) -> Result<Field> {
    if bank.is_empty() {
        return Err(Error::EmptyBank);
    }
    let input = Field::from(img);
    let mut best: Option<Field> = None;
    for p in bank {
        let resp = convolve2d(&input, &gabor_kernel(p)?, Border::Replicate)?;
        best = Some(match best {
            None => resp,
            Some(mut acc) => {
                for (a, r) in acc.data.iter_mut().zip(&resp.data) {
                    *a = a.max(*r);
                }
                acc
            }
        });
    }
    Ok(best.expect("bank is non-empty"))
}

/// Bank maximum, min–max rescaled to `[0, 1]` over the whole image
/// (all zeros when the response is flat).
pub fn gabor_response(img: &GrayImage, bank: &[GaborParams]) -> Result<GrayImage> {
    let resp = gabor_max_response(img, bank)?;
    let (lo, hi) = (resp.min(), resp.max());
    let span = hi - lo;
    let data = if span > 0.0 {
        resp.data.iter().map(|&v| (v - lo) / span).collect()
    } else {
        vec![0.0; resp.data.len()]
    };
    GrayImage::from_clamped(resp.width, resp.height, data)
}
