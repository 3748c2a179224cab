use serde::{Deserialize, Serialize};

use super::{Border, Field, Kernel2D};
use crate::error::{Error, Result};
use crate::raster::GrayImage;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianParams {
    pub sigma: f32,
    pub radius: usize,
}

impl GaussianParams {
    /// Radius defaults to `ceil(3σ)`.
    pub fn with_sigma(sigma: f32) -> Self {
        Self { sigma, radius: ((3.0 * sigma).ceil() as usize).max(1) }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::ConfigInvalid(format!("gaussian sigma must be > 0, got {}", self.sigma)));
        }
        if self.radius < 1 {
            return Err(Error::ConfigInvalid("gaussian radius must be >= 1".into()));
        }
        Ok(())
    }
}

impl Default for GaussianParams {
    fn default() -> Self {
        Self { sigma: 1.0, radius: 3 }
    }
}

/// Normalised 1-D Gaussian taps for offsets `-r..=r`, in `f64`.
pub fn gaussian_kernel_1d(p: &GaussianParams) -> Vec<f64> {
    let s2 = 2.0 * (p.sigma as f64).powi(2);
    let r = p.radius as isize;
    let taps: Vec<f64> = (-r..=r).map(|i| (-((i * i) as f64) / s2).exp()).collect();
    let total: f64 = taps.iter().sum();
    taps.into_iter().map(|t| t / total).collect()
}

/// `w(i, j) ∝ exp(−(i² + j²) / 2σ²)`, normalised to unit sum.
pub fn gaussian_kernel(p: &GaussianParams) -> Result<Kernel2D> {
    p.validate()?;
    let r = p.radius as isize;
    let s2 = 2.0 * (p.sigma as f64).powi(2);
    let mut w = Vec::with_capacity(((2 * r + 1) * (2 * r + 1)) as usize);
    for j in -r..=r {
        for i in -r..=r {
            w.push((-((i * i + j * j) as f64) / s2).exp());
        }
    }
    let total: f64 = w.iter().sum();
    Kernel2D::new(p.radius, w.into_iter().map(|v| (v / total) as f32).collect())
}

/// Gaussian blur with replicate borders, computed as two separable 1-D passes
/// and clamped to `[0, 1]`.
///
/// Mirror-image taps are summed pairwise (`t_i · (a[x−i] + a[x+i])`) so the
/// result commutes bit-exactly with horizontal and vertical flips.
pub fn gaussian_blur(img: &GrayImage, p: &GaussianParams) -> Result<GrayImage> {
    p.validate()?;
    let taps = gaussian_kernel_1d(p);
    let (w, h) = img.dims();
    let r = p.radius as isize;
    let src = img.data();
    let border = Border::Replicate;
    let pass = |x: usize, n: usize, sample: &dyn Fn(usize) -> f64| {
        let mut acc = taps[p.radius] * sample(x);
        for i in 1..=r {
            let lo = sample(border.index(x as isize - i, n));
            let hi = sample(border.index(x as isize + i, n));
            acc += taps[(r + i) as usize] * (lo + hi);
        }
        acc
    };

    let mut horiz = vec![0.0f64; w * h];
    for y in 0..h {
        let row = &src[y * w..(y + 1) * w];
        for x in 0..w {
            horiz[y * w + x] = pass(x, w, &|sx| row[sx] as f64);
        }
    }
    let mut out = vec![0.0f32; w * h];
    for y in 0..h {
        for x in 0..w {
            out[y * w + x] = pass(y, h, &|sy| horiz[sy * w + x]) as f32;
        }
    }
    Ok(Field::new(w, h, out)?.to_gray_clamped())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filters::convolve2d;

    #[test]
    fn kernel_normalised_and_symmetric() {
        let k = gaussian_kernel(&GaussianParams { sigma: 1.0, radius: 3 }).unwrap();
        let sum: f64 = k.weights().iter().map(|&v| v as f64).sum();
        assert!((sum - 1.0).abs() < 1e-7);
        let centre = k.at(0, 0);
        for j in -3..=3 {
            for i in -3..=3 {
                assert!(k.at(i, j) <= centre);
                assert!(k.at(i, j) >= 0.0);
                assert_eq!(k.at(i, j), k.at(-i, -j));
                assert_eq!(k.at(i, j), k.at(j, i));
            }
        }
    }

    #[test]
    fn neighbour_ratio_closed_form() {
        let k = gaussian_kernel(&GaussianParams { sigma: 2.0, radius: 6 }).unwrap();
        let ratio = k.at(1, 0) as f64 / k.at(0, 0) as f64;
        assert!((ratio - (-1.0f64 / 8.0).exp()).abs() < 1e-6);
        assert!((ratio - 0.8825).abs() < 1e-4);
    }

    #[test]
    fn blur_preserves_constant() {
        let img = GrayImage::constant(12, 9, 0.3).unwrap();
        let out = gaussian_blur(&img, &GaussianParams::default()).unwrap();
        assert!(out.data().iter().all(|v| (v - 0.3).abs() < 1e-6));
    }

    #[test]
    fn impulse_decays_monotonically() {
        let img = GrayImage::from_fn(21, 21, |x, y| (x == 10 && y == 10) as u8 as f32).unwrap();
        let out = gaussian_blur(&img, &GaussianParams::default()).unwrap();
        let (_, max) = out.min_max();
        assert_eq!(out.get(10, 10), max);
        for d in 0..6 {
            assert!(out.get(10 + d, 10) >= out.get(11 + d, 10));
            assert!(out.get(10, 10 + d) >= out.get(10, 11 + d));
        }
    }

    #[test]
    fn separable_matches_direct() {
        let img = GrayImage::from_fn(16, 16, |x, y| ((x * 13 + y * 7) % 17) as f32 / 16.0).unwrap();
        let p = GaussianParams::with_sigma(1.5);
        let sep = gaussian_blur(&img, &p).unwrap();
        let direct = convolve2d(&Field::from(&img), &gaussian_kernel(&p).unwrap(), Border::Replicate)
            .unwrap()
            .to_gray_clamped();
        for (a, b) in sep.data().iter().zip(direct.data()) {
            assert!((a - b).abs() < 1e-5);
        }
    }

    #[test]
    fn invalid_sigma_rejected() {
        assert!(gaussian_kernel(&GaussianParams { sigma: 0.0, radius: 3 }).is_err());
        assert!(gaussian_kernel(&GaussianParams { sigma: 1.0, radius: 0 }).is_err());
        assert_eq!(GaussianParams::with_sigma(1.5).radius, 5);
    }
}
