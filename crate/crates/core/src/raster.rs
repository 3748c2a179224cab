//! Grayscale images and binary masks: decoding, encoding and resampling.
//!
//! Intensities live in `[0, 1]` as `f32`; masks are `{0, 1}` bytes. Both are
//! stored row-major. Supported codecs are PNG (8/16-bit gray or RGB) and
//! binary PGM/PPM.

use std::path::Path;

use image::{ImageFormat, ImageReader};

use crate::error::{Error, Result};

/// How RGB input is reduced to one channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GrayMode {
    /// Green channel only; vessels have the highest contrast there.
    #[default]
    GreenChannel,
    /// ITU-R BT.601 luma.
    Luminance,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<f32>,
}

impl GrayImage {
    /// Builds an image, checking length and that every value is finite and in `[0, 1]`.
    pub fn new(width: usize, height: usize, data: Vec<f32>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::EmptyImage);
        }
        if data.len() != width * height {
            return Err(Error::ShapeMismatch(format!(
                "{} values for a {width}x{height} image",
                data.len()
            )));
        }
        if let Some(v) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::ConfigInvalid(format!("intensity {v} outside [0,1]")));
        }
        Ok(Self { width, height, data })
    }

    /// Clamps into `[0, 1]` (NaN becomes 0) instead of rejecting.
    pub fn from_clamped(width: usize, height: usize, mut data: Vec<f32>) -> Result<Self> {
        for v in &mut data {
            *v = if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) };
        }
        Self::new(width, height, data)
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> f32) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::from_clamped(width, height, data)
    }

    pub fn constant(width: usize, height: usize, value: f32) -> Result<Self> {
        Self::from_clamped(width, height, vec![value; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.data[y * self.width + x]
    }

    pub fn transpose(&self) -> GrayImage {
        let mut data = Vec::with_capacity(self.data.len());
        for x in 0..self.width {
            for y in 0..self.height {
                data.push(self.get(x, y));
            }
        }
        GrayImage { width: self.height, height: self.width, data }
    }

    pub fn min_max(&self) -> (f32, f32) {
        self.data
            .iter()
            .fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::EmptyImage);
        }
        if data.len() != width * height {
            return Err(Error::ShapeMismatch(format!(
                "{} labels for a {width}x{height} mask",
                data.len()
            )));
        }
        if data.iter().any(|&v| v > 1) {
            return Err(Error::ConfigInvalid("mask label outside {0,1}".into()));
        }
        Ok(Self { width, height, data })
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> bool) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y) as u8);
            }
        }
        Self::new(width, height, data)
    }

    pub fn zeros(width: usize, height: usize) -> Result<Self> {
        Self::new(width, height, vec![0; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.width + x]
    }

    pub fn count_ones(&self) -> usize {
        self.data.iter().filter(|&&v| v == 1).count()
    }

    pub fn complement(&self) -> BinaryMask {
        BinaryMask {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| 1 - v).collect(),
        }
    }

    /// Mask as a `{0.0, 1.0}` image, e.g. to feed an edge map to the network.
    pub fn to_gray(&self) -> GrayImage {
        GrayImage {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| v as f32).collect(),
        }
    }
}

/// Anything that can be written as an 8-bit grayscale file.
pub trait Gray8 {
    fn dims(&self) -> (usize, usize);
    fn to_gray8(&self) -> Vec<u8>;
}

impl Gray8 for GrayImage {
    fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    fn to_gray8(&self) -> Vec<u8> {
        self.data.iter().map(|&v| (v * 255.0).round().clamp(0.0, 255.0) as u8).collect()
    }
}

impl Gray8 for BinaryMask {
    fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    fn to_gray8(&self) -> Vec<u8> {
        self.data.iter().map(|&v| v * 255).collect()
    }
}

fn unreadable(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::UnreadableFile { path: path.to_path_buf(), reason: e.to_string() }
}

/// Decodes a PNG, PGM (P5) or PPM (P6) file into `[0, 1]` intensities.
pub fn load_image(path: &Path, mode: GrayMode) -> Result<GrayImage> {
    let reader = ImageReader::open(path)
        .map_err(|e| unreadable(path, e))?
        .with_guessed_format()
        .map_err(|e| unreadable(path, e))?;
    match reader.format() {
        Some(ImageFormat::Png) | Some(ImageFormat::Pnm) => {}
        Some(other) => return Err(Error::UnsupportedFormat(format!("{other:?} ({})", path.display()))),
        None => return Err(Error::UnsupportedFormat(format!("unknown ({})", path.display()))),
    }
    let decoded = reader.decode().map_err(|e| match e {
        image::ImageError::Unsupported(u) => Error::UnsupportedFormat(u.to_string()),
        other => unreadable(path, other),
    })?;
    let (w, h) = (decoded.width() as usize, decoded.height() as usize);
    if w == 0 || h == 0 {
        return Err(Error::ZeroSizedImage(path.to_path_buf()));
    }
    let data: Vec<f32> = if decoded.color().has_color() {
        let rgb = decoded.to_rgb32f();
        rgb.pixels()
            .map(|p| match mode {
                GrayMode::GreenChannel => p.0[1],
                GrayMode::Luminance => 0.299 * p.0[0] + 0.587 * p.0[1] + 0.114 * p.0[2],
            })
            .collect()
    } else {
        decoded.to_luma32f().into_raw()
    };
    GrayImage::from_clamped(w, h, data)
}

/// Loads a grayscale file as a mask: label 1 iff intensity ≥ `threshold`.
/// An optional resize uses nearest-neighbour so labels stay binary.
pub fn load_mask(path: &Path, threshold: f32, resize_to: Option<(usize, usize)>) -> Result<BinaryMask> {
    let img = load_image(path, GrayMode::GreenChannel)?;
    let data = img.data().iter().map(|&v| (v >= threshold) as u8).collect();
    let mask = BinaryMask::new(img.width(), img.height(), data)?;
    match resize_to {
        Some((w, h)) => resize_nearest(&mask, w, h),
        None => Ok(mask),
    }
}

/// Writes an 8-bit PNG or binary PGM, chosen by the file extension.
pub fn save_image(img: &impl Gray8, path: &Path) -> Result<()> {
    let format = match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
        Some("png") => ImageFormat::Png,
        Some("pgm") => ImageFormat::Pnm,
        _ => return Err(Error::UnsupportedFormat(format!("cannot encode {}", path.display()))),
    };
    let (w, h) = img.dims();
    let buf = image::GrayImage::from_raw(w as u32, h as u32, img.to_gray8())
        .expect("buffer length matches dimensions");
    buf.save_with_format(path, format).map_err(|e| Error::WriteFailure {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

/// Bilinear resampling with half-pixel-centre alignment: output pixel `x`
/// samples source coordinate `(x + 0.5) * in_w / out_w - 0.5`, clamped to the
/// edge. Output is clamped to `[0, 1]`.
pub fn resize_bilinear(img: &GrayImage, out_w: usize, out_h: usize) -> Result<GrayImage> {
    if out_w == 0 || out_h == 0 {
        return Err(Error::ZeroSizedTarget(out_w, out_h));
    }
    let (in_w, in_h) = img.dims();
    let cols: Vec<(usize, usize, f32)> = (0..out_w).map(|x| bilinear_taps(x, in_w, out_w)).collect();
    let rows: Vec<(usize, usize, f32)> = (0..out_h).map(|y| bilinear_taps(y, in_h, out_h)).collect();
    let mut out = Vec::with_capacity(out_w * out_h);
    for &(y0, y1, fy) in &rows {
        for &(x0, x1, fx) in &cols {
            let top = img.get(x0, y0) * (1.0 - fx) + img.get(x1, y0) * fx;
            let bottom = img.get(x0, y1) * (1.0 - fx) + img.get(x1, y1) * fx;
            out.push(top * (1.0 - fy) + bottom * fy);
        }
    }
    GrayImage::from_clamped(out_w, out_h, out)
}

fn bilinear_taps(o: usize, n_in: usize, n_out: usize) -> (usize, usize, f32) {
    let src = ((o as f64 + 0.5) * n_in as f64 / n_out as f64 - 0.5).clamp(0.0, (n_in - 1) as f64);
    let i0 = src.floor() as usize;
    let i1 = (i0 + 1).min(n_in - 1);
    (i0, i1, (src - i0 as f64) as f32)
}

/// Nearest-neighbour resampling: output pixel `x` reads source
/// `floor((x + 0.5) * in_w / out_w)`.
pub fn resize_nearest(mask: &BinaryMask, out_w: usize, out_h: usize) -> Result<BinaryMask> {
    if out_w == 0 || out_h == 0 {
        return Err(Error::ZeroSizedTarget(out_w, out_h));
    }
    let (in_w, in_h) = mask.dims();
    let pick = |o: usize, n_in: usize, n_out: usize| {
        (((o as f64 + 0.5) * n_in as f64 / n_out as f64).floor() as usize).min(n_in - 1)
    };
    let cols: Vec<usize> = (0..out_w).map(|x| pick(x, in_w, out_w)).collect();
    let mut data = Vec::with_capacity(out_w * out_h);
    for y in 0..out_h {
        let sy = pick(y, in_h, out_h);
        data.extend(cols.iter().map(|&sx| mask.get(sx, sy)));
    }
    BinaryMask::new(out_w, out_h, data)
}
