//! Dataset manifests: which image pairs with which mask, where it came from,
//! and what transform produced it.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{load_image, load_mask, BinaryMask, GrayImage, GrayMode};

/// How an entry was derived from its original.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum Transform {
    Original,
    HFlip,
    VFlip,
    /// Rotation in degrees, counter-clockwise as displayed.
    Rotate(f32),
}

impl Transform {
    /// Filename suffix, e.g. `__hflip`; empty for originals.
    pub fn suffix(&self) -> String {
        match self {
            Transform::Original => String::new(),
            other => format!("__{other}"),
        }
    }
}

impl fmt::Display for Transform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Transform::Original => f.write_str("orig"),
            Transform::HFlip => f.write_str("hflip"),
            Transform::VFlip => f.write_str("vflip"),
            Transform::Rotate(d) => write!(f, "rot{d}"),
        }
    }
}

impl FromStr for Transform {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "orig" => Ok(Transform::Original),
            "hflip" => Ok(Transform::HFlip),
            "vflip" => Ok(Transform::VFlip),
            _ => s
                .strip_prefix("rot")
                .and_then(|d| d.parse::<f32>().ok())
                .filter(|d| d.is_finite())
                .map(Transform::Rotate)
                .ok_or_else(|| Error::ConfigInvalid(format!("unknown transform tag {s:?}"))),
        }
    }
}

impl From<Transform> for String {
    fn from(t: Transform) -> String {
        t.to_string()
    }
}

impl TryFrom<String> for Transform {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub image: PathBuf,
    pub mask: PathBuf,
    /// Index of the source original in sorted order.
    pub origin_id: usize,
    pub transform: Transform,
}

/// Serialises as a bare JSON array of entries.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DatasetManifest {
    pub entries: Vec<ManifestEntry>,
}

impl DatasetManifest {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_json(self, path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        read_json(path)
    }
}

pub(crate) fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::WriteFailure { path: path.to_path_buf(), reason: e.to_string() })
}

pub(crate) fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::UnreadableFile { path: path.to_path_buf(), reason: e.to_string() })?;
    Ok(serde_json::from_str(&text)?)
}

const IMAGE_EXTS: [&str; 3] = ["png", "pgm", "ppm"];

fn sorted_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let rd = match fs::read_dir(dir) {
        Ok(rd) => rd,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(Error::UnreadableFile { path: dir.to_path_buf(), reason: e.to_string() }),
    };
    let mut files: Vec<PathBuf> = rd
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.is_file()
                && p.extension()
                    .and_then(|e| e.to_str())
                    .is_some_and(|e| IMAGE_EXTS.contains(&e.to_ascii_lowercase().as_str()))
        })
        .collect();
    files.sort();
    Ok(files)
}

/// Pairs `<root>/images/*` with `<root>/masks/*` by sorted filename order.
pub fn scan_dataset(root: &Path) -> Result<DatasetManifest> {
    let images = sorted_files(&root.join("images"))?;
    let masks = sorted_files(&root.join("masks"))?;
    if images.is_empty() {
        return Err(Error::DatasetEmpty(root.to_path_buf()));
    }
    if images.len() != masks.len() {
        return Err(Error::PairMismatch { images: images.len(), masks: masks.len() });
    }
    Ok(DatasetManifest {
        entries: images
            .into_iter()
            .zip(masks)
            .enumerate()
            .map(|(origin_id, (image, mask))| ManifestEntry { image, mask, origin_id, transform: Transform::Original })
            .collect(),
    })
}

/// Loads one entry, checking that image and mask agree in size.
pub fn load_pair(entry: &ManifestEntry, gray: GrayMode) -> Result<(GrayImage, BinaryMask)> {
    let image = load_image(&entry.image, gray)?;
    let mask = load_mask(&entry.mask, 0.5, None)?;
    if image.dims() != mask.dims() {
        return Err(Error::PairDimensionMismatch { image: image.dims(), mask: mask.dims() });
    }
    Ok((image, mask))
}

/// A loaded image/mask pair ready for the network.
#[derive(Debug, Clone)]
pub struct Sample {
    pub name: String,
    pub image: GrayImage,
    pub mask: BinaryMask,
}

pub fn load_samples(entries: &[ManifestEntry], gray: GrayMode) -> Result<Vec<Sample>> {
    entries
        .iter()
        .map(|e| {
            let (image, mask) = load_pair(e, gray)?;
            let name = e.image.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            Ok(Sample { name, image, mask })
        })
        .collect()
}
