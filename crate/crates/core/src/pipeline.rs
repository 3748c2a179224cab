//! Experiment orchestration: config, preprocess → augment → split → train →
//! evaluate, and report tables.
//!
//! Output layout under `out_dir`:
//!
//! ```text
//! <approach>/images, masks          preprocessed originals and their augmented siblings
//! <approach>/manifest.json          preprocessed originals
//! <approach>/augmented.json         3N augmented entries
//! <approach>/split.json             train/val/test partition
//! <approach>/<model>/               checkpoint.rseg, history.csv, pred/, report.csv, report.md, metrics.json
//! report.csv, report.md             combined tables (`report`, `grid`)
//! ```
//!
//! Every directory a stage writes also receives `config.resolved.json`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::augment::{augment_dataset, split_dataset, split_grouped, SplitCounts, SplitManifest};
use crate::checkpoint::{load_checkpoint, save_checkpoint};
use crate::dataset::{load_samples, read_json, scan_dataset, write_json, DatasetManifest, ManifestEntry, Transform};
use crate::error::{Error, Result};
use crate::filters::{apply_approach, Approach, FilterConfig};
use crate::metrics::{sig6, MetricsReport, CSV_HEADER};
use crate::raster::{load_image, load_mask, resize_bilinear, save_image, GrayImage, GrayMode};
use crate::trainer::{evaluate, predict, train_observed, TrainConfig};
use crate::unet::{build_unet, Model, ModelKind, UNetConfig};

pub const RESOLVED_CONFIG: &str = "config.resolved.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    pub train: usize,
    pub val: usize,
    pub test: usize,
    pub seed: u64,
    /// Keep all variants of one original in the same partition.
    pub grouped: bool,
}

impl Default for SplitConfig {
    fn default() -> Self {
        let c = SplitCounts::default();
        Self { train: c.train, val: c.val, test: c.test, seed: 0, grouped: false }
    }
}

impl SplitConfig {
    pub fn counts(&self) -> SplitCounts {
        SplitCounts::new(self.train, self.val, self.test)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Directory holding `images/` and `masks/`.
    pub dataset_root: PathBuf,
    /// `(width, height)` every image is resized to.
    pub target_size: (usize, usize),
    pub gray_mode: GrayMode,
    pub mask_threshold: f32,
    pub approach: Approach,
    pub filters: FilterConfig,
    pub rotation_degrees: f32,
    pub split: SplitConfig,
    pub model: ModelKind,
    pub width_scale: usize,
    pub train: TrainConfig,
    pub out_dir: PathBuf,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            dataset_root: PathBuf::from("data/drive"),
            target_size: (512, 512),
            gray_mode: GrayMode::default(),
            mask_threshold: 0.5,
            approach: Approach::Gaussian,
            filters: FilterConfig::default(),
            rotation_degrees: 15.0,
            split: SplitConfig::default(),
            model: ModelKind::RetiUNet1,
            width_scale: 1,
            train: TrainConfig::default(),
            out_dir: PathBuf::from("runs"),
        }
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::ConfigInvalid(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Error::ConfigInvalid(format!("{}: {e}", path.display())))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn unet_config(&self) -> UNetConfig {
        self.model.config().with_width_scale(self.width_scale)
    }

    /// Checks everything that can be checked before touching data.
    pub fn validate(&self) -> Result<()> {
        let (w, h) = self.target_size;
        if w == 0 || h == 0 {
            return Err(Error::ZeroSizedTarget(w, h));
        }
        if !(0.0..=1.0).contains(&self.mask_threshold) {
            return Err(Error::ConfigInvalid(format!("mask_threshold {} outside [0, 1]", self.mask_threshold)));
        }
        if !self.rotation_degrees.is_finite() {
            return Err(Error::ConfigInvalid("rotation_degrees must be finite".into()));
        }
        self.filters.validate()?;
        let unet = self.unet_config();
        unet.validate()?;
        unet.check_spatial(h, w)?;
        self.train.validate()
    }

    pub fn approach_dir(&self) -> PathBuf {
        self.out_dir.join(self.approach.name())
    }

    pub fn experiment_dir(&self) -> PathBuf {
        self.approach_dir().join(self.model.slug())
    }

    pub fn with_approach(&self, approach: Approach) -> Self {
        Self { approach, ..self.clone() }
    }

    pub fn with_model(&self, model: ModelKind) -> Self {
        Self { model, ..self.clone() }
    }
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::WriteFailure { path: path.to_path_buf(), reason: e.to_string() })
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::WriteFailure { path: path.to_path_buf(), reason: e.to_string() })
}

fn snapshot_config(cfg: &PipelineConfig, dir: &Path) -> Result<()> {
    write_text(&dir.join(RESOLVED_CONFIG), &cfg.to_json()?)
}

/// Loads, resizes and filters one raw image the way training data is prepared.
pub fn preprocess_image(cfg: &PipelineConfig, path: &Path) -> Result<GrayImage> {
    let img = load_image(path, cfg.gray_mode)?;
    let (w, h) = cfg.target_size;
    let img = if img.dims() == (w, h) { img } else { resize_bilinear(&img, w, h)? };
    apply_approach(&img, cfg.approach, &cfg.filters)
}

/// Preprocesses every pair under `dataset_root`; returns the manifest of originals.
pub fn run_preprocess(cfg: &PipelineConfig) -> Result<DatasetManifest> {
    cfg.validate()?;
    let source = scan_dataset(&cfg.dataset_root)?;
    let dir = cfg.approach_dir();
    let (img_dir, mask_dir) = (dir.join("images"), dir.join("masks"));
    create_dir(&img_dir)?;
    create_dir(&mask_dir)?;
    let mut entries = Vec::with_capacity(source.len());
    for (i, e) in source.entries.iter().enumerate() {
        let stem = e.image.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| format!("{i:03}"));
        let img = preprocess_image(cfg, &e.image)?;
        let mask = load_mask(&e.mask, cfg.mask_threshold, Some(cfg.target_size))?;
        let image = img_dir.join(format!("{stem}.png"));
        let mask_path = mask_dir.join(format!("{stem}.png"));
        save_image(&img, &image)?;
        save_image(&mask, &mask_path)?;
        entries.push(ManifestEntry { image, mask: mask_path, origin_id: i, transform: Transform::Original });
    }
    let manifest = DatasetManifest { entries };
    manifest.save(&dir.join("manifest.json"))?;
    snapshot_config(cfg, &dir)?;
    Ok(manifest)
}

fn load_or<T>(path: &Path, load: impl Fn(&Path) -> Result<T>, make: impl FnOnce() -> Result<T>) -> Result<T> {
    if path.exists() {
        load(path)
    } else {
        make()
    }
}

/// Writes the three variants of every preprocessed original (running the
/// preprocess stage first when its manifest is missing).
pub fn run_augment(cfg: &PipelineConfig) -> Result<DatasetManifest> {
    cfg.validate()?;
    let dir = cfg.approach_dir();
    let originals = load_or(&dir.join("manifest.json"), DatasetManifest::load, || run_preprocess(cfg))?;
    let augmented = augment_dataset(&originals, cfg.rotation_degrees, GrayMode::default())?;
    augmented.save(&dir.join("augmented.json"))?;
    snapshot_config(cfg, &dir)?;
    Ok(augmented)
}

pub fn run_split(cfg: &PipelineConfig) -> Result<SplitManifest> {
    cfg.validate()?;
    let dir = cfg.approach_dir();
    let augmented = load_or(&dir.join("augmented.json"), DatasetManifest::load, || run_augment(cfg))?;
    let s = &cfg.split;
    let split = if s.grouped {
        split_grouped(&augmented, s.counts(), s.seed)?
    } else {
        split_dataset(&augmented, s.counts(), s.seed)?
    };
    split.save(&dir.join("split.json"))?;
    snapshot_config(cfg, &dir)?;
    Ok(split)
}

/// One line of the results tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub model: ModelKind,
    pub approach: Approach,
    pub metrics: MetricsReport,
}

/// Validation and test metrics of one trained model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentMetrics {
    pub best_epoch: usize,
    pub val: MetricsReport,
    pub test: MetricsReport,
}

/// Trains the configured model on the configured approach, evaluates on the
/// test split and writes every artifact into [`PipelineConfig::experiment_dir`].
pub fn run_experiment(cfg: &PipelineConfig) -> Result<ReportRow> {
    cfg.validate()?;
    let split = load_or(&cfg.approach_dir().join("split.json"), SplitManifest::load, || run_split(cfg))?;
    let dir = cfg.experiment_dir();
    create_dir(&dir)?;
    snapshot_config(cfg, &dir)?;
    let gray = GrayMode::default();
    let (train_set, val_set, test_set) =
        (load_samples(&split.train, gray)?, load_samples(&split.val, gray)?, load_samples(&split.test, gray)?);
    if test_set.is_empty() {
        return Err(Error::EmptyEvalSet);
    }

    let model: Model = build_unet(&cfg.unet_config(), cfg.train.seed)?;
    let every = cfg.train.checkpoint_every;
    let outcome = train_observed(model, &train_set, &val_set, &cfg.train, &mut |rec, m, opt| {
        if every > 0 && rec.epoch % every == 0 {
            save_checkpoint(m, Some(opt), &dir.join(format!("checkpoint_epoch{:04}.rseg", rec.epoch)))?;
        }
        Ok(())
    })?;
    save_checkpoint(&outcome.best, Some(&outcome.optimizer), &dir.join("checkpoint.rseg"))?;
    outcome.history.save_csv(&dir.join("history.csv"))?;

    let tt = outcome.history.tt;
    let threshold = cfg.train.threshold;
    let val = evaluate(&outcome.best, &val_set, threshold)?.with_tt(tt);
    let test = evaluate(&outcome.best, &test_set, threshold)?.with_tt(tt);
    write_predictions(&outcome.best, &test_set, threshold, &dir.join("pred"))?;
    write_json(&ExperimentMetrics { best_epoch: outcome.best_epoch, val, test }, &dir.join("metrics.json"))?;

    let row = ReportRow { model: cfg.model, approach: cfg.approach, metrics: test };
    write_report_files(std::slice::from_ref(&row), &dir)?;
    Ok(row)
}

fn write_predictions(model: &Model, samples: &[crate::dataset::Sample], threshold: f32, dir: &Path) -> Result<()> {
    create_dir(dir)?;
    for s in samples {
        save_image(&predict(model, &s.image, threshold)?, &dir.join(format!("{}.png", s.name)))?;
    }
    Ok(())
}

/// Re-evaluates a saved checkpoint on the validation and test splits.
pub fn run_eval(cfg: &PipelineConfig, checkpoint: &Path) -> Result<ExperimentMetrics> {
    cfg.validate()?;
    let split = SplitManifest::load(&cfg.approach_dir().join("split.json"))?;
    let (model, _) = load_checkpoint(checkpoint)?;
    let gray = GrayMode::default();
    let threshold = cfg.train.threshold;
    let val = evaluate(&model, &load_samples(&split.val, gray)?, threshold)?;
    let test = evaluate(&model, &load_samples(&split.test, gray)?, threshold)?;
    Ok(ExperimentMetrics { best_epoch: 0, val, test })
}

/// Preprocesses a raw image like the training data and writes its predicted mask.
pub fn run_predict(cfg: &PipelineConfig, checkpoint: &Path, input: &Path, output: &Path) -> Result<()> {
    cfg.validate()?;
    let (model, _) = load_checkpoint(checkpoint)?;
    let img = preprocess_image(cfg, input)?;
    save_image(&predict(&model, &img, cfg.train.threshold)?, output)
}

/// Every approach × model combination, then the combined report.
pub fn run_grid(cfg: &PipelineConfig) -> Result<Vec<ReportRow>> {
    let mut rows = Vec::new();
    for approach in Approach::ALL {
        for model in ModelKind::ALL {
            rows.push(run_experiment(&cfg.with_approach(approach).with_model(model))?);
        }
    }
    write_report_files(&rows, &cfg.out_dir)?;
    snapshot_config(cfg, &cfg.out_dir)?;
    Ok(rows)
}

/// Gathers the per-experiment `report.csv` files under `out_dir` into a combined report.
pub fn run_report(cfg: &PipelineConfig) -> Result<Vec<ReportRow>> {
    let mut rows = Vec::new();
    for approach in Approach::ALL {
        for model in ModelKind::ALL {
            let path = cfg.out_dir.join(approach.name()).join(model.slug()).join("report.csv");
            if path.exists() {
                let text = fs::read_to_string(&path)
                    .map_err(|e| Error::UnreadableFile { path: path.clone(), reason: e.to_string() })?;
                rows.extend(parse_report_csv(&text)?);
            }
        }
    }
    write_report_files(&rows, &cfg.out_dir)?;
    Ok(rows)
}

fn write_report_files(rows: &[ReportRow], dir: &Path) -> Result<()> {
    create_dir(dir)?;
    write_text(&dir.join("report.csv"), &emit_report(rows, ReportFormat::Csv)?)?;
    write_text(&dir.join("report.md"), &emit_report(rows, ReportFormat::Markdown)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Markdown,
}

/// Rows grouped by approach (gaussian, gabor, sobel), each group sorted by model name.
fn grouped(rows: &[ReportRow]) -> BTreeMap<Approach, Vec<&ReportRow>> {
    let mut g: BTreeMap<Approach, Vec<&ReportRow>> = BTreeMap::new();
    for r in rows {
        g.entry(r.approach).or_default().push(r);
    }
    for v in g.values_mut() {
        v.sort_by_key(|r| r.model.display_name());
    }
    g
}

pub fn emit_report(rows: &[ReportRow], format: ReportFormat) -> Result<String> {
    if rows.is_empty() {
        return Err(Error::NoRows);
    }
    let groups = grouped(rows);
    let mut out = String::new();
    match format {
        ReportFormat::Csv => {
            out.push_str(CSV_HEADER);
            out.push('\n');
            for r in groups.values().flatten() {
                out.push_str(&r.metrics.csv_row(r.model.display_name(), r.approach.name()));
                out.push('\n');
            }
        }
        ReportFormat::Markdown => {
            for (i, (approach, rows)) in groups.iter().enumerate() {
                if i > 0 {
                    out.push('\n');
                }
                let n = Approach::ALL.iter().position(|a| a == approach).expect("known approach") + 1;
                let _ = writeln!(out, "### Approach {n}: {}\n", approach.title());
                out.push_str("| Model | IS | Acc | Rec | DL | DC | TT | ER |\n");
                out.push_str("|---|---|---|---|---|---|---|---|\n");
                for r in rows {
                    let cells: Vec<String> = r.metrics.columns().iter().map(|&v| sig6(v)).collect();
                    let _ = writeln!(out, "| {} | {} |", r.model.display_name(), cells.join(" | "));
                }
            }
        }
    }
    Ok(out)
}

/// Inverse of the CSV form of [`emit_report`].
pub fn parse_report_csv(text: &str) -> Result<Vec<ReportRow>> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if header.join(",") != CSV_HEADER {
        return Err(Error::ConfigInvalid(format!("unexpected report header {header:?}")));
    }
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        let num = |i: usize| -> Result<f64> {
            rec[i].parse::<f64>().map_err(|e| Error::ConfigInvalid(format!("bad number {:?}: {e}", &rec[i])))
        };
        rows.push(ReportRow {
            model: rec[0].parse()?,
            approach: rec[1].parse()?,
            metrics: MetricsReport {
                is_: num(2)?,
                acc: num(3)?,
                rec: num(4)?,
                dl: num(5)?,
                dc: num(6)?,
                tt: num(7)?,
                er: num(8)?,
            },
        });
    }
    Ok(rows)
}

/// Reads any JSON artifact written by the pipeline.
pub fn read_artifact<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    read_json(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(model: ModelKind, approach: Approach, is_: f64) -> ReportRow {
        ReportRow {
            model,
            approach,
            metrics: MetricsReport { is_, acc: 0.96, rec: 0.8, dl: 0.39, dc: 0.61, tt: 12.5, er: is_ / 0.39 },
        }
    }

    fn grid_rows() -> Vec<ReportRow> {
        let mut rows = Vec::new();
        for a in Approach::ALL.iter().rev() {
            for m in ModelKind::ALL.iter().rev() {
                rows.push(row(*m, *a, 0.7));
            }
        }
        rows
    }

    #[test]
    fn defaults_round_trip_through_json() {
        let cfg = PipelineConfig::default();
        let back: PipelineConfig = serde_json::from_str(&cfg.to_json().unwrap()).unwrap();
        assert_eq!(back, cfg);
        assert!(cfg.validate().is_ok());
        assert_eq!(cfg.train.epochs, 100);
        assert_eq!(cfg.split.counts(), SplitCounts::new(80, 20, 20));
    }

    #[test]
    fn partial_config_uses_defaults_and_unknown_keys_fail() {
        let cfg: PipelineConfig = serde_json::from_str(r#"{"approach": "sobel", "train": {"epochs": 3}}"#).unwrap();
        assert_eq!(cfg.approach, Approach::Sobel);
        assert_eq!(cfg.train.epochs, 3);
        assert_eq!(cfg.train.batch_size, 2);
        assert!(serde_json::from_str::<PipelineConfig>(r#"{"aproach": "sobel"}"#).is_err());
    }

    #[test]
    fn indivisible_target_rejected_up_front() {
        let cfg = PipelineConfig { target_size: (500, 512), ..Default::default() };
        assert!(matches!(cfg.validate(), Err(Error::IndivisibleSpatialDim { .. })));
        // 48 is divisible by 16 but not by 32
        let cfg = PipelineConfig { target_size: (48, 48), model: ModelKind::RetiUNet2, ..Default::default() };
        assert!(cfg.validate().is_err());
        let cfg = PipelineConfig { target_size: (48, 48), ..Default::default() };
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn six_rows_give_three_tables() {
        let md = emit_report(&grid_rows(), ReportFormat::Markdown).unwrap();
        assert_eq!(md.matches("| Model | IS | Acc | Rec | DL | DC | TT | ER |").count(), 3);
        let g = md.find("Gaussian Blur").unwrap();
        let b = md.find("Gabor Filtering").unwrap();
        let s = md.find("Sobel").unwrap();
        assert!(g < b && b < s);
        let first = md.find("| Reti-UNet1 |").unwrap();
        let second = md.find("| Reti-UNet2 |").unwrap();
        assert!(first < second);
    }

    #[test]
    fn single_row_single_table_and_no_rows() {
        let md = emit_report(&[row(ModelKind::RetiUNet2, Approach::Gabor, 0.5)], ReportFormat::Markdown).unwrap();
        assert_eq!(md.matches("| Model |").count(), 1);
        assert!(matches!(emit_report(&[], ReportFormat::Csv), Err(Error::NoRows)));
    }

    #[test]
    fn csv_round_trip() {
        let rows = grid_rows();
        let csv = emit_report(&rows, ReportFormat::Csv).unwrap();
        let back = parse_report_csv(&csv).unwrap();
        assert_eq!(back.len(), 6);
        assert_eq!(back[0].approach, Approach::Gaussian);
        assert_eq!(back[0].model, ModelKind::RetiUNet1);
        for r in &back {
            let orig = rows.iter().find(|o| o.model == r.model && o.approach == r.approach).unwrap();
            for (a, b) in r.metrics.columns().iter().zip(orig.metrics.columns()) {
                assert!(((a - b) / b).abs() < 5e-6);
            }
        }
    }
}
