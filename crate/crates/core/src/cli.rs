//! `retseg` command line. Exit codes: 0 success, 2 configuration error,
//! 3 data error, 4 numeric failure.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};
use crate::filters::Approach;
use crate::pipeline::{
    run_augment, run_eval, run_experiment, run_grid, run_predict, run_preprocess, run_report, run_split, PipelineConfig,
};
use crate::unet::ModelKind;

#[derive(Debug, Parser)]
#[command(name = "retseg", version, about = "Retinal vessel segmentation experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone, Default)]
pub struct Common {
    /// JSON config; missing keys take default values.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[arg(long, value_parser = parse_approach)]
    pub approach: Option<Approach>,
    #[arg(long, value_parser = parse_model)]
    pub model: Option<ModelKind>,
    /// Seed for the split, initialisation and shuffling.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub width_scale: Option<usize>,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

fn parse_approach(s: &str) -> std::result::Result<Approach, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_model(s: &str) -> std::result::Result<ModelKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a config file with every default filled in.
    Init {
        /// Destination file; stdout when omitted.
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Resize and filter the dataset for one approach.
    Preprocess(Common),
    /// Write flipped and rotated variants of the preprocessed originals.
    Augment(Common),
    /// Partition the augmented set into train/val/test.
    Split {
        #[command(flatten)]
        common: Common,
        /// Keep every variant of an original in one partition.
        #[arg(long)]
        grouped: bool,
    },
    /// Train one model on one approach and report test metrics.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Evaluate a checkpoint on the validation and test splits.
    Eval {
        #[command(flatten)]
        common: Common,
        /// Defaults to the experiment's checkpoint.rseg.
        #[arg(long, value_name = "FILE")]
        checkpoint: Option<PathBuf>,
    },
    /// Segment one raw image.
    Predict {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_name = "FILE")]
        checkpoint: Option<PathBuf>,
        #[arg(long, value_name = "FILE")]
        input: PathBuf,
        /// Output mask path (PNG or PGM).
        #[arg(long, value_name = "FILE")]
        output: PathBuf,
    },
    /// Combine per-experiment reports under the output directory.
    Report(Common),
    /// Train and evaluate all approach × model combinations.
    Grid {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        epochs: Option<usize>,
    },
}

/// File config with command-line overrides applied.
pub fn resolve_config(common: &Common) -> Result<PipelineConfig> {
    let mut cfg = match &common.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(a) = common.approach {
        cfg.approach = a;
    }
    if let Some(m) = common.model {
        cfg.model = m;
    }
    if let Some(s) = common.seed {
        cfg.split.seed = s;
        cfg.train.seed = s;
    }
    if let Some(w) = common.width_scale {
        cfg.width_scale = w;
    }
    if let Some(o) = &common.out {
        cfg.out_dir = o.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn with_epochs(mut cfg: PipelineConfig, epochs: Option<usize>) -> Result<PipelineConfig> {
    if let Some(e) = epochs {
        cfg.train.epochs = e;
        cfg.validate()?;
    }
    Ok(cfg)
}

fn print_rows(rows: &[crate::pipeline::ReportRow]) -> Result<()> {
    print!("{}", crate::pipeline::emit_report(rows, crate::pipeline::ReportFormat::Markdown)?);
    Ok(())
}

fn checkpoint_or_default(cfg: &PipelineConfig, given: &Option<PathBuf>) -> PathBuf {
    given.clone().unwrap_or_else(|| cfg.experiment_dir().join("checkpoint.rseg"))
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Init { out } => {
            let text = PipelineConfig::default().to_json()?;
            match out {
                Some(p) => std::fs::write(&p, text).map_err(|e| Error::WriteFailure { path: p, reason: e.to_string() })?,
                None => print!("{text}"),
            }
        }
        Command::Preprocess(c) => {
            let cfg = resolve_config(&c)?;
            let m = run_preprocess(&cfg)?;
            println!("preprocessed {} images into {}", m.len(), cfg.approach_dir().display());
        }
        Command::Augment(c) => {
            let cfg = resolve_config(&c)?;
            let m = run_augment(&cfg)?;
            println!("wrote {} augmented entries", m.len());
        }
        Command::Split { common, grouped } => {
            let mut cfg = resolve_config(&common)?;
            cfg.split.grouped |= grouped;
            let s = run_split(&cfg)?;
            println!("split: train {} / val {} / test {} (seed {})", s.train.len(), s.val.len(), s.test.len(), s.seed);
        }
        Command::Train { common, epochs } => {
            let cfg = with_epochs(resolve_config(&common)?, epochs)?;
            print_rows(&[run_experiment(&cfg)?])?;
        }
        Command::Eval { common, checkpoint } => {
            let cfg = resolve_config(&common)?;
            let m = run_eval(&cfg, &checkpoint_or_default(&cfg, &checkpoint))?;
            println!("{}", serde_json::to_string_pretty(&m)?);
        }
        Command::Predict { common, checkpoint, input, output } => {
            let cfg = resolve_config(&common)?;
            run_predict(&cfg, &checkpoint_or_default(&cfg, &checkpoint), &input, &output)?;
            println!("wrote {}", output.display());
        }
        Command::Report(c) => {
            let cfg = resolve_config(&c)?;
            print_rows(&run_report(&cfg)?)?;
        }
        Command::Grid { common, epochs } => {
            let cfg = with_epochs(resolve_config(&common)?, epochs)?;
            print_rows(&run_grid(&cfg)?)?;
        }
    }
    Ok(())
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;
    use std::path::Path;

    fn config_for(args: &[&str], cwd_config: Option<&Path>) -> Result<PipelineConfig> {
        let mut full = vec!["retseg", "preprocess"];
        full.extend_from_slice(args);
        let cli = Cli::try_parse_from(full).map_err(|e| Error::ConfigInvalid(e.to_string()))?;
        match cli.command {
            Command::Preprocess(mut c) => {
                if c.config.is_none() {
                    c.config = cwd_config.map(Path::to_path_buf);
                }
                resolve_config(&c)
            }
            _ => unreachable!("parsed as preprocess"),
        }
    }

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn flags_override_file_values() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(&path, r#"{"approach": "gabor", "width_scale": 4, "target_size": [64, 64]}"#).unwrap();
        let cfg = config_for(&["--config", path.to_str().unwrap(), "--seed", "9", "--model", "reti-unet2"], None).unwrap();
        assert_eq!(cfg.approach, Approach::Gabor);
        assert_eq!(cfg.model, ModelKind::RetiUNet2);
        assert_eq!(cfg.width_scale, 4);
        assert_eq!((cfg.split.seed, cfg.train.seed), (9, 9));
        let cfg = config_for(&["--config", path.to_str().unwrap(), "--approach", "sobel"], None).unwrap();
        assert_eq!(cfg.approach, Approach::Sobel);
    }

    #[test]
    fn exit_codes() {
        assert_eq!(main_with_args(["retseg", "frobnicate"]), 2);
        assert_eq!(main_with_args(["retseg", "preprocess", "--approach", "laplace"]), 2);
        assert_eq!(main_with_args(["retseg", "preprocess", "--config", "/nonexistent/cfg.json"]), 2);
        let dir = tempfile::tempdir().unwrap();
        let empty = dir.path().join("empty");
        std::fs::create_dir_all(empty.join("images")).unwrap();
        std::fs::create_dir_all(empty.join("masks")).unwrap();
        let cfg = dir.path().join("c.json");
        std::fs::write(&cfg, format!(r#"{{"dataset_root": {:?}}}"#, empty.to_str().unwrap())).unwrap();
        let out = dir.path().join("out");
        assert_eq!(
            main_with_args(["retseg", "preprocess", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]),
            3
        );
    }
}
