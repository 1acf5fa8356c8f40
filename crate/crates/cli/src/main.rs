mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use snakeseg::morphsnakes::Balloon;

use crate::config::{parse_balloon, parse_pair};

/// Pancreas segmentation in CT with morphological snakes.
#[derive(Debug, Parser)]
#[command(name = "snakeseg", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Segmentation tuning; unset flags fall back to the config file, then to
/// the built-in defaults.
#[derive(Debug, Clone, Default, Args)]
pub struct Tuning {
    /// HU clip window as `lo,hi` [default: -200,300]
    #[arg(long, value_parser = parse_pair, allow_hyphen_values = true)]
    pub window: Option<(f64, f64)>,
    /// Keep detections with confidence strictly above this [default: 0.25]
    #[arg(long)]
    pub conf: Option<f64>,
    /// Gaussian scale of the edge map [default: 2]
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Edge-map contrast [default: 100]
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Balloon direction: -1, 0 or +1 [default: +1]
    #[arg(long, value_parser = parse_balloon, allow_hyphen_values = true)]
    pub balloon: Option<Balloon>,
    /// Edge-map level where the balloon stops [default: 0.3]
    #[arg(long)]
    pub theta: Option<f64>,
    /// Curvature passes per iteration [default: 1]
    #[arg(long)]
    pub mu: Option<usize>,
    /// Snake iterations [default: 60]
    #[arg(long)]
    pub iters: Option<usize>,
    /// Crop size relative to the detection box [default: 1.2]
    #[arg(long)]
    pub pad: Option<f64>,
    /// Apply the three-slice consistency pass
    #[arg(long)]
    pub postprocess: bool,
    /// Segment slices without detections inside the fixed crop
    #[arg(long)]
    pub fallback_crop: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print header summary of a NIfTI file
    Info { path: PathBuf },
    /// Write one axial slice as an 8-bit PGM image
    Export {
        volume: PathBuf,
        #[arg(long)]
        slice: usize,
        #[arg(long, value_parser = parse_pair, allow_hyphen_values = true, default_value = "-200,300")]
        window: (f64, f64),
        /// Also write box labels for this slice of MASK next to the image
        #[arg(long)]
        mask: Option<PathBuf>,
        /// Give every label class 0
        #[arg(long)]
        merge_classes: bool,
        /// Drop components smaller than this many pixels
        #[arg(long, default_value_t = 1)]
        min_area: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build the organ probability map of a set of masks
    Probmap {
        #[arg(required = true)]
        masks: Vec<PathBuf>,
        /// Count each volume once per pixel instead of once per slice
        #[arg(long)]
        any_slice: bool,
        /// Report extents of pixels above this probability
        #[arg(long, default_value_t = 0.0)]
        threshold: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// HU statistics of the labelled organ
    Stats { volume: PathBuf, mask: PathBuf },
    /// Segment a volume from detection boxes
    Segment {
        volume: PathBuf,
        /// Detection file of `z class conf cx cy w h` lines, or a directory
        /// of per-slice files whose names end in the slice index
        detections: PathBuf,
        #[command(flatten)]
        tuning: Tuning,
        /// key=value file with the same settings as the flags
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Three-slice consistency pass over a mask
    Postprocess {
        mask: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Dice of predicted masks against ground truth
    EvalSeg {
        /// Mask file, or directory paired with TRUTH by file name
        pred: PathBuf,
        truth: PathBuf,
        /// Line records instead of key=value
        #[arg(long)]
        records: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Average precision of detection files against label files
    EvalDet {
        /// Detection file, or directory paired with TRUTH by file name
        pred: PathBuf,
        truth: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        iou: f64,
        /// Confidence gate for the reported precision and recall
        #[arg(long, default_value_t = 0.25)]
        conf: f64,
        #[arg(long)]
        merge_classes: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> anyhow::Result<()> {
    use commands::*;
    match cli.command {
        Command::Info { path } => info(&path),
        Command::Export {
            volume,
            slice,
            window,
            mask,
            merge_classes,
            min_area,
            out,
        } => export(
            &volume,
            slice,
            window,
            mask.as_deref(),
            merge_classes,
            min_area,
            &out,
        ),
        Command::Probmap {
            masks,
            any_slice,
            threshold,
            out,
        } => probmap(&masks, any_slice, threshold, out.as_deref()),
        Command::Stats { volume, mask } => stats(&volume, &mask),
        Command::Segment {
            volume,
            detections,
            tuning,
            config,
            out,
        } => segment(&volume, &detections, &tuning, config.as_deref(), &out),
        Command::Postprocess { mask, out } => postprocess(&mask, &out),
        Command::EvalSeg {
            pred,
            truth,
            records,
            out,
        } => eval_seg(&pred, &truth, records, out.as_deref()),
        Command::EvalDet {
            pred,
            truth,
            iou,
            conf,
            merge_classes,
            out,
        } => eval_det(&pred, &truth, iou, conf, merge_classes, out.as_deref()),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            // library errors already embed their source in the message
            let mut msg = String::new();
            for cause in e.chain() {
                let s = cause.to_string();
                if !msg.ends_with(&s) {
                    if !msg.is_empty() {
                        msg.push_str(": ");
                    }
                    msg.push_str(&s);
                }
            }
            eprintln!("snakeseg: {msg}");
            ExitCode::from(2)
        }
    }
}
