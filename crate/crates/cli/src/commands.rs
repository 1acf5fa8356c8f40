use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use snakeseg::localization::{build_probmap_with, hu_statistics, probmap_extents, ProbMapMode};
use snakeseg::metrics::{
    dice, match_predictions, mean_ap, per_class_ap, precision, recall, ConfusionCounts, EvalReport,
    GroundTruth, RankedPrediction,
};
use snakeseg::pipeline::{self, parse_volume_detections, segment_volume_traced, SliceDetections};
use snakeseg::volume_io::{
    export_slice, mask_to_labels, parse_detections, parse_labels, read_nifti, write_nifti,
    ByteOrder, DataType, MaskVolume, NiftiHeader, NiftiVolume,
};
use snakeseg::Error;

use crate::config::Config;
use crate::Tuning;

/// Label files store normalized boxes; IoU does not depend on the frame they
/// are scaled to.
const NOMINAL_FRAME: usize = 512;

/// Attaches the module name to library errors.
trait Qualify<T> {
    fn qualify(self) -> Result<T, Error>;
}

impl<T, E: Into<Error>> Qualify<T> for Result<T, E> {
    fn qualify(self) -> Result<T, Error> {
        self.map_err(Into::into)
    }
}

fn load(path: &Path) -> Result<(NiftiVolume, NiftiHeader)> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    read_nifti(&bytes)
        .qualify()
        .with_context(|| format!("parsing {}", path.display()))
}

fn load_mask(path: &Path) -> Result<MaskVolume> {
    load(path)?
        .0
        .into_mask()
        .qualify()
        .with_context(|| format!("{} is not a label volume", path.display()))
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => write(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn mask_datatype(mask: &MaskVolume) -> DataType {
    if mask.labels().iter().all(|&l| l <= u8::MAX as u16) {
        DataType::UInt8
    } else {
        DataType::Int16
    }
}

fn save_mask(path: &Path, mask: &MaskVolume) -> Result<()> {
    let bytes = write_nifti(mask, mask_datatype(mask), ByteOrder::Little).qualify()?;
    write(path, bytes)
}

fn join<T: std::fmt::Display>(v: &[T], sep: &str) -> String {
    v.iter().map(T::to_string).collect::<Vec<_>>().join(sep)
}

pub fn info(path: &Path) -> Result<()> {
    let (vol, hdr) = load(path)?;
    let [nx, ny, nz] = vol.dims();
    let mut out = String::new();
    writeln!(out, "dim={nx}x{ny}x{nz}")?;
    writeln!(out, "spacing={}", join(&hdr.spacing3(), ","))?;
    writeln!(out, "datatype={}", hdr.datatype)?;
    let order = match hdr.byte_order {
        ByteOrder::Little => "little",
        ByteOrder::Big => "big",
    };
    writeln!(out, "byte_order={order}")?;
    match &vol {
        NiftiVolume::Ct(ct) => {
            let (lo, hi) = ct.min_max();
            writeln!(out, "kind=ct")?;
            writeln!(out, "range={lo},{hi}")?;
        }
        NiftiVolume::Mask(m) => {
            writeln!(out, "kind=mask")?;
            for (label, count) in m.histogram() {
                writeln!(out, "label.{label}={count}")?;
            }
        }
    }
    print!("{out}");
    Ok(())
}

pub fn export(
    volume: &Path,
    z: usize,
    window: (f64, f64),
    mask: Option<&Path>,
    merge_classes: bool,
    min_area: usize,
    out: &Path,
) -> Result<()> {
    let ct = load(volume)?.0.into_ct();
    let image = export_slice(&ct, z, window).qualify()?;
    write(out, image.to_pgm())?;
    if let Some(mask_path) = mask {
        let m = load_mask(mask_path)?;
        if m.dims() != ct.dims() {
            bail!(
                "mask {} has shape {:?}, volume has {:?}",
                mask_path.display(),
                m.dims(),
                ct.dims()
            );
        }
        let labels = mask_to_labels(&m, z, merge_classes, min_area).qualify()?;
        let text: String = labels.iter().map(|l| format!("{l}\n")).collect();
        write(&out.with_extension("txt"), text)?;
    }
    Ok(())
}

pub fn probmap(
    masks: &[PathBuf],
    any_slice: bool,
    threshold: f64,
    out: Option<&Path>,
) -> Result<()> {
    let vols = masks
        .iter()
        .map(|p| load_mask(p))
        .collect::<Result<Vec<_>>>()?;
    let mode = if any_slice {
        ProbMapMode::AnySlice
    } else {
        ProbMapMode::PerSlice
    };
    let map = build_probmap_with(&vols, mode).qualify()?;
    if let Some(path) = out {
        let bytes =
            write_nifti(&map.to_volume(), DataType::Float32, ByteOrder::Little).qualify()?;
        write(path, bytes)?;
    }
    println!("slices={}", map.n_slices_counted());
    match probmap_extents(&map, threshold) {
        Ok(e) => {
            println!("x={}..{}", e.x_min, e.x_max);
            println!("y={}..{}", e.y_min, e.y_max);
        }
        Err(snakeseg::localization::LocalizationError::EmptySupport(_)) => {
            println!("extents=empty");
        }
        Err(e) => return Err(Error::from(e).into()),
    }
    Ok(())
}

pub fn stats(volume: &Path, mask: &Path) -> Result<()> {
    let ct = load(volume)?.0.into_ct();
    let m = load_mask(mask)?;
    let s = hu_statistics(&ct, &m).qualify()?;
    println!("mean={}", s.mean);
    println!("std={}", s.std);
    println!("organ_fraction={}", s.organ_fraction);
    println!("foreground_voxels={}", s.foreground_voxels);
    println!("body_voxels={}", s.body_voxels);
    Ok(())
}

/// Trailing decimal digits of a file stem, e.g. `case01_0042` → 42.
fn slice_index(path: &Path) -> Option<usize> {
    let stem = path.file_stem()?.to_str()?;
    let digits = stem.len() - stem.trim_end_matches(|c: char| c.is_ascii_digit()).len();
    stem[stem.len() - digits..].parse().ok()
}

fn sorted_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for entry in fs::read_dir(dir).with_context(|| format!("listing {}", dir.display()))? {
        let path = entry?.path();
        if path.is_file() {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

fn read_detections(
    path: &Path,
    nx: usize,
    ny: usize,
    min_conf: f64,
) -> Result<Vec<SliceDetections>> {
    if !path.is_dir() {
        let text =
            fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        return parse_volume_detections(&text, nx, ny, min_conf)
            .qualify()
            .with_context(|| format!("in {}", path.display()));
    }
    let mut out = Vec::new();
    for file in sorted_files(path)? {
        let z = slice_index(&file)
            .with_context(|| format!("{} does not end in a slice index", file.display()))?;
        let text =
            fs::read_to_string(&file).with_context(|| format!("reading {}", file.display()))?;
        let detections = parse_detections(&text, nx, ny, min_conf)
            .qualify()
            .with_context(|| format!("in {}", file.display()))?;
        out.push(SliceDetections { z, detections });
    }
    Ok(out)
}

pub fn segment(
    volume: &Path,
    detections: &Path,
    tuning: &Tuning,
    config: Option<&Path>,
    out: &Path,
) -> Result<()> {
    let cfg = Config::load(config, tuning)?;
    let ct = load(volume)?.0.into_ct();
    let [nx, ny, _] = ct.dims();
    let dets = read_detections(detections, nx, ny, cfg.pipeline.confidence)?;
    let mask = segment_volume_traced(&ct, &dets, &cfg.pipeline, |s| {
        eprintln!(
            "slice {}: contours={} degenerate={} voxels={} time={:.3}ms",
            s.z,
            s.contours,
            s.degenerate,
            s.foreground,
            s.elapsed.as_secs_f64() * 1e3
        );
    })
    .qualify()?;
    save_mask(out, &mask)?;
    println!("foreground_voxels={}", mask.foreground_count());
    Ok(())
}

pub fn postprocess(mask: &Path, out: &Path) -> Result<()> {
    let m = load_mask(mask)?;
    save_mask(out, &pipeline::postprocess(&m))
}

fn file_name(p: &Path) -> String {
    p.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| p.display().to_string())
}

/// Pairs two files, or the files of two directories by name.
fn pairs(pred: &Path, truth: &Path) -> Result<Vec<(String, PathBuf, PathBuf)>> {
    match (pred.is_dir(), truth.is_dir()) {
        (false, false) => Ok(vec![(file_name(pred), pred.into(), truth.into())]),
        (true, true) => {
            let index = |dir: &Path| -> Result<BTreeMap<String, PathBuf>> {
                Ok(sorted_files(dir)?
                    .into_iter()
                    .map(|p| (file_name(&p), p))
                    .collect())
            };
            let a = index(pred)?;
            let b = index(truth)?;
            let unpaired: Vec<&String> = a
                .keys()
                .filter(|k| !b.contains_key(*k))
                .chain(b.keys().filter(|k| !a.contains_key(*k)))
                .collect();
            if !unpaired.is_empty() {
                bail!("unpaired files: {}", join(&unpaired, ", "));
            }
            if a.is_empty() {
                bail!("no files in {}", pred.display());
            }
            Ok(a.into_iter()
                .map(|(name, p)| {
                    let t = b[&name].clone();
                    (name, p, t)
                })
                .collect())
        }
        _ => bail!("prediction and truth must both be files or both be directories"),
    }
}

pub fn eval_seg(pred: &Path, truth: &Path, records: bool, out: Option<&Path>) -> Result<()> {
    let mut cases = Vec::new();
    for (name, p, t) in pairs(pred, truth)? {
        let d = dice(&load_mask(&p)?, &load_mask(&t)?)
            .qualify()
            .with_context(|| format!("case {name}"))?;
        cases.push((name, d));
    }
    let report = EvalReport::from_cases("dice", cases).qualify()?;
    let text = if records {
        report.to_records()
    } else {
        report.to_key_value()
    };
    emit(out, &text)
}

pub fn eval_det(
    pred: &Path,
    truth: &Path,
    iou: f64,
    conf: f64,
    merge_classes: bool,
    out: Option<&Path>,
) -> Result<()> {
    let class = |c: u32| if merge_classes { 0 } else { c };
    let mut preds: Vec<(u32, RankedPrediction)> = Vec::new();
    let mut gts: Vec<(u32, GroundTruth)> = Vec::new();
    let cases = pairs(pred, truth)?;
    for (image_id, (_, p, t)) in cases.iter().enumerate() {
        let ptext = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
        let ttext = fs::read_to_string(t).with_context(|| format!("reading {}", t.display()))?;
        let dets = parse_detections(&ptext, NOMINAL_FRAME, NOMINAL_FRAME, f64::NEG_INFINITY)
            .qualify()
            .with_context(|| format!("in {}", p.display()))?;
        let labels = parse_labels(&ttext)
            .qualify()
            .with_context(|| format!("in {}", t.display()))?;
        for d in dets {
            preds.push((
                class(d.class_id),
                RankedPrediction {
                    image_id,
                    rect: d.rect_px(),
                    confidence: d.confidence,
                },
            ));
        }
        for l in labels {
            gts.push((
                class(l.class_id),
                GroundTruth {
                    image_id,
                    rect: l.rect_px(NOMINAL_FRAME, NOMINAL_FRAME),
                },
            ));
        }
    }

    let aps = per_class_ap(&preds, &gts, iou).qualify()?;
    let mut counts = ConfusionCounts::default();
    for &c in aps.keys() {
        let p: Vec<_> = preds
            .iter()
            .filter(|(k, r)| *k == c && r.confidence > conf)
            .map(|(_, r)| *r)
            .collect();
        let g: Vec<_> = gts
            .iter()
            .filter(|(k, _)| *k == c)
            .map(|(_, g)| *g)
            .collect();
        let m = match_predictions(&p, &g, iou).qualify()?.counts;
        counts.tp += m.tp;
        counts.fp += m.fp;
        counts.fn_ += m.fn_;
    }

    let mut text = String::new();
    writeln!(text, "images={}", cases.len())?;
    writeln!(text, "iou={iou}")?;
    let mut defined = Vec::new();
    for (c, ap) in &aps {
        match ap {
            Some(v) => {
                writeln!(text, "class.{c}.ap={v}")?;
                defined.push(*v);
            }
            None => writeln!(text, "class.{c}.ap=no-gt")?,
        }
    }
    if defined.is_empty() {
        bail!("no ground-truth boxes in {}", truth.display());
    }
    writeln!(text, "map={}", mean_ap(&defined).qualify()?)?;
    writeln!(text, "conf={conf}")?;
    writeln!(text, "tp={}", counts.tp)?;
    writeln!(text, "fp={}", counts.fp)?;
    writeln!(text, "fn={}", counts.fn_)?;
    writeln!(text, "precision={}", precision(counts))?;
    writeln!(text, "recall={}", recall(counts))?;
    emit(out, &text)
}
