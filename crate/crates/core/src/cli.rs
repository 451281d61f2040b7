//! Batch command-line front end.
//!
//! Exit codes: 0 success, 1 runtime/IO failure, 2 usage or validation error.
//! Log verbosity follows the `COLORCAST_LOG` environment variable (default
//! `warn`).

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::engine::{AugmentStatus, SaturationBand, SelectionConfig};
use crate::error::Error;
use crate::mask::{compute_metrics, postprocess, SegMetrics, DEFAULT_SMOOTH_RADIUS};
use crate::pipeline::{
    augment_dataset, build_pool, export_analysis, image_rng, random_policy_augment, with_workers,
    AugmentOptions, DatasetManifest, NoCandidatePolicy,
};
use crate::pipeline::manifest::image_files;
use crate::raster::{BinaryMask, RasterImage};
use crate::spatial::{apply_spatial, transform_image, SpatialParams};

pub const LOG_ENV: &str = "COLORCAST_LOG";
pub const SPATIAL_MANIFEST_FILE: &str = "spatial_manifest.json";
pub const POOL_FILE: &str = "illuminant_pool.json";

#[derive(Debug, Parser)]
#[command(name = "colorcast", version, about = "Adaptive illuminant augmentation for segmentation datasets")]
pub struct Cli {
    /// Emit machine-readable JSON on stdout.
    #[arg(long, global = true)]
    pub json: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PolicyArg {
    Adaptive,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FallbackArg {
    Skip,
    Widen,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Saturation histograms and illuminant scatter for one or more datasets.
    Analyze {
        /// Manifest JSON or image directory, optionally `label=path`. Repeatable.
        #[arg(long, required = true)]
        input: Vec<String>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 32)]
        bins: usize,
    },
    /// Produce one color-augmented image per input image.
    Augment {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Target fraction of the maximum illuminant distance.
        #[arg(long = "c", default_value_t = 0.4)]
        c_threshold: f64,
        /// Accepted half-width around the target fraction.
        #[arg(long = "c-tol", default_value_t = 0.05)]
        c_tolerance: f64,
        /// Accepted mean-saturation band as `low:high` on the 0-255 scale.
        #[arg(long = "sat-band", default_value = "15:115", value_parser = parse_band)]
        sat_band: SaturationBand,
        /// Worker threads (0 = all cores).
        #[arg(long, default_value_t = 0)]
        workers: usize,
        #[arg(long, value_enum, default_value_t = PolicyArg::Adaptive)]
        policy: PolicyArg,
        #[arg(long, value_enum, default_value_t = FallbackArg::Skip)]
        fallback: FallbackArg,
    },
    /// Seeded random rigid transforms of images and their masks.
    Spatial {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0)]
        workers: usize,
    },
    /// Smooth masks and keep their largest connected component.
    Postprocess {
        /// Directory of mask images.
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_SMOOTH_RADIUS)]
        radius: usize,
    },
    /// Segmentation metrics of predicted masks against ground truth.
    Metrics {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        /// Also write per-image metrics as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

fn parse_band(s: &str) -> Result<SaturationBand, String> {
    let (a, b) = s
        .split_once(':')
        .ok_or_else(|| format!("expected `low:high`, got `{s}`"))?;
    let low: f64 = a.trim().parse().map_err(|e| format!("bad low bound `{a}`: {e}"))?;
    let high: f64 = b.trim().parse().map_err(|e| format!("bad high bound `{b}`: {e}"))?;
    Ok(SaturationBand { low, high })
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Validation(String),
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Validation(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Validation(_) => "validation",
            CliError::Runtime(_) => "runtime",
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Validation(m) | CliError::Runtime(m) => m,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidConfig(_)
            | Error::InvalidProfile(_)
            | Error::DuplicateId(_)
            | Error::PoolMismatch(_)
            | Error::Json(_) => CliError::Validation(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Parse `argv` (including the program name), run, and return the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::new().filter_or(LOG_ENV, "warn"))
        .format_timestamp(None)
        .try_init();

    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let json = cli.json;
    match execute(cli) {
        Ok(report) => {
            if json {
                println!("{}", serde_json::to_string_pretty(&report.json).unwrap_or_default());
            } else {
                println!("{}", report.text);
            }
            0
        }
        Err(e) => {
            if json {
                println!(
                    "{}",
                    json!({"status": "error", "kind": e.kind(), "message": e.message()})
                );
            } else {
                eprintln!("error[{}]: {}", e.kind(), e.message());
            }
            e.exit_code()
        }
    }
}

struct Report {
    text: String,
    json: serde_json::Value,
}

fn execute(cli: Cli) -> CliResult<Report> {
    match cli.command {
        Command::Analyze { input, out, bins } => analyze(&input, &out, bins),
        Command::Augment {
            input,
            out,
            seed,
            c_threshold,
            c_tolerance,
            sat_band,
            workers,
            policy,
            fallback,
        } => {
            let config = SelectionConfig {
                c_threshold,
                c_tolerance,
                saturation_band: sat_band,
                ..SelectionConfig::default()
            };
            config.validate()?;
            let options = AugmentOptions {
                output_root: out,
                seed,
                fallback: match fallback {
                    FallbackArg::Skip => NoCandidatePolicy::Skip,
                    FallbackArg::Widen => NoCandidatePolicy::Widen,
                },
                workers,
            };
            augment(&input, &config, &options, policy)
        }
        Command::Spatial {
            input,
            out,
            seed,
            workers,
        } => spatial(&input, &out, seed, workers),
        Command::Postprocess { input, out, radius } => postprocess_dir(&input, &out, radius),
        Command::Metrics { pred, truth, csv } => metrics(&pred, &truth, csv.as_deref()),
    }
}

fn split_label(arg: &str) -> (String, PathBuf) {
    if let Some((label, path)) = arg.split_once('=') {
        return (label.to_string(), PathBuf::from(path));
    }
    let path = PathBuf::from(arg);
    let label = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| arg.to_string());
    (label, path)
}

fn analyze(inputs: &[String], out: &Path, bins: usize) -> CliResult<Report> {
    if bins == 0 {
        return Err(CliError::Validation("--bins must be at least 1".into()));
    }
    let mut datasets = Vec::new();
    for arg in inputs {
        let (label, path) = split_label(arg);
        datasets.push((label, DatasetManifest::open(&path)?));
    }
    let export = export_analysis(&datasets, bins)?;
    let (csv_path, json_path) = export.write(out)?;
    let mut text = String::new();
    for h in &export.saturation_histogram {
        let n: usize = h.counts.iter().sum();
        text.push_str(&format!("{}: {} images, counts {:?}\n", h.dataset, n, h.counts));
    }
    for f in &export.failures {
        text.push_str(&format!("unreadable {}: {}\n", f.image_id, f.reason));
    }
    text.push_str(&format!("wrote {} and {}", csv_path.display(), json_path.display()));
    Ok(Report {
        text,
        json: json!({
            "status": "ok",
            "csv": csv_path,
            "json": json_path,
            "histograms": export.saturation_histogram,
            "failures": export.failures,
        }),
    })
}

fn augment(
    input: &Path,
    config: &SelectionConfig,
    options: &AugmentOptions,
    policy: PolicyArg,
) -> CliResult<Report> {
    let manifest = DatasetManifest::open(input)?;
    let report = with_workers(options.workers, || build_pool(&manifest))??;
    fs::create_dir_all(&options.output_root).map_err(|e| Error::io(&options.output_root, e))?;
    let pool_path = options.output_root.join(POOL_FILE);
    let mut pool_json = serde_json::to_string_pretty(&report).map_err(Error::from)?;
    pool_json.push('\n');
    fs::write(&pool_path, pool_json).map_err(|e| Error::io(&pool_path, e))?;

    let result = match policy {
        PolicyArg::Adaptive => augment_dataset(&manifest, &report.pool, config, options)?,
        PolicyArg::Random => random_policy_augment(&manifest, &report.pool, config, options)?,
    };
    let counts = json!({
        "images": result.pairs.len(),
        "augmented": result.count(AugmentStatus::Augmented),
        "unregulated": result.count(AugmentStatus::Unregulated),
        "no_candidate": result.count(AugmentStatus::NoCandidate),
        "pool_size": report.pool.len(),
        "excluded": report.excluded.len(),
        "unreadable": report.failures.len(),
    });
    let text = format!(
        "{} images: {} augmented, {} unregulated, {} without candidate (pool {}, excluded {}, unreadable {})\nwrote {}",
        result.pairs.len(),
        result.count(AugmentStatus::Augmented),
        result.count(AugmentStatus::Unregulated),
        result.count(AugmentStatus::NoCandidate),
        report.pool.len(),
        report.excluded.len(),
        report.failures.len(),
        options.output_root.join(crate::pipeline::augment::MANIFEST_FILE).display(),
    );
    Ok(Report {
        text,
        json: json!({"status": "ok", "counts": counts}),
    })
}

#[derive(Debug, Serialize)]
struct SpatialRecord {
    image_id: String,
    params: SpatialParams,
    image_path: Option<PathBuf>,
    mask_path: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

fn spatial(input: &Path, out: &Path, seed: u64, workers: usize) -> CliResult<Report> {
    let manifest = DatasetManifest::open(input)?;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let entries = manifest.sorted_entries();
    let records = with_workers(workers, || {
        entries
            .par_iter()
            .map(|entry| -> crate::error::Result<SpatialRecord> {
                let id = &entry.image_id;
                let params = SpatialParams::sample(&mut image_rng(seed, id));
                let mut rec = SpatialRecord {
                    image_id: id.clone(),
                    params,
                    image_path: None,
                    mask_path: None,
                    error: None,
                };
                let loaded = RasterImage::load(&manifest.image_path(entry)).and_then(|img| {
                    let mask = manifest.mask_path(entry).map(|m| BinaryMask::load(&m)).transpose()?;
                    Ok((img, mask))
                });
                let result = loaded.and_then(|(img, mask)| match mask {
                    Some(m) => apply_spatial(&img, &m, &params).map(|(i, m)| (i, Some(m))),
                    None => transform_image(&img, &params).map(|i| (i, None)),
                });
                match result {
                    Ok((img, mask)) => {
                        let rel = PathBuf::from(format!("{id}_sp.png"));
                        img.save_png(&out.join(&rel))?;
                        rec.image_path = Some(rel);
                        if let Some(m) = mask {
                            let rel = PathBuf::from(format!("{id}_sp_mask.png"));
                            m.save_png(&out.join(&rel))?;
                            rec.mask_path = Some(rel);
                        }
                    }
                    Err(e) => rec.error = Some(e.to_string()),
                }
                Ok(rec)
            })
            .collect::<crate::error::Result<Vec<_>>>()
    })??;
    let path = out.join(SPATIAL_MANIFEST_FILE);
    let mut text = serde_json::to_string_pretty(&json!({"seed": seed, "items": records}))
        .map_err(Error::from)?;
    text.push('\n');
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    let failed = records.iter().filter(|r| r.error.is_some()).count();
    Ok(Report {
        text: format!(
            "{} images transformed, {} failed\nwrote {}",
            records.len() - failed,
            failed,
            path.display()
        ),
        json: json!({"status": "ok", "transformed": records.len() - failed, "failed": failed}),
    })
}

fn list_images(dir: &Path) -> CliResult<Vec<PathBuf>> {
    Ok(image_files(dir)?)
}

fn postprocess_dir(input: &Path, out: &Path, radius: usize) -> CliResult<Report> {
    let files = list_images(input)?;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let written = files
        .par_iter()
        .map(|f| -> crate::error::Result<()> {
            let mask = BinaryMask::load(f)?;
            let name = Path::new(f.file_stem().unwrap_or_default()).with_extension("png");
            postprocess(&mask, radius).save_png(&out.join(name))
        })
        .collect::<crate::error::Result<Vec<_>>>()?;
    Ok(Report {
        text: format!("post-processed {} masks into {}", written.len(), out.display()),
        json: json!({"status": "ok", "masks": written.len()}),
    })
}

/// Matching key: file stem with any mask suffix removed.
fn mask_key(path: &Path) -> String {
    let stem = path.file_stem().unwrap_or_default().to_string_lossy();
    ["_segmentation", "_mask"]
        .iter()
        .find_map(|s| stem.strip_suffix(s))
        .unwrap_or(&stem)
        .to_string()
}

/// Flat per-image row (the csv writer cannot serialize nested structs).
#[derive(Debug, Serialize)]
struct MetricsRow {
    image_id: String,
    thresholded_jaccard: f64,
    jaccard: f64,
    dice: f64,
    accuracy: f64,
    sensitivity: f64,
    specificity: f64,
}

impl MetricsRow {
    fn new(image_id: String, m: &SegMetrics) -> Self {
        Self {
            image_id,
            thresholded_jaccard: m.thresholded_jaccard,
            jaccard: m.jaccard,
            dice: m.dice,
            accuracy: m.accuracy,
            sensitivity: m.sensitivity,
            specificity: m.specificity,
        }
    }
}

fn metrics(pred_dir: &Path, truth_dir: &Path, csv_path: Option<&Path>) -> CliResult<Report> {
    let preds: std::collections::BTreeMap<String, PathBuf> =
        list_images(pred_dir)?.into_iter().map(|p| (mask_key(&p), p)).collect();
    let truths: std::collections::BTreeMap<String, PathBuf> =
        list_images(truth_dir)?.into_iter().map(|p| (mask_key(&p), p)).collect();
    let missing: Vec<&String> = truths.keys().filter(|k| !preds.contains_key(*k)).collect();
    if !missing.is_empty() {
        return Err(CliError::Validation(format!(
            "no prediction for {} truth mask(s): {:?}",
            missing.len(),
            missing
        )));
    }
    let pairs: Vec<(&String, &PathBuf, &PathBuf)> =
        truths.iter().map(|(k, t)| (k, &preds[k], t)).collect();
    let rows = pairs
        .par_iter()
        .map(|(id, p, t)| -> crate::error::Result<(String, SegMetrics)> {
            Ok(((*id).clone(), compute_metrics(&BinaryMask::load(p)?, &BinaryMask::load(t)?)?))
        })
        .collect::<crate::error::Result<Vec<_>>>()?;
    let all: Vec<SegMetrics> = rows.iter().map(|(_, m)| *m).collect();
    let rows: Vec<MetricsRow> = rows.iter().map(|(id, m)| MetricsRow::new(id.clone(), m)).collect();
    let mean = SegMetrics::mean(&all);
    if let Some(path) = csv_path {
        let mut w = csv::Writer::from_path(path).map_err(Error::from)?;
        for r in &rows {
            w.serialize(r).map_err(Error::from)?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
    }
    let mut text = String::new();
    for m in &rows {
        text.push_str(&format!(
            "{}\tTJA {:.4}\tJA {:.4}\tDI {:.4}\tAC {:.4}\tSE {:.4}\tSP {:.4}\n",
            m.image_id, m.thresholded_jaccard, m.jaccard, m.dice, m.accuracy, m.sensitivity, m.specificity
        ));
    }
    match &mean {
        Some(m) => text.push_str(&format!(
            "mean over {}\tTJA {:.4}\tJA {:.4}\tDI {:.4}\tAC {:.4}\tSE {:.4}\tSP {:.4}",
            rows.len(),
            m.thresholded_jaccard,
            m.jaccard,
            m.dice,
            m.accuracy,
            m.sensitivity,
            m.specificity
        )),
        None => text.push_str("no masks found"),
    }
    Ok(Report {
        text,
        json: json!({"status": "ok", "per_image": rows, "aggregate": mean}),
    })
}
