//! Saturation histograms and illuminant scatter data for one or more
//! datasets, written as CSV (one row per image) and JSON.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::manifest::DatasetManifest;
use super::pool::Exclusion;
use crate::color::{compute_illuminant, mean_saturation};
use crate::error::{Error, Result};
use crate::raster::{RasterImage, MAX_INTENSITY};

pub const CSV_FILE: &str = "analysis.csv";
pub const JSON_FILE: &str = "analysis.json";

/// Equal-width bin edges over `[0, 255]`; `bins + 1` values.
pub fn bin_edges(bins: usize) -> Vec<f64> {
    (0..=bins)
        .map(|i| i as f64 * MAX_INTENSITY / bins as f64)
        .collect()
}

/// Count values into `[edge_i, edge_i+1)` bins; the last bin is closed so
/// 255 lands in it. Values outside `[0, 255]` go to the nearest end bin.
pub fn histogram(values: &[f64], bins: usize) -> Vec<usize> {
    let edges = bin_edges(bins);
    let mut counts = vec![0usize; bins];
    for &v in values {
        let mut i = ((v / MAX_INTENSITY * bins as f64).floor().max(0.0) as usize).min(bins - 1);
        // settle rounding at the edges against the published edge values
        while i > 0 && v < edges[i] {
            i -= 1;
        }
        while i + 1 < bins && v >= edges[i + 1] {
            i += 1;
        }
        counts[i] += 1;
    }
    counts
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaturationHistogram {
    pub dataset: String,
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

/// Per-image analysis row; the illuminant is absent when undefined.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageRow {
    pub dataset: String,
    pub image_id: String,
    pub mean_saturation: f64,
    pub beta_r: Option<f64>,
    pub beta_g: Option<f64>,
    pub beta_b: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatterPoint {
    pub dataset: String,
    pub image_id: String,
    pub beta_r: f64,
    pub beta_g: f64,
    pub beta_b: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisExport {
    pub bins: usize,
    pub saturation_histogram: Vec<SaturationHistogram>,
    pub illuminant_scatter: Vec<ScatterPoint>,
    #[serde(skip)]
    pub rows: Vec<ImageRow>,
    pub failures: Vec<Exclusion>,
}

/// Analyse each `(label, manifest)` dataset. Unreadable images are listed in
/// `failures` and left out of the counts.
pub fn export_analysis(datasets: &[(String, DatasetManifest)], bins: usize) -> Result<AnalysisExport> {
    if bins == 0 {
        return Err(Error::InvalidConfig("histogram needs at least one bin".into()));
    }
    let mut export = AnalysisExport {
        bins,
        saturation_histogram: Vec::new(),
        illuminant_scatter: Vec::new(),
        rows: Vec::new(),
        failures: Vec::new(),
    };
    for (label, manifest) in datasets {
        let results: Vec<std::result::Result<ImageRow, Exclusion>> = manifest
            .sorted_entries()
            .into_par_iter()
            .map(|entry| {
                let image = RasterImage::load(&manifest.image_path(entry)).map_err(|e| Exclusion {
                    image_id: entry.image_id.clone(),
                    reason: e.to_string(),
                })?;
                let profile = compute_illuminant(&image).ok();
                Ok(ImageRow {
                    dataset: label.clone(),
                    image_id: entry.image_id.clone(),
                    mean_saturation: mean_saturation(&image),
                    beta_r: profile.map(|p| p.r()),
                    beta_g: profile.map(|p| p.g()),
                    beta_b: profile.map(|p| p.b()),
                })
            })
            .collect();
        let mut saturations = Vec::new();
        for r in results {
            match r {
                Ok(row) => {
                    saturations.push(row.mean_saturation);
                    if let (Some(beta_r), Some(beta_g), Some(beta_b)) = (row.beta_r, row.beta_g, row.beta_b) {
                        export.illuminant_scatter.push(ScatterPoint {
                            dataset: label.clone(),
                            image_id: row.image_id.clone(),
                            beta_r,
                            beta_g,
                            beta_b,
                        });
                    }
                    export.rows.push(row);
                }
                Err(x) => export.failures.push(x),
            }
        }
        export.saturation_histogram.push(SaturationHistogram {
            dataset: label.clone(),
            edges: bin_edges(bins),
            counts: histogram(&saturations, bins),
        });
    }
    Ok(export)
}

impl AnalysisExport {
    /// Write `analysis.csv` and `analysis.json` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<(PathBuf, PathBuf)> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let csv_path = dir.join(CSV_FILE);
        let mut w = csv::Writer::from_path(&csv_path)?;
        for row in &self.rows {
            w.serialize(row)?;
        }
        w.flush().map_err(|e| Error::io(&csv_path, e))?;
        let json_path = dir.join(JSON_FILE);
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        fs::write(&json_path, text).map_err(|e| Error::io(&json_path, e))?;
        Ok((csv_path, json_path))
    }
}
