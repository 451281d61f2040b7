use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::manifest::DatasetManifest;
use crate::color::compute_illuminant;
use crate::engine::{IlluminantPool, PoolEntry};
use crate::error::{Error, Result};
use crate::raster::RasterImage;

/// An image left out of a pool, and why.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exclusion {
    pub image_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolReport {
    pub pool: IlluminantPool,
    /// Images whose illuminant is undefined (black or missing a channel).
    pub excluded: Vec<Exclusion>,
    /// Images that could not be read.
    pub failures: Vec<Exclusion>,
}

enum Outcome {
    Profile(PoolEntry),
    Excluded(Exclusion),
    Failed(Exclusion),
}

/// Estimate the illuminant of every image in the manifest.
///
/// Unreadable files and images without a defined illuminant are reported
/// and left out; the pool is built from the rest.
pub fn build_pool(manifest: &DatasetManifest) -> Result<PoolReport> {
    if manifest.entries.is_empty() {
        log::warn!("empty manifest: the illuminant pool is empty");
    }
    let outcomes: Vec<Outcome> = manifest
        .sorted_entries()
        .into_par_iter()
        .map(|entry| {
            let id = entry.image_id.clone();
            let image = match RasterImage::load(&manifest.image_path(entry)) {
                Ok(img) => img,
                Err(e) => {
                    return Outcome::Failed(Exclusion {
                        image_id: id,
                        reason: e.to_string(),
                    })
                }
            };
            match compute_illuminant(&image) {
                Ok(profile) => Outcome::Profile(PoolEntry {
                    image_id: id,
                    profile,
                }),
                Err(e @ (Error::DegenerateImage { .. } | Error::InvalidProfile(_))) => {
                    Outcome::Excluded(Exclusion {
                        image_id: id,
                        reason: e.to_string(),
                    })
                }
                Err(e) => Outcome::Failed(Exclusion {
                    image_id: id,
                    reason: e.to_string(),
                }),
            }
        })
        .collect();

    let mut entries = Vec::new();
    let mut excluded = Vec::new();
    let mut failures = Vec::new();
    for o in outcomes {
        match o {
            Outcome::Profile(p) => entries.push(p),
            Outcome::Excluded(x) => excluded.push(x),
            Outcome::Failed(x) => failures.push(x),
        }
    }
    for x in excluded.iter().chain(&failures) {
        log::warn!("{} left out of the illuminant pool: {}", x.image_id, x.reason);
    }
    Ok(PoolReport {
        pool: IlluminantPool::new(entries)?,
        excluded,
        failures,
    })
}
