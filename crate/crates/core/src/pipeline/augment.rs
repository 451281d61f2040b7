//! Batch color augmentation with one output per input image.
//!
//! Work items run in parallel; every random draw comes from a stream keyed by
//! `(seed, image_id)` and results are assembled in image-id order, so the
//! manifest and every written file are identical for any worker count.

use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::manifest::{DatasetManifest, ManifestEntry};
use crate::color::{illuminant_distance, mean_saturation};
use crate::engine::{
    furthest_illuminant, render, select_and_augment, AugmentStatus, AugmentationRecord,
    IlluminantPool, SelectionConfig,
};
use crate::error::{Error, Result};
use crate::raster::RasterImage;

pub const MANIFEST_FILE: &str = "augmented_manifest.json";
pub const AUGMENTED_SUFFIX: &str = "_aug";

/// Largest tolerance the widening fallback will try.
pub const MAX_WIDENED_TOLERANCE: f64 = 0.25;
pub const WIDEN_STEP: f64 = 0.05;

/// What to do when no candidate satisfies both conditions.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoCandidatePolicy {
    /// Flag the image and emit nothing for it.
    #[default]
    Skip,
    /// Retry with `c_tolerance` widened by 0.05 per step, up to 0.25.
    Widen,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    Adaptive,
    /// Uniformly random illuminant with no conditions; comparison only.
    Random,
}

#[derive(Debug, Clone)]
pub struct AugmentOptions {
    pub output_root: PathBuf,
    pub seed: u64,
    pub fallback: NoCandidatePolicy,
    /// Worker threads; 0 uses the ambient rayon pool.
    pub workers: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentedPair {
    pub original_id: String,
    pub augmented_id: Option<String>,
    /// Relative to the output root.
    pub image_path: Option<PathBuf>,
    pub mask_path: Option<PathBuf>,
    pub record: AugmentationRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentedSetManifest {
    pub policy: Policy,
    pub seed: u64,
    pub config: SelectionConfig,
    pub fallback: NoCandidatePolicy,
    pub pairs: Vec<AugmentedPair>,
}

impl AugmentedSetManifest {
    pub fn count(&self, status: AugmentStatus) -> usize {
        self.pairs.iter().filter(|p| p.record.status == status).count()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    /// Dataset manifest over the images this run produced.
    pub fn to_dataset_manifest(&self, output_root: &Path) -> DatasetManifest {
        let entries = self
            .pairs
            .iter()
            .filter_map(|p| {
                Some(ManifestEntry {
                    image_id: p.augmented_id.clone()?,
                    image_path: p.image_path.clone()?,
                    mask_path: p.mask_path.clone(),
                })
            })
            .collect();
        DatasetManifest {
            dataset_root: output_root.to_path_buf(),
            entries,
        }
    }
}

/// Independent random stream for one image: ChaCha8 keyed by
/// SHA-256 of the little-endian seed followed by the id bytes.
pub fn image_rng(seed: u64, image_id: &str) -> ChaCha8Rng {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update(image_id.as_bytes());
    let digest = hasher.finalize();
    let mut key = [0u8; 32];
    key.copy_from_slice(&digest);
    ChaCha8Rng::from_seed(key)
}

/// Run `f` on a dedicated pool of `workers` threads (0 = ambient pool).
pub fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    if workers == 0 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("cannot start {workers} workers: {e}")))?;
    Ok(pool.install(f))
}

fn check_pool_matches(manifest: &DatasetManifest, pool: &IlluminantPool) -> Result<()> {
    let ids: std::collections::HashSet<&str> =
        manifest.entries.iter().map(|e| e.image_id.as_str()).collect();
    if let Some(stray) = pool.entries().iter().find(|e| !ids.contains(e.image_id.as_str())) {
        return Err(Error::PoolMismatch(format!(
            "pool entry `{}` is not in the manifest",
            stray.image_id
        )));
    }
    Ok(())
}

fn prepare_output(root: &Path) -> Result<()> {
    fs::create_dir_all(root).map_err(|e| Error::io(root, e))
}

struct Produced {
    image: Option<RasterImage>,
    record: AugmentationRecord,
}

fn emit(
    manifest: &DatasetManifest,
    entry: &ManifestEntry,
    produced: Produced,
    output_root: &Path,
) -> Result<AugmentedPair> {
    let Some(image) = produced.image else {
        return Ok(AugmentedPair {
            original_id: entry.image_id.clone(),
            augmented_id: None,
            image_path: None,
            mask_path: None,
            record: produced.record,
        });
    };
    let aug_id = format!("{}{AUGMENTED_SUFFIX}", entry.image_id);
    let image_rel = PathBuf::from(format!("{aug_id}.png"));
    image.save_png(&output_root.join(&image_rel))?;
    let mask_rel = match manifest.mask_path(entry) {
        Some(src) => {
            let ext = src.extension().and_then(|e| e.to_str()).unwrap_or("png");
            let rel = PathBuf::from(format!("{aug_id}_mask.{ext}"));
            let dst = output_root.join(&rel);
            fs::copy(&src, &dst).map_err(|e| Error::io(&dst, e))?;
            Some(rel)
        }
        None => None,
    };
    Ok(AugmentedPair {
        original_id: entry.image_id.clone(),
        augmented_id: Some(aug_id),
        image_path: Some(image_rel),
        mask_path: mask_rel,
        record: produced.record,
    })
}

fn tolerance_schedule(base: f64, fallback: NoCandidatePolicy) -> Vec<f64> {
    let mut tols = vec![base];
    if fallback == NoCandidatePolicy::Widen {
        let mut k = 1;
        loop {
            // round to kill accumulated binary noise in the steps
            let t = ((base + WIDEN_STEP * k as f64) * 1e9).round() / 1e9;
            if t > MAX_WIDENED_TOLERANCE + 1e-12 {
                break;
            }
            tols.push(t);
            k += 1;
        }
    }
    tols
}

fn adaptive_one(
    manifest: &DatasetManifest,
    entry: &ManifestEntry,
    pool: &IlluminantPool,
    config: &SelectionConfig,
    fallback: NoCandidatePolicy,
) -> Produced {
    let id = &entry.image_id;
    let skip = |note: String| Produced {
        image: None,
        record: AugmentationRecord::no_candidate(id, 0, config.c_tolerance, Some(note)),
    };
    if !pool.contains(id) {
        return skip("not in illuminant pool".into());
    }
    let image = match RasterImage::load(&manifest.image_path(entry)) {
        Ok(img) => img,
        Err(e) => return skip(e.to_string()),
    };
    let mut last = None;
    for tol in tolerance_schedule(config.c_tolerance, fallback) {
        let cfg = SelectionConfig {
            c_tolerance: tol,
            ..*config
        };
        match select_and_augment(&image, id, pool, &cfg) {
            Ok((Some(out), record)) => {
                return Produced {
                    image: Some(out),
                    record,
                }
            }
            Ok((None, record)) => last = Some(record),
            Err(e) => return skip(e.to_string()),
        }
    }
    Produced {
        image: None,
        record: last.expect("tolerance schedule is never empty"),
    }
}

/// Adaptive augmentation of every manifest image against `pool`.
///
/// Writes `<id>_aug.png` (and a copy of the mask, if any) for each image that
/// found a candidate, then the manifest as `augmented_manifest.json`. Per-image
/// failures end up in the records; only output errors abort the run.
pub fn augment_dataset(
    manifest: &DatasetManifest,
    pool: &IlluminantPool,
    config: &SelectionConfig,
    options: &AugmentOptions,
) -> Result<AugmentedSetManifest> {
    config.validate()?;
    check_pool_matches(manifest, pool)?;
    prepare_output(&options.output_root)?;
    let entries = manifest.sorted_entries();
    let pairs = with_workers(options.workers, || {
        entries
            .par_iter()
            .map(|entry| {
                let produced = adaptive_one(manifest, entry, pool, config, options.fallback);
                emit(manifest, entry, produced, &options.output_root)
            })
            .collect::<Result<Vec<_>>>()
    })??;
    let out = AugmentedSetManifest {
        policy: Policy::Adaptive,
        seed: options.seed,
        config: *config,
        fallback: options.fallback,
        pairs,
    };
    out.save(&options.output_root.join(MANIFEST_FILE))?;
    Ok(out)
}

fn random_one(
    manifest: &DatasetManifest,
    entry: &ManifestEntry,
    pool: &IlluminantPool,
    config: &SelectionConfig,
    seed: u64,
) -> Produced {
    let id = &entry.image_id;
    let skip = |note: String| Produced {
        image: None,
        record: AugmentationRecord::no_candidate(id, 0, config.c_tolerance, Some(note)),
    };
    let Some(beta) = pool.get(id).copied() else {
        return skip("not in illuminant pool".into());
    };
    let image = match RasterImage::load(&manifest.image_path(entry)) {
        Ok(img) => img,
        Err(e) => return skip(e.to_string()),
    };
    let mut rng = image_rng(seed, id);
    let chosen = &pool.entries()[rng.random_range(0..pool.len())];
    let out = render(&image, &beta, &chosen.profile, config.quantize_output);
    let ratio = furthest_illuminant(&beta, id, pool)
        .ok()
        .filter(|(_, d)| *d > 0.0)
        .map(|(_, d)| illuminant_distance(&beta, &chosen.profile) / d);
    let saturation = mean_saturation(&out);
    Produced {
        image: Some(out),
        record: AugmentationRecord {
            source_id: id.clone(),
            chosen_illuminant_id: Some(chosen.image_id.clone()),
            distance_ratio: ratio,
            result_saturation: Some(saturation),
            status: AugmentStatus::Unregulated,
            candidates_tried: 1,
            c_tolerance: config.c_tolerance,
            note: None,
        },
    }
}

/// Baseline: recast each image to an illuminant drawn uniformly from the
/// whole pool, without checking either condition.
///
/// `config` only supplies output precision and is recorded for comparison.
pub fn random_policy_augment(
    manifest: &DatasetManifest,
    pool: &IlluminantPool,
    config: &SelectionConfig,
    options: &AugmentOptions,
) -> Result<AugmentedSetManifest> {
    if pool.is_empty() {
        return Err(Error::EmptyPool("<dataset>".into()));
    }
    check_pool_matches(manifest, pool)?;
    prepare_output(&options.output_root)?;
    let entries = manifest.sorted_entries();
    let pairs = with_workers(options.workers, || {
        entries
            .par_iter()
            .map(|entry| {
                let produced = random_one(manifest, entry, pool, config, options.seed);
                emit(manifest, entry, produced, &options.output_root)
            })
            .collect::<Result<Vec<_>>>()
    })??;
    let out = AugmentedSetManifest {
        policy: Policy::Random,
        seed: options.seed,
        config: *config,
        fallback: NoCandidatePolicy::Skip,
        pairs,
    };
    out.save(&options.output_root.join(MANIFEST_FILE))?;
    Ok(out)
}
