//! Adaptive illuminant selection.
//!
//! For a source image with illuminant `β`, the furthest pool illuminant `α`
//! fixes the scale of color difference. A candidate `γ` is accepted when
//!
//! 1. its distance ratio `r = d(β, γ) / d(β, α)` lies within
//!    `c_tolerance` of `c_threshold`, and
//! 2. the mean HSV saturation of the recast image lies in the saturation
//!    band.
//!
//! Candidates passing (1) are visited closest-to-threshold first, ties
//! broken by image id; the first one that also passes (2) wins.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::color::{illuminant_distance, mean_saturation, recast, IlluminantProfile};
use crate::error::{Error, Result};
use crate::raster::{RasterImage, MAX_INTENSITY};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolEntry {
    pub image_id: String,
    pub profile: IlluminantProfile,
}

/// Illuminants of a dataset keyed by unique image id, kept sorted by id.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<PoolEntry>", into = "Vec<PoolEntry>")]
pub struct IlluminantPool {
    entries: Vec<PoolEntry>,
}

impl TryFrom<Vec<PoolEntry>> for IlluminantPool {
    type Error = Error;

    fn try_from(entries: Vec<PoolEntry>) -> Result<Self> {
        IlluminantPool::new(entries)
    }
}

impl From<IlluminantPool> for Vec<PoolEntry> {
    fn from(pool: IlluminantPool) -> Self {
        pool.entries
    }
}

impl IlluminantPool {
    pub fn new(mut entries: Vec<PoolEntry>) -> Result<Self> {
        entries.sort_by(|a, b| a.image_id.cmp(&b.image_id));
        if let Some(w) = entries.windows(2).find(|w| w[0].image_id == w[1].image_id) {
            return Err(Error::DuplicateId(w[0].image_id.clone()));
        }
        Ok(Self { entries })
    }

    pub fn from_pairs<S: Into<String>>(
        pairs: impl IntoIterator<Item = (S, IlluminantProfile)>,
    ) -> Result<Self> {
        Self::new(
            pairs
                .into_iter()
                .map(|(id, profile)| PoolEntry {
                    image_id: id.into(),
                    profile,
                })
                .collect(),
        )
    }

    pub fn entries(&self) -> &[PoolEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, image_id: &str) -> Option<&IlluminantProfile> {
        self.entries
            .binary_search_by(|e| e.image_id.as_str().cmp(image_id))
            .ok()
            .map(|i| &self.entries[i].profile)
    }

    pub fn contains(&self, image_id: &str) -> bool {
        self.get(image_id).is_some()
    }

    /// Entries other than `source_id`.
    pub fn counterparts<'a>(&'a self, source_id: &'a str) -> impl Iterator<Item = &'a PoolEntry> {
        self.entries.iter().filter(move |e| e.image_id != source_id)
    }
}

/// Accepted mean-saturation interval `[low, high]`, inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SaturationBand {
    pub low: f64,
    pub high: f64,
}

impl SaturationBand {
    pub fn contains(&self, s: f64) -> bool {
        s >= self.low && s <= self.high
    }
}

impl Default for SaturationBand {
    fn default() -> Self {
        Self {
            low: 15.0,
            high: 115.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionConfig {
    /// Target fraction of the maximum color difference.
    pub c_threshold: f64,
    /// Half-width of the accepted band around `c_threshold`.
    pub c_tolerance: f64,
    pub saturation_band: SaturationBand,
    /// Evaluate and return candidates at 8-bit precision, so the saturation
    /// check sees exactly the values that end up in a written PNG.
    pub quantize_output: bool,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        Self {
            c_threshold: 0.4,
            c_tolerance: 0.05,
            saturation_band: SaturationBand::default(),
            quantize_output: true,
        }
    }
}

impl SelectionConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.c_threshold > 0.0 && self.c_threshold < 1.0) {
            return bad(format!("c_threshold must be in (0, 1), got {}", self.c_threshold));
        }
        if !(self.c_tolerance >= 0.0 && self.c_tolerance.is_finite()) {
            return bad(format!("c_tolerance must be >= 0, got {}", self.c_tolerance));
        }
        let SaturationBand { low, high } = self.saturation_band;
        if !(low >= 0.0 && low < high && high <= MAX_INTENSITY) {
            return bad(format!(
                "saturation band must satisfy 0 <= a < b <= 255, got [{low}, {high}]"
            ));
        }
        Ok(())
    }

    pub(crate) fn ratio_in_band(&self, ratio: f64) -> bool {
        (ratio - self.c_threshold).abs() <= self.c_tolerance
    }
}

/// A pool entry that satisfies the distance condition.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate<'a> {
    pub image_id: &'a str,
    pub profile: IlluminantProfile,
    pub distance_ratio: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AugmentStatus {
    /// Both conditions hold for the chosen illuminant.
    Augmented,
    /// No candidate satisfied both conditions; nothing was produced.
    NoCandidate,
    /// Illuminant picked uniformly at random with no conditions checked
    /// (comparison baseline only).
    Unregulated,
}

/// Provenance of one augmentation attempt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentationRecord {
    pub source_id: String,
    pub chosen_illuminant_id: Option<String>,
    /// `d(β, γ) / d(β, α)` for the chosen illuminant.
    pub distance_ratio: Option<f64>,
    /// Mean saturation of the produced image.
    pub result_saturation: Option<f64>,
    pub status: AugmentStatus,
    /// Candidates that passed the distance condition and were evaluated.
    pub candidates_tried: usize,
    /// Distance tolerance in effect when the record was produced.
    pub c_tolerance: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl AugmentationRecord {
    pub fn no_candidate(source_id: &str, tried: usize, c_tolerance: f64, note: Option<String>) -> Self {
        Self {
            source_id: source_id.to_string(),
            chosen_illuminant_id: None,
            distance_ratio: None,
            result_saturation: None,
            status: AugmentStatus::NoCandidate,
            candidates_tried: tried,
            c_tolerance,
            note,
        }
    }
}

/// Pool entry (other than `source_id`) furthest from `beta`; ties go to the
/// lexicographically smallest id.
pub fn furthest_illuminant<'a>(
    beta: &IlluminantProfile,
    source_id: &'a str,
    pool: &'a IlluminantPool,
) -> Result<(&'a PoolEntry, f64)> {
    let mut best: Option<(&PoolEntry, f64)> = None;
    // entries are sorted by id, so a strict comparison keeps the smallest id on ties
    for entry in pool.counterparts(source_id) {
        let d = illuminant_distance(beta, &entry.profile);
        if best.is_none_or(|(_, bd)| d > bd) {
            best = Some((entry, d));
        }
    }
    best.ok_or_else(|| Error::EmptyPool(source_id.to_string()))
}

fn by_band_distance(c_threshold: f64) -> impl Fn(&Candidate, &Candidate) -> Ordering {
    move |a, b| {
        let da = (a.distance_ratio - c_threshold).abs();
        let db = (b.distance_ratio - c_threshold).abs();
        da.total_cmp(&db).then_with(|| a.image_id.cmp(b.image_id))
    }
}

/// Counterparts whose distance ratio is within the tolerance band, closest to
/// `c_threshold` first.
pub fn rank_candidates<'a>(
    beta: &IlluminantProfile,
    source_id: &'a str,
    pool: &'a IlluminantPool,
    config: &SelectionConfig,
) -> Result<Vec<Candidate<'a>>> {
    let (_, max_distance) = furthest_illuminant(beta, source_id, pool)?;
    if max_distance <= 0.0 {
        return Err(Error::DegeneratePool(source_id.to_string()));
    }
    let mut ranked: Vec<Candidate> = pool
        .counterparts(source_id)
        .map(|e| Candidate {
            image_id: &e.image_id,
            profile: e.profile,
            distance_ratio: illuminant_distance(beta, &e.profile) / max_distance,
        })
        .filter(|c| config.ratio_in_band(c.distance_ratio))
        .collect();
    ranked.sort_by(by_band_distance(config.c_threshold));
    Ok(ranked)
}

/// Recast `image` towards each ranked candidate in turn and return the first
/// result whose mean saturation is inside the band.
///
/// The source illuminant is taken from the pool entry for `source_id`.
/// Exhausting the candidates yields `(None, NoCandidate)`; choosing a
/// fallback is left to the caller.
pub fn select_and_augment(
    image: &RasterImage,
    source_id: &str,
    pool: &IlluminantPool,
    config: &SelectionConfig,
) -> Result<(Option<RasterImage>, AugmentationRecord)> {
    config.validate()?;
    let beta = *pool
        .get(source_id)
        .ok_or_else(|| Error::SourceNotInPool(source_id.to_string()))?;
    let candidates = rank_candidates(&beta, source_id, pool, config)?;

    for (i, cand) in candidates.iter().enumerate() {
        let out = render(image, &beta, &cand.profile, config.quantize_output);
        let saturation = mean_saturation(&out);
        if config.saturation_band.contains(saturation) {
            let record = AugmentationRecord {
                source_id: source_id.to_string(),
                chosen_illuminant_id: Some(cand.image_id.to_string()),
                distance_ratio: Some(cand.distance_ratio),
                result_saturation: Some(saturation),
                status: AugmentStatus::Augmented,
                candidates_tried: i + 1,
                c_tolerance: config.c_tolerance,
                note: None,
            };
            return Ok((Some(out), record));
        }
    }
    Ok((
        None,
        AugmentationRecord::no_candidate(source_id, candidates.len(), config.c_tolerance, None),
    ))
}

pub(crate) fn render(
    image: &RasterImage,
    source: &IlluminantProfile,
    target: &IlluminantProfile,
    quantize: bool,
) -> RasterImage {
    let out = recast(image, source, target);
    if quantize {
        out.quantized()
    } else {
        out
    }
}
