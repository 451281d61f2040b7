//! Gray World illuminant estimation, white balance, illuminant recasting,
//! illuminant distance and HSV saturation statistics.
//!
//! An illuminant profile is the triple of per-channel scales obtained by
//! dividing each channel mean by one third of the combined mean, so the
//! three components always sum to 3 and an achromatic scene maps to
//! `(1, 1, 1)`. Recasting divides an image by its own scales and multiplies
//! by another image's scales:
//!
//! ```text
//! I_aug = (I / source) * target        (componentwise, clipped to [0, 255])
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{RasterImage, MAX_INTENSITY};

/// Combined mean intensity at or below which an image has no illuminant.
pub const BLACK_FLOOR: f64 = 1e-6;

/// Allowed deviation of `beta_r + beta_g + beta_b` from 3.
pub const SCALE_SUM_TOLERANCE: f64 = 1e-9;

/// Per-channel illuminant scales.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawProfile")]
pub struct IlluminantProfile {
    beta_r: f64,
    beta_g: f64,
    beta_b: f64,
}

#[derive(Deserialize)]
struct RawProfile {
    beta_r: f64,
    beta_g: f64,
    beta_b: f64,
}

impl TryFrom<RawProfile> for IlluminantProfile {
    type Error = Error;

    fn try_from(raw: RawProfile) -> Result<Self> {
        IlluminantProfile::new(raw.beta_r, raw.beta_g, raw.beta_b)
    }
}

impl IlluminantProfile {
    /// The achromatic profile.
    pub const NEUTRAL: IlluminantProfile = IlluminantProfile {
        beta_r: 1.0,
        beta_g: 1.0,
        beta_b: 1.0,
    };

    /// Components must be finite, positive and sum to 3.
    pub fn new(beta_r: f64, beta_g: f64, beta_b: f64) -> Result<Self> {
        let comps = [beta_r, beta_g, beta_b];
        if comps.iter().any(|c| !c.is_finite() || *c <= 0.0) {
            return Err(Error::InvalidProfile(format!(
                "components must be finite and > 0, got {comps:?}"
            )));
        }
        let sum = beta_r + beta_g + beta_b;
        if (sum - 3.0).abs() > SCALE_SUM_TOLERANCE {
            return Err(Error::InvalidProfile(format!(
                "components must sum to 3, got {sum}"
            )));
        }
        Ok(Self {
            beta_r,
            beta_g,
            beta_b,
        })
    }

    /// Normalize arbitrary positive channel means into a profile.
    pub fn from_channel_means(mean_r: f64, mean_g: f64, mean_b: f64) -> Result<Self> {
        let third = (mean_r + mean_g + mean_b) / 3.0;
        if !third.is_finite() || third <= BLACK_FLOOR {
            return Err(Error::DegenerateImage {
                mean: third,
                floor: BLACK_FLOOR,
            });
        }
        let comps = [mean_r / third, mean_g / third, mean_b / third];
        if comps.iter().any(|c| *c <= 0.0) {
            return Err(Error::InvalidProfile(format!(
                "every channel mean must be > 0, got ({mean_r}, {mean_g}, {mean_b})"
            )));
        }
        Ok(Self {
            beta_r: comps[0],
            beta_g: comps[1],
            beta_b: comps[2],
        })
    }

    pub fn r(&self) -> f64 {
        self.beta_r
    }

    pub fn g(&self) -> f64 {
        self.beta_g
    }

    pub fn b(&self) -> f64 {
        self.beta_b
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.beta_r, self.beta_g, self.beta_b]
    }
}

/// Gray World estimate: each channel mean over one third of the combined
/// mean of all channel values.
///
/// Fails with [`Error::DegenerateImage`] when the combined mean is at or
/// below [`BLACK_FLOOR`]. A channel that is entirely zero in an otherwise
/// lit image also fails, because a zero scale cannot be divided out.
pub fn compute_illuminant(image: &RasterImage) -> Result<IlluminantProfile> {
    let mut sums = [0.0f64; 3];
    for px in image.pixels() {
        sums[0] += px[0];
        sums[1] += px[1];
        sums[2] += px[2];
    }
    let n = image.pixel_count() as f64;
    let means = sums.map(|s| s / n);
    let combined = (sums[0] + sums[1] + sums[2]) / (3.0 * n);
    if combined <= BLACK_FLOOR {
        return Err(Error::DegenerateImage {
            mean: combined,
            floor: BLACK_FLOOR,
        });
    }
    if means.iter().any(|m| *m <= 0.0) {
        return Err(Error::InvalidProfile(format!(
            "image has an all-zero channel (channel means {means:?})"
        )));
    }
    Ok(IlluminantProfile {
        beta_r: means[0] / combined,
        beta_g: means[1] / combined,
        beta_b: means[2] / combined,
    })
}

/// Divide every channel by its scale. No clipping; the result is an
/// intermediate that may exceed 255.
pub fn white_balance(image: &RasterImage, profile: &IlluminantProfile) -> RasterImage {
    let scales = profile.as_array();
    image.map_channels(|c, v| v / scales[c])
}

/// Move an image from `source` illuminant to `target`, clipped to `[0, 255]`.
///
/// The per-channel factor `target / source` is formed first, so recasting
/// with `source == target` multiplies by exactly 1 and returns the input
/// bit for bit.
pub fn recast(
    image: &RasterImage,
    source: &IlluminantProfile,
    target: &IlluminantProfile,
) -> RasterImage {
    let src = source.as_array();
    let dst = target.as_array();
    let factors = [dst[0] / src[0], dst[1] / src[1], dst[2] / src[2]];
    image.map_channels(|c, v| (v * factors[c]).min(MAX_INTENSITY))
}

/// Euclidean distance between two profiles in scale space.
pub fn illuminant_distance(a: &IlluminantProfile, b: &IlluminantProfile) -> f64 {
    let dr = a.beta_r - b.beta_r;
    let dg = a.beta_g - b.beta_g;
    let db = a.beta_b - b.beta_b;
    (dr * dr + dg * dg + db * db).sqrt()
}

/// HSV saturation of one pixel on the 0..=255 scale.
pub fn pixel_saturation(rgb: [f64; 3]) -> f64 {
    let max = rgb[0].max(rgb[1]).max(rgb[2]);
    if max <= 0.0 {
        return 0.0;
    }
    let min = rgb[0].min(rgb[1]).min(rgb[2]);
    (max - min) / max * MAX_INTENSITY
}

/// Mean HSV saturation over all pixels, achromatic ones included.
pub fn mean_saturation(image: &RasterImage) -> f64 {
    let total: f64 = image.pixels().map(pixel_saturation).sum();
    total / image.pixel_count() as f64
}

/// Mean saturation of a collection of images.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaturationStats {
    /// Average of `per_image_values`.
    pub mean_saturation: f64,
    pub per_image_values: Vec<f64>,
}

impl SaturationStats {
    pub fn from_values(per_image_values: Vec<f64>) -> Self {
        let mean_saturation = if per_image_values.is_empty() {
            0.0
        } else {
            per_image_values.iter().sum::<f64>() / per_image_values.len() as f64
        };
        Self {
            mean_saturation,
            per_image_values,
        }
    }

    pub fn from_images<'a>(images: impl IntoIterator<Item = &'a RasterImage>) -> Self {
        Self::from_values(images.into_iter().map(mean_saturation).collect())
    }
}

/// Saturation statistics of a single image.
pub fn rgb_to_hsv_saturation(image: &RasterImage) -> SaturationStats {
    SaturationStats::from_values(vec![mean_saturation(image)])
}
