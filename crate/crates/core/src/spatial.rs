//! Rigid transforms applied jointly to an image and its mask.
//!
//! The forward transform flips, then rotates about the image center, then
//! translates. Output canvases keep the input size. Images are resampled
//! bilinearly with reflection padding; masks use nearest neighbour and
//! pixels mapped from outside the canvas are `false`.
//!
//! Coordinates are pixel centers with `y` pointing down, so a positive
//! angle turns the picture clockwise on screen.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{check_dims, BinaryMask, RasterImage};

pub const MAX_ROTATION_DEG: f64 = 180.0;
pub const MAX_TRANSLATE_FRAC: f64 = 0.10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpatialParams {
    /// Degrees in `[-180, 180]`.
    pub rotation_deg: f64,
    pub flip_h: bool,
    pub flip_v: bool,
    /// Shift as a fraction of width and height, each in `[-0.1, 0.1]`.
    pub translate_frac: (f64, f64),
}

impl Default for SpatialParams {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl SpatialParams {
    pub const IDENTITY: SpatialParams = SpatialParams {
        rotation_deg: 0.0,
        flip_h: false,
        flip_v: false,
        translate_frac: (0.0, 0.0),
    };

    pub fn rotation(deg: f64) -> Self {
        Self {
            rotation_deg: deg,
            ..Self::IDENTITY
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rotation_deg.is_nan() || self.rotation_deg.abs() > MAX_ROTATION_DEG {
            return Err(Error::InvalidConfig(format!(
                "rotation must be in [-180, 180] degrees, got {}",
                self.rotation_deg
            )));
        }
        let (tx, ty) = self.translate_frac;
        if [tx, ty].iter().any(|t| t.is_nan() || t.abs() > MAX_TRANSLATE_FRAC) {
            return Err(Error::InvalidConfig(format!(
                "translation fractions must be in [-0.1, 0.1], got ({tx}, {ty})"
            )));
        }
        Ok(())
    }

    /// Uniform draw over the full parameter ranges.
    pub fn sample<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Self {
            rotation_deg: rng.random_range(-MAX_ROTATION_DEG..=MAX_ROTATION_DEG),
            flip_h: rng.random_bool(0.5),
            flip_v: rng.random_bool(0.5),
            translate_frac: (
                rng.random_range(-MAX_TRANSLATE_FRAC..=MAX_TRANSLATE_FRAC),
                rng.random_range(-MAX_TRANSLATE_FRAC..=MAX_TRANSLATE_FRAC),
            ),
        }
    }
}

/// Inverse coordinate map: output pixel center to input position.
struct InverseMap {
    cos: f64,
    sin: f64,
    cx: f64,
    cy: f64,
    tx: f64,
    ty: f64,
    flip_h: bool,
    flip_v: bool,
}

impl InverseMap {
    fn new(params: &SpatialParams, width: usize, height: usize) -> Self {
        let (sin, cos) = exact_sin_cos(params.rotation_deg);
        Self {
            cos,
            sin,
            cx: (width as f64 - 1.0) / 2.0,
            cy: (height as f64 - 1.0) / 2.0,
            tx: params.translate_frac.0 * width as f64,
            ty: params.translate_frac.1 * height as f64,
            flip_h: params.flip_h,
            flip_v: params.flip_v,
        }
    }

    fn source(&self, x: usize, y: usize) -> (f64, f64) {
        let u = x as f64 - self.cx - self.tx;
        let v = y as f64 - self.cy - self.ty;
        let mut su = self.cos * u + self.sin * v;
        let mut sv = -self.sin * u + self.cos * v;
        if self.flip_h {
            su = -su;
        }
        if self.flip_v {
            sv = -sv;
        }
        (su + self.cx, sv + self.cy)
    }
}

// Quarter turns get exact 0/±1 so they permute pixels without resampling.
fn exact_sin_cos(deg: f64) -> (f64, f64) {
    let quarters = deg / 90.0;
    if quarters.fract() == 0.0 {
        match (quarters as i64).rem_euclid(4) {
            0 => (0.0, 1.0),
            1 => (1.0, 0.0),
            2 => (0.0, -1.0),
            _ => (-1.0, 0.0),
        }
    } else {
        deg.to_radians().sin_cos()
    }
}

/// Mirror index into `0..n` without repeating the edge sample.
fn reflect(i: i64, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as i64 - 1);
    let m = i.rem_euclid(period);
    if m < n as i64 {
        m as usize
    } else {
        (period - m) as usize
    }
}

fn sample_bilinear(image: &RasterImage, sx: f64, sy: f64) -> [f64; 3] {
    let (w, h) = (image.width(), image.height());
    let x0 = sx.floor();
    let y0 = sy.floor();
    let fx = sx - x0;
    let fy = sy - y0;
    let (x0, y0) = (x0 as i64, y0 as i64);
    if fx == 0.0 && fy == 0.0 {
        return image.pixel(reflect(x0, w), reflect(y0, h));
    }
    let xa = reflect(x0, w);
    let xb = reflect(x0 + 1, w);
    let ya = reflect(y0, h);
    let yb = reflect(y0 + 1, h);
    let (p00, p10, p01, p11) = (
        image.pixel(xa, ya),
        image.pixel(xb, ya),
        image.pixel(xa, yb),
        image.pixel(xb, yb),
    );
    let mut out = [0.0; 3];
    for c in 0..3 {
        let top = p00[c] * (1.0 - fx) + p10[c] * fx;
        let bottom = p01[c] * (1.0 - fx) + p11[c] * fx;
        out[c] = top * (1.0 - fy) + bottom * fy;
    }
    out
}

pub fn transform_image(image: &RasterImage, params: &SpatialParams) -> Result<RasterImage> {
    params.validate()?;
    let (w, h) = (image.width(), image.height());
    let map = InverseMap::new(params, w, h);
    let mut data = Vec::with_capacity(w * h * 3);
    for y in 0..h {
        for x in 0..w {
            let (sx, sy) = map.source(x, y);
            data.extend_from_slice(&sample_bilinear(image, sx, sy));
        }
    }
    Ok(RasterImage::from_parts_unchecked(w, h, data))
}

pub fn transform_mask(mask: &BinaryMask, params: &SpatialParams) -> Result<BinaryMask> {
    params.validate()?;
    let (w, h) = (mask.width(), mask.height());
    let map = InverseMap::new(params, w, h);
    let mut data = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let (sx, sy) = map.source(x, y);
            let (rx, ry) = (sx.round(), sy.round());
            let inside = rx >= 0.0 && ry >= 0.0 && rx < w as f64 && ry < h as f64;
            data.push(inside && mask.get(rx as usize, ry as usize));
        }
    }
    Ok(BinaryMask::from_parts_unchecked(w, h, data))
}

/// Apply the same transform to an image and its mask.
pub fn apply_spatial(
    image: &RasterImage,
    mask: &BinaryMask,
    params: &SpatialParams,
) -> Result<(RasterImage, BinaryMask)> {
    check_dims(
        (image.width(), image.height()),
        (mask.width(), mask.height()),
    )?;
    Ok((transform_image(image, params)?, transform_mask(mask, params)?))
}
