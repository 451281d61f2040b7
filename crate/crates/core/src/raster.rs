//! Floating-point RGB rasters and binary masks, plus 8-bit PNG I/O.
//!
//! Intensities stay in `f64` on the nominal `[0, 255]` scale through every
//! stage; quantization to 8 bits happens only in [`RasterImage::to_rgb8`].

use std::path::Path;

use image::{GrayImage, ImageBuffer, Luma, Rgb, RgbImage};

use crate::error::{Error, Result};

/// Upper end of the nominal intensity range.
pub const MAX_INTENSITY: f64 = 255.0;

/// H×W×3 raster, interleaved R, G, B.
#[derive(Debug, Clone, PartialEq)]
pub struct RasterImage {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl RasterImage {
    /// Build from interleaved RGB data. Every value must be finite and
    /// non-negative.
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidImage(format!(
                "dimensions must be positive, got {width}x{height}"
            )));
        }
        if data.len() != width * height * 3 {
            return Err(Error::InvalidImage(format!(
                "expected {} values for {width}x{height}x3, got {}",
                width * height * 3,
                data.len()
            )));
        }
        if let Some(bad) = data.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::InvalidImage(format!(
                "intensities must be finite and >= 0, found {bad}"
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    /// Image where every pixel has the same color.
    pub fn filled(width: usize, height: usize, rgb: [f64; 3]) -> Result<Self> {
        let data = rgb
            .iter()
            .copied()
            .cycle()
            .take(width * height * 3)
            .collect();
        Self::new(width, height, data)
    }

    /// Build by evaluating `f(x, y)` for every pixel.
    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> [f64; 3],
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height * 3);
        for y in 0..height {
            for x in 0..width {
                data.extend_from_slice(&f(x, y));
            }
        }
        Self::new(width, height, data)
    }

    // Internal constructor for transforms that preserve the invariants.
    pub(crate) fn from_parts_unchecked(width: usize, height: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), width * height * 3);
        debug_assert!(data.iter().all(|v| v.is_finite() && *v >= 0.0));
        Self {
            width,
            height,
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    /// Interleaved channel data.
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn pixel(&self, x: usize, y: usize) -> [f64; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn pixels(&self) -> impl Iterator<Item = [f64; 3]> + '_ {
        self.data.chunks_exact(3).map(|p| [p[0], p[1], p[2]])
    }

    /// Apply a per-channel map to every value.
    pub(crate) fn map_channels(&self, f: impl Fn(usize, f64) -> f64) -> Self {
        let data = self
            .data
            .iter()
            .enumerate()
            .map(|(i, v)| f(i % 3, *v))
            .collect();
        Self::from_parts_unchecked(self.width, self.height, data)
    }

    /// Round every value to the nearest integer inside `[0, 255]`, i.e. the
    /// values an 8-bit encoding of this image will carry.
    pub fn quantized(&self) -> Self {
        self.map_channels(|_, v| quantize(v) as f64)
    }

    pub fn from_rgb8(img: &RgbImage) -> Self {
        let data = img.as_raw().iter().map(|v| *v as f64).collect();
        Self::from_parts_unchecked(img.width() as usize, img.height() as usize, data)
    }

    pub fn to_rgb8(&self) -> RgbImage {
        let raw: Vec<u8> = self.data.iter().map(|v| quantize(*v)).collect();
        ImageBuffer::<Rgb<u8>, _>::from_raw(self.width as u32, self.height as u32, raw)
            .expect("buffer length matches dimensions")
    }

    /// Decode any supported image file and convert it to RGB.
    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        let img = image::open(path).map_err(|source| Error::Codec {
            path: path.to_path_buf(),
            source,
        })?;
        Ok(Self::from_rgb8(&img.to_rgb8()))
    }

    /// Write as 8-bit PNG.
    pub fn save_png(&self, path: &Path) -> Result<()> {
        self.to_rgb8()
            .save_with_format(path, image::ImageFormat::Png)
            .map_err(|source| Error::Codec {
                path: path.to_path_buf(),
                source,
            })
    }
}

fn quantize(v: f64) -> u8 {
    v.round().clamp(0.0, MAX_INTENSITY) as u8
}

/// H×W boolean map, `true` marks lesion pixels.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    data: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize, data: Vec<bool>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidImage(format!(
                "mask dimensions must be positive, got {width}x{height}"
            )));
        }
        if data.len() != width * height {
            return Err(Error::InvalidImage(format!(
                "expected {} mask values for {width}x{height}, got {}",
                width * height,
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn empty(width: usize, height: usize) -> Result<Self> {
        Self::new(width, height, vec![false; width * height])
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> bool,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::new(width, height, data)
    }

    pub(crate) fn from_parts_unchecked(width: usize, height: usize, data: Vec<bool>) -> Self {
        debug_assert_eq!(data.len(), width * height);
        Self {
            width,
            height,
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, value: bool) {
        self.data[y * self.width + x] = value;
    }

    /// Number of `true` pixels.
    pub fn area(&self) -> usize {
        self.data.iter().filter(|v| **v).count()
    }

    pub fn complement(&self) -> Self {
        Self::from_parts_unchecked(
            self.width,
            self.height,
            self.data.iter().map(|v| !v).collect(),
        )
    }

    pub fn same_size(&self, other: &BinaryMask) -> Result<()> {
        check_dims((self.width, self.height), (other.width, other.height))
    }

    /// Threshold a grayscale image at mid-gray: values above 127 are `true`.
    pub fn from_luma8(img: &GrayImage) -> Self {
        let data = img.as_raw().iter().map(|v| *v > 127).collect();
        Self::from_parts_unchecked(img.width() as usize, img.height() as usize, data)
    }

    pub fn to_luma8(&self) -> GrayImage {
        let raw = self.data.iter().map(|v| if *v { 255 } else { 0 }).collect();
        ImageBuffer::<Luma<u8>, _>::from_raw(self.width as u32, self.height as u32, raw)
            .expect("buffer length matches dimensions")
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        let img = image::open(path).map_err(|source| Error::Codec {
            path: path.to_path_buf(),
            source,
        })?;
        Ok(Self::from_luma8(&img.to_luma8()))
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        self.to_luma8()
            .save_with_format(path, image::ImageFormat::Png)
            .map_err(|source| Error::Codec {
                path: path.to_path_buf(),
                source,
            })
    }
}

pub(crate) fn check_dims(left: (usize, usize), right: (usize, usize)) -> Result<()> {
    if left != right {
        return Err(Error::DimensionMismatch {
            left_w: left.0,
            left_h: left.1,
            right_w: right.0,
            right_h: right.1,
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_images() {
        assert!(RasterImage::new(0, 1, vec![]).is_err());
        assert!(RasterImage::new(1, 1, vec![1.0, 2.0]).is_err());
        assert!(RasterImage::new(1, 1, vec![1.0, -2.0, 0.0]).is_err());
        assert!(RasterImage::new(1, 1, vec![1.0, f64::NAN, 0.0]).is_err());
        assert!(RasterImage::new(1, 1, vec![1.0, 2.0, 300.0]).is_ok());
    }

    #[test]
    fn quantization_rounds_and_clips() {
        let img = RasterImage::new(2, 1, vec![0.4, 0.5, 254.6, 300.0, 12.49, 0.0]).unwrap();
        assert_eq!(img.to_rgb8().as_raw(), &[0, 1, 255, 255, 12, 0]);
        assert_eq!(img.quantized().data(), &[0.0, 1.0, 255.0, 255.0, 12.0, 0.0]);
    }

    #[test]
    fn png_round_trip_is_lossless_for_integral_values() {
        let dir = tempfile::tempdir().unwrap();
        let img = RasterImage::from_fn(5, 3, |x, y| [x as f64 * 40.0, y as f64 * 90.0, 7.0]).unwrap();
        let path = dir.path().join("a.png");
        img.save_png(&path).unwrap();
        assert_eq!(RasterImage::load(&path).unwrap(), img);

        let mask = BinaryMask::from_fn(5, 3, |x, y| (x + y) % 2 == 0).unwrap();
        let mpath = dir.path().join("m.png");
        mask.save_png(&mpath).unwrap();
        assert_eq!(BinaryMask::load(&mpath).unwrap(), mask);
    }

    #[test]
    fn missing_file_is_reported() {
        let err = RasterImage::load(Path::new("/definitely/not/here.png")).unwrap_err();
        assert!(matches!(err, Error::MissingFile(_)));
        assert!(err.is_io());
    }
}
