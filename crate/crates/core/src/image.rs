//! Real-valued 2-D images.
//!
//! Every signal in the pipeline (ground truth, reconstructions, decoded
//! images, the scaled dual variable) is an [`Image`]: a row-major grid of
//! `f64` values. Pixel values nominally live in `[0, P]` with `P = 255`, but
//! intermediates are allowed to leave that range.

use std::path::Path;

use crate::error::{Error, Result};

/// Default peak value for 8-bit sources.
pub const DEFAULT_PEAK: f64 = 255.0;

#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl Image {
    /// Builds an image from row-major pixels. Rejects empty grids, a length
    /// mismatch and non-finite values.
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidImage(format!("empty grid {width}x{height}")));
        }
        if data.len() != width * height {
            return Err(Error::InvalidImage(format!(
                "expected {} pixels for {width}x{height}, got {}",
                width * height,
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidImage(format!(
                "non-finite pixel at ({}, {})",
                i % width,
                i / width
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self::filled(width, height, 0.0)
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        assert!(width > 0 && height > 0, "empty grid");
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    /// Builds an image by evaluating `f(col, row)` at every grid point.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        assert!(width > 0 && height > 0, "empty grid");
        let mut data = Vec::with_capacity(width * height);
        for row in 0..height {
            for col in 0..width {
                data.push(f(col, row));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    /// Wraps a buffer produced by internal numerics. The caller guarantees
    /// the length; finiteness is checked separately where it matters.
    pub(crate) fn from_raw(width: usize, height: usize, data: Vec<f64>) -> Self {
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

    /// Number of pixels `N`.
    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn pixels(&self) -> &[f64] {
        &self.data
    }

    pub fn pixels_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_pixels(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, col: usize, row: usize) -> f64 {
        self.data[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, col: usize, row: usize, value: f64) {
        self.data[row * self.width + col] = value;
    }

    pub fn same_grid(&self, other: &Image) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub(crate) fn check_same_grid(&self, other: &Image) -> Result<()> {
        if self.same_grid(other) {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected: (self.width, self.height),
                found: (other.width, other.height),
            })
        }
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Image {
        Image::from_raw(
            self.width,
            self.height,
            self.data.iter().map(|&v| f(v)).collect(),
        )
    }

    /// Pixel-wise `self + other`.
    pub fn add(&self, other: &Image) -> Image {
        self.zip_with(other, |a, b| a + b)
    }

    /// Pixel-wise `self - other`.
    pub fn sub(&self, other: &Image) -> Image {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn zip_with(&self, other: &Image, f: impl Fn(f64, f64) -> f64) -> Image {
        assert!(self.same_grid(other), "grid mismatch");
        Image::from_raw(
            self.width,
            self.height,
            self.data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        )
    }

    pub fn dot(&self, other: &Image) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    pub fn norm_l2(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn norm_l1(&self) -> f64 {
        self.data.iter().map(|v| v.abs()).sum()
    }

    /// `clip(round(x), 0, peak)` as 8-bit samples. This is the codec input
    /// contract.
    pub fn to_u8_clipped(&self, peak: f64) -> Vec<u8> {
        let hi = peak.clamp(0.0, 255.0);
        self.data
            .iter()
            .map(|&v| v.round().clamp(0.0, hi) as u8)
            .collect()
    }

    pub fn from_u8(width: usize, height: usize, bytes: &[u8]) -> Result<Self> {
        Image::new(width, height, bytes.iter().map(|&b| f64::from(b)).collect())
    }

    /// Loads an 8-bit grayscale image (PNG or binary PGM). Colour inputs are
    /// converted to luminance.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let img = image::open(path).map_err(|e| Error::Io {
            context: format!("reading image {}", path.display()),
            source: std::io::Error::other(e),
        })?;
        let luma = img.to_luma8();
        let (w, h) = luma.dimensions();
        Image::from_u8(w as usize, h as usize, luma.as_raw())
    }

    /// Saves as 8-bit grayscale after clipping to `[0, peak]`. The format is
    /// picked from the extension (`.png` or `.pgm`).
    pub fn save(&self, path: impl AsRef<Path>, peak: f64) -> Result<()> {
        let path = path.as_ref();
        let buf = image::GrayImage::from_raw(
            self.width as u32,
            self.height as u32,
            self.to_u8_clipped(peak),
        )
        .expect("buffer length matches dimensions");
        let is_pgm = path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| e.eq_ignore_ascii_case("pgm"));
        let result = if is_pgm {
            std::fs::File::create(path)
                .map_err(image::ImageError::IoError)
                .and_then(|f| {
                    let enc = image::codecs::pnm::PnmEncoder::new(std::io::BufWriter::new(f))
                        .with_subtype(image::codecs::pnm::PnmSubtype::Graymap(
                            image::codecs::pnm::SampleEncoding::Binary,
                        ));
                    buf.write_with_encoder(enc)
                })
        } else {
            buf.save(path)
        };
        result.map_err(|e| Error::Io {
            context: format!("writing image {}", path.display()),
            source: std::io::Error::other(e),
        })
    }
}
