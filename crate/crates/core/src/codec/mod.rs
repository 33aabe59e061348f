//! Codecs used as black-box compression modules.
//!
//! A codec only has to map an image to a [`Bitstream`] and back. Inputs are
//! clipped and rounded to 8-bit samples at this boundary; the optimizer
//! itself keeps unclipped double-precision state.

mod bits;
mod external;
pub mod reference;

use std::str::FromStr;

pub use external::{ExternalCodec, ExternalTemplate, InterchangeFormat};
pub use reference::ReferenceCodec;

use crate::error::{CodecError, Error, Result};
use crate::image::{Image, DEFAULT_PEAK};

/// Compressed bytes with their exact coded length.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Bitstream {
    bytes: Vec<u8>,
    bit_count: u64,
    /// Grid of the image this stream was produced from. Side information
    /// only; not part of the coded size.
    dims: (usize, usize),
}

impl Bitstream {
    pub fn new(bytes: Vec<u8>, bit_count: u64, dims: (usize, usize)) -> Self {
        debug_assert!(bit_count <= 8 * bytes.len() as u64);
        Self {
            bytes,
            bit_count,
            dims,
        }
    }

    pub fn bytes(&self) -> &[u8] {
        &self.bytes
    }

    pub fn bit_count(&self) -> u64 {
        self.bit_count
    }

    pub fn dims(&self) -> (usize, usize) {
        self.dims
    }

    /// Bits per pixel against the true (unpadded) pixel count.
    pub fn bpp(&self) -> f64 {
        self.bit_count as f64 / (self.dims.0 * self.dims.1) as f64
    }
}

pub trait Codec: Send + Sync {
    fn compress(&self, x: &Image) -> Result<Bitstream, CodecError>;
    fn decompress(&self, b: &Bitstream) -> Result<Image, CodecError>;
}

/// Stores the clipped 8-bit samples verbatim.
#[derive(Clone, Copy, Debug)]
pub struct IdentityCodec {
    peak: f64,
}

impl IdentityCodec {
    pub fn new(peak: f64) -> Self {
        Self { peak }
    }
}

impl Codec for IdentityCodec {
    fn compress(&self, x: &Image) -> Result<Bitstream, CodecError> {
        let bytes = x.to_u8_clipped(self.peak);
        let bits = 8 * bytes.len() as u64;
        Ok(Bitstream::new(bytes, bits, x.dims()))
    }

    fn decompress(&self, b: &Bitstream) -> Result<Image, CodecError> {
        let (w, h) = b.dims();
        if b.bytes().len() != w * h {
            return Err(CodecError::Malformed(format!(
                "identity stream has {} bytes for a {w}x{h} image",
                b.bytes().len()
            )));
        }
        Image::from_u8(w, h, b.bytes()).map_err(|e| CodecError::Malformed(e.to_string()))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum CodecKind {
    #[default]
    Reference,
    External,
    Identity,
}

impl CodecKind {
    pub fn name(self) -> &'static str {
        match self {
            CodecKind::Reference => "reference",
            CodecKind::External => "external",
            CodecKind::Identity => "identity",
        }
    }
}

impl FromStr for CodecKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "reference" => Ok(CodecKind::Reference),
            "external" => Ok(CodecKind::External),
            "identity" => Ok(CodecKind::Identity),
            other => Err(Error::InvalidParameter(format!(
                "unknown codec kind `{other}`"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CodecParams {
    pub kind: CodecKind,
    /// Quantization parameter in `[0, 51]`.
    pub qp: i32,
    pub peak: f64,
    pub external: Option<ExternalTemplate>,
}

impl Default for CodecParams {
    fn default() -> Self {
        Self {
            kind: CodecKind::Reference,
            qp: 31,
            peak: DEFAULT_PEAK,
            external: None,
        }
    }
}

impl CodecParams {
    pub fn reference(qp: i32) -> Self {
        Self {
            qp,
            ..Self::default()
        }
    }

    pub fn identity() -> Self {
        Self {
            kind: CodecKind::Identity,
            ..Self::default()
        }
    }

    pub fn external(qp: i32, template: ExternalTemplate) -> Self {
        Self {
            kind: CodecKind::External,
            qp,
            peak: DEFAULT_PEAK,
            external: Some(template),
        }
    }

    pub fn with_qp(&self, qp: i32) -> Self {
        Self { qp, ..self.clone() }
    }

    pub fn validate(&self) -> Result<(), CodecError> {
        if !(0..=51).contains(&self.qp) {
            return Err(CodecError::QpOutOfRange(self.qp));
        }
        if !(self.peak >= 1.0 && self.peak <= 255.0) {
            return Err(CodecError::Malformed(format!(
                "peak {} outside the 8-bit range",
                self.peak
            )));
        }
        Ok(())
    }

    pub fn build(&self) -> Result<Box<dyn Codec>, CodecError> {
        self.validate()?;
        Ok(match self.kind {
            CodecKind::Reference => {
                Box::new(ReferenceCodec::new(self.qp as u8, self.peak.round() as u8)?)
            }
            CodecKind::Identity => Box::new(IdentityCodec::new(self.peak)),
            CodecKind::External => {
                let t = self.external.clone().ok_or_else(|| {
                    CodecError::NotConfigured("codec.encode_cmd / codec.decode_cmd".into())
                })?;
                Box::new(ExternalCodec::new(t, self.qp, self.peak))
            }
        })
    }
}

pub fn compress(x: &Image, params: &CodecParams) -> Result<Bitstream, CodecError> {
    params.build()?.compress(x)
}

pub fn decompress(b: &Bitstream, params: &CodecParams) -> Result<Image, CodecError> {
    params.build()?.decompress(b)
}
