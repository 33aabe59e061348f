//! Measured K-space data and its binary file format.
//!
//! Layout (little-endian):
//!
//! ```text
//! 0   8  magic "JRKSPACE"
//! 8   4  u32 format version (1)
//! 12  4  u32 reserved (0)
//! 16  4  u32 width
//! 20  4  u32 height
//! 24  1  u8  mask pattern code (0 = imported)
//! 25  8  u64 mask seed
//! 33  .  ceil(N/8) bytes of kept flags, row-major, LSB first
//! ..  8  f64 noise sigma
//! ..  8  u64 sample count M
//! ..  16*M interleaved (re, im) f64 pairs
//! ```

use std::path::Path;

use num_complex::Complex64;

use super::mask::{MaskPattern, SamplingMask};
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"JRKSPACE";
const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct KSpace {
    mask: SamplingMask,
    samples: Vec<Complex64>,
    noise_sigma: f64,
}

impl KSpace {
    pub fn new(mask: SamplingMask, samples: Vec<Complex64>, noise_sigma: f64) -> Result<Self> {
        if samples.len() != mask.kept_count() {
            return Err(Error::LengthMismatch {
                expected: mask.kept_count(),
                found: samples.len(),
            });
        }
        if !(noise_sigma >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "noise sigma must be >= 0, got {noise_sigma}"
            )));
        }
        Ok(Self {
            mask,
            samples,
            noise_sigma,
        })
    }

    pub fn mask(&self) -> &SamplingMask {
        &self.mask
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn noise_sigma(&self) -> f64 {
        self.noise_sigma
    }

    pub fn dims(&self) -> (usize, usize) {
        self.mask.dims()
    }

    /// Pixel count `N` of the image grid.
    pub fn grid_len(&self) -> usize {
        self.mask.grid_len()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let n = self.mask.grid_len();
        let mut out = Vec::with_capacity(49 + n / 8 + 16 * self.samples.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&0u32.to_le_bytes());
        out.extend_from_slice(&(self.mask.width() as u32).to_le_bytes());
        out.extend_from_slice(&(self.mask.height() as u32).to_le_bytes());
        out.push(MaskPattern::code(self.mask.pattern()));
        out.extend_from_slice(&self.mask.seed().to_le_bytes());
        let mut packed = vec![0u8; n.div_ceil(8)];
        for (i, &k) in self.mask.kept().iter().enumerate() {
            if k {
                packed[i / 8] |= 1 << (i % 8);
            }
        }
        out.extend_from_slice(&packed);
        out.extend_from_slice(&self.noise_sigma.to_le_bytes());
        out.extend_from_slice(&(self.samples.len() as u64).to_le_bytes());
        for s in &self.samples {
            out.extend_from_slice(&s.re.to_le_bytes());
            out.extend_from_slice(&s.im.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(8)? != MAGIC {
            return Err(Error::Format("not a K-space file (bad magic)".into()));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::Format(format!(
                "unsupported K-space version {version}"
            )));
        }
        r.u32()?;
        let width = r.u32()? as usize;
        let height = r.u32()? as usize;
        let pattern = MaskPattern::from_code(r.take(1)?[0])?;
        let seed = r.u64()?;
        let n = width
            .checked_mul(height)
            .ok_or_else(|| Error::Format("grid size overflows".into()))?;
        let packed = r.take(n.div_ceil(8))?;
        let kept: Vec<bool> = (0..n).map(|i| packed[i / 8] >> (i % 8) & 1 == 1).collect();
        let mask = SamplingMask::restore(width, height, kept, pattern, seed)?;
        let noise_sigma = r.f64()?;
        let m = r.u64()? as usize;
        if m != mask.kept_count() {
            return Err(Error::Format(format!(
                "sample count {m} does not match mask ({})",
                mask.kept_count()
            )));
        }
        let mut samples = Vec::with_capacity(m);
        for _ in 0..m {
            samples.push(Complex64::new(r.f64()?, r.f64()?));
        }
        if r.pos != bytes.len() {
            return Err(Error::Format("trailing bytes after samples".into()));
        }
        KSpace::new(mask, samples, noise_sigma)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_bytes())
            .map_err(|e| Error::io(format!("writing K-space {}", path.display()), e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path)
            .map_err(|e| Error::io(format!("reading K-space {}", path.display()), e))?;
        Self::from_bytes(&bytes)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Format("truncated K-space file".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}
