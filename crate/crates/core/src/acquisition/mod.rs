//! MRI acquisition model `y = S F x + noise`.
//!
//! `F` is the unitary 2-D DFT and `S` selects the kept entries of a
//! [`SamplingMask`]. Since images are real, the adjoint maps K-space back to
//! real images by taking the real part of the zero-filled inverse transform.

mod fourier;
mod kspace;
mod mask;

pub use fourier::{bin_of, signed_frequency, Fft2};
pub use kspace::KSpace;
pub use mask::{make_mask, parse_acceleration, Acceleration, MaskPattern, SamplingMask};

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::image::Image;

/// The operator `A = S F` with cached FFT plans, for repeated application.
#[derive(Clone, Debug)]
pub struct MaskedFourier {
    mask: SamplingMask,
    fft: Fft2,
}

impl MaskedFourier {
    pub fn new(mask: SamplingMask) -> Self {
        let fft = Fft2::new(mask.width(), mask.height());
        Self { mask, fft }
    }

    pub fn mask(&self) -> &SamplingMask {
        &self.mask
    }

    pub fn fft(&self) -> &Fft2 {
        &self.fft
    }

    fn check_image(&self, x: &Image) -> Result<()> {
        if x.dims() != self.mask.dims() {
            return Err(Error::DimensionMismatch {
                expected: self.mask.dims(),
                found: x.dims(),
            });
        }
        Ok(())
    }

    /// `S F x`, one sample per kept entry in row-major order.
    pub fn forward(&self, x: &Image) -> Result<Vec<Complex64>> {
        self.check_image(x)?;
        let spectrum = self.fft.forward_real(x.pixels());
        Ok(self.mask.indices().iter().map(|&i| spectrum[i]).collect())
    }

    /// `Re(F* S^T y)`.
    pub fn adjoint(&self, y: &[Complex64]) -> Result<Image> {
        let m = self.mask.kept_count();
        if y.len() != m {
            return Err(Error::LengthMismatch {
                expected: m,
                found: y.len(),
            });
        }
        let mut buf = vec![Complex64::default(); self.mask.grid_len()];
        for (&i, &v) in self.mask.indices().iter().zip(y) {
            buf[i] = v;
        }
        self.fft.inverse(&mut buf);
        Ok(Image::from_raw(
            self.mask.width(),
            self.mask.height(),
            buf.into_iter().map(|c| c.re).collect(),
        ))
    }

    /// `A* A x`, computed without leaving the full Fourier grid.
    pub fn normal(&self, x: &Image) -> Result<Image> {
        self.check_image(x)?;
        let mut buf = self.fft.forward_real(x.pixels());
        self.mask.project(&mut buf);
        self.fft.inverse(&mut buf);
        Ok(Image::from_raw(
            x.width(),
            x.height(),
            buf.into_iter().map(|c| c.re).collect(),
        ))
    }
}

/// `S F x` with the unitary DFT.
pub fn forward(x: &Image, mask: &SamplingMask) -> Result<Vec<Complex64>> {
    MaskedFourier::new(mask.clone()).forward(x)
}

/// Real part of `F* S^T y`; the exact adjoint of [`forward`] on real images.
pub fn adjoint(y: &[Complex64], mask: &SamplingMask) -> Result<Image> {
    MaskedFourier::new(mask.clone()).adjoint(y)
}

/// Simulates an acquisition: `forward(x)` plus circular complex Gaussian
/// noise whose real and imaginary parts each have variance `sigma^2 / 2`.
pub fn acquire(x: &Image, mask: &SamplingMask, noise_sigma: f64, seed: u64) -> Result<KSpace> {
    if !(noise_sigma >= 0.0 && noise_sigma.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "noise sigma must be finite and >= 0, got {noise_sigma}"
        )));
    }
    let mut samples = forward(x, mask)?;
    if noise_sigma > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal =
            Normal::new(0.0, noise_sigma / std::f64::consts::SQRT_2).expect("finite positive std");
        for s in samples.iter_mut() {
            let re = normal.sample(&mut rng);
            let im = normal.sample(&mut rng);
            *s += Complex64::new(re, im);
        }
    }
    KSpace::new(mask.clone(), samples, noise_sigma)
}

/// Inverse DFT of the zero-filled measurements.
pub fn zero_filled_recon(k: &KSpace) -> Image {
    adjoint(k.samples(), k.mask()).expect("KSpace invariant: sample count equals kept count")
}
