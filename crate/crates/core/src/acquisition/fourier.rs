use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// Unitary 2-D DFT on a `width x height` row-major grid.
///
/// Both directions are scaled by `1/sqrt(N)`, so the transform is an
/// isometry and its inverse is its adjoint.
#[derive(Clone)]
pub struct Fft2 {
    width: usize,
    height: usize,
    row_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
    scale: f64,
}

impl std::fmt::Debug for Fft2 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Fft2")
            .field("width", &self.width)
            .field("height", &self.height)
            .finish()
    }
}

impl Fft2 {
    pub fn new(width: usize, height: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            width,
            height,
            row_fwd: planner.plan_fft_forward(width),
            row_inv: planner.plan_fft_inverse(width),
            col_fwd: planner.plan_fft_forward(height),
            col_inv: planner.plan_fft_inverse(height),
            scale: 1.0 / ((width * height) as f64).sqrt(),
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn forward(&self, buf: &mut [Complex64]) {
        self.apply(buf, &self.row_fwd, &self.col_fwd);
    }

    pub fn inverse(&self, buf: &mut [Complex64]) {
        self.apply(buf, &self.row_inv, &self.col_inv);
    }

    /// Forward transform of a real image.
    pub fn forward_real(&self, pixels: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = pixels.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward(&mut buf);
        buf
    }

    fn apply(&self, buf: &mut [Complex64], rows: &Arc<dyn Fft<f64>>, cols: &Arc<dyn Fft<f64>>) {
        let (w, h) = (self.width, self.height);
        assert_eq!(buf.len(), w * h, "buffer does not match grid");
        rows.process(buf);
        let mut t = vec![Complex64::default(); w * h];
        transpose(buf, &mut t, w, h);
        cols.process(&mut t);
        transpose(&t, buf, h, w);
        for v in buf.iter_mut() {
            *v *= self.scale;
        }
    }
}

/// `src` is `rows x cols` row-major, `dst` becomes `cols x rows`.
fn transpose(src: &[Complex64], dst: &mut [Complex64], cols: usize, rows: usize) {
    for r in 0..rows {
        for c in 0..cols {
            dst[c * rows + r] = src[r * cols + c];
        }
    }
}

/// Signed frequency of FFT bin `k` on an axis of length `n`.
pub fn signed_frequency(k: usize, n: usize) -> i64 {
    if k <= n / 2 {
        k as i64
    } else {
        k as i64 - n as i64
    }
}

/// FFT bin of signed frequency `f` on an axis of length `n`.
pub fn bin_of(f: i64, n: usize) -> usize {
    f.rem_euclid(n as i64) as usize
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_dft(pixels: &[f64], w: usize, h: usize) -> Vec<Complex64> {
        let n = (w * h) as f64;
        let mut out = vec![Complex64::default(); w * h];
        for ky in 0..h {
            for kx in 0..w {
                let mut acc = Complex64::default();
                for y in 0..h {
                    for x in 0..w {
                        let phase = -2.0
                            * std::f64::consts::PI
                            * ((kx * x) as f64 / w as f64 + (ky * y) as f64 / h as f64);
                        acc += pixels[y * w + x] * Complex64::from_polar(1.0, phase);
                    }
                }
                out[ky * w + kx] = acc / n.sqrt();
            }
        }
        out
    }

    #[test]
    fn matches_naive_dft_on_rectangular_grid() {
        let (w, h) = (6, 5);
        let pixels: Vec<f64> = (0..w * h).map(|i| ((i * 7919) % 13) as f64 - 4.0).collect();
        let fast = Fft2::new(w, h).forward_real(&pixels);
        let slow = naive_dft(&pixels, w, h);
        for (a, b) in fast.iter().zip(&slow) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn inverse_undoes_forward() {
        let (w, h) = (8, 4);
        let f = Fft2::new(w, h);
        let pixels: Vec<f64> = (0..w * h).map(|i| (i as f64).sin()).collect();
        let mut buf = f.forward_real(&pixels);
        f.inverse(&mut buf);
        for (a, b) in buf.iter().zip(&pixels) {
            assert!((a.re - b).abs() < 1e-12 && a.im.abs() < 1e-12);
        }
    }

    #[test]
    fn signed_frequencies() {
        assert_eq!(signed_frequency(0, 8), 0);
        assert_eq!(signed_frequency(4, 8), 4);
        assert_eq!(signed_frequency(5, 8), -3);
        assert_eq!(bin_of(-3, 8), 5);
        assert_eq!(signed_frequency(3, 7), 3);
        assert_eq!(signed_frequency(4, 7), -3);
    }
}
