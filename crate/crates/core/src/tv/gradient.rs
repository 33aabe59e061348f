use crate::image::Image;

/// Forward differences of an image. `gx` is horizontal (along columns),
/// `gy` vertical (along rows); the last difference in each direction is 0.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientField {
    width: usize,
    height: usize,
    pub gx: Vec<f64>,
    pub gy: Vec<f64>,
}

impl GradientField {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            gx: vec![0.0; width * height],
            gy: vec![0.0; width * height],
        }
    }

    pub fn from_parts(width: usize, height: usize, gx: Vec<f64>, gy: Vec<f64>) -> Self {
        assert_eq!(gx.len(), width * height);
        assert_eq!(gy.len(), width * height);
        Self {
            width,
            height,
            gx,
            gy,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dot(&self, other: &GradientField) -> f64 {
        let a: f64 = self.gx.iter().zip(&other.gx).map(|(a, b)| a * b).sum();
        let b: f64 = self.gy.iter().zip(&other.gy).map(|(a, b)| a * b).sum();
        a + b
    }

    /// Sum of pointwise Euclidean norms, `||g||_{2,1}`.
    pub fn norm_21(&self) -> f64 {
        self.gx.iter().zip(&self.gy).map(|(a, b)| a.hypot(*b)).sum()
    }
}

pub fn grad(x: &Image) -> GradientField {
    let mut g = GradientField::zeros(x.width(), x.height());
    grad_into(x.pixels(), x.width(), x.height(), &mut g);
    g
}

pub(crate) fn grad_into(x: &[f64], w: usize, h: usize, g: &mut GradientField) {
    for r in 0..h {
        let row = &x[r * w..(r + 1) * w];
        for c in 0..w {
            let i = r * w + c;
            g.gx[i] = if c + 1 < w { row[c + 1] - row[c] } else { 0.0 };
            g.gy[i] = if r + 1 < h { x[i + w] - x[i] } else { 0.0 };
        }
    }
}

/// Discrete divergence, the negative adjoint of [`grad`].
pub fn div(g: &GradientField) -> Image {
    let mut out = vec![0.0; g.width * g.height];
    div_into(g, &mut out);
    Image::from_raw(g.width, g.height, out)
}

pub(crate) fn div_into(g: &GradientField, out: &mut [f64]) {
    let (w, h) = (g.width, g.height);
    for r in 0..h {
        for c in 0..w {
            let i = r * w + c;
            let mut d = 0.0;
            if c + 1 < w {
                d += g.gx[i];
            }
            if c > 0 {
                d -= g.gx[i - 1];
            }
            if r + 1 < h {
                d += g.gy[i];
            }
            if r > 0 {
                d -= g.gy[i - w];
            }
            out[i] = d;
        }
    }
}

/// Isotropic total variation.
pub fn tv_value(x: &Image) -> f64 {
    grad(x).norm_21()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn constant_image_has_zero_gradient() {
        let g = grad(&Image::filled(5, 4, 7.5));
        assert!(g.gx.iter().chain(&g.gy).all(|&v| v == 0.0));
        assert!(div(&g).pixels().iter().all(|&v| v == 0.0));
        assert_eq!(tv_value(&Image::filled(5, 4, 7.5)), 0.0);
    }

    #[test]
    fn horizontal_ramp() {
        let g = grad(&Image::from_fn(6, 3, |c, _| c as f64));
        for r in 0..3 {
            for c in 0..6 {
                let expect = if c == 5 { 0.0 } else { 1.0 };
                assert_eq!(g.gx[r * 6 + c], expect);
                assert_eq!(g.gy[r * 6 + c], 0.0);
            }
        }
    }

    #[test]
    fn two_by_two_hand_case() {
        let x = Image::new(2, 2, vec![0.0, 1.0, 0.0, 1.0]).unwrap();
        let g = grad(&x);
        assert_eq!(g.gx, vec![1.0, 0.0, 1.0, 0.0]);
        assert_eq!(g.gy, vec![0.0; 4]);
        assert_eq!(tv_value(&x), 2.0);
    }

    #[test]
    fn matches_brute_force_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let x = Image::from_fn(6, 6, |_, _| rng.random_range(-5.0..5.0));
        let g = grad(&x);
        for r in 0..6 {
            for c in 0..6 {
                let ex = if c < 5 {
                    x.get(c + 1, r) - x.get(c, r)
                } else {
                    0.0
                };
                let ey = if r < 5 {
                    x.get(c, r + 1) - x.get(c, r)
                } else {
                    0.0
                };
                assert_eq!(g.gx[r * 6 + c], ex);
                assert_eq!(g.gy[r * 6 + c], ey);
            }
        }
    }

    #[test]
    fn zero_field_has_zero_divergence() {
        assert!(div(&GradientField::zeros(4, 3))
            .pixels()
            .iter()
            .all(|&v| v == 0.0));
    }
}
