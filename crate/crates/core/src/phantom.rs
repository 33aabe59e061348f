//! Synthetic test images standing in for clinical slices.

use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::image::Image;

pub const MIN_PHANTOM_SIZE: usize = 32;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum PhantomKind {
    /// Modified (higher contrast) Shepp-Logan head.
    #[default]
    SheppLogan,
    /// Random overlapping ellipses and rectangles on a smooth background.
    PiecewiseBlobs,
}

impl PhantomKind {
    pub fn name(self) -> &'static str {
        match self {
            PhantomKind::SheppLogan => "shepp-logan",
            PhantomKind::PiecewiseBlobs => "piecewise-blobs",
        }
    }
}

impl FromStr for PhantomKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "shepp-logan" => Ok(PhantomKind::SheppLogan),
            "piecewise-blobs" => Ok(PhantomKind::PiecewiseBlobs),
            other => Err(Error::InvalidParameter(format!(
                "unknown phantom `{other}` (expected shepp-logan or piecewise-blobs)"
            ))),
        }
    }
}

struct Ellipse {
    value: f64,
    semi_x: f64,
    semi_y: f64,
    cx: f64,
    cy: f64,
    angle_deg: f64,
}

impl Ellipse {
    fn contains(&self, x: f64, y: f64) -> bool {
        let (s, c) = self.angle_deg.to_radians().sin_cos();
        let (dx, dy) = (x - self.cx, y - self.cy);
        let u = (dx * c + dy * s) / self.semi_x;
        let v = (-dx * s + dy * c) / self.semi_y;
        u * u + v * v <= 1.0
    }
}

#[rustfmt::skip]
const SHEPP_LOGAN: [(f64, f64, f64, f64, f64, f64); 10] = [
    ( 1.0, 0.69,   0.92,   0.0,   0.0,     0.0),
    (-0.8, 0.6624, 0.8740, 0.0,  -0.0184,  0.0),
    (-0.2, 0.1100, 0.3100, 0.22,  0.0,   -18.0),
    (-0.2, 0.1600, 0.4100,-0.22,  0.0,    18.0),
    ( 0.1, 0.2100, 0.2500, 0.0,   0.35,    0.0),
    ( 0.1, 0.0460, 0.0460, 0.0,   0.1,     0.0),
    ( 0.1, 0.0460, 0.0460, 0.0,  -0.1,     0.0),
    ( 0.1, 0.0460, 0.0230,-0.08, -0.605,   0.0),
    ( 0.1, 0.0230, 0.0230, 0.0,  -0.606,   0.0),
    ( 0.1, 0.0230, 0.0460, 0.06, -0.605,   0.0),
];

/// Pixel centre in `[-1, 1]^2` with `y` pointing up.
fn unit_coords(col: usize, row: usize, size: usize) -> (f64, f64) {
    let n = size as f64;
    (
        (2 * col + 1) as f64 / n - 1.0,
        1.0 - (2 * row + 1) as f64 / n,
    )
}

fn render(size: usize, ellipses: &[Ellipse], background: impl Fn(f64, f64) -> f64) -> Image {
    Image::from_fn(size, size, |col, row| {
        let (x, y) = unit_coords(col, row, size);
        let v = ellipses
            .iter()
            .filter(|e| e.contains(x, y))
            .fold(background(x, y), |acc, e| acc + e.value);
        (v.clamp(0.0, 1.0) * 255.0).round()
    })
}

fn shepp_logan(size: usize) -> Image {
    let ellipses: Vec<Ellipse> = SHEPP_LOGAN
        .iter()
        .map(|&(value, semi_x, semi_y, cx, cy, angle_deg)| Ellipse {
            value,
            semi_x,
            semi_y,
            cx,
            cy,
            angle_deg,
        })
        .collect();
    render(size, &ellipses, |_, _| 0.0)
}

fn piecewise_blobs(size: usize, seed: u64) -> Image {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let count = rng.random_range(6..=10);
    let mut shapes = Vec::with_capacity(count);
    for _ in 0..count {
        shapes.push(Ellipse {
            value: rng.random_range(-0.35..0.45),
            semi_x: rng.random_range(0.08..0.45),
            semi_y: rng.random_range(0.08..0.45),
            cx: rng.random_range(-0.6..0.6),
            cy: rng.random_range(-0.6..0.6),
            angle_deg: rng.random_range(0.0..180.0),
        });
    }
    let (gx, gy) = (rng.random_range(-0.1..0.1), rng.random_range(-0.1..0.1));
    let base = rng.random_range(0.25..0.4);
    let rects: Vec<(f64, f64, f64, f64, f64)> = (0..rng.random_range(2..=4))
        .map(|_| {
            let x0 = rng.random_range(-0.8..0.4);
            let y0 = rng.random_range(-0.8..0.4);
            (
                x0,
                y0,
                x0 + rng.random_range(0.1..0.4),
                y0 + rng.random_range(0.1..0.4),
                rng.random_range(-0.25..0.25),
            )
        })
        .collect();
    render(size, &shapes, |x, y| {
        let rect: f64 = rects
            .iter()
            .filter(|r| x >= r.0 && x <= r.2 && y >= r.1 && y <= r.3)
            .map(|r| r.4)
            .sum();
        base + gx * x + gy * y + rect
    })
}

/// Deterministic square phantom with integer values in `[0, 255]`.
/// `seed` only affects [`PhantomKind::PiecewiseBlobs`].
pub fn phantom(kind: PhantomKind, size: usize, seed: u64) -> Result<Image> {
    if size < MIN_PHANTOM_SIZE {
        return Err(Error::InvalidParameter(format!(
            "phantom size {size} below the minimum of {MIN_PHANTOM_SIZE}"
        )));
    }
    Ok(match kind {
        PhantomKind::SheppLogan => shepp_logan(size),
        PhantomKind::PiecewiseBlobs => piecewise_blobs(size, seed),
    })
}
