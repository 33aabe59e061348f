//! Binary sampling patterns on the Fourier grid.
//!
//! Masks are stored in unshifted FFT order: the DC coefficient sits at
//! `(0, 0)` and the "centre" of K-space wraps around the grid corners.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use num_rational::Ratio;
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::fourier::{bin_of, signed_frequency};
use crate::error::{Error, Result};

pub type Acceleration = Ratio<u64>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub enum MaskPattern {
    UniformRandom,
    #[default]
    CenterWeightedRandom,
    CartesianLines,
}

impl MaskPattern {
    pub fn name(self) -> &'static str {
        match self {
            MaskPattern::UniformRandom => "uniform-random",
            MaskPattern::CenterWeightedRandom => "center-weighted-random",
            MaskPattern::CartesianLines => "cartesian-lines",
        }
    }

    pub(crate) fn code(pattern: Option<Self>) -> u8 {
        match pattern {
            None => 0,
            Some(MaskPattern::UniformRandom) => 1,
            Some(MaskPattern::CenterWeightedRandom) => 2,
            Some(MaskPattern::CartesianLines) => 3,
        }
    }

    pub(crate) fn from_code(code: u8) -> Result<Option<Self>> {
        Ok(match code {
            0 => None,
            1 => Some(MaskPattern::UniformRandom),
            2 => Some(MaskPattern::CenterWeightedRandom),
            3 => Some(MaskPattern::CartesianLines),
            c => return Err(Error::Format(format!("unknown mask pattern code {c}"))),
        })
    }
}

impl FromStr for MaskPattern {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform-random" | "uniform" => Ok(MaskPattern::UniformRandom),
            "center-weighted-random" | "center-weighted" | "center" => {
                Ok(MaskPattern::CenterWeightedRandom)
            }
            "cartesian-lines" | "cartesian" | "lines" => Ok(MaskPattern::CartesianLines),
            other => Err(Error::InvalidParameter(format!(
                "unknown mask pattern `{other}`"
            ))),
        }
    }
}

impl std::fmt::Display for MaskPattern {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Parses `4`, `8/3` or `2.5` into an exact ratio.
pub fn parse_acceleration(s: &str) -> Result<Acceleration> {
    let bad = || Error::InvalidParameter(format!("cannot parse acceleration `{s}`"));
    let s = s.trim().trim_end_matches(['x', 'X']);
    if let Some((n, d)) = s.split_once('/') {
        let n: u64 = n.trim().parse().map_err(|_| bad())?;
        let d: u64 = d.trim().parse().map_err(|_| bad())?;
        if d == 0 {
            return Err(bad());
        }
        return Ok(Ratio::new(n, d));
    }
    if let Ok(n) = s.parse::<u64>() {
        return Ok(Ratio::from_integer(n));
    }
    let (int, frac) = s.split_once('.').ok_or_else(bad)?;
    if frac.len() > 9 || !frac.chars().all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    let den = 10u64.pow(frac.len() as u32);
    let int: u64 = if int.is_empty() {
        0
    } else {
        int.parse().map_err(|_| bad())?
    };
    let frac: u64 = if frac.is_empty() {
        0
    } else {
        frac.parse().map_err(|_| bad())?
    };
    Ok(Ratio::new(int * den + frac, den))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SamplingMask {
    width: usize,
    height: usize,
    kept: Vec<bool>,
    /// Row-major positions of kept entries; defines the sample order of `y`.
    indices: Vec<usize>,
    pattern: Option<MaskPattern>,
    seed: u64,
}

impl SamplingMask {
    /// Builds a mask from explicit flags. At least one entry must be kept.
    pub fn from_flags(width: usize, height: usize, kept: Vec<bool>) -> Result<Self> {
        Self::with_origin(width, height, kept, None, 0)
    }

    fn with_origin(
        width: usize,
        height: usize,
        kept: Vec<bool>,
        pattern: Option<MaskPattern>,
        seed: u64,
    ) -> Result<Self> {
        if width == 0 || height == 0 || kept.len() != width * height {
            return Err(Error::InvalidParameter(format!(
                "mask flags ({}) do not match a {width}x{height} grid",
                kept.len()
            )));
        }
        let indices: Vec<usize> = kept
            .iter()
            .enumerate()
            .filter_map(|(i, &k)| k.then_some(i))
            .collect();
        if indices.is_empty() {
            return Err(Error::InvalidParameter("mask keeps no samples".into()));
        }
        Ok(Self {
            width,
            height,
            kept,
            indices,
            pattern,
            seed,
        })
    }

    /// A mask that keeps every coefficient.
    pub fn full(width: usize, height: usize) -> Self {
        Self::with_origin(width, height, vec![true; width * height], None, 0)
            .expect("non-empty grid")
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    /// Grid size `N`.
    pub fn grid_len(&self) -> usize {
        self.kept.len()
    }

    /// Number of kept entries `M`.
    pub fn kept_count(&self) -> usize {
        self.indices.len()
    }

    pub fn kept(&self) -> &[bool] {
        &self.kept
    }

    pub fn is_kept(&self, col: usize, row: usize) -> bool {
        self.kept[row * self.width + col]
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn pattern(&self) -> Option<MaskPattern> {
        self.pattern
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Exact acceleration factor `N / M`.
    pub fn acceleration(&self) -> Acceleration {
        Ratio::new(self.grid_len() as u64, self.kept_count() as u64)
    }

    /// Applies the selector in the zero-filled representation: kept entries
    /// pass, the rest become zero.
    pub fn project<T: Copy + Default>(&self, values: &mut [T]) {
        for (v, &k) in values.iter_mut().zip(&self.kept) {
            if !k {
                *v = T::default();
            }
        }
    }

    /// Weight of each frequency in the real-restricted normal operator:
    /// `(m(k) + m(-k)) / 2`.
    pub fn symmetrized_weights(&self) -> Vec<f64> {
        let (w, h) = (self.width, self.height);
        let mut out = Vec::with_capacity(w * h);
        for ky in 0..h {
            let my = bin_of(-signed_frequency(ky, h), h);
            for kx in 0..w {
                let mx = bin_of(-signed_frequency(kx, w), w);
                let a = self.kept[ky * w + kx] as u8 as f64;
                let b = self.kept[my * w + mx] as u8 as f64;
                out.push(0.5 * (a + b));
            }
        }
        out
    }

    pub fn to_text(&self) -> String {
        let mut s = String::with_capacity(self.kept.len() + self.height + 32);
        writeln!(s, "MASK {} {}", self.width, self.height).unwrap();
        for row in self.kept.chunks(self.width) {
            for &k in row {
                s.push(if k { '1' } else { '0' });
            }
            s.push('\n');
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::Format("empty mask file".into()))?;
        let mut parts = header.split_whitespace();
        if parts.next() != Some("MASK") {
            return Err(Error::Format("mask file must start with `MASK`".into()));
        }
        let mut dim = || -> Result<usize> {
            parts
                .next()
                .and_then(|p| p.parse().ok())
                .ok_or_else(|| Error::Format("bad MASK header".into()))
        };
        let (w, h) = (dim()?, dim()?);
        let mut kept = Vec::with_capacity(w * h);
        for line in lines {
            let before = kept.len();
            for c in line.chars().filter(|c| !c.is_whitespace()) {
                match c {
                    '0' => kept.push(false),
                    '1' => kept.push(true),
                    other => {
                        return Err(Error::Format(format!("unexpected `{other}` in mask row")))
                    }
                }
            }
            if kept.len() - before != w {
                return Err(Error::Format(format!(
                    "mask row has {} entries, expected {w}",
                    kept.len() - before
                )));
            }
        }
        if kept.len() != w * h {
            return Err(Error::Format(format!(
                "mask has {} rows, expected {h}",
                kept.len() / w.max(1)
            )));
        }
        Self::from_flags(w, h, kept)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        if has_ext(path, "pgm") || has_ext(path, "png") {
            let bytes: Vec<u8> = self.kept.iter().map(|&k| if k { 255 } else { 0 }).collect();
            let img = crate::Image::from_u8(self.width, self.height, &bytes)?;
            return img.save(path, 255.0);
        }
        std::fs::write(path, self.to_text())
            .map_err(|e| Error::io(format!("writing mask {}", path.display()), e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        if has_ext(path, "pgm") || has_ext(path, "png") {
            let img = crate::Image::load(path)?;
            let kept = img.pixels().iter().map(|&v| v >= 128.0).collect();
            return Self::from_flags(img.width(), img.height(), kept);
        }
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(format!("reading mask {}", path.display()), e))?;
        Self::from_text(&text)
    }

    pub(crate) fn restore(
        width: usize,
        height: usize,
        kept: Vec<bool>,
        pattern: Option<MaskPattern>,
        seed: u64,
    ) -> Result<Self> {
        Self::with_origin(width, height, kept, pattern, seed)
    }
}

fn has_ext(path: &Path, ext: &str) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case(ext))
}

/// `round(n / accel)` computed exactly, halves rounded up.
fn rounded_count(n: u64, accel: Acceleration) -> u64 {
    let (num, den) = (*accel.numer(), *accel.denom());
    (2 * n * den + num) / (2 * num)
}

/// Generates a sampling mask keeping `round(N / acceleration)` entries.
///
/// The DC coefficient is kept by every pattern. `CartesianLines` keeps whole
/// rows, so it keeps `round(height / acceleration)` rows and the realised
/// acceleration is `height / rows`.
pub fn make_mask(
    width: usize,
    height: usize,
    pattern: MaskPattern,
    acceleration: Acceleration,
    seed: u64,
) -> Result<SamplingMask> {
    if width == 0 || height == 0 {
        return Err(Error::InvalidParameter("empty mask grid".into()));
    }
    if acceleration < Ratio::from_integer(1) {
        return Err(Error::InvalidParameter(format!(
            "acceleration {acceleration} is below 1"
        )));
    }
    let n = width * height;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut kept = vec![false; n];

    match pattern {
        MaskPattern::UniformRandom => {
            let m = rounded_count(n as u64, acceleration) as usize;
            if m == 0 {
                return Err(too_few(acceleration));
            }
            kept[0] = true;
            for i in index::sample(&mut rng, n - 1, m - 1) {
                kept[i + 1] = true;
            }
        }
        MaskPattern::CenterWeightedRandom => {
            let m = rounded_count(n as u64, acceleration) as usize;
            if m == 0 {
                return Err(too_few(acceleration));
            }
            let side = ((m as f64).sqrt() / 2.0).ceil() as usize;
            let (sx, sy) = (side.clamp(1, width), side.clamp(1, height));
            let mut central = 0;
            for fy in centred_range(sy) {
                for fx in centred_range(sx) {
                    let i = bin_of(fy, height) * width + bin_of(fx, width);
                    if !kept[i] {
                        kept[i] = true;
                        central += 1;
                    }
                }
            }
            let rest: Vec<usize> = (0..n).filter(|&i| !kept[i]).collect();
            let extra = m.saturating_sub(central);
            for j in index::sample(&mut rng, rest.len(), extra) {
                kept[rest[j]] = true;
            }
        }
        MaskPattern::CartesianLines => {
            let rows = rounded_count(height as u64, acceleration) as usize;
            if rows == 0 {
                return Err(too_few(acceleration));
            }
            let band = rows.div_ceil(4);
            let mut chosen = vec![false; height];
            for f in centred_range(band) {
                chosen[bin_of(f, height)] = true;
            }
            let rest: Vec<usize> = (0..height).filter(|&r| !chosen[r]).collect();
            for j in index::sample(&mut rng, rest.len(), rows - band) {
                chosen[rest[j]] = true;
            }
            for (r, _) in chosen.iter().enumerate().filter(|(_, &c)| c) {
                kept[r * width..(r + 1) * width].fill(true);
            }
        }
    }
    SamplingMask::with_origin(width, height, kept, Some(pattern), seed)
}

fn too_few(acceleration: Acceleration) -> Error {
    Error::InvalidParameter(format!(
        "acceleration {acceleration} leaves no samples on this grid"
    ))
}

/// Signed frequencies of a centred window of `side` bins, always containing 0.
fn centred_range(side: usize) -> impl Iterator<Item = i64> {
    let low = -(side as i64 / 2);
    low..low + side as i64
}
