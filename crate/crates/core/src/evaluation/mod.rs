//! Rate-distortion evaluation: PSNR, RD curves, BD-PSNR and QP sweeps.

mod bd;
mod sweep;

use std::path::Path;

pub use bd::{bd_psnr, bd_psnr_highrate, HIGH_RATE_QPS};
pub use sweep::{default_qps, sweep, CellOutcome, Method, MethodSpec, SweepOutput, SweepSpec};

use crate::error::{Error, Result};
use crate::image::Image;

/// `10 log10(peak^2 / mse)`; identical images give `+inf`.
pub fn psnr(x: &Image, v: &Image, peak: f64) -> Result<f64> {
    x.check_same_grid(v)?;
    let n = x.len() as f64;
    let sse: f64 = x
        .pixels()
        .iter()
        .zip(v.pixels())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    if sse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (peak * peak / (sse / n)).log10())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RDPoint {
    pub qp: i32,
    pub bpp: f64,
    pub psnr: f64,
}

/// Points sorted by increasing bpp. Points sharing a rate are merged,
/// keeping the best PSNR.
#[derive(Clone, Debug, PartialEq)]
pub struct RDCurve {
    pub label: String,
    points: Vec<RDPoint>,
}

impl RDCurve {
    pub fn new(label: impl Into<String>, mut points: Vec<RDPoint>) -> Result<Self> {
        for p in &points {
            if !(p.bpp > 0.0 && p.bpp.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "bpp must be positive, got {} at qp {}",
                    p.bpp, p.qp
                )));
            }
            if p.psnr.is_nan() {
                return Err(Error::InvalidParameter(format!("NaN PSNR at qp {}", p.qp)));
            }
        }
        points.sort_by(|a, b| a.bpp.total_cmp(&b.bpp).then(b.psnr.total_cmp(&a.psnr)));
        points.dedup_by(|later, kept| later.bpp == kept.bpp);
        Ok(Self {
            label: label.into(),
            points,
        })
    }

    pub fn points(&self) -> &[RDPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Keeps only points whose qp passes `keep`.
    pub fn filter_qp(&self, keep: impl Fn(i32) -> bool) -> RDCurve {
        RDCurve {
            label: self.label.clone(),
            points: self.points.iter().copied().filter(|p| keep(p.qp)).collect(),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("qp,bpp,psnr\n");
        for p in &self.points {
            s.push_str(&format!(
                "{},{:.6},{}\n",
                p.qp,
                p.bpp,
                crate::admm::fmt_psnr(p.psnr)
            ));
        }
        s
    }

    pub fn from_csv(label: impl Into<String>, text: &str) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let headers = rdr
            .headers()
            .map_err(|e| Error::Format(format!("RD curve: {e}")))?
            .clone();
        let col = |name: &str| {
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::Format(format!("RD curve: missing column `{name}`")))
        };
        let (iq, ib, ip) = (col("qp")?, col("bpp")?, col("psnr")?);
        let mut points = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| Error::Format(format!("RD curve: {e}")))?;
            let field = |i: usize| rec.get(i).unwrap_or("");
            let bad = |what: &str| Error::Format(format!("RD curve row {}: bad {what}", line + 1));
            points.push(RDPoint {
                qp: field(iq).parse().map_err(|_| bad("qp"))?,
                bpp: field(ib).parse().map_err(|_| bad("bpp"))?,
                psnr: field(ip).parse().map_err(|_| bad("psnr"))?,
            });
        }
        Self::new(label, points)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv())
            .map_err(|e| Error::io(format!("writing {}", path.display()), e))
    }

    /// Loads a curve, labelling it by the file stem.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        let label = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        Self::from_csv(label, &text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn psnr_known_values() {
        let x = Image::filled(4, 4, 10.0);
        assert_eq!(psnr(&x, &x, 255.0).unwrap(), f64::INFINITY);
        let y = Image::filled(4, 4, 11.0);
        assert!((psnr(&x, &y, 255.0).unwrap() - 48.130_803_608_679_1).abs() < 1e-9);
        assert!(psnr(&x, &Image::zeros(2, 2), 255.0).is_err());
    }

    #[test]
    fn psnr_matches_direct_formula_and_is_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let a = Image::from_fn(9, 7, |_, _| rng.random_range(0.0..255.0));
            let b = Image::from_fn(9, 7, |_, _| rng.random_range(0.0..255.0));
            let mut mse = 0.0;
            for r in 0..7 {
                for c in 0..9 {
                    mse += (a.get(c, r) - b.get(c, r)).powi(2);
                }
            }
            mse /= 63.0;
            let direct = 10.0 * (255.0f64.powi(2) / mse).log10();
            let p = psnr(&a, &b, 255.0).unwrap();
            assert!((p - direct).abs() < 1e-12);
            assert_eq!(p, psnr(&b, &a, 255.0).unwrap());
        }
    }

    #[test]
    fn curve_sorts_and_dedupes() {
        let c = RDCurve::new(
            "t",
            vec![
                RDPoint {
                    qp: 10,
                    bpp: 2.0,
                    psnr: 30.0,
                },
                RDPoint {
                    qp: 4,
                    bpp: 3.0,
                    psnr: 35.0,
                },
                RDPoint {
                    qp: 13,
                    bpp: 2.0,
                    psnr: 31.0,
                },
                RDPoint {
                    qp: 40,
                    bpp: 0.5,
                    psnr: 22.0,
                },
            ],
        )
        .unwrap();
        let bpps: Vec<f64> = c.points().iter().map(|p| p.bpp).collect();
        assert_eq!(bpps, vec![0.5, 2.0, 3.0]);
        assert_eq!(c.points()[1].psnr, 31.0);
        assert!(RDCurve::new(
            "bad",
            vec![RDPoint {
                qp: 1,
                bpp: 0.0,
                psnr: 1.0
            }]
        )
        .is_err());
    }

    #[test]
    fn csv_roundtrip() {
        let c = RDCurve::new(
            "x",
            vec![
                RDPoint {
                    qp: 4,
                    bpp: 3.25,
                    psnr: 40.5,
                },
                RDPoint {
                    qp: 49,
                    bpp: 0.125,
                    psnr: 20.25,
                },
                RDPoint {
                    qp: 0,
                    bpp: 8.0,
                    psnr: f64::INFINITY,
                },
            ],
        )
        .unwrap();
        let text = c.to_csv();
        assert!(text.starts_with("qp,bpp,psnr\n"));
        let back = RDCurve::from_csv("x", &text).unwrap();
        assert_eq!(back, c);
        assert!(RDCurve::from_csv("x", "qp,bpp\n1,2\n").is_err());
    }
}
