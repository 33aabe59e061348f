use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use super::{psnr, RDCurve, RDPoint};
use crate::acquisition::{zero_filled_recon, KSpace};
use crate::admm::{compress_reconstruction, run_admm, AdmmConfig, AdmmResult};
use crate::codec::CodecParams;
use crate::error::{Error, Result};
use crate::image::Image;
use crate::tv::tv_reconstruct;

/// `4, 7, ..., 49`.
pub fn default_qps() -> Vec<i32> {
    (4..=49).step_by(3).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Joint,
    Decoupled,
    /// Reconstruction without compression; a single reference PSNR.
    None,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Joint => "joint",
            Method::Decoupled => "decoupled",
            Method::None => "none",
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "joint" => Ok(Method::Joint),
            "decoupled" => Ok(Method::Decoupled),
            "none" => Ok(Method::None),
            other => Err(Error::InvalidParameter(format!(
                "unknown method `{other}` (expected joint, decoupled or none)"
            ))),
        }
    }
}

/// A method with its regularization weight, written `joint:0.01`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MethodSpec {
    pub method: Method,
    pub alpha: f64,
}

impl MethodSpec {
    pub fn new(method: Method, alpha: f64) -> Self {
        Self { method, alpha }
    }

    /// File-name friendly label, e.g. `joint_a0.01`.
    pub fn label(&self) -> String {
        format!("{}_a{}", self.method.name(), self.alpha)
    }
}

impl fmt::Display for MethodSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.method.name(), self.alpha)
    }
}

impl FromStr for MethodSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (m, a) = s.split_once(':').unwrap_or((s, "0"));
        let alpha: f64 = a
            .trim()
            .parse()
            .map_err(|_| Error::InvalidParameter(format!("bad alpha in method `{s}`")))?;
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "bad alpha in method `{s}`"
            )));
        }
        Ok(Self::new(m.trim().parse()?, alpha))
    }
}

#[derive(Clone, Debug)]
pub struct SweepSpec {
    pub method: MethodSpec,
    pub qps: Vec<i32>,
    pub codec: CodecParams,
    /// Template for joint runs; its `alpha` is replaced by the method's.
    pub admm: AdmmConfig,
    /// Concurrent cells; 0 uses the rayon default.
    pub workers: usize,
}

impl SweepSpec {
    pub fn new(method: MethodSpec, codec: CodecParams) -> Self {
        Self {
            method,
            qps: default_qps(),
            codec,
            admm: AdmmConfig::default(),
            workers: 0,
        }
    }
}

#[derive(Debug)]
pub struct CellOutcome {
    pub qp: i32,
    pub result: std::result::Result<AdmmResult, String>,
}

#[derive(Debug)]
pub struct SweepOutput {
    pub method: MethodSpec,
    /// Empty for [`Method::None`].
    pub curve: RDCurve,
    /// PSNR of the uncompressed reconstruction, for [`Method::None`].
    pub reference_psnr: Option<f64>,
    /// The uncompressed reconstruction, for [`Method::None`].
    pub reference_image: Option<Image>,
    pub cells: Vec<CellOutcome>,
}

impl SweepOutput {
    pub fn failures(&self) -> impl Iterator<Item = (i32, &str)> {
        self.cells.iter().filter_map(|c| match &c.result {
            Err(e) => Some((c.qp, e.as_str())),
            Ok(_) => None,
        })
    }
}

/// Runs one method over a QP list against the ground truth `truth`.
///
/// Failed cells are kept with their error message and left out of the curve.
/// Cells may run concurrently; results are ordered by the QP list.
pub fn sweep(k: &KSpace, truth: &Image, spec: &SweepSpec) -> Result<SweepOutput> {
    if truth.dims() != k.dims() {
        return Err(Error::DimensionMismatch {
            expected: k.dims(),
            found: truth.dims(),
        });
    }
    let alpha = spec.method.alpha;
    let peak = spec.admm.peak;
    let label = spec.method.label();

    if spec.method.method == Method::None {
        let recon = if alpha == 0.0 {
            zero_filled_recon(k)
        } else {
            tv_reconstruct(k, alpha, &spec.admm.solver, peak)?.0
        };
        return Ok(SweepOutput {
            method: spec.method,
            curve: RDCurve::new(label, Vec::new())?,
            reference_psnr: Some(psnr(truth, &recon, peak)?),
            reference_image: Some(recon),
            cells: Vec::new(),
        });
    }

    if spec.qps.is_empty() {
        return Err(Error::InvalidParameter("empty QP list".into()));
    }
    // The decoupled reconstruction does not depend on the QP.
    let decoupled_recon = match spec.method.method {
        Method::Decoupled if alpha > 0.0 => {
            Some(tv_reconstruct(k, alpha, &spec.admm.solver, peak)?.0)
        }
        Method::Decoupled => Some(zero_filled_recon(k)),
        _ => None,
    };
    let admm = AdmmConfig {
        alpha,
        ..spec.admm.clone()
    };

    let run_cell = |qp: i32| -> CellOutcome {
        let codec = spec.codec.with_qp(qp);
        let result = match &decoupled_recon {
            Some(recon) => compress_reconstruction(recon, alpha, &codec, peak, Some(truth)),
            None => run_admm(k, &admm, &codec, Some(truth)),
        };
        CellOutcome {
            qp,
            result: result.map_err(|e| format!("qp {qp}: {e}")),
        }
    };

    let cells: Vec<CellOutcome> = if spec.workers == 1 {
        spec.qps.iter().map(|&qp| run_cell(qp)).collect()
    } else {
        let mut builder = rayon::ThreadPoolBuilder::new();
        if spec.workers > 0 {
            builder = builder.num_threads(spec.workers);
        }
        let pool = builder
            .build()
            .map_err(|e| Error::InvalidParameter(format!("worker pool: {e}")))?;
        pool.install(|| spec.qps.par_iter().map(|&qp| run_cell(qp)).collect())
    };

    let mut points = Vec::new();
    for c in &cells {
        match &c.result {
            Ok(r) => points.push(RDPoint {
                qp: c.qp,
                bpp: r.final_bitstream.bpp(),
                psnr: psnr(truth, &r.final_image, peak)?,
            }),
            Err(e) => log::warn!("{label}: {e}"),
        }
    }
    Ok(SweepOutput {
        method: spec.method,
        curve: RDCurve::new(label, points)?,
        reference_psnr: None,
        reference_image: None,
        cells,
    })
}
