//! Joint reconstruction and compression by ADMM with a black-box codec.
//!
//! Each iteration compresses `z_hat - u` with the codec, decodes it into
//! `v_hat`, solves the TV-regularized data-fit subproblem anchored at
//! `v_hat + u`, and updates the scaled dual `u += v_hat - z_hat`. The
//! emitted bitstream is always one the codec produced, so its decoding is
//! the reconstruction with no post-processing.

use std::fmt;
use std::str::FromStr;

use crate::acquisition::{zero_filled_recon, KSpace};
use crate::codec::{Bitstream, Codec, CodecParams};
use crate::error::{Error, Result};
use crate::evaluation::psnr;
use crate::image::{Image, DEFAULT_PEAK};
use crate::tv::{solve_tv_subproblem, tv_reconstruct, SolverConfig, TvSubproblemSpec};

/// Coupling weight as a function of the codec's quantization parameter:
/// `5.5 - 0.1 qp`.
pub fn beta_schedule(qp: i32) -> Result<f64> {
    if !(0..=51).contains(&qp) {
        return Err(Error::InvalidParameter(format!("qp {qp} outside [0, 51]")));
    }
    // Dividing once keeps every value the nearest double to its decimal.
    Ok(f64::from(55 - qp) / 10.0)
}

#[derive(Clone, Debug, Default, PartialEq)]
pub enum Init {
    /// Start from the zero-filled reconstruction.
    ZeroFilled,
    /// Start from the TV reconstruction with the run's `alpha`, or the
    /// zero-filled one when `alpha` is 0 (the decoupled reconstruction).
    #[default]
    TvRecon,
    Provided(Image),
}

impl FromStr for Init {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zero-filled" => Ok(Init::ZeroFilled),
            "tv-recon" => Ok(Init::TvRecon),
            other => Err(Error::InvalidParameter(format!(
                "unknown init `{other}` (expected zero-filled or tv-recon)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AdmmConfig {
    pub alpha: f64,
    /// Fixed coupling weight; `None` uses [`beta_schedule`] at the codec qp.
    pub beta_override: Option<f64>,
    pub max_iters: usize,
    pub conv_window: usize,
    pub conv_eps: f64,
    pub div_eps: f64,
    pub init: Init,
    pub solver: SolverConfig,
    pub peak: f64,
}

impl Default for AdmmConfig {
    fn default() -> Self {
        Self {
            alpha: 0.0,
            beta_override: None,
            max_iters: 40,
            conv_window: 3,
            conv_eps: 0.5,
            div_eps: 50.0,
            init: Init::TvRecon,
            solver: SolverConfig::default(),
            peak: DEFAULT_PEAK,
        }
    }
}

impl AdmmConfig {
    pub fn with_alpha(alpha: f64) -> Self {
        Self {
            alpha,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::InvalidParameter("max_iters must be >= 1".into()));
        }
        if self.conv_window == 0 {
            return Err(Error::InvalidParameter("conv_window must be >= 1".into()));
        }
        if !(self.conv_eps < self.div_eps) {
            return Err(Error::InvalidParameter(format!(
                "conv_eps ({}) must be below div_eps ({})",
                self.conv_eps, self.div_eps
            )));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidParameter(format!("alpha = {}", self.alpha)));
        }
        if let Some(b) = self.beta_override {
            if !(b >= 0.0 && b.is_finite()) {
                return Err(Error::InvalidParameter(format!("beta = {b}")));
            }
        }
        Ok(())
    }

    pub fn beta_for(&self, qp: i32) -> Result<f64> {
        match self.beta_override {
            Some(b) => Ok(b),
            None => beta_schedule(qp),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Termination {
    MaxIters,
    Converged,
    Diverged,
    /// Reconstruct-then-compress baseline; no iterations.
    SinglePass,
}

impl Termination {
    pub fn name(self) -> &'static str {
        match self {
            Termination::MaxIters => "max-iters",
            Termination::Converged => "converged",
            Termination::Diverged => "diverged",
            Termination::SinglePass => "single-pass",
        }
    }
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Convergence and divergence test on the sequence `w(t)` of
/// [`feasibility_gap`] values.
///
/// Consecutive differences only exist from the second iteration on, so
/// neither convergence nor divergence can fire at `t = 1`.
#[derive(Clone, Debug)]
pub struct StoppingRule {
    max_iters: usize,
    window: usize,
    conv_eps: f64,
    div_eps: f64,
    t: usize,
    prev: Option<f64>,
    streak: usize,
}

impl StoppingRule {
    pub fn new(cfg: &AdmmConfig) -> Self {
        Self {
            max_iters: cfg.max_iters,
            window: cfg.conv_window,
            conv_eps: cfg.conv_eps,
            div_eps: cfg.div_eps,
            t: 0,
            prev: None,
            streak: 0,
        }
    }

    /// Feeds `w(t)` for the next iteration and reports whether to stop.
    pub fn observe(&mut self, w: f64) -> Option<Termination> {
        self.t += 1;
        if !w.is_finite() {
            return Some(Termination::Diverged);
        }
        if let Some(prev) = self.prev.replace(w) {
            let delta = (w - prev).abs();
            if delta > self.div_eps {
                return Some(Termination::Diverged);
            }
            if delta < self.conv_eps {
                self.streak += 1;
            } else {
                self.streak = 0;
            }
            if self.streak >= self.window {
                return Some(Termination::Converged);
            }
        }
        (self.t >= self.max_iters).then_some(Termination::MaxIters)
    }
}

/// Snapshot handed to observers after the z-step of iteration `t`.
#[derive(Clone, Debug)]
pub struct AdmmState<'a> {
    pub t: usize,
    pub v_hat: &'a Image,
    pub z_hat: &'a Image,
    /// Scaled dual `u(t)` used during this iteration.
    pub u: &'a Image,
    pub w: f64,
    pub bitstream: &'a Bitstream,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraceRecord {
    pub t: usize,
    pub w: f64,
    pub bit_count: u64,
    pub bpp: f64,
    pub psnr: Option<f64>,
    pub solver_iters: usize,
}

#[derive(Clone, Debug)]
pub struct AdmmResult {
    pub final_bitstream: Bitstream,
    /// Decoding of `final_bitstream`.
    pub final_image: Image,
    pub termination: Termination,
    /// Iteration whose bitstream was emitted.
    pub emitted_t: usize,
    pub beta: f64,
    pub qp: i32,
    pub alpha: f64,
    pub trace: Vec<TraceRecord>,
}

impl AdmmResult {
    pub const CSV_HEADER: &'static str = "t,w,bit_count,bpp,psnr,beta,qp,alpha,termination";

    /// Per-iteration run log.
    pub fn trace_csv(&self) -> String {
        let mut s = String::from(Self::CSV_HEADER);
        s.push('\n');
        for r in &self.trace {
            let psnr = r.psnr.map(fmt_psnr).unwrap_or_default();
            s.push_str(&format!(
                "{},{:.6},{},{:.6},{},{},{},{},{}\n",
                r.t,
                r.w,
                r.bit_count,
                r.bpp,
                psnr,
                self.beta,
                self.qp,
                self.alpha,
                self.termination
            ));
        }
        s
    }
}

/// `||v - z||_1` measured on images scaled to `[0, 1]`, the units the
/// stopping thresholds are stated in.
pub fn feasibility_gap(v: &Image, z: &Image, peak: f64) -> f64 {
    v.sub(z).norm_l1() / peak
}

pub(crate) fn fmt_psnr(p: f64) -> String {
    if p.is_infinite() {
        "inf".into()
    } else {
        format!("{p:.6}")
    }
}

/// Runs the joint optimization. `truth`, when given, is only used to fill
/// the PSNR column of the trace.
pub fn run_admm(
    k: &KSpace,
    cfg: &AdmmConfig,
    codec: &CodecParams,
    truth: Option<&Image>,
) -> Result<AdmmResult> {
    run_admm_observed(k, cfg, codec, truth, |_| {})
}

pub fn run_admm_observed(
    k: &KSpace,
    cfg: &AdmmConfig,
    codec_params: &CodecParams,
    truth: Option<&Image>,
    mut observer: impl FnMut(&AdmmState<'_>),
) -> Result<AdmmResult> {
    cfg.validate()?;
    let codec = codec_params.build()?;
    let beta = cfg.beta_for(codec_params.qp)?;
    let (w, h) = k.dims();

    let mut z_hat = match &cfg.init {
        Init::ZeroFilled => zero_filled_recon(k),
        Init::TvRecon if cfg.alpha == 0.0 => zero_filled_recon(k),
        Init::TvRecon => tv_reconstruct(k, cfg.alpha, &cfg.solver, cfg.peak)?.0,
        Init::Provided(img) => {
            if img.dims() != (w, h) {
                return Err(Error::DimensionMismatch {
                    expected: (w, h),
                    found: img.dims(),
                });
            }
            img.clone()
        }
    };
    let mut u = Image::zeros(w, h);
    let mut rule = StoppingRule::new(cfg);
    let mut trace = Vec::new();
    let mut best: Option<(f64, usize, Bitstream, Image)> = None;
    let mut last: Option<(usize, Bitstream, Image)> = None;

    let termination = loop {
        let t = trace.len() + 1;
        let z_tilde = z_hat.sub(&u);
        let b = codec.compress(&z_tilde)?;
        let v_hat = codec.decompress(&b)?;
        let v_tilde = v_hat.add(&u);

        let spec = TvSubproblemSpec {
            kspace: k,
            alpha: cfg.alpha,
            beta,
            anchor: Some(&v_tilde),
            peak: cfg.peak,
            solver: cfg.solver.clone(),
        };
        let (z_next, stats) = match solve_tv_subproblem(&spec, &z_hat) {
            Ok(r) => r,
            Err(Error::NonFinite(msg)) => {
                log::warn!("z-step failed at t = {t}: {msg}");
                if best.is_none() {
                    best = Some((f64::INFINITY, t, b.clone(), v_hat.clone()));
                }
                break Termination::Diverged;
            }
            Err(e) => return Err(e),
        };
        z_hat = z_next;
        let w_t = feasibility_gap(&v_hat, &z_hat, cfg.peak);

        observer(&AdmmState {
            t,
            v_hat: &v_hat,
            z_hat: &z_hat,
            u: &u,
            w: w_t,
            bitstream: &b,
        });

        trace.push(TraceRecord {
            t,
            w: w_t,
            bit_count: b.bit_count(),
            bpp: b.bpp(),
            psnr: truth.map(|x| psnr(x, &v_hat, cfg.peak)).transpose()?,
            solver_iters: stats.iterations,
        });
        u = u.add(&v_hat.sub(&z_hat));

        if best.as_ref().is_none_or(|(bw, ..)| w_t < *bw) {
            best = Some((w_t, t, b.clone(), v_hat.clone()));
        }
        last = Some((t, b, v_hat));

        if let Some(term) = rule.observe(w_t) {
            break term;
        }
    };

    let (emitted_t, final_bitstream, final_image) = match termination {
        Termination::Diverged => {
            let (_, t, b, v) = best.expect("at least one iterate");
            (t, b, v)
        }
        _ => last.expect("at least one iterate"),
    };
    Ok(AdmmResult {
        final_bitstream,
        final_image,
        termination,
        emitted_t,
        beta,
        qp: codec_params.qp,
        alpha: cfg.alpha,
        trace,
    })
}

/// Reconstruct first (zero-filled when `alpha == 0`, TV otherwise), then
/// compress once.
pub fn run_decoupled(
    k: &KSpace,
    alpha: f64,
    codec_params: &CodecParams,
    solver: &SolverConfig,
    peak: f64,
    truth: Option<&Image>,
) -> Result<AdmmResult> {
    let recon = if alpha == 0.0 {
        zero_filled_recon(k)
    } else {
        tv_reconstruct(k, alpha, solver, peak)?.0
    };
    compress_reconstruction(&recon, alpha, codec_params, peak, truth)
}

/// Single compress/decompress of an existing reconstruction.
pub fn compress_reconstruction(
    recon: &Image,
    alpha: f64,
    codec_params: &CodecParams,
    peak: f64,
    truth: Option<&Image>,
) -> Result<AdmmResult> {
    let codec: Box<dyn Codec> = codec_params.build()?;
    let b = codec.compress(recon)?;
    let v = codec.decompress(&b)?;
    let record = TraceRecord {
        t: 1,
        w: feasibility_gap(&v, recon, peak),
        bit_count: b.bit_count(),
        bpp: b.bpp(),
        psnr: truth.map(|x| psnr(x, &v, peak)).transpose()?,
        solver_iters: 0,
    };
    Ok(AdmmResult {
        final_bitstream: b,
        final_image: v,
        termination: Termination::SinglePass,
        emitted_t: 1,
        beta: 0.0,
        qp: codec_params.qp,
        alpha,
        trace: vec![record],
    })
}
