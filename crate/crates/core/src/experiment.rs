//! Config-driven experiments: acquire once, sweep every method over the QP
//! list, and write curves, a BD-PSNR report, a plot and sample images.
//!
//! ```toml
//! output_dir = "out"
//! methods = ["joint:0.01", "decoupled:0.01", "joint:0", "none:0"]
//!
//! [input]
//! phantom = "shepp-logan"
//! size = 128
//!
//! [mask]
//! pattern = "center-weighted-random"
//! accel = "4"
//! seed = 1
//! ```
//!
//! Output layout: `curves/*.csv`, `report.csv`, `plot.svg`, `images/*.png`,
//! `run.log` and, when enabled, `traces/*.csv`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::acquisition::{acquire, make_mask, parse_acceleration, KSpace, MaskPattern};
use crate::admm::{AdmmConfig, Init};
use crate::codec::{CodecKind, CodecParams, ExternalTemplate, InterchangeFormat};
use crate::error::{Error, Result};
use crate::evaluation::{
    bd_psnr, bd_psnr_highrate, default_qps, psnr, sweep, Method, MethodSpec, RDCurve, SweepOutput,
    SweepSpec,
};
use crate::image::{Image, DEFAULT_PEAK};
use crate::phantom::{phantom, PhantomKind};
use crate::plot::{self, ReferenceLine, Series};
use crate::tv::{ProxMethod, SolverConfig};

/// Environment variable that overrides the external codec's scratch directory.
pub const SCRATCH_ENV: &str = "JOINTREC_SCRATCH";

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub output_dir: PathBuf,
    /// Entries like `joint:0.01`, `decoupled:0`, `none:0.01`.
    pub methods: Vec<String>,
    #[serde(default = "default_peak")]
    pub peak: f64,
    /// Concurrent sweep cells; 0 uses all cores.
    #[serde(default = "default_workers")]
    pub workers: usize,
    /// Write per-iteration logs of joint runs to `traces/`.
    #[serde(default)]
    pub traces: bool,
    #[serde(default)]
    pub input: InputSection,
    #[serde(default)]
    pub mask: MaskSection,
    #[serde(default)]
    pub noise: NoiseSection,
    #[serde(default)]
    pub codec: CodecSection,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub admm: AdmmSection,
    #[serde(default)]
    pub solver: SolverSection,
}

fn default_peak() -> f64 {
    DEFAULT_PEAK
}

fn default_workers() -> usize {
    1
}

/// Exactly one of `phantom`, `image` or `kspace`. A K-space input needs
/// `truth` to score reconstructions.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputSection {
    pub phantom: Option<String>,
    pub size: Option<usize>,
    pub seed: Option<u64>,
    pub image: Option<PathBuf>,
    pub kspace: Option<PathBuf>,
    pub truth: Option<PathBuf>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MaskSection {
    pub pattern: String,
    pub accel: String,
    pub seed: u64,
}

impl Default for MaskSection {
    fn default() -> Self {
        Self {
            pattern: MaskPattern::default().name().into(),
            accel: "4".into(),
            seed: 1,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseSection {
    pub sigma: f64,
    pub seed: u64,
}

impl Default for NoiseSection {
    fn default() -> Self {
        Self {
            sigma: 0.0,
            seed: 1,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CodecSection {
    pub kind: String,
    pub encode_cmd: Option<String>,
    pub decode_cmd: Option<String>,
    pub scratch_dir: Option<PathBuf>,
    pub format: Option<String>,
}

impl Default for CodecSection {
    fn default() -> Self {
        Self {
            kind: CodecKind::Reference.name().into(),
            encode_cmd: None,
            decode_cmd: None,
            scratch_dir: None,
            format: None,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub qps: Vec<i32>,
    /// QPs at which decoded images are written.
    pub image_qps: Vec<i32>,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            qps: default_qps(),
            image_qps: vec![4, 31],
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdmmSection {
    pub beta: Option<f64>,
    pub max_iters: usize,
    pub conv_window: usize,
    pub conv_eps: f64,
    pub div_eps: f64,
    pub init: String,
}

impl Default for AdmmSection {
    fn default() -> Self {
        let d = AdmmConfig::default();
        Self {
            beta: d.beta_override,
            max_iters: d.max_iters,
            conv_window: d.conv_window,
            conv_eps: d.conv_eps,
            div_eps: d.div_eps,
            init: "tv-recon".into(),
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub max_iters: usize,
    pub rel_tol: f64,
    /// `fourier` or `cg`.
    pub prox: String,
}

impl Default for SolverSection {
    fn default() -> Self {
        let d = SolverConfig::default();
        Self {
            max_iters: d.max_iters,
            rel_tol: d.rel_tol,
            prox: "fourier".into(),
        }
    }
}

impl SolverSection {
    pub fn to_config(&self) -> Result<SolverConfig> {
        let prox = match self.prox.as_str() {
            "fourier" => ProxMethod::FourierDiagonal,
            "cg" => ProxMethod::ConjugateGradient,
            other => {
                return Err(Error::Config(format!(
                    "solver.prox must be `fourier` or `cg`, got `{other}`"
                )))
            }
        };
        if self.max_iters == 0 || !(self.rel_tol >= 0.0) {
            return Err(Error::Config(
                "solver.max_iters must be >= 1 and rel_tol >= 0".into(),
            ));
        }
        Ok(SolverConfig {
            max_iters: self.max_iters,
            rel_tol: self.rel_tol,
            prox,
            trace_every: None,
        })
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(format!("reading config {}", path.display()), e))?;
        let mut cfg = Self::from_toml(&text)?;
        // Relative paths in the config are relative to the config file.
        if let Some(dir) = path.parent() {
            let rebase = |p: &mut PathBuf| {
                if p.is_relative() {
                    *p = dir.join(&*p);
                }
            };
            rebase(&mut cfg.output_dir);
            for p in [
                &mut cfg.input.image,
                &mut cfg.input.kspace,
                &mut cfg.input.truth,
            ]
            .into_iter()
            .flatten()
            {
                rebase(p);
            }
        }
        Ok(cfg)
    }

    pub fn method_specs(&self) -> Result<Vec<MethodSpec>> {
        self.methods
            .iter()
            .map(|m| m.parse().map_err(|e: Error| Error::Config(e.to_string())))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            return Err(Error::Config("at least one method is required".into()));
        }
        let specs = self.method_specs()?;
        for (i, a) in specs.iter().enumerate() {
            if specs[..i].iter().any(|b| b.label() == a.label()) {
                return Err(Error::Config(format!("method `{a}` listed twice")));
            }
        }
        let sources = [
            self.input.phantom.is_some(),
            self.input.image.is_some(),
            self.input.kspace.is_some(),
        ];
        if sources.iter().filter(|&&s| s).count() > 1 {
            return Err(Error::Config(
                "input: give only one of phantom, image, kspace".into(),
            ));
        }
        if self.input.kspace.is_some() && self.input.truth.is_none() {
            return Err(Error::Config("input.kspace requires input.truth".into()));
        }
        if self.sweep.qps.is_empty() {
            return Err(Error::Config("sweep.qps is empty".into()));
        }
        if let Some(qp) = self.sweep.qps.iter().find(|q| !(0..=51).contains(*q)) {
            return Err(Error::Config(format!("qp {qp} outside [0, 51]")));
        }
        if !(self.peak > 0.0 && self.peak <= 255.0) {
            return Err(Error::Config(format!(
                "peak {} outside (0, 255]",
                self.peak
            )));
        }
        if !(self.noise.sigma >= 0.0 && self.noise.sigma.is_finite()) {
            return Err(Error::Config(format!("noise.sigma = {}", self.noise.sigma)));
        }
        self.mask
            .pattern
            .parse::<MaskPattern>()
            .map_err(|e| Error::Config(e.to_string()))?;
        parse_acceleration(&self.mask.accel).map_err(|e| Error::Config(e.to_string()))?;
        self.codec_params()?;
        self.admm_config(0.0)?
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        Ok(())
    }

    /// Codec settings with the QP left at its default; sweeps set it per cell.
    pub fn codec_params(&self) -> Result<CodecParams> {
        let kind: CodecKind = self
            .codec
            .kind
            .parse()
            .map_err(|e: Error| Error::Config(e.to_string()))?;
        let mut params = CodecParams {
            kind,
            peak: self.peak,
            ..CodecParams::default()
        };
        if kind == CodecKind::External {
            let (enc, dec) = match (&self.codec.encode_cmd, &self.codec.decode_cmd) {
                (Some(e), Some(d)) => (e, d),
                _ => {
                    return Err(Error::Config(
                        "codec.kind = external needs codec.encode_cmd and codec.decode_cmd".into(),
                    ))
                }
            };
            let mut t = ExternalTemplate::new(enc.clone(), dec.clone());
            if let Some(dir) = &self.codec.scratch_dir {
                t.scratch_dir = dir.clone();
            }
            if let Some(dir) = std::env::var_os(SCRATCH_ENV) {
                t.scratch_dir = PathBuf::from(dir);
            }
            if let Some(f) = &self.codec.format {
                t.format = f
                    .parse::<InterchangeFormat>()
                    .map_err(|e| Error::Config(e.to_string()))?;
            }
            params.external = Some(t);
        }
        Ok(params)
    }

    pub fn admm_config(&self, alpha: f64) -> Result<AdmmConfig> {
        let init = match self.admm.init.as_str() {
            "provided" => {
                return Err(Error::Config(
                    "admm.init = provided is only available through the library".into(),
                ))
            }
            s => s
                .parse::<Init>()
                .map_err(|e| Error::Config(e.to_string()))?,
        };
        Ok(AdmmConfig {
            alpha,
            beta_override: self.admm.beta,
            max_iters: self.admm.max_iters,
            conv_window: self.admm.conv_window,
            conv_eps: self.admm.conv_eps,
            div_eps: self.admm.div_eps,
            init,
            solver: self.solver.to_config()?,
            peak: self.peak,
        })
    }
}

/// Ground truth and measurements for one experiment.
pub fn prepare_input(cfg: &ExperimentConfig) -> Result<(Image, KSpace)> {
    if let Some(path) = &cfg.input.kspace {
        let k = KSpace::load(path)?;
        let truth = Image::load(cfg.input.truth.as_ref().expect("validated"))?;
        if truth.dims() != k.dims() {
            return Err(Error::DimensionMismatch {
                expected: k.dims(),
                found: truth.dims(),
            });
        }
        return Ok((truth, k));
    }
    let truth = match &cfg.input.image {
        Some(path) => Image::load(path)?,
        None => {
            let kind: PhantomKind = cfg
                .input
                .phantom
                .as_deref()
                .unwrap_or("shepp-logan")
                .parse()?;
            phantom(
                kind,
                cfg.input.size.unwrap_or(128),
                cfg.input.seed.unwrap_or(0),
            )?
        }
    };
    let (w, h) = truth.dims();
    let mask = make_mask(
        w,
        h,
        cfg.mask.pattern.parse()?,
        parse_acceleration(&cfg.mask.accel)?,
        cfg.mask.seed,
    )?;
    let k = acquire(&truth, &mask, cfg.noise.sigma, cfg.noise.seed)?;
    Ok((truth, k))
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReportRow {
    pub test: String,
    pub reference: String,
    /// `all` or `high`.
    pub range: &'static str,
    /// NaN when the comparison could not be computed.
    pub bd_psnr_db: f64,
}

#[derive(Debug)]
pub struct ExperimentReport {
    pub curves: Vec<RDCurve>,
    /// `(label, psnr)` of uncompressed reconstructions.
    pub references: Vec<(String, f64)>,
    pub rows: Vec<ReportRow>,
    /// `(label, qp, message)` of failed cells.
    pub failures: Vec<(String, i32, String)>,
}

/// BD-PSNR of every joint curve against every other curve, for all rates and
/// for the high-rate segment.
pub fn report_rows(curves: &[(MethodSpec, &RDCurve)]) -> Vec<ReportRow> {
    let mut rows = Vec::new();
    for (ms, test) in curves.iter().filter(|(m, _)| m.method == Method::Joint) {
        for (other, reference) in curves {
            if other == ms {
                continue;
            }
            for (range, f) in [
                ("all", bd_psnr as fn(&RDCurve, &RDCurve) -> Result<f64>),
                ("high", bd_psnr_highrate),
            ] {
                let value = f(test, reference).unwrap_or_else(|e| {
                    log::warn!(
                        "BD-PSNR {} vs {} ({range}): {e}",
                        test.label,
                        reference.label
                    );
                    f64::NAN
                });
                rows.push(ReportRow {
                    test: test.label.clone(),
                    reference: reference.label.clone(),
                    range,
                    bd_psnr_db: value,
                });
            }
        }
    }
    rows
}

pub fn report_csv(rows: &[ReportRow]) -> String {
    let mut s = String::from("test,reference,range,bd_psnr_db\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{:.6}",
            r.test, r.reference, r.range, r.bd_psnr_db
        );
    }
    s
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(format!("creating {}", path.display()), e))
}

/// Series styling: joint in blue, decoupled in black; no regularization dashed.
pub fn series_for<'a>(method: MethodSpec, curve: &'a RDCurve) -> Series<'a> {
    Series {
        curve,
        color: match method.method {
            Method::Joint => plot::JOINT_COLOR,
            _ => plot::DECOUPLED_COLOR,
        },
        dashed: method.alpha == 0.0,
    }
}

/// Runs the full experiment and writes its outputs. Failed cells are logged
/// and skipped; only setup and I/O errors abort the run.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let out = &cfg.output_dir;
    for sub in ["curves", "images"] {
        create_dir(&out.join(sub))?;
    }
    if cfg.traces {
        create_dir(&out.join("traces"))?;
    }
    let mut log = String::new();
    let (truth, k) = prepare_input(cfg)?;
    let (w, h) = truth.dims();
    let _ = writeln!(
        log,
        "input {w}x{h}, mask {} accel {} seed {} (kept {} of {}), noise sigma {}",
        cfg.mask.pattern,
        cfg.mask.accel,
        cfg.mask.seed,
        k.mask().kept_count(),
        k.grid_len(),
        cfg.noise.sigma
    );
    truth.save(out.join("images").join("ground_truth.png"), cfg.peak)?;

    let codec = cfg.codec_params()?;
    let mut outputs: Vec<SweepOutput> = Vec::new();
    for ms in cfg.method_specs()? {
        let spec = SweepSpec {
            method: ms,
            qps: cfg.sweep.qps.clone(),
            codec: codec.clone(),
            admm: cfg.admm_config(ms.alpha)?,
            workers: cfg.workers,
        };
        log::info!("running {ms}");
        let res = sweep(&k, &truth, &spec)?;
        let label = ms.label();
        if let (Some(p), Some(img)) = (res.reference_psnr, &res.reference_image) {
            let _ = writeln!(log, "{ms}: psnr {}", crate::admm::fmt_psnr(p));
            img.save(out.join("images").join(format!("{label}.png")), cfg.peak)?;
        } else {
            res.curve
                .save(out.join("curves").join(format!("{label}.csv")))?;
            for cell in &res.cells {
                match &cell.result {
                    Ok(r) => {
                        let _ = writeln!(
                            log,
                            "{ms} qp {}: bpp {:.6} psnr {} {} after {} iteration(s)",
                            cell.qp,
                            r.final_bitstream.bpp(),
                            crate::admm::fmt_psnr(psnr(&truth, &r.final_image, cfg.peak)?),
                            r.termination,
                            r.trace.len()
                        );
                        if cfg.sweep.image_qps.contains(&cell.qp) {
                            r.final_image.save(
                                out.join("images")
                                    .join(format!("{label}_qp{}.png", cell.qp)),
                                cfg.peak,
                            )?;
                        }
                        if cfg.traces && ms.method == Method::Joint {
                            write(
                                &out.join("traces")
                                    .join(format!("{label}_qp{}.csv", cell.qp)),
                                r.trace_csv(),
                            )?;
                        }
                    }
                    Err(e) => {
                        let _ = writeln!(log, "{ms} qp {}: FAILED {e}", cell.qp);
                    }
                }
            }
        }
        outputs.push(res);
    }

    let curve_refs: Vec<(MethodSpec, &RDCurve)> = outputs
        .iter()
        .filter(|o| o.method.method != Method::None)
        .map(|o| (o.method, &o.curve))
        .collect();
    let rows = report_rows(&curve_refs);
    write(&out.join("report.csv"), report_csv(&rows))?;

    let series: Vec<Series<'_>> = curve_refs.iter().map(|(m, c)| series_for(*m, c)).collect();
    let labels: Vec<(String, f64, bool)> = outputs
        .iter()
        .filter_map(|o| {
            o.reference_psnr
                .map(|p| (o.method.label(), p, o.method.alpha == 0.0))
        })
        .collect();
    let refs: Vec<ReferenceLine<'_>> = labels
        .iter()
        .map(|(l, p, d)| ReferenceLine {
            label: l,
            psnr: *p,
            dashed: *d,
        })
        .collect();
    let title = format!("{w}x{h}, {}x, {}", cfg.mask.accel, codec.kind.name());
    write(
        &out.join("plot.svg"),
        plot::render_svg(&title, &series, &refs),
    )?;

    let failures: Vec<(String, i32, String)> = outputs
        .iter()
        .flat_map(|o| {
            o.failures()
                .map(|(qp, e)| (o.method.label(), qp, e.to_string()))
                .collect::<Vec<_>>()
        })
        .collect();
    for r in &rows {
        let _ = writeln!(
            log,
            "bd-psnr {} vs {} ({}): {:.6}",
            r.test, r.reference, r.range, r.bd_psnr_db
        );
    }
    write(&out.join("run.log"), &log)?;

    Ok(ExperimentReport {
        curves: outputs
            .iter()
            .filter(|o| o.method.method != Method::None)
            .map(|o| o.curve.clone())
            .collect(),
        references: labels.into_iter().map(|(l, p, _)| (l, p)).collect(),
        rows,
        failures,
    })
}
