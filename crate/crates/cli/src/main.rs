use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use jointrec::acquisition::{
    acquire, make_mask, parse_acceleration, zero_filled_recon, KSpace, MaskPattern,
};
use jointrec::admm::{run_admm, run_decoupled, AdmmConfig, AdmmResult, Init};
use jointrec::codec::{reference, CodecKind, CodecParams, ExternalTemplate, InterchangeFormat};
use jointrec::evaluation::{
    bd_psnr, bd_psnr_highrate, default_qps, psnr, sweep, Method, MethodSpec, RDCurve, SweepSpec,
};
use jointrec::experiment::{run_experiment, series_for, ExperimentConfig, SCRATCH_ENV};
use jointrec::image::DEFAULT_PEAK;
use jointrec::phantom::{phantom, PhantomKind};
use jointrec::plot::{render_svg, ReferenceLine};
use jointrec::tv::{tv_reconstruct, SolverConfig};
use jointrec::{CodecError, Error, Image};

#[derive(Parser)]
#[command(
    name = "jointrec",
    version,
    about = "Joint MRI reconstruction and compression"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic phantom image.
    Phantom {
        #[arg(long, default_value = "shepp-logan")]
        kind: String,
        #[arg(long, default_value_t = 256)]
        size: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Simulate undersampled K-space measurements of an image.
    Acquire {
        #[arg(short, long)]
        input: PathBuf,
        #[command(flatten)]
        mask: MaskArgs,
        #[command(flatten)]
        noise: NoiseArgs,
        #[arg(short, long)]
        output: PathBuf,
        /// Also write the sampling mask (text, or image for .png/.pgm).
        #[arg(long)]
        mask_out: Option<PathBuf>,
    },
    /// Reconstruct an image from K-space without compression.
    Recon {
        #[arg(short, long)]
        kspace: PathBuf,
        #[arg(long, value_enum, default_value_t = ReconMethod::ZeroFilled)]
        method: ReconMethod,
        #[arg(long, default_value_t = 0.01)]
        alpha: f64,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(short, long)]
        output: PathBuf,
        /// Ground truth image; prints the PSNR when given.
        #[arg(long)]
        truth: Option<PathBuf>,
    },
    /// Reconstruct and compress, decoupled or jointly.
    Compress {
        #[arg(short, long)]
        kspace: PathBuf,
        #[arg(long, value_enum, default_value_t = CompressMethod::Joint)]
        method: CompressMethod,
        #[arg(long, default_value_t = 0.0)]
        alpha: f64,
        #[arg(long, default_value_t = 31)]
        qp: i32,
        #[command(flatten)]
        codec: CodecArgs,
        #[command(flatten)]
        admm: AdmmArgs,
        #[command(flatten)]
        solver: SolverArgs,
        /// Bitstream output.
        #[arg(short, long)]
        output: PathBuf,
        /// Decoded image output.
        #[arg(long)]
        image: Option<PathBuf>,
        /// Per-iteration run log (CSV).
        #[arg(long)]
        log: Option<PathBuf>,
        #[arg(long)]
        truth: Option<PathBuf>,
    },
    /// Decode a reference-codec bitstream file.
    Decode {
        #[arg(short, long)]
        input: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Rate-distortion curve of one method over a QP list.
    Sweep {
        #[command(flatten)]
        source: SourceArgs,
        #[command(flatten)]
        mask: MaskArgs,
        #[command(flatten)]
        noise: NoiseArgs,
        #[arg(long, value_enum, default_value_t = SweepMethod::Joint)]
        method: SweepMethod,
        #[arg(long, default_value_t = 0.0)]
        alpha: f64,
        /// Comma-separated QPs; defaults to 4,7,...,49.
        #[arg(long, value_delimiter = ',')]
        qps: Option<Vec<i32>>,
        #[command(flatten)]
        codec: CodecArgs,
        #[command(flatten)]
        admm: AdmmArgs,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        /// Curve CSV; not written for `none`.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// BD-PSNR of a test curve against a reference curve.
    Bdpsnr {
        test: PathBuf,
        reference: PathBuf,
        /// Restrict to the high-rate QPs 4, 7, 13, 19.
        #[arg(long)]
        high: bool,
    },
    /// Plot curve CSVs as an SVG.
    Plot {
        #[arg(required = true)]
        curves: Vec<PathBuf>,
        /// Horizontal reference line, `label=psnr`.
        #[arg(long = "reference")]
        references: Vec<String>,
        #[arg(long, default_value = "PSNR vs rate")]
        title: String,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Run an experiment described by a TOML config.
    Run { config: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
enum ReconMethod {
    ZeroFilled,
    Tv,
}

#[derive(Clone, Copy, ValueEnum)]
enum CompressMethod {
    Decoupled,
    Joint,
}

#[derive(Clone, Copy, ValueEnum)]
enum SweepMethod {
    Joint,
    Decoupled,
    None,
}

#[derive(Args)]
struct MaskArgs {
    #[arg(long, default_value = "center-weighted-random")]
    pattern: String,
    /// Acceleration: `4`, `8/3` or `2.5`.
    #[arg(long, default_value = "4")]
    accel: String,
    #[arg(long, default_value_t = 1)]
    mask_seed: u64,
}

#[derive(Args)]
struct NoiseArgs {
    #[arg(long, default_value_t = 0.0)]
    sigma: f64,
    #[arg(long, default_value_t = 1)]
    noise_seed: u64,
}

#[derive(Args)]
struct SourceArgs {
    /// Ground-truth image to acquire from.
    #[arg(long, conflicts_with_all = ["phantom", "kspace"])]
    input: Option<PathBuf>,
    /// Phantom kind to acquire from (default when no input is given).
    #[arg(long)]
    phantom: Option<String>,
    #[arg(long, default_value_t = 128)]
    size: usize,
    #[arg(long, default_value_t = 0)]
    phantom_seed: u64,
    /// Existing measurements; needs --truth.
    #[arg(long, requires = "truth", conflicts_with = "phantom")]
    kspace: Option<PathBuf>,
    #[arg(long)]
    truth: Option<PathBuf>,
}

#[derive(Args)]
struct CodecArgs {
    #[arg(long, default_value = "reference")]
    codec: String,
    #[arg(long)]
    encode_cmd: Option<String>,
    #[arg(long)]
    decode_cmd: Option<String>,
    #[arg(long)]
    scratch_dir: Option<PathBuf>,
    #[arg(long)]
    format: Option<String>,
}

#[derive(Args)]
struct AdmmArgs {
    /// Fixed coupling weight instead of the QP schedule.
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long, default_value_t = 40)]
    max_iters: usize,
    /// `tv-recon` or `zero-filled`.
    #[arg(long, default_value = "tv-recon")]
    init: String,
}

#[derive(Args)]
struct SolverArgs {
    #[arg(long, default_value_t = 500)]
    solver_iters: usize,
    #[arg(long, default_value_t = 1e-6)]
    solver_tol: f64,
}

impl SolverArgs {
    fn config(&self) -> SolverConfig {
        SolverConfig {
            max_iters: self.solver_iters,
            rel_tol: self.solver_tol,
            ..SolverConfig::default()
        }
    }
}

impl CodecArgs {
    fn params(&self, qp: i32) -> Result<CodecParams, Error> {
        let kind: CodecKind = self.codec.parse()?;
        let mut params = CodecParams {
            kind,
            qp,
            ..CodecParams::default()
        };
        if kind == CodecKind::External {
            let (Some(enc), Some(dec)) = (&self.encode_cmd, &self.decode_cmd) else {
                return Err(
                    CodecError::NotConfigured("--encode-cmd and --decode-cmd".into()).into(),
                );
            };
            let mut t = ExternalTemplate::new(enc.clone(), dec.clone());
            if let Some(d) = &self.scratch_dir {
                t.scratch_dir = d.clone();
            }
            if let Some(d) = std::env::var_os(SCRATCH_ENV) {
                t.scratch_dir = d.into();
            }
            if let Some(f) = &self.format {
                t.format = f.parse::<InterchangeFormat>()?;
            }
            params.external = Some(t);
        }
        params.validate()?;
        Ok(params)
    }
}

impl AdmmArgs {
    fn config(&self, alpha: f64, solver: SolverConfig) -> Result<AdmmConfig, Error> {
        Ok(AdmmConfig {
            alpha,
            beta_override: self.beta,
            max_iters: self.max_iters,
            init: self.init.parse::<Init>()?,
            solver,
            ..AdmmConfig::default()
        })
    }
}

fn mask_for(img: &Image, m: &MaskArgs) -> Result<jointrec::acquisition::SamplingMask, Error> {
    let (w, h) = img.dims();
    make_mask(
        w,
        h,
        m.pattern.parse::<MaskPattern>()?,
        parse_acceleration(&m.accel)?,
        m.mask_seed,
    )
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), Error> {
    std::fs::write(path, bytes).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

fn report(result: &AdmmResult, truth: Option<&Image>) -> Result<(), Error> {
    let b = &result.final_bitstream;
    print!(
        "bits {} bpp {:.6} termination {} iterations {}",
        b.bit_count(),
        b.bpp(),
        result.termination,
        result.trace.len()
    );
    if let Some(x) = truth {
        print!(" psnr {:.4}", psnr(x, &result.final_image, DEFAULT_PEAK)?);
    }
    println!();
    Ok(())
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Phantom {
            kind,
            size,
            seed,
            output,
        } => {
            let img = phantom(kind.parse::<PhantomKind>()?, size, seed)?;
            img.save(&output, DEFAULT_PEAK)?;
        }
        Command::Acquire {
            input,
            mask,
            noise,
            output,
            mask_out,
        } => {
            let x = Image::load(&input)?;
            let m = mask_for(&x, &mask)?;
            if let Some(p) = mask_out {
                m.save(p)?;
            }
            let k = acquire(&x, &m, noise.sigma, noise.noise_seed)?;
            k.save(&output)?;
            println!("kept {} of {} samples", m.kept_count(), m.grid_len());
        }
        Command::Recon {
            kspace,
            method,
            alpha,
            solver,
            output,
            truth,
        } => {
            let k = KSpace::load(&kspace)?;
            let z = match method {
                ReconMethod::ZeroFilled => zero_filled_recon(&k),
                ReconMethod::Tv => tv_reconstruct(&k, alpha, &solver.config(), DEFAULT_PEAK)?.0,
            };
            z.save(&output, DEFAULT_PEAK)?;
            if let Some(t) = truth {
                println!("psnr {:.4}", psnr(&Image::load(t)?, &z, DEFAULT_PEAK)?);
            }
        }
        Command::Compress {
            kspace,
            method,
            alpha,
            qp,
            codec,
            admm,
            solver,
            output,
            image,
            log,
            truth,
        } => {
            let k = KSpace::load(&kspace)?;
            let params = codec.params(qp)?;
            let truth = truth.map(Image::load).transpose()?;
            let result = match method {
                CompressMethod::Decoupled => run_decoupled(
                    &k,
                    alpha,
                    &params,
                    &solver.config(),
                    DEFAULT_PEAK,
                    truth.as_ref(),
                )?,
                CompressMethod::Joint => run_admm(
                    &k,
                    &admm.config(alpha, solver.config())?,
                    &params,
                    truth.as_ref(),
                )?,
            };
            write_file(&output, result.final_bitstream.bytes())?;
            if let Some(p) = image {
                result.final_image.save(p, DEFAULT_PEAK)?;
            }
            if let Some(p) = log {
                write_file(&p, result.trace_csv().as_bytes())?;
            }
            report(&result, truth.as_ref())?;
        }
        Command::Decode { input, output } => {
            let bytes = std::fs::read(&input)
                .map_err(|e| Error::io(format!("reading {}", input.display()), e))?;
            let (b, img) = reference::decode_bytes(&bytes)?;
            img.save(&output, DEFAULT_PEAK)?;
            println!("bits {} bpp {:.6}", b.bit_count(), b.bpp());
        }
        Command::Sweep {
            source,
            mask,
            noise,
            method,
            alpha,
            qps,
            codec,
            admm,
            solver,
            workers,
            output,
        } => {
            let (truth, k) = match (&source.kspace, &source.truth) {
                (Some(kp), Some(tp)) => (Image::load(tp)?, KSpace::load(kp)?),
                _ => {
                    let x = match &source.input {
                        Some(p) => Image::load(p)?,
                        None => phantom(
                            source.phantom.as_deref().unwrap_or("shepp-logan").parse()?,
                            source.size,
                            source.phantom_seed,
                        )?,
                    };
                    let m = mask_for(&x, &mask)?;
                    let k = acquire(&x, &m, noise.sigma, noise.noise_seed)?;
                    (x, k)
                }
            };
            let method = match method {
                SweepMethod::Joint => Method::Joint,
                SweepMethod::Decoupled => Method::Decoupled,
                SweepMethod::None => Method::None,
            };
            let spec = SweepSpec {
                method: MethodSpec::new(method, alpha),
                qps: qps.unwrap_or_else(default_qps),
                codec: codec.params(CodecParams::default().qp)?,
                admm: admm.config(alpha, solver.config())?,
                workers,
            };
            let out = sweep(&k, &truth, &spec)?;
            if let Some(p) = out.reference_psnr {
                println!("psnr {p:.4}");
                return Ok(());
            }
            if let Some((qp, e)) = out.failures().next() {
                if out.curve.is_empty() {
                    let message = format!("every cell failed; first at qp {qp}: {e}");
                    return Err(match spec.codec.kind {
                        CodecKind::External => CodecError::External {
                            command: codec.codec,
                            message,
                        }
                        .into(),
                        _ => Error::InvalidParameter(message),
                    });
                }
                eprintln!("warning: some cells failed, first at qp {qp}: {e}");
            }
            let csv = out.curve.to_csv();
            match output {
                Some(p) => write_file(&p, csv.as_bytes())?,
                None => print!("{csv}"),
            }
        }
        Command::Bdpsnr {
            test,
            reference,
            high,
        } => {
            let t = RDCurve::load(&test)?;
            let r = RDCurve::load(&reference)?;
            let v = if high {
                bd_psnr_highrate(&t, &r)?
            } else {
                bd_psnr(&t, &r)?
            };
            println!("{v:.6}");
        }
        Command::Plot {
            curves,
            references,
            title,
            output,
        } => {
            let loaded: Vec<RDCurve> =
                curves.iter().map(RDCurve::load).collect::<Result<_, _>>()?;
            let series: Vec<_> = loaded
                .iter()
                .map(|c| {
                    let spec = guess_method(&c.label);
                    series_for(spec, c)
                })
                .collect();
            let parsed: Vec<(String, f64)> = references
                .iter()
                .map(|r| {
                    let (l, v) = r.split_once('=').ok_or_else(|| {
                        Error::InvalidParameter(format!("reference `{r}` is not label=psnr"))
                    })?;
                    let v: f64 = v
                        .parse()
                        .map_err(|_| Error::InvalidParameter(format!("bad PSNR in `{r}`")))?;
                    Ok((l.to_string(), v))
                })
                .collect::<Result<_, Error>>()?;
            let refs: Vec<ReferenceLine<'_>> = parsed
                .iter()
                .map(|(l, v)| ReferenceLine {
                    label: l,
                    psnr: *v,
                    dashed: false,
                })
                .collect();
            write_file(&output, render_svg(&title, &series, &refs).as_bytes())?;
        }
        Command::Run { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            let rep = run_experiment(&cfg)?;
            for (label, qp, e) in &rep.failures {
                eprintln!("warning: {label} qp {qp}: {e}");
            }
            for r in &rep.rows {
                println!(
                    "{} vs {} ({}): {:.4} dB",
                    r.test, r.reference, r.range, r.bd_psnr_db
                );
            }
            println!("results in {}", cfg.output_dir.display());
        }
    }
    Ok(())
}

/// Styling hint from a curve label such as `joint_a0.01`.
fn guess_method(label: &str) -> MethodSpec {
    let method = if label.starts_with("joint") {
        Method::Joint
    } else {
        Method::Decoupled
    };
    let alpha = label
        .rsplit_once("_a")
        .and_then(|(_, a)| a.parse().ok())
        .unwrap_or(0.0);
    MethodSpec::new(method, alpha)
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Codec(CodecError::External { .. } | CodecError::NotConfigured(_)) => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
