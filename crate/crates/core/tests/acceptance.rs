//! End-to-end acceptance checks. Runs without the libtest harness so that
//! every check prints its verdict; exits non-zero if any check fails.

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use jointrec::acquisition::{
    acquire, make_mask, parse_acceleration, zero_filled_recon, KSpace, MaskPattern, MaskedFourier,
};
use jointrec::admm::{beta_schedule, run_admm, AdmmConfig, StoppingRule, Termination};
use jointrec::codec::reference::{forward_dct, step_size};
use jointrec::codec::{Codec, CodecParams, ReferenceCodec};
use jointrec::evaluation::{
    bd_psnr, bd_psnr_highrate, psnr, sweep, Method, MethodSpec, RDCurve, RDPoint, SweepSpec,
};
use jointrec::experiment::{run_experiment, ExperimentConfig};
use jointrec::phantom::{phantom, PhantomKind};
use jointrec::tv::{
    div, grad, solve_tv_subproblem, tv_reconstruct, tv_value, GradientField, SolverConfig,
    TvSubproblemSpec,
};
use jointrec::Image;

const PEAK: f64 = 255.0;
const PATTERNS: [MaskPattern; 3] = [
    MaskPattern::UniformRandom,
    MaskPattern::CenterWeightedRandom,
    MaskPattern::CartesianLines,
];

struct Verdict {
    name: &'static str,
    pass: bool,
    detail: String,
}

fn check(name: &'static str, f: impl FnOnce() -> (bool, String)) -> Verdict {
    let start = Instant::now();
    let (pass, detail) = match std::panic::catch_unwind(std::panic::AssertUnwindSafe(f)) {
        Ok(r) => r,
        Err(e) => {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            (false, format!("panicked: {msg}"))
        }
    };
    let v = Verdict {
        name,
        pass,
        detail: format!("{detail} [{:.2?}]", start.elapsed()),
    };
    println!(
        "{} {}: {}",
        if v.pass { "PASS" } else { "FAIL" },
        v.name,
        v.detail
    );
    v
}

fn random_image(rng: &mut ChaCha8Rng, w: usize, h: usize, scale: f64) -> Image {
    Image::new(
        w,
        h,
        (0..w * h)
            .map(|_| rng.random_range(-scale..scale))
            .collect(),
    )
    .unwrap()
}

fn accel(s: &str) -> jointrec::acquisition::Acceleration {
    parse_acceleration(s).unwrap()
}

fn adjointness() -> (bool, String) {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = 0.0f64;
    for (pi, &pattern) in PATTERNS.iter().enumerate() {
        for trial in 0..100u64 {
            let mask = make_mask(32, 32, pattern, accel("4"), 100 * pi as u64 + trial).unwrap();
            let op = MaskedFourier::new(mask);
            let x = random_image(&mut rng, 32, 32, 1.0);
            let m = op.mask().kept_count();
            let y: Vec<Complex64> = (0..m)
                .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                .collect();
            let ax = op.forward(&x).unwrap();
            let aty = op.adjoint(&y).unwrap();
            let lhs: f64 = ax.iter().zip(&y).map(|(a, b)| (a * b.conj()).re).sum();
            let rhs = x.dot(&aty);
            let scale = x.norm_l2() * aty.norm_l2();
            worst = worst.max((lhs - rhs).abs() / scale);
        }
    }
    let elapsed = start.elapsed();
    (
        worst <= 1e-10 && elapsed < Duration::from_secs(1),
        format!("worst relative gap {worst:.2e} over 300 pairs in {elapsed:.2?}"),
    )
}

fn brute_tv(x: &Image) -> f64 {
    let (w, h) = x.dims();
    let mut total = 0.0;
    for r in 0..h {
        for c in 0..w {
            let dx = if c + 1 < w {
                x.get(c + 1, r) - x.get(c, r)
            } else {
                0.0
            };
            let dy = if r + 1 < h {
                x.get(c, r + 1) - x.get(c, r)
            } else {
                0.0
            };
            total += (dx * dx + dy * dy).sqrt();
        }
    }
    total
}

fn tv_oracle() -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let mut worst_tv = 0.0f64;
    let mut worst_adj = 0.0f64;
    for _ in 0..50 {
        let x = random_image(&mut rng, 8, 8, 100.0);
        let brute = brute_tv(&x);
        worst_tv = worst_tv.max((tv_value(&x) - brute).abs() / brute.max(1.0));

        let gx = (0..64).map(|_| rng.random_range(-1.0..1.0)).collect();
        let gy = (0..64).map(|_| rng.random_range(-1.0..1.0)).collect();
        let g = GradientField::from_parts(8, 8, gx, gy);
        let lhs = grad(&x).dot(&g);
        let rhs = -x.dot(&div(&g));
        worst_adj = worst_adj.max((lhs - rhs).abs() / lhs.abs().max(1.0));
    }
    (
        worst_tv <= 1e-12 && worst_adj <= 1e-12,
        format!("tv gap {worst_tv:.2e}, grad/div gap {worst_adj:.2e}"),
    )
}

/// Plain conjugate gradient on `(2 A*A + beta I) z = 2 A*y + beta a`, the
/// stationarity condition of the smooth subproblem in normalized units.
fn cg_oracle(k: &KSpace, beta: f64, anchor: &Image) -> Image {
    let op = MaskedFourier::new(k.mask().clone());
    let apply = |z: &Image| {
        op.normal(z)
            .unwrap()
            .map(|v| 2.0 * v)
            .add(&z.map(|v| beta * v))
    };
    let b = op
        .adjoint(k.samples())
        .unwrap()
        .map(|v| 2.0 * v)
        .add(&anchor.map(|v| beta * v));
    let mut z = Image::zeros(anchor.width(), anchor.height());
    let mut r = b.clone();
    let mut p = r.clone();
    let mut rr = r.dot(&r);
    let b_norm = b.norm_l2();
    for _ in 0..10_000 {
        if rr.sqrt() <= 1e-14 * b_norm {
            break;
        }
        let ap = apply(&p);
        let step = rr / p.dot(&ap);
        z = z.add(&p.map(|v| step * v));
        r = r.sub(&ap.map(|v| step * v));
        let next = r.dot(&r);
        p = r.add(&p.map(|v| next / rr * v));
        rr = next;
    }
    z
}

fn quadratic_oracle() -> (bool, String) {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    let mut worst = 0.0f64;
    for i in 0..20u64 {
        let pattern = PATTERNS[i as usize % 3];
        let mask = make_mask(32, 32, pattern, accel("3"), i).unwrap();
        let x = random_image(&mut rng, 32, 32, 255.0).map(f64::abs);
        let k = acquire(&x, &mask, 2.0, i).unwrap();
        let anchor = random_image(&mut rng, 32, 32, 255.0);
        let beta = rng.random_range(0.5..6.0);
        let spec = TvSubproblemSpec::new(&k, 0.0, beta, Some(&anchor));
        let (z, _) = solve_tv_subproblem(&spec, &Image::zeros(32, 32)).unwrap();
        let oracle = cg_oracle(&k, beta, &anchor);
        worst = worst.max(z.sub(&oracle).norm_l2() / oracle.norm_l2());
    }
    let elapsed = start.elapsed();
    (
        worst <= 1e-6 && elapsed < Duration::from_secs(5),
        format!("worst relative gap {worst:.2e} over 20 instances in {elapsed:.2?}"),
    )
}

fn shepp_logan_4x() -> (Image, KSpace) {
    let x = phantom(PhantomKind::SheppLogan, 128, 0).unwrap();
    let mask = make_mask(128, 128, MaskPattern::CenterWeightedRandom, accel("4"), 1).unwrap();
    let k = acquire(&x, &mask, 0.0, 1).unwrap();
    (x, k)
}

fn lossless_degeneration() -> (bool, String) {
    let start = Instant::now();
    let (x, k) = shepp_logan_4x();
    let (tv, _) = tv_reconstruct(&k, 0.01, &SolverConfig::default(), PEAK).unwrap();
    let tv_psnr = psnr(&x, &tv, PEAK).unwrap();
    let r = run_admm(
        &k,
        &AdmmConfig::with_alpha(0.01),
        &CodecParams::identity(),
        None,
    )
    .unwrap();
    let joint_psnr = psnr(&x, &r.final_image, PEAK).unwrap();
    let elapsed = start.elapsed();
    (
        (joint_psnr - tv_psnr).abs() <= 0.1 && elapsed < Duration::from_secs(30),
        format!(
            "joint {joint_psnr:.3} dB vs TV {tv_psnr:.3} dB ({}, t = {}) in {elapsed:.2?}",
            r.termination, r.emitted_t
        ),
    )
}

fn beta_exactness() -> (bool, String) {
    let got: Vec<(i32, f64, f64)> = [(31, 2.4), (4, 5.1), (49, 0.6)]
        .into_iter()
        .map(|(qp, want)| (qp, beta_schedule(qp).unwrap(), want))
        .collect();
    let pass = got.iter().all(|(_, b, want)| b == want);
    let detail = got
        .iter()
        .map(|(qp, b, _)| format!("qp {qp} -> {b}"))
        .collect::<Vec<_>>()
        .join(", ");
    (pass, detail)
}

fn feed(trace: &[f64]) -> Option<(Termination, usize)> {
    let mut rule = StoppingRule::new(&AdmmConfig::default());
    trace
        .iter()
        .enumerate()
        .find_map(|(i, &w)| rule.observe(w).map(|t| (t, i + 1)))
}

fn stopping_rule() -> (bool, String) {
    let converging = [100.0, 60.0, 59.8, 59.7, 59.65, 10.0];
    let diverging = [100.0, 101.0, 103.0, 160.0, 161.0];
    let wandering: Vec<f64> = (0..60).map(|t| 100.0 + 2.0 * t as f64).collect();
    let c = feed(&converging);
    let d = feed(&diverging);
    let m = feed(&wandering);
    (
        c == Some((Termination::Converged, 5))
            && d == Some((Termination::Diverged, 4))
            && m == Some((Termination::MaxIters, 40)),
        format!("{c:?}, {d:?}, {m:?}"),
    )
}

fn cubic_curve(label: &str, coef: [f64; 4], bpps: &[f64]) -> RDCurve {
    let points = bpps
        .iter()
        .enumerate()
        .map(|(i, &bpp)| {
            let r = bpp.log10();
            let psnr = coef[0] + r * (coef[1] + r * (coef[2] + r * coef[3]));
            RDPoint {
                qp: 4 + 3 * i as i32,
                bpp,
                psnr,
            }
        })
        .collect();
    RDCurve::new(label, points).unwrap()
}

fn cubic_mean(c: [f64; 4], lo: f64, hi: f64) -> f64 {
    let f =
        |x: f64| c[0] * x + c[1] * x * x / 2.0 + c[2] * x.powi(3) / 3.0 + c[3] * x.powi(4) / 4.0;
    (f(hi) - f(lo)) / (hi - lo)
}

fn bd_oracle() -> (bool, String) {
    let bpps_a = [0.2, 0.5, 0.9, 1.6, 2.5, 3.8];
    let bpps_b = [0.3, 0.6, 1.1, 1.9, 3.0, 4.5];
    let base = [30.0, 12.0, -3.0, 1.5];
    let shifted = [base[0] + 1.75, base[1], base[2], base[3]];
    let a = cubic_curve("a", base, &bpps_a);
    let a_up = cubic_curve("a_up", shifted, &bpps_a);
    let offset_err = (bd_psnr(&a_up, &a).unwrap() - 1.75).abs();

    let other = [28.0, 14.0, 2.0, -0.8];
    let b = cubic_curve("b", other, &bpps_b);
    let (lo, hi) = (0.3f64.log10(), 3.8f64.log10());
    let exact = cubic_mean(base, lo, hi) - cubic_mean(other, lo, hi);
    let cubic_err = (bd_psnr(&a, &b).unwrap() - exact).abs();
    let anti_err = (bd_psnr(&a, &b).unwrap() + bd_psnr(&b, &a).unwrap()).abs();
    (
        offset_err <= 1e-9 && cubic_err <= 1e-6 && anti_err <= 1e-9,
        format!("offset {offset_err:.1e}, cubic {cubic_err:.1e}, antisymmetry {anti_err:.1e}"),
    )
}

fn codec_round_trip() -> (bool, String) {
    let phantoms = [
        phantom(PhantomKind::SheppLogan, 128, 0).unwrap(),
        phantom(PhantomKind::PiecewiseBlobs, 96, 5).unwrap(),
    ];
    let mut min_psnr = f64::INFINITY;
    for x in &phantoms {
        for qp in 0..=4u8 {
            let c = ReferenceCodec::new(qp, 255).unwrap();
            let v = c.decompress(&c.compress(x).unwrap()).unwrap();
            min_psnr = min_psnr.min(psnr(x, &v, PEAK).unwrap());
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(44);
    let noisy = random_image(&mut rng, 40, 24, 255.0).map(f64::abs);
    let mut worst_err = 0.0f64;
    let mut idempotent = true;
    for x in phantoms.iter().chain([&noisy]) {
        let (w, h) = x.dims();
        let samples = x.to_u8_clipped(PEAK);
        for qp in 0..=51u8 {
            let c = ReferenceCodec::new(qp, 255).unwrap();
            let levels = c.block_levels(x).unwrap();
            let step = step_size(qp);
            for (bi, l) in levels.iter().enumerate() {
                let (bx, by) = (bi % w.div_ceil(8), bi / w.div_ceil(8));
                let block: [f64; 64] = std::array::from_fn(|i| {
                    let sx = (bx * 8 + i % 8).min(w - 1);
                    let sy = (by * 8 + i / 8).min(h - 1);
                    f64::from(samples[sy * w + sx]) - 128.0
                });
                let coef = forward_dct(&block);
                for (cf, &lv) in coef.iter().zip(l) {
                    worst_err = worst_err.max((cf - lv as f64 * step).abs() / step);
                }
            }
            let b = c.compress(x).unwrap();
            let v = c.decompress(&b).unwrap();
            let b2 = c.compress(&v).unwrap();
            idempotent &= b2 == b && c.decompress(&b2).unwrap() == v;
        }
    }
    (
        min_psnr >= 50.0 && worst_err <= 0.5 + 1e-9 && idempotent,
        format!(
            "min PSNR at QP 0-4 {min_psnr:.2} dB, worst coefficient error {worst_err:.4} steps, idempotent {idempotent}"
        ),
    )
}

struct Trends {
    with_tv_vs_without: f64,
    joint_vs_decoupled: f64,
    above_baseline: usize,
    points: usize,
    baseline: f64,
    elapsed: Duration,
}

fn trends() -> Trends {
    let start = Instant::now();
    let (x, k) = shepp_logan_4x();
    let baseline = psnr(&x, &zero_filled_recon(&k), PEAK).unwrap();
    let run = |method, alpha| {
        let spec = SweepSpec::new(MethodSpec::new(method, alpha), CodecParams::reference(31));
        let out = sweep(&k, &x, &spec).unwrap();
        assert_eq!(out.failures().count(), 0);
        out.curve
    };
    let joint_tv = run(Method::Joint, 0.01);
    let joint_plain = run(Method::Joint, 0.0);
    let decoupled_tv = run(Method::Decoupled, 0.01);
    let mid_high: Vec<&RDPoint> = joint_plain.points().iter().filter(|p| p.qp <= 31).collect();
    Trends {
        with_tv_vs_without: bd_psnr_highrate(&joint_tv, &joint_plain).unwrap(),
        joint_vs_decoupled: bd_psnr_highrate(&joint_tv, &decoupled_tv).unwrap(),
        above_baseline: mid_high.iter().filter(|p| p.psnr > baseline).count(),
        points: mid_high.len(),
        baseline,
        elapsed: start.elapsed(),
    }
}

fn csv_files(root: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(dir).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if p.extension().is_some_and(|e| e == "csv") {
                out.push(p.strip_prefix(root).unwrap().to_path_buf());
            }
        }
    }
    out.sort();
    out
}

fn reproducibility() -> (bool, String) {
    let dir = tempfile::tempdir().unwrap();
    let text = r#"
methods = ["joint:0.01", "joint:0", "decoupled:0.01", "none:0.01"]
workers = 4
traces = true
[input]
phantom = "shepp-logan"
size = 64
[mask]
accel = "4"
[noise]
sigma = 3.0
[sweep]
qps = [4, 13, 22, 31, 40, 49]
"#;
    let run = |name: &str| {
        let mut cfg =
            ExperimentConfig::from_toml(&format!("output_dir = \"{name}\"\n{text}")).unwrap();
        cfg.output_dir = dir.path().join(name);
        run_experiment(&cfg).unwrap();
        cfg.output_dir
    };
    let a = run("first");
    let b = run("second");
    let files = csv_files(&a);
    let same_list = files == csv_files(&b);
    let mismatched: Vec<_> = files
        .iter()
        .filter(|f| std::fs::read(a.join(f)).unwrap() != std::fs::read(b.join(f)).unwrap())
        .collect();
    (
        same_list && mismatched.is_empty() && files.len() > 4,
        format!(
            "{} CSV files compared, {} differ",
            files.len(),
            mismatched.len()
        ),
    )
}

fn main() {
    let mut verdicts = vec![
        check("1 operator adjointness", adjointness),
        check("2 TV oracle", tv_oracle),
        check("3 z-step quadratic oracle", quadratic_oracle),
        check("4 lossless degeneration", lossless_degeneration),
        check("5 beta schedule", beta_exactness),
        check("6 stopping rule", stopping_rule),
        check("7 BD-PSNR oracle", bd_oracle),
        check("8 codec round trip", codec_round_trip),
    ];
    let t = std::panic::catch_unwind(trends);
    match t {
        Ok(t) => {
            let in_time = t.elapsed < Duration::from_secs(600);
            verdicts.push(check("9a TV gain over no TV (high rate)", || {
                (
                    t.with_tv_vs_without > 0.0,
                    format!("BD-PSNR {:.3} dB", t.with_tv_vs_without),
                )
            }));
            verdicts.push(check("9b joint vs decoupled (high rate)", || {
                (
                    t.joint_vs_decoupled > -0.2,
                    format!("BD-PSNR {:.3} dB, needs > -0.2", t.joint_vs_decoupled),
                )
            }));
            verdicts.push(check("9c compression beats zero-filled", || {
                (
                    2 * t.above_baseline >= t.points && in_time,
                    format!(
                        "{} of {} mid/high-rate points above {:.3} dB; sweeps took {:.1?}",
                        t.above_baseline, t.points, t.baseline, t.elapsed
                    ),
                )
            }));
        }
        Err(_) => verdicts.push(check("9 trend reproduction", || {
            (false, "sweeps failed".into())
        })),
    }
    verdicts.push(check("10 reproducibility", reproducibility));

    let failed: Vec<&str> = verdicts
        .iter()
        .filter(|v| !v.pass)
        .map(|v| v.name)
        .collect();
    println!(
        "acceptance: {} of {} passed{}",
        verdicts.len() - failed.len(),
        verdicts.len(),
        if failed.is_empty() {
            String::new()
        } else {
            format!("; failed: {}", failed.join(", "))
        }
    );
    if !failed.is_empty() {
        std::process::exit(1);
    }
}
