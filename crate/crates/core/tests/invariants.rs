use num_complex::Complex64;
use num_rational::Ratio;
use proptest::prelude::*;

use jointrec::acquisition::{make_mask, Fft2, MaskPattern, MaskedFourier, SamplingMask};
use jointrec::codec::reference::step_size;
use jointrec::codec::{compress, decompress, CodecParams};
use jointrec::phantom::{phantom, PhantomKind};
use jointrec::tv::{solve_tv_subproblem, subproblem_objective, tv_value, TvSubproblemSpec};
use jointrec::Image;

fn pattern() -> impl Strategy<Value = MaskPattern> {
    prop_oneof![
        Just(MaskPattern::UniformRandom),
        Just(MaskPattern::CenterWeightedRandom),
        Just(MaskPattern::CartesianLines),
    ]
}

fn image(w: usize, h: usize, lo: f64, hi: f64) -> impl Strategy<Value = Image> {
    prop::collection::vec(lo..hi, w * h).prop_map(move |d| Image::new(w, h, d).unwrap())
}

fn integer_image(w: usize, h: usize) -> impl Strategy<Value = Image> {
    prop::collection::vec(0u8..=255, w * h)
        .prop_map(move |d| Image::new(w, h, d.into_iter().map(f64::from).collect()).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn adjoint_matches_forward(
        (w, h) in (4usize..20, 4usize..20),
        p in pattern(),
        accel in 1u64..6,
        seed in any::<u64>(),
        vals in prop::collection::vec(-1.0f64..1.0, 3 * 400),
    ) {
        let mask = make_mask(w, h, p, Ratio::from_integer(accel), seed).unwrap();
        let op = MaskedFourier::new(mask);
        let x = Image::new(w, h, vals[..w * h].to_vec()).unwrap();
        let m = op.mask().kept_count();
        let y: Vec<Complex64> = (0..m).map(|i| Complex64::new(vals[400 + i], vals[800 + i])).collect();
        let lhs: f64 = op.forward(&x).unwrap().iter().zip(&y).map(|(a, b)| (a * b.conj()).re).sum();
        let aty = op.adjoint(&y).unwrap();
        let rhs = x.dot(&aty);
        prop_assert!((lhs - rhs).abs() <= 1e-10 * (x.norm_l2() * aty.norm_l2()).max(1e-300));
    }

    #[test]
    fn fourier_transform_is_unitary(x in image(12, 10, -50.0, 50.0)) {
        let spectrum = Fft2::new(12, 10).forward_real(x.pixels());
        let energy: f64 = spectrum.iter().map(|c| c.norm_sqr()).sum();
        prop_assert!((energy.sqrt() - x.norm_l2()).abs() <= 1e-10 * x.norm_l2().max(1.0));
    }

    #[test]
    fn selection_is_a_projection(p in pattern(), seed in any::<u64>(), vals in prop::collection::vec(-5.0f64..5.0, 256)) {
        let mask = make_mask(16, 16, p, Ratio::new(5, 2), seed).unwrap();
        let mut once = vals.clone();
        mask.project(&mut once);
        let mut twice = once.clone();
        mask.project(&mut twice);
        prop_assert_eq!(once, twice);
    }

    #[test]
    fn random_masks_keep_the_requested_count(
        (w, h) in (2usize..40, 2usize..40),
        num in 1u64..40,
        den in 1u64..10,
        seed in any::<u64>(),
        center in any::<bool>(),
    ) {
        let accel = Ratio::new(num.max(den), den);
        let p = if center { MaskPattern::CenterWeightedRandom } else { MaskPattern::UniformRandom };
        let n = (w * h) as u64;
        let target = (2 * n * accel.denom() + accel.numer()) / (2 * accel.numer());
        prop_assume!(target >= 1);
        let mask = make_mask(w, h, p, accel, seed).unwrap();
        prop_assert_eq!(mask.kept_count() as u64, target);
        prop_assert_eq!(mask.acceleration(), Ratio::new(n, target));
        prop_assert!(mask.kept()[0]);
    }

    #[test]
    fn tv_scales_and_ignores_offsets(x in integer_image(9, 7), shift in -300i32..300, k in -4i32..5) {
        let c = 2f64.powi(k);
        prop_assert_eq!(tv_value(&x.map(|v| c * v)), c.abs() * tv_value(&x));
        prop_assert_eq!(tv_value(&x.map(|v| v + f64::from(shift))), tv_value(&x));
    }

    #[test]
    fn reference_codec_is_deterministic_and_idempotent(x in integer_image(19, 12), qp in 0i32..=51) {
        let p = CodecParams::reference(qp);
        let b = compress(&x, &p).unwrap();
        prop_assert_eq!(&compress(&x, &p).unwrap(), &b);
        let v = decompress(&b, &p).unwrap();
        prop_assert_eq!(compress(&v, &p).unwrap(), b);
    }
}

#[test]
fn codec_error_energy_tracks_the_step() {
    // The decoded block shares its quantization cells with the input, so the
    // coefficient error per sample is at most one step.
    let x = phantom(PhantomKind::SheppLogan, 128, 0).unwrap();
    for qp in 0..=51 {
        let p = CodecParams::reference(qp);
        let v = decompress(&compress(&x, &p).unwrap(), &p).unwrap();
        let mse = x.sub(&v).norm_l2().powi(2) / x.len() as f64;
        let step = step_size(qp as u8);
        assert!(mse <= step * step, "qp {qp}: mse {mse} step {step}");
    }
}

#[test]
fn solver_restarted_at_its_solution_stays_put() {
    let x = phantom(PhantomKind::SheppLogan, 48, 0).unwrap();
    let mask = make_mask(
        48,
        48,
        MaskPattern::CenterWeightedRandom,
        Ratio::from_integer(4),
        3,
    )
    .unwrap();
    let k = jointrec::acquisition::acquire(&x, &mask, 0.0, 0).unwrap();
    let anchor = x.map(|v| v * 0.95);
    let mut spec = TvSubproblemSpec::new(&k, 0.01, 2.5, Some(&anchor));
    spec.solver.trace_every = Some(10);
    let (z, stats) =
        solve_tv_subproblem(&spec, &jointrec::acquisition::zero_filled_recon(&k)).unwrap();
    let (z2, _) = solve_tv_subproblem(&spec, &z).unwrap();
    let f1 = subproblem_objective(&spec, &z).unwrap();
    let f2 = subproblem_objective(&spec, &z2).unwrap();
    assert!((f1 - f2).abs() < spec.solver.rel_tol * f1, "{f1} {f2}");
    let late: Vec<f64> = stats
        .objective_trace
        .iter()
        .filter(|(i, _)| *i >= 20)
        .map(|p| p.1)
        .collect();
    for w in late.windows(2) {
        assert!(w[1] <= w[0] * (1.0 + 1e-9), "{:?}", stats.objective_trace);
    }
}

#[test]
fn full_mask_is_the_identity_selection() {
    let m = SamplingMask::full(6, 5);
    assert_eq!(m.kept_count(), 30);
    assert_eq!(m.acceleration(), Ratio::from_integer(1));
}
