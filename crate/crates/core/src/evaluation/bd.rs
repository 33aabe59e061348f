use nalgebra::{DMatrix, DVector};

use super::{RDCurve, RDPoint};
use crate::error::{Error, Result};

/// QPs that make up the high-rate segment of a sweep.
pub const HIGH_RATE_QPS: [i32; 4] = [4, 7, 13, 19];

/// Least-squares cubic through `(log10 bpp, psnr)`; coefficients low to high.
fn fit_cubic(label: &str, points: &[RDPoint]) -> Result<([f64; 4], f64, f64)> {
    let finite: Vec<&RDPoint> = points.iter().filter(|p| p.psnr.is_finite()).collect();
    if finite.len() < points.len() {
        log::warn!(
            "curve `{label}`: ignoring {} point(s) with infinite PSNR",
            points.len() - finite.len()
        );
    }
    if finite.len() < 4 {
        return Err(Error::InvalidParameter(format!(
            "curve `{label}` has {} usable points; BD-PSNR needs at least 4",
            finite.len()
        )));
    }
    let xs: Vec<f64> = finite.iter().map(|p| p.bpp.log10()).collect();
    let a = DMatrix::from_fn(xs.len(), 4, |i, j| xs[i].powi(j as i32));
    let b = DVector::from_iterator(finite.len(), finite.iter().map(|p| p.psnr));
    let coef = a
        .svd(true, true)
        .solve(&b, 1e-12)
        .map_err(|e| Error::InvalidParameter(format!("curve `{label}`: cubic fit failed: {e}")))?;
    let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(([coef[0], coef[1], coef[2], coef[3]], lo, hi))
}

fn antiderivative(c: &[f64; 4], x: f64) -> f64 {
    x * (c[0] + x * (c[1] / 2.0 + x * (c[2] / 3.0 + x * c[3] / 4.0)))
}

/// Average PSNR gap (dB) of `test` over `reference` across their common
/// log-rate interval. Positive means `test` is better.
pub fn bd_psnr(test: &RDCurve, reference: &RDCurve) -> Result<f64> {
    let (ct, lo_t, hi_t) = fit_cubic(&test.label, test.points())?;
    let (cr, lo_r, hi_r) = fit_cubic(&reference.label, reference.points())?;
    let lo = lo_t.max(lo_r);
    let hi = hi_t.min(hi_r);
    if !(hi > lo) {
        return Err(Error::InvalidParameter(format!(
            "rate ranges of `{}` and `{}` do not overlap",
            test.label, reference.label
        )));
    }
    let area_t = antiderivative(&ct, hi) - antiderivative(&ct, lo);
    let area_r = antiderivative(&cr, hi) - antiderivative(&cr, lo);
    Ok((area_t - area_r) / (hi - lo))
}

/// [`bd_psnr`] restricted to the [`HIGH_RATE_QPS`] points.
pub fn bd_psnr_highrate(test: &RDCurve, reference: &RDCurve) -> Result<f64> {
    let keep = |qp| HIGH_RATE_QPS.contains(&qp);
    bd_psnr(&test.filter_qp(keep), &reference.filter_qp(keep))
}
