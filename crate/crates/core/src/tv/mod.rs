//! Discrete gradients, total variation and the TV-regularized data-fit
//! solver used for the z-step and for the uncompressed TV baseline.

mod gradient;
mod solver;

pub use gradient::{div, grad, tv_value, GradientField};
pub use solver::{
    solve_tv_subproblem, subproblem_objective, tv_reconstruct, ProxMethod, SolveStats,
    SolverConfig, TvSubproblemSpec,
};

use crate::acquisition::{forward, KSpace};
use crate::error::Result;
use crate::image::Image;

/// Distortion of `z` against the measurements, `(1/N) ||y - A z||^2`.
pub fn data_fit(k: &KSpace, z: &Image) -> Result<f64> {
    let az = forward(z, k.mask())?;
    let sum: f64 = k
        .samples()
        .iter()
        .zip(&az)
        .map(|(y, a)| (y - a).norm_sqr())
        .sum();
    Ok(sum / k.grid_len() as f64)
}
