//! Joint MRI reconstruction and lossy compression.
//!
//! The crate couples a compressed-sensing MRI forward model with an
//! arbitrary image codec through ADMM variable splitting. The codec is used
//! strictly as a black box (compress, then decompress), while a TV-regularized
//! data-fit subproblem is solved with a primal-dual method. The output of a
//! joint run is a standard bitstream whose decoded image is the
//! reconstruction.

pub mod acquisition;
pub mod admm;
pub mod codec;
pub mod error;
pub mod evaluation;
pub mod experiment;
pub mod image;
pub mod linalg;
pub mod phantom;
pub mod plot;
pub mod tv;

pub use error::{CodecError, Error, Result};
pub use image::Image;
