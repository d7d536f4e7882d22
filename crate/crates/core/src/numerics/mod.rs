//! Dense linear algebra, eigenvalues, distribution functions and random streams.

mod eigen;
mod linalg;
mod matrix;
pub mod rng;
pub mod special;

pub use eigen::{eigen_magnitudes, spectral_radius, MAX_SWEEPS};
pub use linalg::{cholesky, inverse, log_det_spd, solve, spd_inverse};
pub use matrix::{kron, unvec, vec, Matrix};
pub use rng::RngStream;
