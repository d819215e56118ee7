//! Complex linear algebra and random sampling shared by every other module.

mod eigen;
mod matrix;
mod rng;

pub(crate) use eigen::cholesky_logdet2;
pub use eigen::{hermitian_eigendecompose, logdet2_hpd, HermitianEig};
pub use matrix::CMatrix;
pub use rng::{sample_cn01, RngStream};
