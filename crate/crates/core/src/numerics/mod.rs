//! Dense matrices, Cholesky factorization, seeded randomness and the Adam
//! optimizer shared by every model in the crate.

mod linalg;
mod matrix;
mod optim;
mod rng;
mod simd;

pub use linalg::{cholesky_factor, cholesky_solve, cholesky_solve_vec, Cholesky, MAX_JITTER};
pub use matrix::Matrix;
pub use optim::{Adam, AdamConfig};
pub use rng::{derive_seed, sample_standard_normal, Rng};
pub(crate) use simd::multiversion;
