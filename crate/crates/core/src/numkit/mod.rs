//! Dense numerical kernel: matrices, symmetric eigendecomposition, SPD
//! solves, PCA and the seeded RNG everything else draws from.
//!
//! All arithmetic is `f64`. Jacobian-based kernels are badly conditioned and
//! single precision is not enough for finite-difference checks to agree.

mod eig;
mod matrix;
mod pca;
mod rng;
mod solve;

pub use eig::{sym_eig, EigResult, SYMMETRY_TOL};
pub use matrix::{dot, Matrix};
pub use pca::{pca_project, Pca};
pub use rng::{kaiming_normal, Rng};
pub use solve::{solve_spd, PIVOT_REL_TOL};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NumError {
    #[error("matrix is not square ({rows}x{cols})")]
    NonSquare { rows: usize, cols: usize },
    #[error("matrix is not symmetric (max asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },
    #[error("eigensolver did not converge within {sweeps} sweeps")]
    NoConvergence { sweeps: usize },
    #[error("singular system: pivot {pivot:e} at row {index} (trace {trace:e})")]
    SingularSystem {
        index: usize,
        pivot: f64,
        trace: f64,
    },
    #[error("shape mismatch: expected {expected:?}, found {found:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("ridge must be finite and non-negative, got {0}")]
    InvalidRidge(f64),
    #[error("non-finite value in input or result")]
    NonFinite,
    #[error("need at least {needed} points, got {found}")]
    TooFewPoints { needed: usize, found: usize },
    #[error("fan-in must be at least 1")]
    ZeroFanIn,
}
