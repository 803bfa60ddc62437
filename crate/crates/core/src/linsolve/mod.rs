//! Sparse linear algebra: CSR storage, ILU(0)/Jacobi preconditioners,
//! restarted GMRES, CG, and a multiple-right-hand-side driver that reuses one
//! matrix and one preconditioner across all ensemble members.

mod chol;
mod csr;
mod ilu;
mod krylov;

pub use csr::{Pattern, SparseMatrix};
pub use chol::CholeskyEnvelope;
pub use ilu::{Ilu0, Jacobi};
pub use krylov::{cg_solve, gmres_solve, multi_rhs_solve, GmresParams, SolverReport};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("zero pivot at row {0} in ILU(0) factorization")]
    ZeroPivot(usize),
    #[error("zero diagonal at row {0} in Jacobi preconditioner")]
    ZeroDiagonal(usize),
    #[error("matrix is not positive definite (negative curvature at iteration {0})")]
    NotSpd(usize),
    #[error("linear solve did not converge: {0} iterations, relative residual {1:.3e}")]
    NoConvergence(usize, f64),
}

/// Application of an (approximate) inverse: z = M^{-1} r.
pub trait Preconditioner: Sync {
    fn apply(&self, r: &[f64], z: &mut [f64]);
}

/// No-op preconditioner.
pub struct Identity;

impl Preconditioner for Identity {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        z.copy_from_slice(r);
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub(crate) fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}
