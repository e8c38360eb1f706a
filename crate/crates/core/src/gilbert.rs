//! Frobenius-nearest density matrix to an arbitrary Hermitian matrix.
//!
//! The production path runs Gilbert's algorithm: a linear-maximization oracle
//! over the state space (top eigenvector) plus exact line search on the
//! connecting segment. [`eigen_simplex_projection`] is the closed-form
//! alternative, kept as an independent oracle and fast path.

use crate::linalg::{self, eigh, from_eigh, frob_inner};
use crate::operator::{DensityMatrix, HermitianOperator};
use crate::{C64, CMatrix};

#[derive(Debug, Clone, Copy)]
pub struct GilbertConfig {
    pub max_iters: usize,
    /// Improvement threshold on the linearized gap tr[(M - rho)(s - rho)].
    pub dist_tol: f64,
}

impl Default for GilbertConfig {
    fn default() -> Self {
        Self { max_iters: 2000, dist_tol: 1e-8 }
    }
}

#[derive(Debug, Clone)]
pub struct ProjectionOutcome {
    pub state: DensityMatrix,
    pub converged: bool,
    pub iterations: usize,
    /// Set when the input needed symmetrization beyond working precision.
    pub symmetrized: bool,
}

/// The linear-maximization oracle over the state space: argmax_rho tr(X rho)
/// is the projector onto the top eigenvector of X.
pub fn max_eigvec_oracle(x: &HermitianOperator) -> DensityMatrix {
    let (_, v) = eigh(x.matrix());
    let top = v.column(v.ncols() - 1).into_owned();
    DensityMatrix::pure(&top)
}

/// Gilbert's algorithm from the maximally mixed state.
pub fn project_to_state_space(m: &HermitianOperator, cfg: &GilbertConfig) -> ProjectionOutcome {
    project_matrix(m.matrix(), cfg)
}

/// As [`project_to_state_space`], accepting a raw matrix; non-Hermitian parts
/// are symmetrized away and flagged.
pub fn project_matrix(m: &CMatrix, cfg: &GilbertConfig) -> ProjectionOutcome {
    let symmetrized = !linalg::is_hermitian(m, 1e-10);
    let m = linalg::hermitize(m);
    let d = m.nrows();
    let mut rho = linalg::identity(d) * C64::from(1.0 / d as f64);
    let mut converged = false;
    let mut iterations = 0;
    for k in 0..cfg.max_iters {
        iterations = k;
        let residual = &m - &rho;
        let (_, v) = eigh(&residual);
        let top = v.column(d - 1);
        let mut s = CMatrix::zeros(d, d);
        for r in 0..d {
            for c in 0..d {
                s[(r, c)] = top[r] * top[c].conj();
            }
        }
        let dir = &s - &rho;
        let gap = frob_inner(&residual, &dir);
        if gap <= cfg.dist_tol {
            converged = true;
            break;
        }
        let denom = frob_inner(&dir, &dir);
        let gamma = (gap / denom).clamp(0.0, 1.0);
        rho += dir * C64::from(gamma);
    }
    ProjectionOutcome {
        state: DensityMatrix::new_unchecked(HermitianOperator::symmetrized(&rho)),
        converged,
        iterations,
        symmetrized,
    }
}

/// Exact Frobenius-nearest density matrix: diagonalize, project the spectrum
/// onto the probability simplex, reassemble.
pub fn eigen_simplex_projection(m: &HermitianOperator) -> DensityMatrix {
    let (w, v) = eigh(m.matrix());
    let spectrum: Vec<f64> = w.iter().copied().collect();
    let projected = linalg::simplex_projection(&spectrum);
    let mat = from_eigh(&nalgebra::DVector::from_vec(projected), &v, |x| x);
    DensityMatrix::new_unchecked(HermitianOperator::symmetrized(&mat))
}
