//! Hermitian operators and density matrices.

use crate::linalg::{self, eigh};
use crate::{C64, CMatrix, Error, Result};

pub const HERMITICITY_TOL: f64 = 1e-12;
pub const STATE_TOL: f64 = 1e-9;

/// A d x d complex Hermitian matrix. Carrier for states, POVM elements and
/// gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianOperator {
    mat: CMatrix,
}

impl HermitianOperator {
    /// Accepts a matrix that is Hermitian within `HERMITICITY_TOL` per entry.
    pub fn new(mat: CMatrix) -> Result<Self> {
        if !mat.is_square() {
            return Err(Error::invalid("matrix must be square"));
        }
        if !linalg::is_hermitian(&mat, HERMITICITY_TOL) {
            return Err(Error::invalid("matrix is not Hermitian"));
        }
        // Enforce exact Hermiticity so downstream arithmetic stays clean.
        Ok(Self { mat: linalg::hermitize(&mat) })
    }

    /// Symmetrizes (m + m^H)/2 without rejecting; for inputs carrying
    /// accumulated floating error.
    pub fn symmetrized(mat: &CMatrix) -> Self {
        Self { mat: linalg::hermitize(mat) }
    }

    pub fn zeros(dim: usize) -> Self {
        Self { mat: CMatrix::zeros(dim, dim) }
    }

    pub fn identity(dim: usize) -> Self {
        Self { mat: linalg::identity(dim) }
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let d = diag.len();
        let mut mat = CMatrix::zeros(d, d);
        for (i, &x) in diag.iter().enumerate() {
            mat[(i, i)] = C64::from(x);
        }
        Self { mat }
    }

    /// Rank-1 projector |v><v| from a (not necessarily normalized) vector.
    pub fn projector(v: &nalgebra::DVector<C64>) -> Self {
        let n = v.norm();
        let u = v / C64::from(n);
        let d = u.len();
        let mut mat = CMatrix::zeros(d, d);
        for r in 0..d {
            for c in 0..d {
                mat[(r, c)] = u[r] * u[c].conj();
            }
        }
        Self { mat }
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.mat
    }

    pub fn into_matrix(self) -> CMatrix {
        self.mat
    }

    pub fn trace(&self) -> f64 {
        linalg::trace_re(&self.mat)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        linalg::min_eigenvalue(&self.mat)
    }

    pub fn frob_norm(&self) -> f64 {
        linalg::frob_norm(&self.mat)
    }

    /// Hilbert-Schmidt inner product tr(A B), real for Hermitian arguments.
    pub fn inner(&self, other: &Self) -> f64 {
        linalg::frob_inner(&self.mat, &other.mat)
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { mat: &self.mat * C64::from(s) }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self { mat: &self.mat + &other.mat }
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self { mat: &self.mat - &other.mat }
    }

    /// Component proportional to the identity removed: A - (tr A / d) I.
    pub fn traceless_part(&self) -> Self {
        let d = self.dim();
        let shift = self.trace() / d as f64;
        let mut mat = self.mat.clone();
        for i in 0..d {
            mat[(i, i)] -= C64::from(shift);
        }
        Self { mat }
    }
}

/// A valid quantum state: PSD, unit trace.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    op: HermitianOperator,
}

impl DensityMatrix {
    pub fn new(op: HermitianOperator) -> Result<Self> {
        if !is_valid_state(&op, STATE_TOL) {
            return Err(Error::invalid("not a valid density matrix (PSD, trace 1)"));
        }
        Ok(Self { op })
    }

    /// No validity check; for outputs whose construction guarantees validity.
    pub(crate) fn new_unchecked(op: HermitianOperator) -> Self {
        Self { op }
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self { op: HermitianOperator::identity(dim).scale(1.0 / dim as f64) }
    }

    pub fn pure(v: &nalgebra::DVector<C64>) -> Self {
        Self { op: HermitianOperator::projector(v) }
    }

    pub fn dim(&self) -> usize {
        self.op.dim()
    }

    pub fn op(&self) -> &HermitianOperator {
        &self.op
    }

    pub fn matrix(&self) -> &CMatrix {
        self.op.matrix()
    }
}

/// True iff min eigenvalue >= -tol and |trace - 1| <= tol.
pub fn is_valid_state(op: &HermitianOperator, tol: f64) -> bool {
    op.min_eigenvalue() >= -tol && (op.trace() - 1.0).abs() <= tol
}

/// Fidelity (tr sqrt(sqrt(s) r sqrt(s)))^2, clamped to [0, 1].
pub fn state_fidelity(sigma: &DensityMatrix, rho: &DensityMatrix) -> Result<f64> {
    if sigma.dim() != rho.dim() {
        return Err(Error::DimensionMismatch { expected: sigma.dim(), got: rho.dim() });
    }
    let sq = linalg::psd_sqrt(sigma.matrix());
    let inner = &sq * rho.matrix() * &sq;
    let (w, _) = eigh(&inner);
    let tr: f64 = w.iter().map(|&x| x.max(0.0).sqrt()).sum();
    Ok((tr * tr).clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;

    fn kv(amps: &[(f64, f64)]) -> DVector<C64> {
        DVector::from_iterator(amps.len(), amps.iter().map(|&(re, im)| C64::new(re, im)))
    }

    #[test]
    fn state_validity() {
        let pure = HermitianOperator::from_diagonal(&[1.0, 0.0]);
        assert!(is_valid_state(&pure, 1e-9));
        let mixed = HermitianOperator::from_diagonal(&[0.5, 0.5]);
        assert!(is_valid_state(&mixed, 1e-9));
        let bad = HermitianOperator::from_diagonal(&[1.2, -0.2]);
        assert!(!is_valid_state(&bad, 1e-9));
    }

    #[test]
    fn rejects_non_hermitian() {
        let m = CMatrix::from_row_slice(
            2,
            2,
            &[C64::new(0.0, 0.0), C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0)],
        );
        assert!(HermitianOperator::new(m).is_err());
    }

    #[test]
    fn fidelity_identical_orthogonal_overlap() {
        let z0 = DensityMatrix::pure(&kv(&[(1.0, 0.0), (0.0, 0.0)]));
        let z1 = DensityMatrix::pure(&kv(&[(0.0, 0.0), (1.0, 0.0)]));
        let plus = DensityMatrix::pure(&kv(&[(1.0, 0.0), (1.0, 0.0)]));
        assert!((state_fidelity(&z0, &z0).unwrap() - 1.0).abs() < 1e-12);
        assert!(state_fidelity(&z0, &z1).unwrap().abs() < 1e-12);
        assert!((state_fidelity(&z0, &plus).unwrap() - 0.5).abs() < 1e-10);
    }

    #[test]
    fn fidelity_dimension_mismatch() {
        let a = DensityMatrix::maximally_mixed(2);
        let b = DensityMatrix::maximally_mixed(3);
        assert!(state_fidelity(&a, &b).is_err());
    }
}
