//! Dense complex Hermitian linear algebra helpers.

use nalgebra::DVector;

use crate::{C64, CMatrix};

/// Hermitian eigendecomposition with eigenvalues sorted ascending.
///
/// Returns `(eigenvalues, eigenvectors)` with eigenvectors as columns, so that
/// `m = V * diag(w) * V^H`.
pub fn eigh(m: &CMatrix) -> (DVector<f64>, CMatrix) {
    let se = m.clone().symmetric_eigen();
    let d = m.nrows();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| se.eigenvalues[a].partial_cmp(&se.eigenvalues[b]).unwrap());
    let w = DVector::from_iterator(d, order.iter().map(|&i| se.eigenvalues[i]));
    let mut v = CMatrix::zeros(d, d);
    for (j, &i) in order.iter().enumerate() {
        v.set_column(j, &se.eigenvectors.column(i));
    }
    (w, v)
}

/// Rebuild `V * diag(f(w)) * V^H` from an eigendecomposition.
pub fn from_eigh(w: &DVector<f64>, v: &CMatrix, f: impl Fn(f64) -> f64) -> CMatrix {
    let d = v.nrows();
    let mut out = CMatrix::zeros(d, d);
    for j in 0..d {
        let col = v.column(j);
        let fw = f(w[j]);
        if fw != 0.0 {
            // out += fw * col * col^H
            for r in 0..d {
                for c in 0..d {
                    out[(r, c)] += C64::from(fw) * col[r] * col[c].conj();
                }
            }
        }
    }
    out
}

pub fn identity(d: usize) -> CMatrix {
    CMatrix::identity(d, d)
}

/// Real part of tr(a^H b); the Frobenius (Hilbert-Schmidt) inner product for
/// Hermitian arguments.
pub fn frob_inner(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x.conj() * y).re).sum()
}

pub fn frob_norm(a: &CMatrix) -> f64 {
    frob_inner(a, a).sqrt()
}

pub fn trace_re(a: &CMatrix) -> f64 {
    a.trace().re
}

pub fn is_hermitian(m: &CMatrix, tol: f64) -> bool {
    if !m.is_square() {
        return false;
    }
    let d = m.nrows();
    for r in 0..d {
        for c in r..d {
            if (m[(r, c)] - m[(c, r)].conj()).norm() > tol {
                return false;
            }
        }
    }
    true
}

/// (m + m^H)/2.
pub fn hermitize(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * C64::from(0.5)
}

pub fn min_eigenvalue(m: &CMatrix) -> f64 {
    let (w, _) = eigh(m);
    w[0]
}

/// PSD square root with negative eigenvalues clamped to zero.
pub fn psd_sqrt(m: &CMatrix) -> CMatrix {
    let (w, v) = eigh(m);
    from_eigh(&w, &v, |x| x.max(0.0).sqrt())
}

/// Inverse square root on the support; eigenvalues below `cutoff` are dropped.
pub fn psd_inv_sqrt(m: &CMatrix, cutoff: f64) -> CMatrix {
    let (w, v) = eigh(m);
    from_eigh(&w, &v, |x| if x > cutoff { 1.0 / x.sqrt() } else { 0.0 })
}

/// Euclidean projection of a real vector onto the probability simplex
/// (sort-and-threshold).
pub fn simplex_projection(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut css = 0.0;
    let mut theta = 0.0;
    for (i, &ui) in u.iter().enumerate() {
        css += ui;
        let cand = (1.0 - css) / (i as f64 + 1.0);
        if ui + cand > 0.0 {
            theta = cand;
        }
    }
    v.iter().map(|&x| (x + theta).max(0.0)).collect()
}
