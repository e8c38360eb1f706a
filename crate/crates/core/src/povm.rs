//! POVMs, validity checks and fidelity metrics.

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::linalg;
use crate::operator::{state_fidelity, DensityMatrix, HermitianOperator};
use crate::{C64, CMatrix, Error, Result};

pub const POVM_TOL: f64 = 1e-9;

/// An ordered list of L PSD operators summing to the identity.
#[derive(Debug, Clone, PartialEq)]
pub struct Povm {
    dim: usize,
    elements: Vec<HermitianOperator>,
}

impl Povm {
    pub fn new(elements: Vec<HermitianOperator>) -> Result<Self> {
        let p = Self::new_unchecked(elements)?;
        if !is_valid_povm(&p, POVM_TOL) {
            return Err(Error::invalid("elements are not PSD or do not sum to identity"));
        }
        Ok(p)
    }

    /// Shared-dimension check only; validity is the caller's concern.
    pub fn new_unchecked(elements: Vec<HermitianOperator>) -> Result<Self> {
        let dim = match elements.first() {
            Some(e) => e.dim(),
            None => return Err(Error::invalid("POVM must have at least one element")),
        };
        if elements.iter().any(|e| e.dim() != dim) {
            return Err(Error::invalid("POVM elements must share one dimension"));
        }
        Ok(Self { dim, elements })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn elements(&self) -> &[HermitianOperator] {
        &self.elements
    }

    pub fn element(&self, l: usize) -> &HermitianOperator {
        &self.elements[l]
    }

    pub fn into_elements(self) -> Vec<HermitianOperator> {
        self.elements
    }

    /// Relabels outcomes: new element i is old element perm[i].
    pub fn permuted(&self, perm: &[usize]) -> Self {
        Self {
            dim: self.dim,
            elements: perm.iter().map(|&i| self.elements[i].clone()).collect(),
        }
    }
}

/// True iff every element is PSD within tol and the sum is the identity
/// within tol per entry.
pub fn is_valid_povm(p: &Povm, tol: f64) -> bool {
    let mut sum = CMatrix::zeros(p.dim(), p.dim());
    for e in p.elements() {
        if e.min_eigenvalue() < -tol {
            return false;
        }
        sum += e.matrix();
    }
    sum -= linalg::identity(p.dim());
    sum.iter().all(|x| x.norm() <= tol * 10.0)
}

/// Per-element and trace-weighted overall fidelity between two POVMs.
#[derive(Debug, Clone)]
pub struct FidelityReport {
    pub per_element: Vec<f64>,
    pub overall: f64,
    pub weights: Vec<f64>,
}

/// Overall fidelity: per-element state fidelities of the normalized elements,
/// aggregated with weights sqrt(tr(P_l) tr(Q_l))/d.
pub fn overall_povm_fidelity(p: &Povm, q: &Povm) -> Result<FidelityReport> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch { expected: p.len(), got: q.len() });
    }
    if p.dim() != q.dim() {
        return Err(Error::DimensionMismatch { expected: p.dim(), got: q.dim() });
    }
    let d = p.dim() as f64;
    let mut per_element = Vec::with_capacity(p.len());
    let mut weights = Vec::with_capacity(p.len());
    let mut acc = 0.0;
    for (a, b) in p.elements().iter().zip(q.elements()) {
        let (ta, tb) = (a.trace(), b.trace());
        if ta < 1e-12 || tb < 1e-12 {
            per_element.push(1.0);
            weights.push(0.0);
            continue;
        }
        let fa = DensityMatrix::new_unchecked(a.scale(1.0 / ta));
        let fb = DensityMatrix::new_unchecked(b.scale(1.0 / tb));
        let f = state_fidelity(&fa, &fb)?;
        let w = (ta * tb).sqrt() / d;
        per_element.push(f);
        weights.push(w);
        acc += w * f.sqrt();
    }
    Ok(FidelityReport { per_element, overall: (acc * acc).clamp(0.0, 1.0), weights })
}

/// Deterministic random POVM: L Wishart-like PSD matrices A_l, whitened by
/// the inverse square root of their sum.
pub fn random_povm(dim: usize, count: usize, seed: u64) -> Result<Povm> {
    if dim < 2 || count < 2 {
        return Err(Error::invalid("random_povm requires dim >= 2 and L >= 2"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut parts = Vec::with_capacity(count);
    let mut sum = CMatrix::zeros(dim, dim);
    for _ in 0..count {
        let x = CMatrix::from_fn(dim, dim, |_, _| {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            C64::new(re, im)
        });
        let a = &x * x.adjoint();
        sum += &a;
        parts.push(a);
    }
    let whiten = linalg::psd_inv_sqrt(&sum, 1e-14);
    let elements = parts
        .into_iter()
        .map(|a| HermitianOperator::symmetrized(&(&whiten * a * &whiten)))
        .collect();
    Povm::new(elements)
}

/// Standard basis ket as a complex vector.
pub fn basis_ket(dim: usize, i: usize) -> DVector<C64> {
    let mut v = DVector::zeros(dim);
    v[i] = C64::new(1.0, 0.0);
    v
}
