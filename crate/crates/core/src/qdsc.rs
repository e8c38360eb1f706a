//! Nonconvex quantum detector self-characterization for one qubit.
//!
//! The measurement is parametrized in Bloch space, Pi_l = a_l I + b_l . sigma,
//! and recovered from outcome statistics alone by minimizing a quartic cost
//! over the Gram matrix pseudoinverse N+ and the offset vector a, then
//! factoring back to Bloch vectors under a fixed gauge.

use std::time::Instant;

use nalgebra::{DMatrix, DVector, Vector3};
use serde::{Deserialize, Serialize};

use crate::operator::HermitianOperator;
use crate::optimizer::{IterationRecord, IterationTrace, RunStatus};
use crate::povm::{overall_povm_fidelity, FidelityReport, Povm};
use crate::tomography::{
    born_probabilities, simulate_counts, CountsTable, FrequencyTable, ProbeEnsemble,
};
use crate::{C64, CMatrix, Error, Result};

/// Pi = a I + bx sx + by sy + bz sz.
pub fn bloch_operator(a: f64, b: &Vector3<f64>) -> HermitianOperator {
    let m = CMatrix::from_row_slice(
        2,
        2,
        &[
            C64::new(a + b[2], 0.0),
            C64::new(b[0], -b[1]),
            C64::new(b[0], b[1]),
            C64::new(a - b[2], 0.0),
        ],
    );
    HermitianOperator::new(m).expect("Bloch operators are Hermitian by construction")
}

/// Bloch parametrization of a qubit POVM: a_l = tr(Pi_l)/2, Gram matrix
/// N_{il} = b_i . b_l, its rank-<=3 factor B (columns b_l) and pseudoinverse.
#[derive(Debug, Clone)]
pub struct BlochModel {
    pub a: DVector<f64>,
    /// 3 x L, columns are Bloch vectors in the gauge-fixed frame.
    pub b: DMatrix<f64>,
    pub n: DMatrix<f64>,
    pub n_pinv: DMatrix<f64>,
}

impl BlochModel {
    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.len() == 0
    }

    /// Rebuild the POVM elements Pi_l = a_l I + b_l . sigma (no projection).
    pub fn to_elements(&self) -> Vec<HermitianOperator> {
        (0..self.len())
            .map(|l| bloch_operator(self.a[l], &Vector3::from(self.b.fixed_view::<3, 1>(0, l))))
            .collect()
    }
}

pub const PINV_CUTOFF: f64 = 1e-10;

/// Moore-Penrose pseudoinverse of a real symmetric matrix; eigenvalues with
/// magnitude below `PINV_CUTOFF` times the largest are treated as zero.
pub fn sym_pinv(m: &DMatrix<f64>) -> DMatrix<f64> {
    let sym = (m + m.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let max = eig.eigenvalues.iter().fold(0.0f64, |acc, &w| acc.max(w.abs()));
    let inv = DVector::from_iterator(
        eig.eigenvalues.len(),
        eig.eigenvalues.iter().map(|&w| if w.abs() > PINV_CUTOFF * max { 1.0 / w } else { 0.0 }),
    );
    &eig.eigenvectors * DMatrix::from_diagonal(&inv) * eig.eigenvectors.transpose()
}

/// Decompose a qubit POVM into its Bloch model.
pub fn bloch_decompose(p: &Povm) -> Result<BlochModel> {
    if p.dim() != 2 {
        return Err(Error::UnsupportedDimension(p.dim(), "QDSC is qubit-only"));
    }
    let count = p.len();
    let a = DVector::from_iterator(count, p.elements().iter().map(|e| 0.5 * e.trace()));
    let mut n = DMatrix::zeros(count, count);
    for i in 0..count {
        for l in i..count {
            let v = 0.5 * p.element(i).inner(p.element(l))
                - 0.25 * p.element(i).trace() * p.element(l).trace();
            n[(i, l)] = v;
            n[(l, i)] = v;
        }
    }
    let factor = factor_to_bloch(&n)?;
    let n_pinv = sym_pinv(&n);
    Ok(BlochModel { a, b: factor.b, n, n_pinv })
}

#[derive(Debug, Clone)]
pub struct BlochFactor {
    /// 3 x L matrix with N = B^T B (after rank clamping).
    pub b: DMatrix<f64>,
    /// True when eigenvalues beyond the top 3 were clamped to zero.
    pub rank_clamped: bool,
}

/// Rank-<=3 Gram factor of a PSD matrix, gauge-fixed so b_1 is along +z and
/// b_2 lies in the xz-plane with b_{2,x} >= 0.
pub fn factor_to_bloch(n: &DMatrix<f64>) -> Result<BlochFactor> {
    let count = n.nrows();
    if n.ncols() != count {
        return Err(Error::DimensionMismatch { expected: count, got: n.ncols() });
    }
    let sym = (n + n.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let mut order: Vec<usize> = (0..count).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].partial_cmp(&eig.eigenvalues[i]).unwrap());
    if let Some(&last) = order.last() {
        if eig.eigenvalues[last] < -1e-9 {
            return Err(Error::invalid(format!(
                "Gram matrix has eigenvalue {}",
                eig.eigenvalues[last]
            )));
        }
    }
    let rank_clamped = order.iter().skip(3).any(|&i| eig.eigenvalues[i] > 1e-9);
    let mut b = DMatrix::zeros(3, count);
    for (row, &i) in order.iter().take(3).enumerate() {
        let scale = eig.eigenvalues[i].max(0.0).sqrt();
        for l in 0..count {
            b[(row, l)] = scale * eig.eigenvectors[(l, i)];
        }
    }
    Ok(BlochFactor { b: gauge_rotate(&b), rank_clamped })
}

// Rotate the frame so the first column is along +z and the second column lies
// in the xz-plane with non-negative x.
fn gauge_rotate(b: &DMatrix<f64>) -> DMatrix<f64> {
    let b1 = Vector3::from(b.fixed_view::<3, 1>(0, 0));
    let ez = if b1.norm() > 1e-12 { b1 / b1.norm() } else { Vector3::z() };
    let b2 = if b.ncols() > 1 {
        Vector3::from(b.fixed_view::<3, 1>(0, 1))
    } else {
        Vector3::zeros()
    };
    let b2p = b2 - ez * b2.dot(&ez);
    let ex = if b2p.norm() > 1e-12 {
        b2p / b2p.norm()
    } else {
        let t = if ez[0].abs() < 0.9 { Vector3::x() } else { Vector3::y() };
        let o = t - ez * t.dot(&ez);
        o / o.norm()
    };
    let ey = ez.cross(&ex);
    let mut out = DMatrix::zeros(3, b.ncols());
    for l in 0..b.ncols() {
        let col = Vector3::from(b.fixed_view::<3, 1>(0, l));
        out[(0, l)] = ex.dot(&col);
        out[(1, l)] = ey.dot(&col);
        out[(2, l)] = ez.dot(&col);
    }
    out
}

/// Per-probe outcome distributions f_m; each sums to one.
#[derive(Debug, Clone)]
pub struct QdscData {
    pub freq_vectors: Vec<DVector<f64>>,
}

impl QdscData {
    pub fn new(freq_vectors: Vec<DVector<f64>>) -> Result<Self> {
        if freq_vectors.is_empty() {
            return Err(Error::invalid("need at least one frequency vector"));
        }
        let len = freq_vectors[0].len();
        for (m, f) in freq_vectors.iter().enumerate() {
            if f.len() != len {
                return Err(Error::DimensionMismatch { expected: len, got: f.len() });
            }
            if f.iter().any(|&x| x < 0.0) || (f.sum() - 1.0).abs() > 1e-12 {
                return Err(Error::invalid(format!("frequency vector {m} is not a distribution")));
            }
        }
        Ok(Self { freq_vectors })
    }

    pub fn from_counts(counts: &CountsTable) -> Result<Self> {
        let f = counts.frequencies();
        Self::from_frequencies(&f)
    }

    pub fn from_frequencies(f: &FrequencyTable) -> Result<Self> {
        let m = f.matrix();
        Self::new((0..m.ncols()).map(|c| m.column(c).into_owned()).collect())
    }

    pub fn outcomes(&self) -> usize {
        self.freq_vectors[0].len()
    }
}

/// Eq-style quartic cost: sum_m [1 - (f_m - a)^T N+ (f_m - a)]^2.
pub fn qdsc_cost(n_pinv: &DMatrix<f64>, a: &DVector<f64>, data: &QdscData) -> Result<f64> {
    if a.len() != data.outcomes() || n_pinv.nrows() != a.len() || n_pinv.ncols() != a.len() {
        return Err(Error::DimensionMismatch { expected: data.outcomes(), got: a.len() });
    }
    let mut total = 0.0;
    for f in &data.freq_vectors {
        let r = f - a;
        let s = 1.0 - r.dot(&(n_pinv * &r));
        total += s * s;
    }
    Ok(total)
}

/// Analytic gradients of [`qdsc_cost`] with respect to a and N+ (treated as a
/// free matrix): with r_m = f_m - a and s_m = 1 - r_m^T N+ r_m,
/// grad_a = sum_m 2 s_m (N+ + N+^T) r_m and grad_Npinv = -2 sum_m s_m r_m r_m^T.
pub fn qdsc_gradients(
    n_pinv: &DMatrix<f64>,
    a: &DVector<f64>,
    data: &QdscData,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    if a.len() != data.outcomes() || n_pinv.nrows() != a.len() || n_pinv.ncols() != a.len() {
        return Err(Error::DimensionMismatch { expected: data.outcomes(), got: a.len() });
    }
    let count = a.len();
    let sym2 = n_pinv + n_pinv.transpose();
    let mut grad_a = DVector::zeros(count);
    let mut grad_np = DMatrix::zeros(count, count);
    for f in &data.freq_vectors {
        let r = f - a;
        let s = 1.0 - r.dot(&(n_pinv * &r));
        grad_a += (&sym2 * &r) * (2.0 * s);
        grad_np -= (&r * r.transpose()) * (2.0 * s);
    }
    Ok((grad_a, grad_np))
}

/// The qubit SIC POVM: half-projectors onto the tetrahedral Bloch directions.
pub fn sic_povm_qubit() -> Povm {
    let s = 1.0 / 3f64.sqrt();
    let dirs = [
        Vector3::new(s, s, s),
        Vector3::new(s, -s, -s),
        Vector3::new(-s, s, -s),
        Vector3::new(-s, -s, s),
    ];
    let elements = dirs
        .iter()
        .map(|v| bloch_operator(0.25, &(v * 0.25)))
        .collect();
    Povm::new(elements).expect("SIC elements sum to identity")
}

/// The 50 reference probe states: both sigma_z eigenstates plus a 6 x 8 polar
/// grid of pure states.
pub fn qdsc_probes() -> ProbeEnsemble {
    use crate::operator::DensityMatrix;
    let mut states = Vec::with_capacity(50);
    let mut labels = Vec::with_capacity(50);
    let mut push = |b: Vector3<f64>, label: String| {
        let op = bloch_operator(0.5, &(b * 0.5));
        states.push(DensityMatrix::new_unchecked(op));
        labels.push(label);
    };
    push(Vector3::z(), "+z".into());
    push(-Vector3::z(), "-z".into());
    for i in 1..=6 {
        for n in 1..=8 {
            let theta = i as f64 * std::f64::consts::FRAC_PI_4;
            let phi = n as f64 * std::f64::consts::FRAC_PI_8;
            push(
                Vector3::new(
                    theta.sin() * phi.cos(),
                    theta.sin() * phi.sin(),
                    theta.cos(),
                ),
                format!("theta={i}pi/4 phi={n}pi/8"),
            );
        }
    }
    ProbeEnsemble::new(states, labels).expect("50 probe states")
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QdscConfig {
    pub epsilon: f64,
    pub beta: f64,
    /// Step growth factor applied after each accepted step.
    pub growth: f64,
    pub stop_tol: f64,
    pub max_iters: usize,
}

impl Default for QdscConfig {
    fn default() -> Self {
        Self { epsilon: 1e-2, beta: 0.5, growth: 1.3, stop_tol: 1e-12, max_iters: 2000 }
    }
}

#[derive(Debug, Clone)]
pub struct QdscOutcome {
    pub povm: Povm,
    pub model: BlochModel,
    pub fidelity: FidelityReport,
    pub trace: IterationTrace,
    pub status: RunStatus,
    pub cost: f64,
    pub iterations: usize,
}

/// Reconstruct a physical POVM from an (a, B) model: each free element is
/// projected to the nearest PSD matrix of trace 2 a_l; the free elements are
/// then uniformly shrunk (bisection) until the closure element is PSD.
pub fn reconstruct_povm(a: &DVector<f64>, b: &DMatrix<f64>) -> Result<Povm> {
    let count = a.len();
    let mut free: Vec<HermitianOperator> = Vec::with_capacity(count - 1);
    for l in 0..count - 1 {
        let raw = bloch_operator(a[l].max(1e-6), &Vector3::from(b.fixed_view::<3, 1>(0, l)));
        free.push(project_to_trace_cone(&raw));
    }
    let last = closure(&free);
    if last.min_eigenvalue() < -1e-12 {
        let mut lo = 0.0f64;
        let mut hi = 1.0f64;
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            let scaled: Vec<HermitianOperator> =
                free.iter().map(|e| e.scale(1.0 - mid)).collect();
            if closure(&scaled).min_eigenvalue() >= -1e-12 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        free = free.iter().map(|e| e.scale(1.0 - hi)).collect();
    }
    let mut elements = free;
    elements.push(closure(&elements));
    Povm::new_unchecked(elements)
}

fn closure(free: &[HermitianOperator]) -> HermitianOperator {
    let mut last = HermitianOperator::identity(2);
    for e in free {
        last = last.sub(e);
    }
    last
}

// Nearest PSD matrix with the same trace: project the spectrum onto the
// scaled simplex.
fn project_to_trace_cone(m: &HermitianOperator) -> HermitianOperator {
    let t = m.trace().max(1e-12);
    let scaled = m.scale(1.0 / t);
    let state = crate::gilbert::eigen_simplex_projection(&scaled);
    state.op().scale(t)
}

fn reflect_y(b: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = b.clone();
    for l in 0..out.ncols() {
        out[(1, l)] = -out[(1, l)];
    }
    out
}

/// Gauge-fixed reconstruction target and its chirality mirror. The gauge
/// frame fixes rotations but not the y-reflection, which outcome statistics
/// cannot distinguish; fidelity is reported against the better branch.
fn gauge_targets(target: &Povm) -> Result<(Povm, Povm)> {
    let model = bloch_decompose(target)?;
    let direct = Povm::new_unchecked(
        BlochModel { b: model.b.clone(), ..model.clone() }.to_elements(),
    )?;
    let mirrored = Povm::new_unchecked(
        BlochModel { b: reflect_y(&model.b), ..model }.to_elements(),
    )?;
    Ok((direct, mirrored))
}

/// Moment-based initial model: a is the mean frequency vector; for pure
/// probes spread over the Bloch sphere, E[r r^T] ~ N/3, so N starts as three
/// times the residual second moment, clamped to rank 3.
fn initial_model(data: &QdscData) -> (DVector<f64>, DMatrix<f64>) {
    let count = data.outcomes();
    let m = data.freq_vectors.len() as f64;
    let mut a = DVector::zeros(count);
    for f in &data.freq_vectors {
        a += f;
    }
    a /= m;
    let mut second = DMatrix::zeros(count, count);
    for f in &data.freq_vectors {
        let r = f - &a;
        second += &r * r.transpose();
    }
    let n0 = second * (3.0 / m);
    let factor = factor_to_bloch(&n0).expect("second moment is PSD");
    let n_clamped = factor.b.transpose() * &factor.b;
    (a, sym_pinv(&n_clamped))
}

/// Run detector self-characterization on given outcome statistics; fidelity
/// in the trace and report is measured against `target` in the shared gauge.
pub fn run_qdsc_from_data(
    data: &QdscData,
    target: &Povm,
    cfg: &QdscConfig,
) -> Result<QdscOutcome> {
    if data.outcomes() != target.len() {
        return Err(Error::DimensionMismatch { expected: target.len(), got: data.outcomes() });
    }
    let started = Instant::now();
    let (gauge, gauge_mirror) = gauge_targets(target)?;
    let (mut a, mut n_pinv) = initial_model(data);

    // Block preconditioner: the a-gradient and N+-gradient live on very
    // different scales; equalize them once at the start.
    let (ga0, gn0) = qdsc_gradients(&n_pinv, &a, data)?;
    let a_scale = (gn0.norm() + 1e-12) / (ga0.norm() + 1e-12);

    let mut best = qdsc_cost(&n_pinv, &a, data)?;
    let mut eps = cfg.epsilon;
    let mut theta = 1.0f64;
    let mut comp_a = a.clone();
    let mut comp_np = n_pinv.clone();
    let mut trace = IterationTrace::default();
    let mut status = RunStatus::MaxIters;
    let mut iterations = 0;
    for k in 0..cfg.max_iters {
        iterations = k + 1;
        let (ga, gn) = qdsc_gradients(&comp_np, &comp_a, data)?;
        let cand_a = &comp_a - &ga * (eps * a_scale);
        let cand_np = &comp_np - &gn * eps;
        let val = qdsc_cost(&cand_np, &cand_a, data)?;
        let accepted = val < best - 1e-15;
        if accepted {
            let theta_next = 0.5 * (1.0 + (1.0 + 4.0 * theta * theta).sqrt());
            let momentum = (theta - 1.0) / theta_next;
            comp_a = &cand_a + (&cand_a - &a) * momentum;
            comp_np = &cand_np + (&cand_np - &n_pinv) * momentum;
            a = cand_a;
            n_pinv = cand_np;
            theta = theta_next;
            let improvement = best - val;
            best = val;
            eps *= cfg.growth;
            if improvement < cfg.stop_tol {
                status = RunStatus::Converged;
            }
        } else {
            eps *= cfg.beta;
            theta = 1.0;
            comp_a = a.clone();
            comp_np = n_pinv.clone();
        }
        let fid = {
            let factor = factor_to_bloch(&sym_pinv(&n_pinv))?;
            let povm = reconstruct_povm(&a, &factor.b)?;
            best_branch_fidelity(&povm, &gauge, &gauge_mirror)?.overall
        };
        trace.push(IterationRecord {
            k,
            objective: best,
            epsilon: eps,
            accepted,
            fid_overall: Some(fid),
            elapsed_ms: started.elapsed().as_secs_f64() * 1e3,
        });
        if status == RunStatus::Converged {
            break;
        }
        if eps < 1e-16 {
            status = RunStatus::Converged;
            break;
        }
    }

    let factor = factor_to_bloch(&sym_pinv(&n_pinv))?;
    let povm = reconstruct_povm(&a, &factor.b)?;
    let fidelity = best_branch_fidelity(&povm, &gauge, &gauge_mirror)?;
    let model = bloch_decompose(&povm)?;
    Ok(QdscOutcome { povm, model, fidelity, trace, status, cost: best, iterations })
}

fn best_branch_fidelity(p: &Povm, gauge: &Povm, mirror: &Povm) -> Result<FidelityReport> {
    let direct = overall_povm_fidelity(p, gauge)?;
    let reflected = overall_povm_fidelity(p, mirror)?;
    Ok(if reflected.overall > direct.overall { reflected } else { direct })
}

/// Simulate the SIC detector on the 50 reference probes and reconstruct it.
pub fn run_qdsc(seed: u64, shots: u64, cfg: &QdscConfig) -> Result<QdscOutcome> {
    let target = sic_povm_qubit();
    let probes = qdsc_probes();
    let counts = simulate_counts(&target, &probes, shots, seed)?;
    let data = QdscData::from_counts(&counts)?;
    run_qdsc_from_data(&data, &target, cfg)
}

/// Exact Born frequencies of the SIC detector, for noiseless runs.
pub fn exact_qdsc_data() -> Result<QdscData> {
    let target = sic_povm_qubit();
    let probes = qdsc_probes();
    let p = born_probabilities(&target, &probes)?;
    QdscData::new((0..p.ncols()).map(|m| p.column(m).into_owned()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::povm::is_valid_povm;

    #[test]
    fn sic_povm_identities() {
        let p = sic_povm_qubit();
        assert!(is_valid_povm(&p, 1e-12));
        for e in p.elements() {
            assert!((e.trace() - 0.5).abs() < 1e-12);
        }
        for i in 0..4 {
            for j in 0..4 {
                let overlap = p.element(i).inner(p.element(j));
                let expect = if i == j { 0.25 } else { 1.0 / 12.0 };
                assert!((overlap - expect).abs() < 1e-12, "({i},{j}): {overlap}");
            }
        }
    }

    #[test]
    fn probes_are_fifty_valid_states() {
        use crate::operator::is_valid_state;
        let probes = qdsc_probes();
        assert_eq!(probes.len(), 50);
        for s in &probes.states {
            assert!(is_valid_state(s.op(), 1e-12));
        }
    }

    #[test]
    fn decompose_known_values() {
        let z = Povm::new(vec![
            HermitianOperator::from_diagonal(&[1.0, 0.0]),
            HermitianOperator::from_diagonal(&[0.0, 1.0]),
        ])
        .unwrap();
        let m = bloch_decompose(&z).unwrap();
        assert!((m.a[0] - 0.5).abs() < 1e-12 && (m.a[1] - 0.5).abs() < 1e-12);
        let expect = [[0.25, -0.25], [-0.25, 0.25]];
        for i in 0..2 {
            for l in 0..2 {
                assert!((m.n[(i, l)] - expect[i][l]).abs() < 1e-12);
            }
        }
        // gauge: b1 along +z with length 1/2, b2 its negative
        assert!((m.b[(2, 0)] - 0.5).abs() < 1e-10);
        assert!((m.b[(2, 1)] + 0.5).abs() < 1e-10);
        assert!(m.b[(0, 0)].abs() < 1e-10 && m.b[(1, 0)].abs() < 1e-10);

        let halves = Povm::new(vec![
            HermitianOperator::from_diagonal(&[0.5, 0.5]),
            HermitianOperator::from_diagonal(&[0.5, 0.5]),
        ])
        .unwrap();
        let m = bloch_decompose(&halves).unwrap();
        assert!(m.n.iter().all(|&x| x.abs() < 1e-12));
        assert!(m.b.iter().all(|&x| x.abs() < 1e-12));

        let sic = bloch_decompose(&sic_povm_qubit()).unwrap();
        for l in 0..4 {
            assert!((sic.n[(l, l)] - 1.0 / 16.0).abs() < 1e-12);
        }
    }

    #[test]
    fn wrong_dimension_rejected() {
        let p = crate::povm::random_povm(3, 4, 1).unwrap();
        assert!(matches!(bloch_decompose(&p), Err(Error::UnsupportedDimension(3, _))));
    }

    #[test]
    fn factor_reconstructs_gram() {
        let p = crate::povm::random_povm(2, 5, 3).unwrap();
        let m = bloch_decompose(&p).unwrap();
        let recon = m.b.transpose() * &m.b;
        assert!((recon - &m.n).norm() < 1e-8);
        // gauge constraints
        assert!(m.b[(0, 0)].abs() < 1e-10);
        assert!(m.b[(1, 0)].abs() < 1e-10);
        assert!(m.b[(1, 1)].abs() < 1e-10);
        assert!(m.b[(2, 0)] >= -1e-12);
        assert!(m.b[(0, 1)] >= -1e-12);
    }

    #[test]
    fn cost_known_values() {
        let sic = sic_povm_qubit();
        let model = bloch_decompose(&sic).unwrap();
        let data = exact_qdsc_data().unwrap();
        let c = qdsc_cost(&model.n_pinv, &model.a, &data).unwrap();
        assert!(c.abs() < 1e-18, "cost at target: {c}");

        // f_m = a for all m -> each term is 1
        let a = model.a.clone();
        let uniform = QdscData::new(vec![a.clone(); 7]).unwrap();
        let c = qdsc_cost(&model.n_pinv, &a, &uniform).unwrap();
        assert!((c - 7.0).abs() < 1e-12);

        // zero N+ -> cost = M
        let zero = DMatrix::zeros(4, 4);
        let c = qdsc_cost(&zero, &model.a, &data).unwrap();
        assert!((c - 50.0).abs() < 1e-12);
    }

    #[test]
    fn gradients_zero_at_residual_free_data() {
        let sic = sic_povm_qubit();
        let model = bloch_decompose(&sic).unwrap();
        let data = exact_qdsc_data().unwrap();
        let (ga, gn) = qdsc_gradients(&model.n_pinv, &model.a, &data).unwrap();
        assert!(ga.norm() < 1e-12);
        assert!(gn.norm() < 1e-12);
    }

    #[test]
    fn decompose_rebuild_preserves_gauge_invariants() {
        let p = crate::povm::random_povm(2, 4, 8).unwrap();
        let m = bloch_decompose(&p).unwrap();
        let rebuilt = Povm::new_unchecked(m.to_elements()).unwrap();
        for (a, b) in p.elements().iter().zip(rebuilt.elements()) {
            assert!((a.trace() - b.trace()).abs() < 1e-9);
        }
        for i in 0..4 {
            for l in 0..4 {
                let orig = p.element(i).inner(p.element(l));
                let new = rebuilt.element(i).inner(rebuilt.element(l));
                assert!((orig - new).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn noiseless_run_recovers_target() {
        let data = exact_qdsc_data().unwrap();
        let out = run_qdsc_from_data(&data, &sic_povm_qubit(), &QdscConfig::default()).unwrap();
        assert!(out.cost < 1e-8, "final cost {}", out.cost);
        for (l, f) in out.fidelity.per_element.iter().enumerate() {
            assert!(*f >= 0.999, "element {l} fidelity {f}");
        }
        assert!(is_valid_povm(&out.povm, 1e-8));
    }
}
