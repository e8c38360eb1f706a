//! Maximum-likelihood quantum measurement tomography: probe ensembles, shot
//! simulation, the negative log-likelihood objective and its gradient, and
//! end-to-end reconstruction.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::linalg::eigh;
use crate::operator::{DensityMatrix, HermitianOperator};
use crate::optimizer::{
    run_with_reference, Algorithm, IterationTrace, ObjectiveFunction, OptimizerConfig, RunStatus,
};
use crate::povm::{basis_ket, overall_povm_fidelity, random_povm, FidelityReport, Povm};
use crate::{C64, CMatrix, Error, Result};

/// Known probe states with human-readable labels.
#[derive(Debug, Clone)]
pub struct ProbeEnsemble {
    pub states: Vec<DensityMatrix>,
    pub labels: Vec<String>,
}

impl ProbeEnsemble {
    pub fn new(states: Vec<DensityMatrix>, labels: Vec<String>) -> Result<Self> {
        if states.is_empty() || states.len() != labels.len() {
            return Err(Error::invalid("need at least one probe state, one label each"));
        }
        Ok(Self { states, labels })
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.states[0].dim()
    }
}

/// Raw outcome counts, one column per probe state.
#[derive(Debug, Clone)]
pub struct CountsTable {
    pub counts: DMatrix<u64>,
    pub shots_per_state: u64,
}

impl CountsTable {
    pub fn new(counts: DMatrix<u64>, shots_per_state: u64) -> Result<Self> {
        for m in 0..counts.ncols() {
            let sum: u64 = counts.column(m).iter().sum();
            if sum != shots_per_state {
                return Err(Error::invalid(format!(
                    "column {m} sums to {sum}, expected {shots_per_state}"
                )));
            }
        }
        Ok(Self { counts, shots_per_state })
    }

    pub fn frequencies(&self) -> FrequencyTable {
        let n = self.shots_per_state as f64;
        FrequencyTable { f: self.counts.map(|c| c as f64 / n) }
    }
}

/// Relative frequencies f_lm; columns sum to one.
#[derive(Debug, Clone)]
pub struct FrequencyTable {
    f: DMatrix<f64>,
}

impl FrequencyTable {
    pub fn new(f: DMatrix<f64>) -> Result<Self> {
        for m in 0..f.ncols() {
            let sum: f64 = f.column(m).iter().sum();
            if (sum - 1.0).abs() > 1e-12 {
                return Err(Error::invalid(format!("column {m} sums to {sum}, expected 1")));
            }
            if f.column(m).iter().any(|&x| x < 0.0) {
                return Err(Error::invalid("frequencies must be non-negative"));
            }
        }
        Ok(Self { f })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.f
    }

    pub fn outcomes(&self) -> usize {
        self.f.nrows()
    }
}

/// Born-rule outcome probabilities p_lm = tr(rho_m Pi_l), clamped to [0, 1].
pub fn born_probabilities(povm: &Povm, probes: &ProbeEnsemble) -> Result<DMatrix<f64>> {
    if povm.dim() != probes.dim() {
        return Err(Error::DimensionMismatch { expected: povm.dim(), got: probes.dim() });
    }
    let mut p = DMatrix::zeros(povm.len(), probes.len());
    for (m, rho) in probes.states.iter().enumerate() {
        for (l, e) in povm.elements().iter().enumerate() {
            p[(l, m)] = rho.op().inner(e).clamp(0.0, 1.0);
        }
    }
    Ok(p)
}

/// Multinomial shot simulation, one column per probe; deterministic per seed.
pub fn simulate_counts(
    povm: &Povm,
    probes: &ProbeEnsemble,
    shots: u64,
    seed: u64,
) -> Result<CountsTable> {
    if shots < 1 {
        return Err(Error::invalid("shots must be >= 1"));
    }
    let p = born_probabilities(povm, probes)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (rows, cols) = (p.nrows(), p.ncols());
    let mut counts = DMatrix::zeros(rows, cols);
    for m in 0..cols {
        let col: Vec<f64> = p.column(m).iter().copied().collect();
        let total: f64 = col.iter().sum();
        let mut remaining = shots;
        let mut mass = total;
        // Conditional binomial decomposition of the multinomial.
        for l in 0..rows - 1 {
            if remaining == 0 {
                break;
            }
            let q = if mass > 0.0 { (col[l] / mass).clamp(0.0, 1.0) } else { 0.0 };
            let draw = Binomial::new(remaining, q)
                .map_err(|e| Error::invalid(format!("binomial: {e}")))?
                .sample(&mut rng);
            counts[(l, m)] = draw;
            remaining -= draw;
            mass -= col[l];
        }
        counts[(rows - 1, m)] = remaining;
    }
    CountsTable::new(counts, shots)
}

fn full_povm_from_free(free: &[HermitianOperator]) -> Result<Povm> {
    if free.is_empty() {
        return Err(Error::invalid("need at least one free element"));
    }
    let dim = free[0].dim();
    let mut last = HermitianOperator::identity(dim);
    for e in free {
        last = last.sub(e);
    }
    let mut elements = free.to_vec();
    elements.push(last);
    Povm::new_unchecked(elements)
}

/// Negative log-likelihood with the last element eliminated:
/// -sum_{l<L,m} f_lm ln tr(rho_m Pi_l) - sum_m f_Lm ln tr(rho_m (I - sum Pi_l)).
///
/// Terms with f_lm = 0 contribute zero. A vanishing probability with
/// observed counts is a domain error.
pub fn neg_log_likelihood(
    free: &[HermitianOperator],
    freqs: &FrequencyTable,
    probes: &ProbeEnsemble,
) -> Result<f64> {
    let povm = full_povm_from_free(free)?;
    if freqs.outcomes() != povm.len() {
        return Err(Error::DimensionMismatch { expected: povm.len(), got: freqs.outcomes() });
    }
    let p = born_raw(&povm, probes)?;
    let f = freqs.matrix();
    let mut total = 0.0;
    for m in 0..p.ncols() {
        for l in 0..p.nrows() {
            let flm = f[(l, m)];
            if flm > 0.0 {
                let plm = p[(l, m)];
                if plm <= 1e-300 {
                    return Err(Error::Domain(format!(
                        "zero-probability outcome observed (l={l}, m={m})"
                    )));
                }
                total -= flm * plm.ln();
            }
        }
    }
    Ok(total)
}

// Born probabilities without clamping; free-parameter POVMs may be
// nonphysical mid-iteration.
fn born_raw(povm: &Povm, probes: &ProbeEnsemble) -> Result<DMatrix<f64>> {
    if povm.dim() != probes.dim() {
        return Err(Error::DimensionMismatch { expected: povm.dim(), got: probes.dim() });
    }
    let mut p = DMatrix::zeros(povm.len(), probes.len());
    for (m, rho) in probes.states.iter().enumerate() {
        for (l, e) in povm.elements().iter().enumerate() {
            p[(l, m)] = rho.op().inner(e);
        }
    }
    Ok(p)
}

/// Gradient of the negative log-likelihood with respect to the free elements:
/// -sum_m (f_lm/p_lm - f_Lm/p_Lm) rho_m, with p_Lm = 1 - sum_{l<L} p_lm.
pub fn nll_gradient(
    free: &[HermitianOperator],
    freqs: &FrequencyTable,
    probes: &ProbeEnsemble,
) -> Result<Vec<HermitianOperator>> {
    let povm = full_povm_from_free(free)?;
    let p = born_raw(&povm, probes)?;
    let f = freqs.matrix();
    let count = povm.len();
    let dim = povm.dim();
    let mut grads = vec![HermitianOperator::zeros(dim); count - 1];
    for m in 0..p.ncols() {
        let p_last = p[(count - 1, m)];
        let f_last = f[(count - 1, m)];
        for (l, grad) in grads.iter_mut().enumerate() {
            let flm = f[(l, m)];
            let mut coeff = 0.0;
            if flm > 0.0 {
                let plm = p[(l, m)];
                if plm <= 1e-300 {
                    return Err(Error::Domain(format!(
                        "zero-probability outcome observed (l={l}, m={m})"
                    )));
                }
                coeff += flm / plm;
            }
            if f_last > 0.0 {
                if p_last <= 1e-300 {
                    return Err(Error::Domain(format!(
                        "zero-probability outcome observed (l={}, m={m})",
                        count - 1
                    )));
                }
                coeff -= f_last / p_last;
            }
            if coeff != 0.0 {
                *grad = grad.sub(&probes.states[m].op().scale(coeff));
            }
        }
    }
    Ok(grads)
}

/// The NLL objective used by the optimizer. Probabilities are floored at a
/// tiny positive value so that trial steps crossing the feasibility boundary
/// evaluate to a huge-but-finite objective and get rejected instead of
/// aborting the run.
pub struct NllObjective {
    freqs: FrequencyTable,
    probes: ProbeEnsemble,
}

impl NllObjective {
    pub fn new(freqs: FrequencyTable, probes: ProbeEnsemble) -> Self {
        Self { freqs, probes }
    }
}

const PROB_FLOOR: f64 = 1e-12;

impl ObjectiveFunction for NllObjective {
    fn eval(&self, povm: &Povm) -> Result<f64> {
        let p = born_raw(povm, &self.probes)?;
        let f = self.freqs.matrix();
        let mut total = 0.0;
        for m in 0..p.ncols() {
            for l in 0..p.nrows() {
                let flm = f[(l, m)];
                if flm > 0.0 {
                    total -= flm * p[(l, m)].max(PROB_FLOOR).ln();
                }
            }
        }
        Ok(total)
    }

    fn grad(&self, povm: &Povm) -> Result<Vec<HermitianOperator>> {
        let p = born_raw(povm, &self.probes)?;
        let f = self.freqs.matrix();
        let count = povm.len();
        let dim = povm.dim();
        let mut grads = vec![HermitianOperator::zeros(dim); count - 1];
        for m in 0..p.ncols() {
            let p_last = p[(count - 1, m)].max(PROB_FLOOR);
            let f_last = f[(count - 1, m)];
            for (l, grad) in grads.iter_mut().enumerate() {
                let flm = f[(l, m)];
                let mut coeff = 0.0;
                if flm > 0.0 {
                    coeff += flm / p[(l, m)].max(PROB_FLOOR);
                }
                if f_last > 0.0 {
                    coeff -= f_last / p_last;
                }
                if coeff != 0.0 {
                    *grad = grad.sub(&self.probes.states[m].op().scale(coeff));
                }
            }
        }
        Ok(grads)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    OneQubit,
    OneQutrit,
    TwoQubits,
    TwoQutrits,
}

impl std::str::FromStr for Scenario {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "one-qubit" => Ok(Scenario::OneQubit),
            "one-qutrit" => Ok(Scenario::OneQutrit),
            "two-qubits" => Ok(Scenario::TwoQubits),
            "two-qutrits" => Ok(Scenario::TwoQutrits),
            other => Err(Error::invalid(format!("unknown scenario '{other}'"))),
        }
    }
}

impl Scenario {
    pub fn name(&self) -> &'static str {
        match self {
            Scenario::OneQubit => "one-qubit",
            Scenario::OneQutrit => "one-qutrit",
            Scenario::TwoQubits => "two-qubits",
            Scenario::TwoQutrits => "two-qutrits",
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Scenario::OneQubit => 2,
            Scenario::OneQutrit => 3,
            Scenario::TwoQubits => 4,
            Scenario::TwoQutrits => 9,
        }
    }

    /// Shot count per probe state used in the reference simulations.
    pub fn default_shots(&self) -> u64 {
        match self {
            Scenario::OneQubit => 300,
            Scenario::OneQutrit => 100_000,
            Scenario::TwoQubits => 100_000,
            Scenario::TwoQutrits => 500_000,
        }
    }
}

type Ket = DVector<C64>;

fn superpose(a: &Ket, b: &Ket, phase: f64) -> Ket {
    let w = C64::new(0.0, phase).exp();
    (a + b * w) / C64::from(2f64.sqrt())
}

fn kron(a: &Ket, b: &Ket) -> Ket {
    let mut out = DVector::zeros(a.len() * b.len());
    for i in 0..a.len() {
        for j in 0..b.len() {
            out[i * b.len() + j] = a[i] * b[j];
        }
    }
    out
}

const PHASES: [f64; 3] = [0.0, std::f64::consts::FRAC_PI_2, std::f64::consts::PI];
const PHASE_NAMES: [&str; 3] = ["0", "pi/2", "pi"];

fn qutrit_superpositions() -> Vec<(Ket, String)> {
    let e: Vec<Ket> = (0..3).map(|i| basis_ket(3, i)).collect();
    let names = ["-1z", "0z", "1z"];
    let mut out = Vec::new();
    for &(i, k) in &[(0usize, 1usize), (1, 2), (0, 2)] {
        for (p, &phase) in PHASES.iter().enumerate() {
            out.push((
                superpose(&e[i], &e[k], phase),
                format!("(|{}>+e^{{i{}}}|{}>)/sqrt2", names[i], PHASE_NAMES[p], names[k]),
            ));
        }
    }
    out
}

/// The probe states of the four reference scenarios.
pub fn probe_ensemble(scenario: Scenario) -> ProbeEnsemble {
    let mut states = Vec::new();
    let mut labels = Vec::new();
    let mut push = |v: Ket, label: String| {
        states.push(DensityMatrix::pure(&v));
        labels.push(label);
    };
    match scenario {
        Scenario::OneQubit => {
            let z0 = basis_ket(2, 0);
            let z1 = basis_ket(2, 1);
            push(z0.clone(), "|0z>".into());
            push(z1.clone(), "|1z>".into());
            push(superpose(&z0, &z1, 0.0), "|+x>".into());
            push(superpose(&z0, &z1, std::f64::consts::PI), "|-x>".into());
            push(superpose(&z0, &z1, std::f64::consts::FRAC_PI_2), "|+y>".into());
            push(superpose(&z0, &z1, -std::f64::consts::FRAC_PI_2), "|-y>".into());
        }
        Scenario::OneQutrit => {
            let names = ["-1z", "0z", "1z"];
            for i in 0..3 {
                push(basis_ket(3, i), format!("|{}>", names[i]));
            }
            for (v, label) in qutrit_superpositions() {
                push(v, label);
            }
        }
        Scenario::TwoQubits => {
            let z: Vec<Ket> = (0..2).map(|i| basis_ket(2, i)).collect();
            let basis: Vec<(Ket, String)> = (0..2)
                .flat_map(|a| {
                    let z = z.clone();
                    (0..2).map(move |b| (kron(&z[a], &z[b]), format!("|{a}z{b}z>")))
                })
                .collect();
            for (v, label) in &basis {
                push(v.clone(), label.clone());
            }
            for i in 0..4 {
                for k in (i + 1)..4 {
                    for (p, &phase) in PHASES.iter().enumerate() {
                        push(
                            superpose(&basis[i].0, &basis[k].0, phase),
                            format!(
                                "({}+e^{{i{}}}{})/sqrt2",
                                basis[i].1, PHASE_NAMES[p], basis[k].1
                            ),
                        );
                    }
                }
            }
        }
        Scenario::TwoQutrits => {
            let names = ["-1z", "0z", "1z"];
            let e: Vec<Ket> = (0..3).map(|i| basis_ket(3, i)).collect();
            for a in 0..3 {
                for b in 0..3 {
                    push(kron(&e[a], &e[b]), format!("|{} {}>", names[a], names[b]));
                }
            }
            // 27 superpositions on the second party, 9 on the first.
            let sup = qutrit_superpositions();
            for a in 0..3 {
                for (v, label) in &sup {
                    push(kron(&e[a], v), format!("|{}> x {}", names[a], label));
                }
            }
            for (v, label) in &sup {
                push(kron(v, &e[1]), format!("{} x |0z>", label));
            }
        }
    }
    ProbeEnsemble::new(states, labels).expect("scenario ensembles are non-empty")
}

/// Eigenbasis of the spin-1 J_x operator, ascending eigenvalue:
/// |-1x>, |0x>, |1x>.
fn qutrit_x_basis() -> Vec<Ket> {
    let s = C64::from(1.0 / 2f64.sqrt());
    let jx = CMatrix::from_row_slice(
        3,
        3,
        &[
            C64::from(0.0), s, C64::from(0.0),
            s, C64::from(0.0), s,
            C64::from(0.0), s, C64::from(0.0),
        ],
    );
    let (_, v) = eigh(&jx);
    (0..3).map(|i| v.column(i).into_owned()).collect()
}

fn qubit_x_basis() -> Vec<Ket> {
    let z0 = basis_ket(2, 0);
    let z1 = basis_ket(2, 1);
    vec![superpose(&z0, &z1, 0.0), superpose(&z0, &z1, std::f64::consts::PI)]
}

/// The x-basis projective target POVM of each scenario.
pub fn target_povm(scenario: Scenario) -> Povm {
    let elements: Vec<HermitianOperator> = match scenario {
        Scenario::OneQubit => {
            qubit_x_basis().iter().map(HermitianOperator::projector).collect()
        }
        Scenario::OneQutrit => {
            qutrit_x_basis().iter().map(HermitianOperator::projector).collect()
        }
        Scenario::TwoQubits => {
            let x = qubit_x_basis();
            [(0, 0), (0, 1), (1, 0), (1, 1)]
                .iter()
                .map(|&(a, b)| HermitianOperator::projector(&kron(&x[a], &x[b])))
                .collect()
        }
        Scenario::TwoQutrits => {
            // Index 0 is -1x, 1 is 0x, 2 is 1x.
            let x = qutrit_x_basis();
            [(1, 2), (1, 0), (2, 1), (2, 0), (1, 1), (0, 1), (2, 2), (0, 2), (0, 0)]
                .iter()
                .map(|&(a, b)| HermitianOperator::projector(&kron(&x[a], &x[b])))
                .collect()
        }
    };
    Povm::new(elements).expect("target POVMs are complete projective measurements")
}

#[derive(Debug, Clone)]
pub struct TomographyOutcome {
    pub povm: Povm,
    pub fidelity: FidelityReport,
    pub trace: IterationTrace,
    pub status: RunStatus,
    pub objective: f64,
    pub iterations: usize,
}

/// Simulate counts from the scenario target, reconstruct by MLE with the
/// chosen algorithm from a seeded random initial POVM.
pub fn run_tomography(
    scenario: Scenario,
    algorithm: Algorithm,
    shots: u64,
    seed: u64,
    cfg: &OptimizerConfig,
) -> Result<TomographyOutcome> {
    let probes = probe_ensemble(scenario);
    let target = target_povm(scenario);
    let counts = simulate_counts(&target, &probes, shots, seed)?;
    let objective = NllObjective::new(counts.frequencies(), probes);
    let init = random_povm(target.dim(), target.len(), seed.wrapping_add(1))?;
    let out = run_with_reference(algorithm, &objective, &init, cfg, &target)?;
    let fidelity = overall_povm_fidelity(&out.povm, &target)?;
    Ok(TomographyOutcome {
        povm: out.povm,
        fidelity,
        trace: out.trace,
        status: out.status,
        objective: out.objective,
        iterations: out.iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn xz_povms() -> (Povm, ProbeEnsemble) {
        let target = target_povm(Scenario::OneQubit);
        let probes = probe_ensemble(Scenario::OneQubit);
        (target, probes)
    }

    #[test]
    fn scenario_sizes() {
        assert_eq!(probe_ensemble(Scenario::OneQubit).len(), 6);
        assert_eq!(probe_ensemble(Scenario::OneQutrit).len(), 12);
        assert_eq!(probe_ensemble(Scenario::TwoQubits).len(), 22);
        assert_eq!(probe_ensemble(Scenario::TwoQutrits).len(), 45);
    }

    #[test]
    fn targets_are_valid_projective() {
        use crate::povm::is_valid_povm;
        for s in [
            Scenario::OneQubit,
            Scenario::OneQutrit,
            Scenario::TwoQubits,
            Scenario::TwoQutrits,
        ] {
            let t = target_povm(s);
            assert_eq!(t.dim(), s.dim());
            assert!(is_valid_povm(&t, 1e-9), "{:?}", s);
            for e in t.elements() {
                assert!((e.trace() - 1.0).abs() < 1e-9);
            }
        }
        assert_eq!(target_povm(Scenario::TwoQutrits).len(), 9);
    }

    #[test]
    fn born_probability_columns() {
        let (target, probes) = xz_povms();
        let p = born_probabilities(&target, &probes).unwrap();
        for m in 0..probes.len() {
            let s: f64 = p.column(m).iter().sum();
            assert!((s - 1.0).abs() < 1e-9);
        }
        // probes 2 and 3 are the x eigenstates themselves
        assert!((p[(0, 2)] - 1.0).abs() < 1e-10);
        assert!(p[(1, 2)].abs() < 1e-10);
        // z eigenstate: 50/50 in the x basis
        assert!((p[(0, 0)] - 0.5).abs() < 1e-10);
    }

    #[test]
    fn simulate_counts_deterministic_and_exact_for_certain_outcomes() {
        let (target, probes) = xz_povms();
        let a = simulate_counts(&target, &probes, 300, 9).unwrap();
        let b = simulate_counts(&target, &probes, 300, 9).unwrap();
        assert_eq!(a.counts, b.counts);
        // probe |+x> always yields outcome 0
        assert_eq!(a.counts[(0, 2)], 300);
        assert_eq!(a.counts[(1, 2)], 0);
    }

    #[test]
    fn nll_known_values() {
        let (_, probes) = xz_povms();
        // exact data from {I/2, I/2}: every outcome probability 1/2
        let halves = Povm::new(vec![
            HermitianOperator::from_diagonal(&[0.5, 0.5]),
            HermitianOperator::from_diagonal(&[0.5, 0.5]),
        ])
        .unwrap();
        let m = probes.len();
        let uniform =
            FrequencyTable::new(DMatrix::from_element(2, m, 0.5)).unwrap();
        let free = vec![halves.element(0).clone()];
        let val = neg_log_likelihood(&free, &uniform, &probes).unwrap();
        assert!((val - m as f64 * 2f64.ln()).abs() < 1e-12);

        // frequencies concentrated on certain outcomes -> NLL = 0
        let z_target = Povm::new(vec![
            HermitianOperator::from_diagonal(&[1.0, 0.0]),
            HermitianOperator::from_diagonal(&[0.0, 1.0]),
        ])
        .unwrap();
        let z_probes = ProbeEnsemble::new(
            vec![
                DensityMatrix::new(HermitianOperator::from_diagonal(&[1.0, 0.0])).unwrap(),
                DensityMatrix::new(HermitianOperator::from_diagonal(&[0.0, 1.0])).unwrap(),
            ],
            vec!["|0z>".into(), "|1z>".into()],
        )
        .unwrap();
        let f = FrequencyTable::new(DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0])).unwrap();
        let free = vec![z_target.element(0).clone()];
        let val = neg_log_likelihood(&free, &f, &z_probes).unwrap();
        assert!(val.abs() < 1e-12);
    }

    #[test]
    fn zero_probability_with_observation_is_domain_error() {
        let (_, probes) = xz_povms();
        // POVM {|0z><0z|, |1z><1z|}; probe |0z> never produces outcome 1,
        // but claim it was observed.
        let m = probes.len();
        let mut f = DMatrix::from_element(2, m, 0.5);
        f[(0, 0)] = 0.0;
        f[(1, 0)] = 1.0;
        let f = FrequencyTable::new(f).unwrap();
        let free = vec![HermitianOperator::from_diagonal(&[1.0, 0.0])];
        assert!(matches!(
            neg_log_likelihood(&free, &f, &probes),
            Err(Error::Domain(_))
        ));
    }
}
