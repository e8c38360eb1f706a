//! Projected gradient loops over POVM space.
//!
//! Both loops share one iteration skeleton: gradient step on the free
//! elements, per-element normalization and projection to the state space,
//! a scale subproblem for the element weights, and reassembly with the
//! eliminated element set to the completeness remainder. Steps that increase
//! the objective are rejected and shrink the step size by the step factor.

use std::fmt::Write as _;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::gilbert::{self, GilbertConfig, ProjectionOutcome};
use crate::operator::{DensityMatrix, HermitianOperator};
use crate::povm::{overall_povm_fidelity, Povm};
use crate::{Error, Result};

/// A differentiable objective over POVM space.
///
/// `grad` returns gradients with respect to the first L-1 elements after the
/// last element has been eliminated through the completeness constraint.
pub trait ObjectiveFunction: Sync {
    fn eval(&self, povm: &Povm) -> Result<f64>;
    fn grad(&self, povm: &Povm) -> Result<Vec<HermitianOperator>>;
}

#[derive(Debug, Clone, Copy)]
pub struct TSolverConfig {
    pub max_sweeps: usize,
    pub initial_step: f64,
    pub backtracks: usize,
    pub feasibility_bisections: usize,
}

impl Default for TSolverConfig {
    fn default() -> Self {
        Self { max_sweeps: 30, initial_step: 0.1, backtracks: 25, feasibility_bisections: 40 }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct OptimizerConfig {
    /// Initial gradient step size.
    pub epsilon: f64,
    /// Step factor in (0, 1) applied after a rejected step.
    pub beta: f64,
    /// Stop threshold on |F_k - F_{k-1}| over accepted steps.
    pub stop_tol: f64,
    pub max_iters: usize,
    pub gilbert: GilbertConfig,
    pub t_solver: TSolverConfig,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.1,
            beta: 0.5,
            stop_tol: 1e-8,
            max_iters: 5000,
            gilbert: GilbertConfig::default(),
            t_solver: TSolverConfig::default(),
        }
    }
}

/// Non-negative element scales for the free elements.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaleVector {
    t: Vec<f64>,
}

impl ScaleVector {
    pub fn new(t: Vec<f64>) -> Result<Self> {
        if t.iter().any(|&x| x < 0.0 || !x.is_finite()) {
            return Err(Error::invalid("scale vector entries must be finite and >= 0"));
        }
        Ok(Self { t })
    }

    pub fn zeros(n: usize) -> Self {
        Self { t: vec![0.0; n] }
    }

    pub fn values(&self) -> &[f64] {
        &self.t
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IterationRecord {
    pub k: usize,
    pub objective: f64,
    pub epsilon: f64,
    pub accepted: bool,
    pub fid_overall: Option<f64>,
    pub elapsed_ms: f64,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct IterationTrace {
    pub records: Vec<IterationRecord>,
}

impl IterationTrace {
    pub fn push(&mut self, rec: IterationRecord) {
        debug_assert!(self.records.last().map_or(true, |r| rec.k > r.k));
        self.records.push(rec);
    }

    /// Objective values of accepted steps, in order.
    pub fn accepted_objectives(&self) -> Vec<f64> {
        self.records.iter().filter(|r| r.accepted).map(|r| r.objective).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,F,eps,accepted,fid_overall,elapsed_ms\n");
        for r in &self.records {
            let fid = r.fid_overall.map_or(String::new(), |f| format!("{f:.17e}"));
            let _ = writeln!(
                out,
                "{},{:.17e},{:.17e},{},{},{:.3}",
                r.k, r.objective, r.epsilon, r.accepted, fid, r.elapsed_ms
            );
        }
        out
    }

    pub fn to_jsonl(&self) -> Result<String> {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r)?);
            out.push('\n');
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Converged,
    Stalled,
    MaxIters,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Dg,
    Apg,
}

impl std::str::FromStr for Algorithm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dg" => Ok(Algorithm::Dg),
            "apg" => Ok(Algorithm::Apg),
            other => Err(Error::invalid(format!("unknown algorithm '{other}'"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub povm: Povm,
    pub objective: f64,
    pub trace: IterationTrace,
    pub status: RunStatus,
    pub iterations: usize,
}

/// Raw gradient update on the free elements, Pi_l - eps * G_l.
pub fn dg_update(
    povm: &Povm,
    grad: &[HermitianOperator],
    epsilon: f64,
) -> Vec<HermitianOperator> {
    grad.iter()
        .enumerate()
        .map(|(l, g)| povm.element(l).sub(&g.scale(epsilon)))
        .collect()
}

/// Normalize to unit trace, then project to the state space. Near-zero
/// traces skip the normalization.
pub fn normalize_and_project(raw: &HermitianOperator, cfg: &GilbertConfig) -> ProjectionOutcome {
    let tr = raw.trace();
    if tr.abs() <= 1e-12 {
        gilbert::project_to_state_space(raw, cfg)
    } else {
        gilbert::project_to_state_space(&raw.scale(1.0 / tr), cfg)
    }
}

/// Pi_l = t_l rho_l for the free elements, last element the completeness
/// remainder. Errors if the remainder dips below -1e-8 in spectrum.
pub fn assemble_povm(states: &[DensityMatrix], t: &ScaleVector) -> Result<Povm> {
    let povm = assemble_unchecked(states, t.values())?;
    let last = povm.element(povm.len() - 1);
    if last.min_eigenvalue() < -1e-8 {
        return Err(Error::ConstraintViolation(
            "scale vector makes the last element non-PSD".into(),
        ));
    }
    Ok(povm)
}

fn assemble_unchecked(states: &[DensityMatrix], t: &[f64]) -> Result<Povm> {
    if states.is_empty() || states.len() != t.len() {
        return Err(Error::invalid("states and scales must be non-empty and equal length"));
    }
    let dim = states[0].dim();
    let mut remainder = HermitianOperator::identity(dim);
    let mut elements = Vec::with_capacity(states.len() + 1);
    for (s, &tl) in states.iter().zip(t) {
        let el = s.op().scale(tl);
        remainder = remainder.sub(&el);
        elements.push(el);
    }
    elements.push(remainder);
    Povm::new_unchecked(elements)
}

fn last_min_eig(states: &[DensityMatrix], t: &[f64]) -> f64 {
    let dim = states[0].dim();
    let mut remainder = HermitianOperator::identity(dim);
    for (s, &tl) in states.iter().zip(t) {
        remainder = remainder.sub(&s.op().scale(tl));
    }
    remainder.min_eigenvalue()
}

pub struct TSolveOutcome {
    pub t: ScaleVector,
    pub objective: f64,
    pub improved: bool,
}

/// Projected gradient descent on the scale vector: clip at zero, bisect back
/// toward the previous feasible point whenever the remainder loses positivity,
/// backtrack on the objective. Deliberately damped; a near-exact inner argmin
/// drives the iterate into boundary configurations the outer loop cannot
/// leave.
pub fn solve_t_subproblem(
    states: &[DensityMatrix],
    objective: &dyn ObjectiveFunction,
    t0: &[f64],
    cfg: &TSolverConfig,
) -> Result<TSolveOutcome> {
    let n = states.len();
    let mut t: Vec<f64> = t0.iter().map(|&x| x.max(0.0)).collect();
    // Pre-shrink the start toward the origin until feasible.
    let mut shrink = 0;
    while last_min_eig(states, &t) < -1e-12 {
        for x in t.iter_mut() {
            *x *= 0.5;
        }
        shrink += 1;
        if shrink > 60 {
            t = vec![0.0; n];
            break;
        }
    }
    let mut best = objective.eval(&assemble_unchecked(states, &t)?)?;
    let mut improved_any = false;
    for _ in 0..cfg.max_sweeps {
        let povm = assemble_unchecked(states, &t)?;
        let grads = objective.grad(&povm)?;
        let g: Vec<f64> = states.iter().zip(&grads).map(|(s, gl)| s.op().inner(gl)).collect();
        let mut alpha = cfg.initial_step;
        let mut improved = false;
        for _ in 0..cfg.backtracks {
            let candidate: Vec<f64> =
                t.iter().zip(&g).map(|(&ti, &gi)| (ti - alpha * gi).max(0.0)).collect();
            // Bisect the full vector toward the current feasible t.
            let mut lambda = 1.0;
            let mut feasible = None;
            for _ in 0..cfg.feasibility_bisections {
                let tc: Vec<f64> = t
                    .iter()
                    .zip(&candidate)
                    .map(|(&ti, &ci)| ti + lambda * (ci - ti))
                    .collect();
                if last_min_eig(states, &tc) >= -1e-12 {
                    feasible = Some(tc);
                    break;
                }
                lambda *= 0.5;
            }
            if let Some(tc) = feasible {
                let val = objective.eval(&assemble_unchecked(states, &tc)?)?;
                if val < best - 1e-15 {
                    t = tc;
                    best = val;
                    improved = true;
                    improved_any = true;
                    break;
                }
            }
            alpha *= 0.5;
        }
        if !improved {
            break;
        }
    }
    Ok(TSolveOutcome { t: ScaleVector::new(t)?, objective: best, improved: improved_any })
}

/// Reorders labels so that a chosen element plays the eliminated role, while
/// delegating to an objective defined with the last element eliminated.
struct EliminationAdapter<'a> {
    inner: &'a dyn ObjectiveFunction,
    /// User-order index of the eliminated element.
    eliminated: usize,
    count: usize,
}

impl<'a> EliminationAdapter<'a> {
    fn new(inner: &'a dyn ObjectiveFunction, eliminated: usize, count: usize) -> Self {
        Self { inner, eliminated, count }
    }

    /// Working order: free user indices ascending, then the eliminated one.
    fn user_order(&self) -> Vec<usize> {
        let mut order: Vec<usize> =
            (0..self.count).filter(|&l| l != self.eliminated).collect();
        order.push(self.eliminated);
        order
    }

    fn to_user(&self, povm: &Povm) -> Povm {
        let order = self.user_order();
        let mut inverse = vec![0usize; self.count];
        for (w, &u) in order.iter().enumerate() {
            inverse[u] = w;
        }
        povm.permuted(&inverse)
    }
}

impl ObjectiveFunction for EliminationAdapter<'_> {
    fn eval(&self, povm: &Povm) -> Result<f64> {
        self.inner.eval(&self.to_user(povm))
    }

    fn grad(&self, povm: &Povm) -> Result<Vec<HermitianOperator>> {
        let reduced = self.inner.grad(&self.to_user(povm))?;
        // reduced[l] = G_l - G_{L-1} for user l < L-1; define r_{L-1} = 0.
        let r = |l: usize| -> HermitianOperator {
            if l + 1 == self.count {
                HermitianOperator::zeros(povm.dim())
            } else {
                reduced[l].clone()
            }
        };
        let rj = r(self.eliminated);
        Ok(self
            .user_order()
            .iter()
            .take(self.count - 1)
            .map(|&u| r(u).sub(&rj))
            .collect())
    }
}

struct LoopState {
    povm: Povm,
    objective: f64,
    epsilon: f64,
    /// User-order index of the eliminated element; advanced on stall.
    eliminated: usize,
    /// Consecutive stalls without an improvement larger than stop_tol.
    stalls: usize,
    stall_was_underflow: Vec<bool>,
    // APG state
    theta: f64,
    companions: Vec<HermitianOperator>,
}

fn run_common(
    algorithm: Algorithm,
    objective: &dyn ObjectiveFunction,
    init: &Povm,
    cfg: &OptimizerConfig,
    reference: Option<&Povm>,
) -> Result<RunOutcome> {
    let count = init.len();
    let dim = init.dim();
    let f0 = objective.eval(init).map_err(|e| e.at_iteration(0))?;
    let mut st = LoopState {
        povm: init.clone(),
        objective: f0,
        epsilon: cfg.epsilon,
        eliminated: count - 1,
        stalls: 0,
        stall_was_underflow: Vec::new(),
        theta: 1.0,
        companions: init.elements().to_vec(),
    };
    let mut trace = IterationTrace::default();
    let start = Instant::now();
    let mut k = 0;
    let mut status = RunStatus::MaxIters;

    while k < cfg.max_iters {
        if st.stalls > count {
            status = if st.stall_was_underflow.iter().rev().take(count + 1).all(|&u| u) {
                RunStatus::Stalled
            } else {
                RunStatus::Converged
            };
            break;
        }
        k += 1;
        let adapter = EliminationAdapter::new(objective, st.eliminated, count);
        let order = adapter.user_order();

        // Gradient at the current iterate (DG) or the companions (APG).
        let base_elements: &[HermitianOperator] = match algorithm {
            Algorithm::Dg => st.povm.elements(),
            Algorithm::Apg => &st.companions,
        };
        let base = Povm::new_unchecked(base_elements.to_vec())?;
        let reduced = objective.grad(&base).map_err(|e| e.at_iteration(k))?;
        let r = |l: usize| -> HermitianOperator {
            if l + 1 == count { HermitianOperator::zeros(dim) } else { reduced[l].clone() }
        };
        let rj = r(st.eliminated);

        // Free-element update. The identity component of each gradient is
        // dropped: the scale subproblem restores traces exactly, and keeping
        // it lets the normalize-project-rescale composite reverse descent
        // directions.
        let mut states = Vec::with_capacity(count - 1);
        for &u in order.iter().take(count - 1) {
            let g = r(u).sub(&rj).traceless_part();
            let raw = base_elements[u].sub(&g.scale(st.epsilon));
            states.push(normalize_and_project(&raw, &cfg.gilbert).state);
        }
        let t0: Vec<f64> =
            order.iter().take(count - 1).map(|&u| st.povm.element(u).trace().max(0.0)).collect();

        let solved = solve_t_subproblem(&states, &adapter, &t0, &cfg.t_solver)
            .map_err(|e| e.at_iteration(k))?;
        let trial = solved.objective;
        let elapsed = start.elapsed().as_secs_f64() * 1e3;

        if trial > st.objective {
            // Rejected: shrink the step, keep the iterate.
            trace.push(IterationRecord {
                k,
                objective: trial,
                epsilon: st.epsilon,
                accepted: false,
                fid_overall: fid_to(reference, &st.povm)?,
                elapsed_ms: elapsed,
            });
            st.epsilon *= cfg.beta;
            st.theta = 1.0;
            st.companions = st.povm.elements().to_vec();
            if st.epsilon < 1e-14 {
                stall(&mut st, cfg, count, true);
            }
            continue;
        }

        let assembled = assemble_unchecked(&states, solved.t.values())?;
        let accepted_user = adapter.to_user(&assembled);
        let improvement = st.objective - trial;

        match algorithm {
            Algorithm::Apg => {
                let theta_next = 0.5 * (1.0 + (1.0 + 4.0 * st.theta * st.theta).sqrt());
                let momentum = (st.theta - 1.0) / theta_next;
                st.companions = accepted_user
                    .elements()
                    .iter()
                    .zip(st.povm.elements())
                    .map(|(new, old)| new.add(&new.sub(old).scale(momentum)))
                    .collect();
                st.theta = theta_next;
            }
            Algorithm::Dg => {}
        }
        st.povm = accepted_user;
        debug_assert!(
            crate::povm::is_valid_povm(&st.povm, 1e-8),
            "accepted iterate failed POVM validity at iteration {k}"
        );
        st.objective = trial;
        trace.push(IterationRecord {
            k,
            objective: trial,
            epsilon: st.epsilon,
            accepted: true,
            fid_overall: fid_to(reference, &st.povm)?,
            elapsed_ms: elapsed,
        });
        if improvement > cfg.stop_tol {
            st.stalls = 0;
        }
        if improvement < cfg.stop_tol {
            stall(&mut st, cfg, count, false);
        }
    }

    Ok(RunOutcome {
        povm: st.povm,
        objective: st.objective,
        trace,
        status,
        iterations: k,
    })
}

/// Advance the eliminated element and restart the step size; the composite
/// update regularly jams against the PSD boundary of whichever element is
/// eliminated, and a relabeling frees it.
fn stall(st: &mut LoopState, cfg: &OptimizerConfig, count: usize, underflow: bool) {
    st.stalls += 1;
    st.stall_was_underflow.push(underflow);
    st.eliminated = (st.eliminated + 1) % count;
    st.epsilon = cfg.epsilon;
    st.theta = 1.0;
    st.companions = st.povm.elements().to_vec();
}

fn fid_to(reference: Option<&Povm>, povm: &Povm) -> Result<Option<f64>> {
    match reference {
        Some(target) => Ok(Some(overall_povm_fidelity(povm, target)?.overall)),
        None => Ok(None),
    }
}

/// Direct-gradient loop.
pub fn run_dg(
    objective: &dyn ObjectiveFunction,
    init: &Povm,
    cfg: &OptimizerConfig,
) -> Result<RunOutcome> {
    run_common(Algorithm::Dg, objective, init, cfg, None)
}

/// Accelerated loop with companion operators and momentum restart.
pub fn run_apg(
    objective: &dyn ObjectiveFunction,
    init: &Povm,
    cfg: &OptimizerConfig,
) -> Result<RunOutcome> {
    run_common(Algorithm::Apg, objective, init, cfg, None)
}

/// As [`run_dg`]/[`run_apg`], logging the overall fidelity to a reference
/// POVM into the trace.
pub fn run_with_reference(
    algorithm: Algorithm,
    objective: &dyn ObjectiveFunction,
    init: &Povm,
    cfg: &OptimizerConfig,
    reference: &Povm,
) -> Result<RunOutcome> {
    run_common(algorithm, objective, init, cfg, Some(reference))
}

/// The APG momentum parameter sequence 1, (1+sqrt(5))/2, ...
pub fn theta_sequence(n: usize) -> Vec<f64> {
    let mut out: Vec<f64> = vec![1.0];
    for _ in 1..n {
        let prev = *out.last().unwrap();
        out.push(0.5 * (1.0 + (1.0 + 4.0 * prev * prev).sqrt()));
    }
    out
}
