//! Finite-difference oracle checks for the analytic gradients.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use measopt::operator::HermitianOperator;
use measopt::povm::random_povm;
use measopt::qdsc::{qdsc_cost, qdsc_gradients, QdscData};
use measopt::tomography::{
    neg_log_likelihood, nll_gradient, probe_ensemble, simulate_counts, target_povm, Scenario,
};
use measopt::{C64, CMatrix};

fn random_hermitian(dim: usize, rng: &mut ChaCha8Rng) -> HermitianOperator {
    let x = CMatrix::from_fn(dim, dim, |_, _| {
        C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
    });
    HermitianOperator::symmetrized(&x)
}

/// Directional derivative of the NLL along a random Hermitian direction must
/// match the inner product with the analytic gradient.
#[test]
fn nll_gradient_matches_finite_differences() {
    let scenarios = [
        Scenario::OneQubit,
        Scenario::OneQutrit,
        Scenario::TwoQubits,
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(71);
    let mut checked = 0usize;
    for scenario in scenarios {
        let probes = probe_ensemble(scenario);
        let target = target_povm(scenario);
        for case in 0..7 {
            let counts =
                simulate_counts(&target, &probes, 5000, 100 + case).unwrap();
            let freqs = counts.frequencies();
            // interior point: a slightly mixed random POVM so all p_lm > 0
            let p = random_povm(target.dim(), target.len(), 200 + case).unwrap();
            let d = target.dim() as f64;
            let mix = 0.2;
            let free: Vec<HermitianOperator> = p.elements()[..p.len() - 1]
                .iter()
                .map(|e| {
                    e.scale(1.0 - mix)
                        .add(&HermitianOperator::identity(target.dim()).scale(mix / d))
                })
                .collect();
            let grads = nll_gradient(&free, &freqs, &probes).unwrap();
            for (l, grad) in grads.iter().enumerate() {
                let dir = random_hermitian(target.dim(), &mut rng);
                let analytic = grad.inner(&dir);
                let h = 1e-6;
                let mut plus = free.clone();
                plus[l] = plus[l].add(&dir.scale(h));
                let mut minus = free.clone();
                minus[l] = minus[l].sub(&dir.scale(h));
                let fd = (neg_log_likelihood(&plus, &freqs, &probes).unwrap()
                    - neg_log_likelihood(&minus, &freqs, &probes).unwrap())
                    / (2.0 * h);
                let denom = fd.abs().max(analytic.abs()).max(1e-8);
                assert!(
                    (fd - analytic).abs() / denom < 1e-5,
                    "{scenario:?} case {case} element {l}: fd {fd} vs analytic {analytic}"
                );
                checked += 1;
            }
        }
    }
    assert!(checked >= 20, "only {checked} directional checks ran");
}

#[test]
fn qdsc_gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for case in 0..20 {
        let count = 4;
        let raw = DMatrix::from_fn(count, count, |_, _| rng.gen::<f64>() - 0.5);
        let n_pinv = (&raw + raw.transpose()) * 0.5;
        let a = DVector::from_fn(count, |_, _| rng.gen::<f64>() * 0.5);
        let data = QdscData::new(
            (0..9)
                .map(|_| {
                    let mut f = DVector::from_fn(count, |_, _| rng.gen::<f64>() + 1e-3);
                    let s = f.sum();
                    f /= s;
                    f
                })
                .collect(),
        )
        .unwrap();
        let (grad_a, grad_np) = qdsc_gradients(&n_pinv, &a, &data).unwrap();
        let h = 1e-6;
        for i in 0..count {
            let mut ap = a.clone();
            ap[i] += h;
            let mut am = a.clone();
            am[i] -= h;
            let fd = (qdsc_cost(&n_pinv, &ap, &data).unwrap()
                - qdsc_cost(&n_pinv, &am, &data).unwrap())
                / (2.0 * h);
            let denom = fd.abs().max(grad_a[i].abs()).max(1e-8);
            assert!(
                (fd - grad_a[i]).abs() / denom < 1e-5,
                "case {case} grad_a[{i}]: fd {fd} vs {}",
                grad_a[i]
            );
        }
        for i in 0..count {
            for j in 0..count {
                let mut np = n_pinv.clone();
                np[(i, j)] += h;
                let mut nm = n_pinv.clone();
                nm[(i, j)] -= h;
                let fd = (qdsc_cost(&np, &a, &data).unwrap()
                    - qdsc_cost(&nm, &a, &data).unwrap())
                    / (2.0 * h);
                let denom = fd.abs().max(grad_np[(i, j)].abs()).max(1e-8);
                assert!(
                    (fd - grad_np[(i, j)]).abs() / denom < 1e-5,
                    "case {case} grad_np[({i},{j})]: fd {fd} vs {}",
                    grad_np[(i, j)]
                );
            }
        }
    }
}
