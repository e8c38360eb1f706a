use measopt::optimizer::{Algorithm, OptimizerConfig};
use measopt::tomography::{run_tomography, Scenario};

#[test]
fn one_qubit_dg_reaches_high_fidelity() {
    let cfg = OptimizerConfig::default();
    let out = run_tomography(Scenario::OneQubit, Algorithm::Dg, 300, 1, &cfg).unwrap();
    println!(
        "one-qubit dg: fid {:.5} iters {} status {:?}",
        out.fidelity.overall, out.iterations, out.status
    );
    assert!(out.fidelity.overall > 0.98, "fidelity {}", out.fidelity.overall);
}

#[test]
fn one_qubit_apg_reaches_high_fidelity() {
    let cfg = OptimizerConfig::default();
    let out = run_tomography(Scenario::OneQubit, Algorithm::Apg, 300, 1, &cfg).unwrap();
    println!(
        "one-qubit apg: fid {:.5} iters {} status {:?}",
        out.fidelity.overall, out.iterations, out.status
    );
    assert!(out.fidelity.overall > 0.98, "fidelity {}", out.fidelity.overall);
}

#[test]
fn one_qutrit_dg_seed1() {
    let cfg = OptimizerConfig::default();
    let t = std::time::Instant::now();
    let out = run_tomography(Scenario::OneQutrit, Algorithm::Dg, 100_000, 1, &cfg).unwrap();
    println!(
        "one-qutrit dg: fid {:.5} iters {} status {:?} in {:.1}s",
        out.fidelity.overall, out.iterations, out.status, t.elapsed().as_secs_f64()
    );
    assert!(out.fidelity.overall > 0.99, "fidelity {}", out.fidelity.overall);
}

#[test]
fn two_qubits_apg_seed1() {
    let cfg = OptimizerConfig::default();
    let t = std::time::Instant::now();
    let out = run_tomography(Scenario::TwoQubits, Algorithm::Apg, 100_000, 1, &cfg).unwrap();
    println!(
        "two-qubits apg: fid {:.5} iters {} status {:?} in {:.1}s",
        out.fidelity.overall, out.iterations, out.status, t.elapsed().as_secs_f64()
    );
    assert!(out.fidelity.overall > 0.99, "fidelity {}", out.fidelity.overall);
}
