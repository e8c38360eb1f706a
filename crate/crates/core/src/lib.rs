pub mod error;
pub mod gilbert;
pub mod linalg;
pub mod operator;
pub mod optimizer;
pub mod povm;
pub mod qdsc;
pub mod serialize;
pub mod tomography;

pub use error::{Error, Result};
pub use gilbert::{project_to_state_space, GilbertConfig, ProjectionOutcome};
pub use operator::{DensityMatrix, HermitianOperator};
pub use optimizer::{
    run_apg, run_dg, Algorithm, IterationRecord, IterationTrace, ObjectiveFunction,
    OptimizerConfig, RunOutcome, RunStatus,
};
pub use povm::{FidelityReport, Povm};

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex64;
/// Dense complex matrix.
pub type CMatrix = nalgebra::DMatrix<C64>;
