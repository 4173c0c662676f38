//! Finite-dimensional state, operator and channel algebra.
//!
//! Everything here is dense. The largest space in use is the eight-dimensional
//! atom ⊗ photon1 ⊗ photon2 register, ordered with the atom as the most
//! significant factor. Single-qubit bases are {↑, ↓} for the atom and {R, L}
//! for each photon, so the joint index is `4·atom + 2·photon1 + photon2`.

mod linalg;
mod ops;
pub mod random;
mod types;

pub use linalg::{dagger, eigenvalues_hermitian, hermitian_deviation, kron, max_abs_diff, CMatrix, CVector, C64};
pub use ops::{
    apply, embed, fidelity_pure, measure, min_eigenvalue, mix, partial_trace, partial_transpose, tensor,
    trace_distance, Evolve, Outcome, Tensor,
};
pub use types::{DensityMatrix, Operator, ProjectorSet, StateVector};

/// Tolerance for exact-algebra invariants (norms, traces, Hermiticity).
pub const TOL_EXACT: f64 = 1e-12;
/// Tolerance for eigen-computations and unitarity checks.
pub const TOL_EIGEN: f64 = 1e-10;

/// Subsystem positions in the joint register.
pub const ATOM: usize = 0;
pub const PHOTON1: usize = 1;
pub const PHOTON2: usize = 2;
/// Local dimensions of the joint register, in register order.
pub const JOINT_DIMS: [usize; 3] = [2, 2, 2];
pub const PHOTON_DIMS: [usize; 2] = [2, 2];

/// Index of |↑⟩ (and |R⟩) in a single-qubit basis.
pub const UP: usize = 0;
/// Index of |↓⟩ (and |L⟩) in a single-qubit basis.
pub const DOWN: usize = 1;

#[cfg(test)]
mod tests;
