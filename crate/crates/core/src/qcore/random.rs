//! Seeded random states for randomized checks.

use rand::Rng;
use rand_distr::StandardNormal;

use super::linalg::{trace, CMatrix, CVector, C64};
use super::types::{DensityMatrix, StateVector};

fn gaussian_c64<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

/// Haar-random pure state.
pub fn haar_state<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> StateVector {
    let v = CVector::from_fn(dim, |_, _| gaussian_c64(rng));
    StateVector::normalized(v).expect("gaussian vector is non-zero")
}

/// Random full-rank mixed state from the Ginibre ensemble.
pub fn ginibre_density<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> DensityMatrix {
    let g = CMatrix::from_fn(dim, dim, |_, _| gaussian_c64(rng));
    let m = &g * g.adjoint();
    let tr = trace(&m).re;
    DensityMatrix::from_channel_output(m.unscale(tr)).expect("Ginibre matrix is a valid state")
}
