use std::f64::consts::{FRAC_1_SQRT_2, PI};

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::random::{ginibre_density, haar_state};
use super::*;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn ket(amps: &[C64]) -> StateVector {
    StateVector::from_slice(amps).unwrap()
}

fn up() -> StateVector {
    StateVector::basis(2, UP).unwrap()
}

fn down() -> StateVector {
    StateVector::basis(2, DOWN).unwrap()
}

fn diag_density(d: &[f64]) -> DensityMatrix {
    DensityMatrix::new(CMatrix::from_diagonal(&CVector::from_iterator(d.len(), d.iter().map(|&x| c(x, 0.0))))).unwrap()
}

fn rot_pi2() -> Operator {
    let s = FRAC_1_SQRT_2;
    Operator::unitary(CMatrix::from_row_slice(2, 2, &[c(s, 0.0), c(-s, 0.0), c(s, 0.0), c(s, 0.0)])).unwrap()
}

fn pauli_x() -> Operator {
    Operator::unitary(CMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)])).unwrap()
}

fn cz_ap() -> Operator {
    Operator::diag(&[c(-1.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(1.0, 0.0)]).unwrap()
}

fn bell_psi_plus_rl() -> StateVector {
    // (|RL⟩ + |LR⟩)/√2 in the computational basis
    ket(&[c(0.0, 0.0), c(FRAC_1_SQRT_2, 0.0), c(FRAC_1_SQRT_2, 0.0), c(0.0, 0.0)])
}

// ---- tensor ----

#[test]
fn tensor_up_r_is_first_basis_vector() {
    let r = StateVector::basis(2, 0).unwrap();
    let v = tensor(&up(), &r);
    assert_eq!(v.dim(), 4);
    assert_eq!(v.amplitudes()[0], c(1.0, 0.0));
    assert!(v.amplitudes().iter().skip(1).all(|z| z.norm() == 0.0));
}

#[test]
fn tensor_identities() {
    let i2 = Operator::identity(2).unwrap();
    let i4 = tensor(&i2, &i2);
    assert_eq!(i4.matrix(), Operator::identity(4).unwrap().matrix());
    assert!(i4.is_unitary());
}

#[test]
fn tensor_diagonal_diagonal() {
    // |D⟩ = (|R⟩ + i|L⟩)/√2, so |DD⟩ = (|RR⟩ + i|RL⟩ + i|LR⟩ − |LL⟩)/2
    let d = ket(&[c(FRAC_1_SQRT_2, 0.0), c(0.0, FRAC_1_SQRT_2)]);
    let dd = tensor(&d, &d);
    let expected = [c(0.5, 0.0), c(0.0, 0.5), c(0.0, 0.5), c(-0.5, 0.0)];
    for (a, b) in dd.amplitudes().iter().zip(expected) {
        assert!((a - b).norm() < 1e-15);
    }
}

// ---- apply ----

#[test]
fn apply_identity_leaves_density_unchanged() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let rho = ginibre_density(4, &mut rng);
    let out = apply(&Operator::identity(4).unwrap(), &rho).unwrap();
    assert!(max_abs_diff(out.matrix(), rho.matrix()) < 1e-15);
}

#[test]
fn apply_quarter_rotation_to_up() {
    let out = apply(&rot_pi2(), &up()).unwrap();
    assert!((out.amplitudes()[0] - c(FRAC_1_SQRT_2, 0.0)).norm() < 1e-15);
    assert!((out.amplitudes()[1] - c(FRAC_1_SQRT_2, 0.0)).norm() < 1e-15);
}

#[test]
fn apply_flip_to_up_projector() {
    let out = apply(&pauli_x(), &up().to_density()).unwrap();
    assert!(max_abs_diff(out.matrix(), down().to_density().matrix()) < 1e-15);
}

#[test]
fn apply_rejects_dimension_mismatch() {
    assert!(matches!(apply(&Operator::identity(4).unwrap(), &up()), Err(crate::Error::DimensionMismatch { .. })));
}

// ---- embed ----

#[test]
fn embed_atom_operator_is_left_kron() {
    let u = rot_pi2();
    let full = embed(&u, &[ATOM], &JOINT_DIMS).unwrap();
    let expected = kron(u.matrix(), &CMatrix::identity(4, 4));
    assert!(max_abs_diff(full.matrix(), &expected) < 1e-15);
}

#[test]
fn embed_identity_anywhere() {
    let i2 = Operator::identity(2).unwrap();
    for t in 0..3 {
        let full = embed(&i2, &[t], &JOINT_DIMS).unwrap();
        assert!(max_abs_diff(full.matrix(), &CMatrix::identity(8, 8)) < 1e-15);
    }
}

/// Independent construction: for every basis ket |a, p1, p2⟩ apply U to the
/// (a, p2) pair by hand.
fn atom_photon2_by_hand(u: &CMatrix) -> CMatrix {
    let mut out = CMatrix::zeros(8, 8);
    for a in 0..2 {
        for p1 in 0..2 {
            for p2 in 0..2 {
                let col = a * 4 + p1 * 2 + p2;
                for a2 in 0..2 {
                    for q2 in 0..2 {
                        out[(a2 * 4 + p1 * 2 + q2, col)] += u[(a2 * 2 + q2, a * 2 + p2)];
                    }
                }
            }
        }
    }
    out
}

#[test]
fn embed_atom_photon2_matches_basis_construction_and_swap_route() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    // a generic (non-diagonal) two-qubit operator exercises all placements
    let g = CMatrix::from_fn(4, 4, |i, j| haar_state(4, &mut rng).amplitudes()[(i + j) % 4]);
    let u = Operator::new(g.clone()).unwrap();
    let full = embed(&u, &[ATOM, PHOTON2], &JOINT_DIMS).unwrap();
    assert!(max_abs_diff(full.matrix(), &atom_photon2_by_hand(&g)) < 1e-14);

    let swap = {
        let mut s = CMatrix::zeros(8, 8);
        for a in 0..2 {
            for p in 0..2 {
                for q in 0..2 {
                    s[(a * 4 + q * 2 + p, a * 4 + p * 2 + q)] = c(1.0, 0.0);
                }
            }
        }
        s
    };
    let via_swap = &swap * kron(&g, &CMatrix::identity(2, 2)) * &swap;
    assert!(max_abs_diff(full.matrix(), &via_swap) < 1e-14);

    let cz = embed(&cz_ap(), &[ATOM, PHOTON2], &JOINT_DIMS).unwrap();
    assert!(max_abs_diff(cz.matrix(), &atom_photon2_by_hand(cz_ap().matrix())) < 1e-15);
}

#[test]
fn embed_rejects_bad_targets() {
    let u = rot_pi2();
    assert!(embed(&u, &[3], &JOINT_DIMS).is_err());
    assert!(embed(&cz_ap(), &[1, 1], &JOINT_DIMS).is_err());
    assert!(embed(&cz_ap(), &[0], &JOINT_DIMS).is_err());
}

// ---- partial trace ----

#[test]
fn partial_trace_discards_atom() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let rho_p = ginibre_density(4, &mut rng);
    let joint = tensor(&up().to_density(), &rho_p);
    let red = partial_trace(&joint, &JOINT_DIMS, &[PHOTON1, PHOTON2]).unwrap();
    assert!(max_abs_diff(red.matrix(), rho_p.matrix()) < 1e-15);
}

#[test]
fn partial_trace_of_bell_pair_is_maximally_mixed() {
    let red = partial_trace(&bell_psi_plus_rl().to_density(), &PHOTON_DIMS, &[0]).unwrap();
    assert!(max_abs_diff(red.matrix(), &(CMatrix::identity(2, 2) * c(0.5, 0.0))) < 1e-15);
}

#[test]
fn partial_trace_matches_index_summation() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..10 {
        let rho = ginibre_density(8, &mut rng);
        let m = rho.matrix();
        let photons = partial_trace(&rho, &JOINT_DIMS, &[1, 2]).unwrap();
        let atom = partial_trace(&rho, &JOINT_DIMS, &[0]).unwrap();
        let atom_p2 = partial_trace(&rho, &JOINT_DIMS, &[2, 0]).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let sum = m[(i, j)] + m[(4 + i, 4 + j)];
                assert!((photons.matrix()[(i, j)] - sum).norm() < 1e-12);
            }
        }
        for a in 0..2 {
            for b in 0..2 {
                let sum: C64 = (0..4).map(|k| m[(a * 4 + k, b * 4 + k)]).sum();
                assert!((atom.matrix()[(a, b)] - sum).norm() < 1e-12);
            }
        }
        for a in 0..2 {
            for p in 0..2 {
                for b in 0..2 {
                    for q in 0..2 {
                        let sum: C64 = (0..2).map(|k| m[(a * 4 + k * 2 + p, b * 4 + k * 2 + q)]).sum();
                        assert!((atom_p2.matrix()[(a * 2 + p, b * 2 + q)] - sum).norm() < 1e-12);
                    }
                }
            }
        }
    }
}

#[test]
fn partial_trace_rejects_invalid_lists() {
    let rho = DensityMatrix::maximally_mixed(8).unwrap();
    assert!(partial_trace(&rho, &JOINT_DIMS, &[]).is_err());
    assert!(partial_trace(&rho, &JOINT_DIMS, &[3]).is_err());
    assert!(partial_trace(&rho, &JOINT_DIMS, &[1, 1]).is_err());
    assert!(partial_trace(&rho, &PHOTON_DIMS, &[0]).is_err());
}

// ---- measure ----

#[test]
fn measure_plus_state() {
    let plus = ket(&[c(FRAC_1_SQRT_2, 0.0), c(FRAC_1_SQRT_2, 0.0)]);
    let p = ProjectorSet::computational(&[2], 0).unwrap();
    let out = measure(&plus.to_density(), &p).unwrap();
    assert!((out[0].probability - 0.5).abs() < 1e-15);
    assert!((out[1].probability - 0.5).abs() < 1e-15);
}

#[test]
fn measure_up_state() {
    let p = ProjectorSet::computational(&[2], 0).unwrap();
    let out = measure(&up().to_density(), &p).unwrap();
    assert_eq!(out[0].probability, 1.0);
    assert_eq!(out[1].probability, 0.0);
    assert!(out[1].state.is_none());
    assert!(max_abs_diff(out[0].state.as_ref().unwrap().matrix(), up().to_density().matrix()) < 1e-15);
}

#[test]
fn projector_set_rejects_incomplete() {
    let p0 = up().projector();
    assert!(ProjectorSet::new(vec![p0.clone()]).is_err());
    assert!(ProjectorSet::new(vec![p0.clone(), p0 * c(2.0, 0.0)]).is_err());
}

// ---- fidelity ----

#[test]
fn fidelity_examples() {
    let psi = bell_psi_plus_rl();
    assert!((fidelity_pure(&psi.to_density(), &psi).unwrap() - 1.0).abs() < 1e-15);
    let mixed = DensityMatrix::maximally_mixed(4).unwrap();
    assert!((fidelity_pure(&mixed, &psi).unwrap() - 0.25).abs() < 1e-15);
    assert!(fidelity_pure(&mixed, &up()).is_err());
}

// ---- partial transpose / eigenvalues ----

#[test]
fn partial_transpose_examples() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let a = ginibre_density(2, &mut rng);
    let b = ginibre_density(2, &mut rng);
    let product = tensor(&a, &b);
    for sub in 0..2 {
        let pt = partial_transpose(&product, sub).unwrap();
        assert!(min_eigenvalue(&pt).unwrap() >= -1e-12);
    }
    let pt = partial_transpose(&bell_psi_plus_rl().to_density(), 1).unwrap();
    assert!((min_eigenvalue(&pt).unwrap() + 0.5).abs() < 1e-12);
    assert!(partial_transpose(&DensityMatrix::maximally_mixed(8).unwrap(), 0).is_err());
}

#[test]
fn partial_transpose_matches_element_swap() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..20 {
        let rho = ginibre_density(4, &mut rng);
        let m = rho.matrix();
        let pt_b = partial_transpose(&rho, 1).unwrap();
        let pt_a = partial_transpose(&rho, 0).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    for l in 0..2 {
                        // ⟨ij|ρ^{T_B}|kl⟩ = ⟨il|ρ|kj⟩ and ⟨ij|ρ^{T_A}|kl⟩ = ⟨kj|ρ|il⟩
                        assert_eq!(pt_b[(2 * i + j, 2 * k + l)], m[(2 * i + l, 2 * k + j)]);
                        assert_eq!(pt_a[(2 * i + j, 2 * k + l)], m[(2 * k + j, 2 * i + l)]);
                    }
                }
            }
        }
    }
}

#[test]
fn min_eigenvalue_examples() {
    assert!((min_eigenvalue(&CMatrix::identity(4, 4)).unwrap() - 1.0).abs() < 1e-12);
    let d = diag_density(&[0.9, 0.1, 0.0, 0.0]);
    let mut m = d.matrix().clone();
    m[(2, 2)] = c(0.2, 0.0);
    m[(3, 3)] = c(-0.2, 0.0);
    assert!((min_eigenvalue(&m).unwrap() + 0.2).abs() < 1e-12);
    let mut bad = CMatrix::identity(2, 2);
    bad[(0, 1)] = c(1.0, 0.0);
    assert!(matches!(min_eigenvalue(&bad), Err(crate::Error::NotHermitian(_))));
}

/// Characteristic polynomial via Faddeev–LeVerrier; coefficients low to high.
fn char_poly(a: &CMatrix) -> Vec<f64> {
    let n = a.nrows();
    let mut coeffs = vec![0.0; n + 1];
    coeffs[n] = 1.0;
    let mut m = CMatrix::zeros(n, n);
    let id = CMatrix::identity(n, n);
    for k in 1..=n {
        m = a * &m + &id * c(coeffs[n - k + 1], 0.0);
        let t: C64 = (a * &m).diagonal().iter().sum();
        coeffs[n - k] = -t.re / k as f64;
    }
    coeffs
}

fn smallest_real_root(coeffs: &[f64]) -> f64 {
    let p = |x: f64| coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c);
    let bound = 1.0 + coeffs.iter().map(|c| c.abs()).fold(0.0, f64::max);
    let steps = 200_000;
    let h = 2.0 * bound / steps as f64;
    let (mut lo, mut hi) = (-bound, -bound);
    for s in 0..steps {
        let (a, b) = (-bound + s as f64 * h, -bound + (s + 1) as f64 * h);
        if p(a) == 0.0 {
            return a;
        }
        if p(a).signum() != p(b).signum() {
            lo = a;
            hi = b;
            break;
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if p(lo).signum() == p(mid).signum() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn min_eigenvalue_matches_characteristic_polynomial() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..50 {
        let a = ginibre_density(4, &mut rng);
        let b = ginibre_density(4, &mut rng);
        // difference of states: indefinite Hermitian with spread-out spectrum
        let h = (a.matrix() - b.matrix()) * c(3.0, 0.0);
        let oracle = smallest_real_root(&char_poly(&h));
        assert!((min_eigenvalue(&h).unwrap() - oracle).abs() < 1e-8, "oracle {oracle}");
    }
}

// ---- mix ----

#[test]
fn mix_examples() {
    let rho = up().to_density();
    let other = DensityMatrix::maximally_mixed(2).unwrap();
    assert!(max_abs_diff(mix(&rho, &other, 0.0).unwrap().matrix(), rho.matrix()) < 1e-15);
    let half = mix(&up().to_density(), &down().to_density(), 0.5).unwrap();
    assert!(max_abs_diff(half.matrix(), diag_density(&[0.5, 0.5]).matrix()) < 1e-15);
    assert!(matches!(mix(&rho, &other, 1.5), Err(crate::Error::InvalidProbability { .. })));

    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let rho4 = ginibre_density(4, &mut rng);
    let p = 0.03;
    let dark = mix(&rho4, &DensityMatrix::maximally_mixed(4).unwrap(), p).unwrap();
    let expected = rho4.matrix() * c(1.0 - p, 0.0) + CMatrix::identity(4, 4) * c(p / 4.0, 0.0);
    assert!(max_abs_diff(dark.matrix(), &expected) < 1e-15);
}

#[test]
fn density_validation() {
    let mut m = CMatrix::identity(2, 2);
    assert!(matches!(DensityMatrix::new(m.clone()), Err(crate::Error::InvalidTrace(_))));
    m[(0, 1)] = c(0.0, 0.1);
    m[(0, 0)] = c(0.5, 0.0);
    m[(1, 1)] = c(0.5, 0.0);
    assert!(matches!(DensityMatrix::new(m.clone()), Err(crate::Error::NotHermitian(_))));
    m[(1, 0)] = c(0.0, -0.1);
    assert!(DensityMatrix::new(m).unwrap().is_physical());
    let unphysical =
        DensityMatrix::new(CMatrix::from_diagonal(&CVector::from_column_slice(&[c(1.2, 0.0), c(-0.2, 0.0)]))).unwrap();
    assert!(!unphysical.is_physical());
}

#[test]
fn density_serde_roundtrip() {
    let mut rng = ChaCha8Rng::seed_from_u64(19);
    let rho = ginibre_density(4, &mut rng);
    let json = serde_json::to_string(&rho).unwrap();
    let back: DensityMatrix = serde_json::from_str(&json).unwrap();
    assert!(max_abs_diff(back.matrix(), rho.matrix()) < 1e-15);
}

// ---- properties ----

proptest! {
    #[test]
    fn unitary_evolution_preserves_norm_and_trace(seed in any::<u64>(), theta in -PI..PI) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (s, co) = theta.sin_cos();
        let r = Operator::unitary(CMatrix::from_row_slice(2, 2, &[c(co, 0.0), c(-s, 0.0), c(s, 0.0), c(co, 0.0)])).unwrap();
        let u = embed(&r, &[PHOTON1], &JOINT_DIMS).unwrap()
            .compose(&embed(&cz_ap(), &[ATOM, PHOTON2], &JOINT_DIMS).unwrap()).unwrap();
        let psi = haar_state(8, &mut rng);
        let out = apply(&u, &psi).unwrap();
        prop_assert!((out.amplitudes().norm_squared() - 1.0).abs() < 1e-12);
        let rho = ginibre_density(8, &mut rng);
        let out = u.matrix() * rho.matrix() * u.matrix().adjoint();
        let tr: C64 = out.diagonal().iter().sum();
        prop_assert!((tr.re - 1.0).abs() < 1e-12 && tr.im.abs() < 1e-12);
    }

    #[test]
    fn partial_trace_inverts_tensor(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = ginibre_density(2, &mut rng);
        let b = ginibre_density(4, &mut rng);
        let joint = tensor(&a, &b);
        let back_a = partial_trace(&joint, &JOINT_DIMS, &[ATOM]).unwrap();
        let back_b = partial_trace(&joint, &JOINT_DIMS, &[PHOTON1, PHOTON2]).unwrap();
        prop_assert!(max_abs_diff(back_a.matrix(), a.matrix()) < 1e-14);
        prop_assert!(max_abs_diff(back_b.matrix(), b.matrix()) < 1e-14);
    }

    #[test]
    fn measurement_probabilities_sum_to_one(seed in any::<u64>(), sub in 0usize..3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rho = ginibre_density(8, &mut rng);
        let p = ProjectorSet::computational(&JOINT_DIMS, sub).unwrap();
        let total: f64 = measure(&rho, &p).unwrap().iter().map(|o| o.probability).sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn partial_transpose_is_involution(seed in any::<u64>(), sub in 0usize..2) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rho = ginibre_density(4, &mut rng);
        let once = partial_transpose(&rho, sub).unwrap();
        let once_rho = DensityMatrix::new(once).unwrap();
        let twice = partial_transpose(&once_rho, sub).unwrap();
        prop_assert!(max_abs_diff(&twice, rho.matrix()) == 0.0);
    }
}
