//! Polarisation analysis of the two-photon output: simulated counts, linear
//! inversion with propagated errors, and the gate figures of merit.
//!
//! Two-qubit states are expanded as ρ = ¼ Σ c_ij σ_i ⊗ σ_j with
//! σ_0 = I, σ_1 = X, σ_2 = Y, σ_3 = Z in the {R, L} basis, so H/V measures X,
//! D/A measures Y and R/L measures Z. Coefficients and their covariance are
//! indexed by k = 4i + j.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::protocol::{cpf_operator, GateModel, PhotonChannel};
use crate::qcore::{
    apply, fidelity_pure, kron, min_eigenvalue, partial_transpose, tensor, CMatrix, DensityMatrix, StateVector, C64,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PolState {
    H,
    V,
    D,
    A,
    R,
    L,
}

impl PolState {
    pub const ALL: [PolState; 6] = [PolState::H, PolState::V, PolState::D, PolState::A, PolState::R, PolState::L];

    pub fn amplitudes(self) -> [C64; 2] {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let (re, im) = (|x: f64| C64::new(x, 0.0), |x: f64| C64::new(0.0, x));
        match self {
            PolState::H => [re(s), re(s)],
            PolState::V => [re(s), re(-s)],
            PolState::D => [re(s), im(s)],
            PolState::A => [im(-s), re(-s)],
            PolState::R => [re(1.0), re(0.0)],
            PolState::L => [re(0.0), re(1.0)],
        }
    }

    pub fn state(self) -> StateVector {
        StateVector::from_slice(&self.amplitudes()).expect("polarisation states are normalised")
    }

    pub fn label(self) -> char {
        match self {
            PolState::H => 'H',
            PolState::V => 'V',
            PolState::D => 'D',
            PolState::A => 'A',
            PolState::R => 'R',
            PolState::L => 'L',
        }
    }
}

/// |a⟩ ⊗ |b⟩
pub fn product(a: PolState, b: PolState) -> StateVector {
    tensor(&a.state(), &b.state())
}

/// (|DL⟩ + |AR⟩)/√2, the ideal gate output for |DD⟩.
pub fn psi_plus() -> StateVector {
    let v = product(PolState::D, PolState::L).amplitudes() + product(PolState::A, PolState::R).amplitudes();
    StateVector::normalized(v).expect("non-zero superposition")
}

/// Measurement basis of one photon; outcome 0 is the first-named state.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Basis {
    HV,
    DA,
    RL,
}

impl Basis {
    pub const ALL: [Basis; 3] = [Basis::HV, Basis::DA, Basis::RL];

    pub fn states(self) -> [PolState; 2] {
        match self {
            Basis::HV => [PolState::H, PolState::V],
            Basis::DA => [PolState::D, PolState::A],
            Basis::RL => [PolState::R, PolState::L],
        }
    }

    /// Index of the Pauli operator this basis measures.
    fn pauli(self) -> usize {
        match self {
            Basis::HV => 1,
            Basis::DA => 2,
            Basis::RL => 3,
        }
    }
}

impl FromStr for Basis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "HV" => Ok(Basis::HV),
            "DA" => Ok(Basis::DA),
            "RL" => Ok(Basis::RL),
            other => Err(Error::UnknownVariant { kind: "basis", value: other.into() }),
        }
    }
}

impl fmt::Display for Basis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Basis::HV => "HV",
            Basis::DA => "DA",
            Basis::RL => "RL",
        })
    }
}

pub type Setting = (Basis, Basis);

/// The nine product settings, first photon's basis varying slowest.
pub fn complete_settings() -> Vec<Setting> {
    Basis::ALL.iter().flat_map(|&a| Basis::ALL.iter().map(move |&b| (a, b))).collect()
}

fn setting_index(s: Setting) -> usize {
    (s.0.pauli() - 1) * 3 + (s.1.pauli() - 1)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountRecord {
    pub setting: Setting,
    /// Counts for outcomes 00, 01, 10, 11.
    pub counts: [u64; 4],
    pub shots: u64,
}

impl CountRecord {
    pub fn new(setting: Setting, counts: [u64; 4]) -> Self {
        Self { setting, counts, shots: counts.iter().sum() }
    }
}

/// Born probabilities of the four outcomes of `setting`.
pub fn outcome_probabilities(rho: &DensityMatrix, setting: Setting) -> Result<[f64; 4]> {
    if rho.dim() != 4 {
        return Err(Error::DimensionMismatch { expected: 4, got: rho.dim() });
    }
    let mut p = [0.0; 4];
    for (o1, a) in setting.0.states().into_iter().enumerate() {
        for (o2, b) in setting.1.states().into_iter().enumerate() {
            p[2 * o1 + o2] = fidelity_pure(rho, &product(a, b))?.clamp(0.0, 1.0);
        }
    }
    Ok(p)
}

fn multinomial<R: rand::Rng>(rng: &mut R, n: u64, probs: &[f64]) -> Result<Vec<u64>> {
    let mut out = vec![0; probs.len()];
    let mut remaining = n;
    let mut mass = probs.iter().sum::<f64>();
    for (k, &p) in probs.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        if k == probs.len() - 1 {
            out[k] = remaining;
            break;
        }
        let q = if mass > 0.0 { (p / mass).clamp(0.0, 1.0) } else { 0.0 };
        let draw = Binomial::new(remaining, q)
            .map_err(|e| Error::InvalidParameter { name: "probability", reason: e.to_string() })?
            .sample(rng);
        out[k] = draw;
        remaining -= draw;
        mass -= p;
    }
    Ok(out)
}

/// Mixes `index` into `seed` (SplitMix64 finaliser) for independent
/// per-item random streams.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn setting_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64 + 1);
    rng
}

/// Multinomial counts for each setting with a fixed number of shots.
pub fn simulate_counts(rho: &DensityMatrix, settings: &[Setting], shots: u64, seed: u64) -> Result<Vec<CountRecord>> {
    if shots == 0 {
        return Err(Error::InvalidParameter { name: "shots", reason: "must be positive".into() });
    }
    settings
        .iter()
        .enumerate()
        .map(|(k, &s)| {
            let p = outcome_probabilities(rho, s)?;
            let c = multinomial(&mut setting_rng(seed, k), shots, &p)?;
            Ok(CountRecord::new(s, [c[0], c[1], c[2], c[3]]))
        })
        .collect()
}

/// Counts when each of `shots` pairs is measured in one of the nine settings
/// chosen uniformly at random.
pub fn simulate_random_allocation(rho: &DensityMatrix, shots: u64, seed: u64) -> Result<Vec<CountRecord>> {
    if shots == 0 {
        return Err(Error::InvalidParameter { name: "shots", reason: "must be positive".into() });
    }
    let settings = complete_settings();
    let alloc = multinomial(&mut setting_rng(seed, usize::MAX - 1), shots, &[1.0 / 9.0; 9])?;
    settings
        .iter()
        .zip(alloc)
        .enumerate()
        .map(|(k, (&s, n))| {
            if n == 0 {
                return Ok(CountRecord::new(s, [0; 4]));
            }
            let p = outcome_probabilities(rho, s)?;
            let c = multinomial(&mut setting_rng(seed, k), n, &p)?;
            Ok(CountRecord::new(s, [c[0], c[1], c[2], c[3]]))
        })
        .collect()
}

#[derive(Debug, Serialize, Deserialize)]
struct CountRow {
    basis1: Basis,
    basis2: Basis,
    n00: u64,
    n01: u64,
    n10: u64,
    n11: u64,
}

pub fn write_counts_csv<W: Write>(records: &[CountRecord], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    for r in records {
        let [n00, n01, n10, n11] = r.counts;
        wtr.serialize(CountRow { basis1: r.setting.0, basis2: r.setting.1, n00, n01, n10, n11 }).map_err(csv_error)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Reads count records; lines starting with `#` are ignored.
pub fn read_counts_csv<R: Read>(r: R) -> Result<Vec<CountRecord>> {
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(r);
    rdr.deserialize::<CountRow>()
        .map(|row| {
            let row = row.map_err(csv_error)?;
            Ok(CountRecord::new((row.basis1, row.basis2), [row.n00, row.n01, row.n10, row.n11]))
        })
        .collect()
}

pub(crate) fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        kind => Error::Parse { line, message: format!("{kind:?}") },
    }
}

fn pauli(i: usize) -> CMatrix {
    let (z, one, im) = (C64::new(0.0, 0.0), C64::new(1.0, 0.0), C64::new(0.0, 1.0));
    let e = match i {
        0 => [one, z, z, one],
        1 => [z, one, one, z],
        2 => [z, -im, im, z],
        _ => [one, z, z, -one],
    };
    CMatrix::from_row_slice(2, 2, &e)
}

fn pauli_pair(k: usize) -> CMatrix {
    kron(&pauli(k / 4), &pauli(k % 4))
}

/// Linear-inversion estimate of a two-photon state.
#[derive(Clone, Debug)]
pub struct ReconstructedState {
    pub rho_hat: DensityMatrix,
    /// Estimated Pauli coefficients c_k (c_0 = 1).
    pub coefficients: [f64; 16],
    /// Covariance of the coefficients.
    pub covariance: DMatrix<f64>,
}

/// Per-cell estimator weights and the multinomial groups the cells belong to.
struct LinearEstimator {
    /// weights[cell][k]; cell = 4·setting + outcome
    weights: Vec<[f64; 16]>,
    /// (cells, trials) of each independent multinomial
    groups: Vec<(Vec<usize>, u64)>,
}

fn outcome_signs(o: usize) -> (f64, f64) {
    let s = |bit: usize| if bit == 0 { 1.0 } else { -1.0 };
    (s(o >> 1), s(o & 1))
}

fn pool(records: &[CountRecord]) -> Result<[[u64; 4]; 9]> {
    let mut n = [[0u64; 4]; 9];
    for r in records {
        if r.counts.iter().sum::<u64>() != r.shots {
            return Err(Error::InvalidParameter {
                name: "counts",
                reason: format!("counts of {:?} do not sum to shots", r.setting),
            });
        }
        let s = setting_index(r.setting);
        for o in 0..4 {
            n[s][o] += r.counts[o];
        }
    }
    Ok(n)
}

impl LinearEstimator {
    fn estimate(&self, n: &[[u64; 4]; 9]) -> ReconstructedState {
        let cell = |c: usize| n[c / 4][c % 4] as f64;
        let mut coefficients = [0.0; 16];
        coefficients[0] = 1.0;
        for (c, w) in self.weights.iter().enumerate() {
            for k in 1..16 {
                coefficients[k] += w[k] * cell(c);
            }
        }
        let mut covariance = DMatrix::zeros(16, 16);
        for (cells, trials) in &self.groups {
            let t = *trials as f64;
            let p: Vec<f64> = cells.iter().map(|&c| cell(c) / t).collect();
            for (a, &ca) in cells.iter().enumerate() {
                for (b, &cb) in cells.iter().enumerate() {
                    let cov = t * (if a == b { p[a] } else { 0.0 } - p[a] * p[b]);
                    if cov == 0.0 {
                        continue;
                    }
                    for k in 1..16 {
                        for l in 1..16 {
                            covariance[(k, l)] += self.weights[ca][k] * self.weights[cb][l] * cov;
                        }
                    }
                }
            }
        }
        let mut m = CMatrix::zeros(4, 4);
        for (k, &c) in coefficients.iter().enumerate() {
            m += pauli_pair(k) * C64::new(c / 4.0, 0.0);
        }
        let rho_hat = DensityMatrix::new(m).expect("Pauli expansion with c_0 = 1 is Hermitian with unit trace");
        ReconstructedState { rho_hat, coefficients, covariance }
    }
}

/// Reconstruction pooling all records per setting. Every one of the nine
/// settings must carry at least one shot.
pub fn linear_inversion(records: &[CountRecord]) -> Result<ReconstructedState> {
    let n = pool(records)?;
    let settings = complete_settings();
    let missing: Vec<String> = settings
        .iter()
        .filter(|&&s| n[setting_index(s)].iter().sum::<u64>() == 0)
        .map(|s| format!("{}{}", s.0, s.1))
        .collect();
    if !missing.is_empty() {
        return Err(Error::RankDeficient(format!("no data for settings {}", missing.join(", "))));
    }
    let shots = |s: usize| n[s].iter().sum::<u64>() as f64;
    let first_total = |a: usize| (0..3).map(|b| shots(3 * a + b)).sum::<f64>();
    let second_total = |b: usize| (0..3).map(|a| shots(3 * a + b)).sum::<f64>();
    let mut weights = vec![[0.0; 16]; 36];
    for s in 0..9 {
        let (a, b) = (s / 3 + 1, s % 3 + 1);
        for o in 0..4 {
            let (x, y) = outcome_signs(o);
            let w = &mut weights[4 * s + o];
            w[4 * a + b] = x * y / shots(s);
            w[4 * a] = x / first_total(a - 1);
            w[b] = y / second_total(b - 1);
        }
    }
    let groups = (0..9).map(|s| ((4 * s..4 * s + 4).collect(), n[s].iter().sum())).collect();
    Ok(LinearEstimator { weights, groups }.estimate(&n))
}

/// Reconstruction for records produced by uniformly random setting choice:
/// each shot is weighted by the inverse probability of its setting, which
/// keeps the estimate unbiased even when some setting received no shots.
pub fn linear_inversion_randomized(records: &[CountRecord]) -> Result<ReconstructedState> {
    let n = pool(records)?;
    let total: u64 = n.iter().flatten().sum();
    if total == 0 {
        return Err(Error::RankDeficient("no recorded shots".into()));
    }
    let t = total as f64;
    let mut weights = vec![[0.0; 16]; 36];
    for s in 0..9 {
        let (a, b) = (s / 3 + 1, s % 3 + 1);
        for o in 0..4 {
            let (x, y) = outcome_signs(o);
            let w = &mut weights[4 * s + o];
            w[4 * a + b] = 9.0 * x * y / t;
            w[4 * a] = 3.0 * x / t;
            w[b] = 3.0 * y / t;
        }
    }
    Ok(LinearEstimator { weights, groups: vec![((0..36).collect(), total)] }.estimate(&n))
}

/// Basis {DR, DL, AR, AL} used for exported density matrices.
pub const EXPORT_BASIS: [(PolState, PolState); 4] =
    [(PolState::D, PolState::R), (PolState::D, PolState::L), (PolState::A, PolState::R), (PolState::A, PolState::L)];

#[derive(Clone, Debug, Serialize)]
pub struct MatrixExport {
    pub basis: Vec<String>,
    pub real: Vec<Vec<f64>>,
    pub imag: Vec<Vec<f64>>,
    pub real_std: Vec<Vec<f64>>,
    pub imag_std: Vec<Vec<f64>>,
    pub physical: bool,
}

impl ReconstructedState {
    /// ⟨ψ|ρ̂|ψ⟩ and its propagated standard error.
    pub fn fidelity(&self, psi: &StateVector) -> Result<(f64, f64)> {
        let value = fidelity_pure(&self.rho_hat, psi)?;
        let t: Vec<f64> = (0..16).map(|k| fidelity_pure_raw(&pauli_pair(k), psi) / 4.0).collect();
        Ok((value, quadratic_form(&self.covariance, &t).max(0.0).sqrt()))
    }

    /// Standard errors of the real and imaginary parts of every entry in the
    /// basis `kets` (column vectors of the change of basis).
    pub fn entry_std_errors(&self, kets: &[StateVector; 4]) -> ([[f64; 4]; 4], [[f64; 4]; 4]) {
        let mut re = [[0.0; 4]; 4];
        let mut im = [[0.0; 4]; 4];
        let paulis: Vec<CMatrix> = (0..16).map(pauli_pair).collect();
        for r in 0..4 {
            for c in 0..4 {
                let g: Vec<C64> =
                    paulis.iter().map(|p| kets[r].amplitudes().dotc(&(p * kets[c].amplitudes())) / 4.0).collect();
                let gr: Vec<f64> = g.iter().map(|z| z.re).collect();
                let gi: Vec<f64> = g.iter().map(|z| z.im).collect();
                re[r][c] = quadratic_form(&self.covariance, &gr).max(0.0).sqrt();
                im[r][c] = quadratic_form(&self.covariance, &gi).max(0.0).sqrt();
            }
        }
        (re, im)
    }

    /// Root mean square of the standard errors of all real and imaginary
    /// entries in the basis `kets`, skipping the identically zero imaginary
    /// parts of the diagonal.
    pub fn rms_entry_error(&self, kets: &[StateVector; 4]) -> f64 {
        let (re, im) = self.entry_std_errors(kets);
        let mut sum = 0.0;
        let mut n = 0;
        for r in 0..4 {
            for c in 0..4 {
                sum += re[r][c].powi(2);
                n += 1;
                if r != c {
                    sum += im[r][c].powi(2);
                    n += 1;
                }
            }
        }
        (sum / n as f64).sqrt()
    }

    /// Matrix and standard errors in the {DR, DL, AR, AL} basis.
    pub fn export(&self) -> MatrixExport {
        let kets = export_kets();
        let (re_std, im_std) = self.entry_std_errors(&kets);
        let m = self.in_basis(&kets);
        let rows = |f: &dyn Fn(usize, usize) -> f64| (0..4).map(|r| (0..4).map(|c| f(r, c)).collect()).collect();
        MatrixExport {
            basis: EXPORT_BASIS.iter().map(|(a, b)| format!("{}{}", a.label(), b.label())).collect(),
            real: rows(&|r, c| m[(r, c)].re),
            imag: rows(&|r, c| m[(r, c)].im),
            real_std: rows(&|r, c| re_std[r][c]),
            imag_std: rows(&|r, c| im_std[r][c]),
            physical: self.rho_hat.is_physical(),
        }
    }

    /// ⟨k_r|ρ̂|k_c⟩
    pub fn in_basis(&self, kets: &[StateVector; 4]) -> CMatrix {
        matrix_in_basis(self.rho_hat.matrix(), kets)
    }
}

pub fn export_kets() -> [StateVector; 4] {
    EXPORT_BASIS.map(|(a, b)| product(a, b))
}

pub fn matrix_in_basis(m: &CMatrix, kets: &[StateVector; 4]) -> CMatrix {
    CMatrix::from_fn(4, 4, |r, c| kets[r].amplitudes().dotc(&(m * kets[c].amplitudes())))
}

fn fidelity_pure_raw(m: &CMatrix, psi: &StateVector) -> f64 {
    psi.amplitudes().dotc(&(m * psi.amplitudes())).re
}

fn quadratic_form(cov: &DMatrix<f64>, v: &[f64]) -> f64 {
    let mut s = 0.0;
    for k in 0..v.len() {
        for l in 0..v.len() {
            s += v[k] * cov[(k, l)] * v[l];
        }
    }
    s
}

/// Smallest eigenvalue of the partial transpose; negative values certify
/// entanglement.
pub fn entangling_capability(rho: &DensityMatrix) -> Result<f64> {
    min_eigenvalue(&partial_transpose(rho, 1)?)
}

/// Control {R, L} ⊗ target {H, V}, in the order RH, RV, LH, LV.
pub const TRUTH_INPUTS: [(PolState, PolState); 4] =
    [(PolState::R, PolState::H), (PolState::R, PolState::V), (PolState::L, PolState::H), (PolState::L, PolState::V)];

/// Output index an ideal CNOT produces for each truth-table input.
const CNOT_TARGETS: [usize; 4] = [0, 1, 3, 2];

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TruthTable {
    pub labels: Vec<String>,
    /// probabilities[input][output]
    pub probabilities: [[f64; 4]; 4],
}

/// Truth table in the CNOT basis and F_CNOT, the unweighted mean of the four
/// correct-output probabilities. `shots = None` evaluates exactly.
pub fn truth_table<C: PhotonChannel + ?Sized>(channel: &C, shots: Option<u64>, seed: u64) -> Result<(TruthTable, f64)> {
    let mut probabilities = [[0.0; 4]; 4];
    for (k, &(a, b)) in TRUTH_INPUTS.iter().enumerate() {
        let out = channel.apply(&product(a, b).to_density())?;
        let p = outcome_probabilities(&out, (Basis::RL, Basis::HV))?;
        probabilities[k] = match shots {
            None => p,
            Some(0) => return Err(Error::InvalidParameter { name: "shots", reason: "must be positive".into() }),
            Some(n) => {
                let c = multinomial(&mut setting_rng(seed, k), n, &p)?;
                [0, 1, 2, 3].map(|o| c[o] as f64 / n as f64)
            }
        };
    }
    let f_cnot = (0..4).map(|k| probabilities[k][CNOT_TARGETS[k]]).sum::<f64>() / 4.0;
    let labels = TRUTH_INPUTS.iter().map(|(a, b)| format!("{}{}", a.label(), b.label())).collect();
    Ok((TruthTable { labels, probabilities }, f_cnot))
}

/// The 36 product inputs on the six canonical polarisation axes.
pub fn canonical_inputs() -> Vec<(PolState, PolState)> {
    PolState::ALL.iter().flat_map(|&a| PolState::ALL.iter().map(move |&b| (a, b))).collect()
}

fn ideal_output(input: &StateVector) -> StateVector {
    apply(&cpf_operator(), input).expect("dimension 4")
}

/// ⟨ψ_ideal|ρ_out|ψ_ideal⟩ for each of the 36 canonical product inputs.
pub fn input_fidelities<C: PhotonChannel + ?Sized>(channel: &C) -> Result<Vec<((PolState, PolState), f64)>> {
    canonical_inputs()
        .into_iter()
        .map(|(a, b)| {
            let psi = product(a, b);
            Ok(((a, b), fidelity_pure(&channel.apply(&psi.to_density())?, &ideal_output(&psi))?))
        })
        .collect()
}

/// Mean of ⟨ψ_ideal|ρ_out|ψ_ideal⟩ over the 36 canonical product inputs.
pub fn exact_average_fidelity<C: PhotonChannel + ?Sized>(channel: &C) -> Result<f64> {
    let f = input_fidelities(channel)?;
    Ok(f.iter().map(|(_, x)| x).sum::<f64>() / f.len() as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FidelityEstimate {
    pub mean: f64,
    pub std_err: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FidelityMode {
    Exact,
    /// `pairs` detected pairs per input, spread over the nine settings at
    /// random.
    Sampled {
        pairs: u64,
        seed: u64,
    },
}

pub fn average_gate_fidelity<C: PhotonChannel + ?Sized>(channel: &C, mode: FidelityMode) -> Result<FidelityEstimate> {
    match mode {
        FidelityMode::Exact => Ok(FidelityEstimate { mean: exact_average_fidelity(channel)?, std_err: 0.0 }),
        FidelityMode::Sampled { pairs, seed } => {
            let inputs = canonical_inputs();
            let (mut sum, mut var) = (0.0, 0.0);
            for (k, &(a, b)) in inputs.iter().enumerate() {
                let psi = product(a, b);
                let out = channel.apply(&psi.to_density())?;
                let records = simulate_random_allocation(&out, pairs, derive_seed(seed, k as u64))?;
                let (f, se) = linear_inversion_randomized(&records)?.fidelity(&ideal_output(&psi))?;
                sum += f;
                var += se * se;
            }
            let n = inputs.len() as f64;
            Ok(FidelityEstimate { mean: sum / n, std_err: var.sqrt() / n })
        }
    }
}

/// Fidelities with the ideal output conditioned on reading the atom in ↓
/// and ↑, in that order.
pub fn split_by_outcome(model: &GateModel, input: &StateVector) -> Result<(f64, f64)> {
    let b = model.branches(&input.to_density())?;
    let target = ideal_output(input);
    let f = |k: usize| -> Result<f64> {
        match &b.states[k] {
            Some(s) => fidelity_pure(s, &target),
            None => Err(Error::ZeroProbability),
        }
    };
    Ok((f(1)?, f(0)?))
}
