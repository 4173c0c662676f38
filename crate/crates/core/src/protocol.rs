//! The gate circuit: atom preparation, three π/2 rotations interleaved with
//! two atom–photon reflections, atomic readout and feedback on photon 1.

use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::errors::{
    apply_kraus, dark_count_raw, dephase_raw, detection_error, flip_atom_raw, modified_cz, polarization_noise_raw,
    reflection_kraus, AtomBranches, ErrorParams,
};
use crate::numeric::GaussHermite;
use crate::qcore::{
    embed, kron, partial_trace, trace_distance, CMatrix, CVector, DensityMatrix, Operator, StateVector, C64,
    JOINT_DIMS, PHOTON1, PHOTON2,
};

/// Atomic rotation by `theta` about y: [[cos θ/2, −sin θ/2], [sin θ/2, cos θ/2]].
pub fn rotation_op(theta: f64) -> Operator {
    let (s, c) = (theta / 2.0).sin_cos();
    let m = CMatrix::from_row_slice(2, 2, &[C64::new(c, 0.0), C64::new(-s, 0.0), C64::new(s, 0.0), C64::new(c, 0.0)]);
    Operator::unitary(m).expect("rotation is unitary")
}

/// Atom–photon CZ in the basis {↑R, ↑L, ↓R, ↓L}.
pub fn cz_atom_photon(ideal: bool, dphi: f64, xi: f64) -> Operator {
    if ideal {
        modified_cz(0.0, 0.0)
    } else {
        modified_cz(dphi, xi)
    }
}

/// The target gate, diag(1, 1, −1, 1) on {RR, RL, LR, LL}.
pub fn cpf_operator() -> Operator {
    let one = C64::new(1.0, 0.0);
    Operator::diag(&[one, one, -one, one]).expect("diagonal phases are unitary")
}

fn atom_op(u: &Operator) -> CMatrix {
    kron(u.matrix(), &CMatrix::identity(4, 4))
}

fn cz_on(photon: usize) -> CMatrix {
    embed(&cz_atom_photon(true, 0.0, 0.0), &[0, photon], &JOINT_DIMS).expect("valid register").matrix().clone()
}

/// diag(−1, 1) on photon 1, applied after reading |↑⟩.
fn feedback() -> CMatrix {
    let mut m = CMatrix::identity(4, 4);
    m[(0, 0)] = C64::new(-1.0, 0.0);
    m[(1, 1)] = C64::new(-1.0, 0.0);
    m
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AtomOutcome {
    Up,
    Down,
}

impl AtomOutcome {
    pub fn index(self) -> usize {
        match self {
            AtomOutcome::Up => 0,
            AtomOutcome::Down => 1,
        }
    }
}

impl FromStr for AtomOutcome {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "up" => Ok(AtomOutcome::Up),
            "down" => Ok(AtomOutcome::Down),
            other => Err(Error::UnknownVariant { kind: "atomic outcome", value: other.into() }),
        }
    }
}

impl fmt::Display for AtomOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AtomOutcome::Up => "up",
            AtomOutcome::Down => "down",
        })
    }
}

/// Joint state vectors after each of the six circuit steps for a pure input.
fn ideal_steps(input: &StateVector) -> Result<Vec<CVector>> {
    if input.dim() != 4 {
        return Err(Error::DimensionMismatch { expected: 4, got: input.dim() });
    }
    let up = CVector::from_column_slice(&[C64::new(1.0, 0.0), C64::new(0.0, 0.0)]);
    let mut psi = up.kronecker(input.amplitudes());
    let ops = [
        atom_op(&rotation_op(FRAC_PI_2)),
        cz_on(PHOTON1),
        atom_op(&rotation_op(-FRAC_PI_2)),
        cz_on(PHOTON2),
        atom_op(&rotation_op(FRAC_PI_2)),
    ];
    let mut steps = vec![psi.clone()];
    for op in &ops {
        psi = op * psi;
        steps.push(psi.clone());
    }
    Ok(steps)
}

#[derive(Clone, Debug)]
pub struct IdealRun {
    /// Photonic state after feedback, per atomic outcome (↑, ↓); `None` if
    /// that outcome cannot occur.
    pub outputs: [Option<StateVector>; 2],
    /// Probabilities of reading ↑ and ↓.
    pub probabilities: [f64; 2],
}

impl IdealRun {
    /// The output state (identical for both outcomes).
    pub fn output(&self) -> &StateVector {
        self.outputs.iter().flatten().next().expect("some outcome has non-zero probability")
    }
}

fn measured_branches(final_state: &CVector) -> Result<IdealRun> {
    let up = final_state.rows(0, 4).into_owned();
    let down = final_state.rows(4, 4).into_owned();
    let probabilities = [up.norm_squared(), down.norm_squared()];
    let up = feedback() * up;
    let branch = |v: CVector, p: f64| if p > 1e-15 { StateVector::normalized(v).map(Some) } else { Ok(None) };
    Ok(IdealRun { outputs: [branch(up, probabilities[0])?, branch(down, probabilities[1])?], probabilities })
}

/// Runs a pure two-photon input through the perfect circuit.
pub fn run_ideal(input: &StateVector) -> Result<IdealRun> {
    let steps = ideal_steps(input)?;
    measured_branches(steps.last().expect("six steps"))
}

#[derive(Clone, Debug, Serialize)]
pub struct TraceStep {
    pub step: usize,
    pub label: &'static str,
    pub state: DensityMatrix,
}

#[derive(Clone, Debug, Serialize)]
pub struct ProtocolTrace {
    pub input: DensityMatrix,
    pub steps: Vec<TraceStep>,
    pub outcome: AtomOutcome,
    pub outcome_probability: f64,
    pub feedback_applied: bool,
    pub output: DensityMatrix,
}

pub const STEP_LABELS: [&str; 6] = [
    "prepare atom in up",
    "rotate atom by +pi/2",
    "reflect photon 1",
    "rotate atom by -pi/2",
    "reflect photon 2",
    "rotate atom by +pi/2",
];

/// Step-by-step record of the perfect circuit, post-selected on `outcome`.
pub fn trace(input: &StateVector, outcome: AtomOutcome) -> Result<ProtocolTrace> {
    let steps = ideal_steps(input)?;
    let run = measured_branches(steps.last().expect("six steps"))?;
    let output = run.outputs[outcome.index()].as_ref().ok_or(Error::ZeroProbability)?;
    let steps = steps
        .into_iter()
        .zip(STEP_LABELS)
        .enumerate()
        .map(|(k, (v, label))| Ok(TraceStep { step: k + 1, label, state: StateVector::new(v)?.to_density() }))
        .collect::<Result<Vec<_>>>()?;
    Ok(ProtocolTrace {
        input: input.to_density(),
        steps,
        outcome,
        outcome_probability: run.probabilities[outcome.index()],
        feedback_applied: outcome == AtomOutcome::Up,
        output: output.to_density(),
    })
}

/// How Δφ is averaged.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "kebab-case")]
pub enum Averaging {
    GaussHermite { nodes: usize },
    MonteCarlo { samples: usize, seed: u64 },
}

/// Whether both reflections see the same Δφ.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Correlation {
    #[default]
    Independent,
    Correlated,
}

impl FromStr for Correlation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "independent" => Ok(Correlation::Independent),
            "correlated" => Ok(Correlation::Correlated),
            other => Err(Error::UnknownVariant { kind: "phase correlation", value: other.into() }),
        }
    }
}

impl fmt::Display for Correlation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Correlation::Independent => "independent",
            Correlation::Correlated => "correlated",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AveragingSpec {
    pub method: Averaging,
    pub correlation: Correlation,
}

pub const DEFAULT_NODES: usize = 16;

impl Default for AveragingSpec {
    fn default() -> Self {
        Self { method: Averaging::GaussHermite { nodes: DEFAULT_NODES }, correlation: Correlation::Independent }
    }
}

impl AveragingSpec {
    pub fn validate(&self) -> Result<()> {
        match self.method {
            Averaging::GaussHermite { nodes } if nodes == 0 || nodes > 200 => Err(Error::InvalidParameter {
                name: "nodes",
                reason: format!("quadrature order must be in 1..=200, got {nodes}"),
            }),
            Averaging::MonteCarlo { samples: 0, .. } => {
                Err(Error::InvalidParameter { name: "samples", reason: "need at least one sample".into() })
            }
            _ => Ok(()),
        }
    }

    /// Points and weights of Δφ ~ N(0, σ²); `stream` separates the draws of
    /// the two reflections in Monte Carlo mode.
    fn points(&self, sigma: f64, stream: u64) -> Result<Vec<(f64, f64)>> {
        if sigma == 0.0 {
            return Ok(vec![(0.0, 1.0)]);
        }
        Ok(match self.method {
            Averaging::GaussHermite { nodes } => GaussHermite::new(nodes)?.normal_points(0.0, sigma),
            Averaging::MonteCarlo { samples, seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(stream);
                let normal = Normal::new(0.0, sigma)
                    .map_err(|e| Error::InvalidParameter { name: "sigma_dphi", reason: e.to_string() })?;
                let w = 1.0 / samples as f64;
                (0..samples).map(|_| (normal.sample(&mut rng), w)).collect()
            }
        })
    }
}

/// Outcome-resolved output of the noisy gate.
#[derive(Clone, Debug)]
pub struct OutcomeBranches {
    /// Probabilities of *reading* ↑ and ↓.
    pub probabilities: [f64; 2],
    /// Normalised photonic output per reading, after feedback and the
    /// detector-side channels.
    pub states: [Option<DensityMatrix>; 2],
}

impl OutcomeBranches {
    pub fn combined(&self) -> Result<DensityMatrix> {
        let mut m = CMatrix::zeros(4, 4);
        for (p, s) in self.probabilities.iter().zip(&self.states) {
            if let Some(s) = s {
                m += s.matrix() * C64::new(*p, 0.0);
            }
        }
        DensityMatrix::from_channel_output(m)
    }
}

/// Joint state before readout, for an (unnormalised) photonic input matrix.
fn noisy_joint(rho_p: &CMatrix, e: &ErrorParams, k1: &[(f64, CMatrix)], k2: &[(f64, CMatrix)]) -> CMatrix {
    let mut atom = CMatrix::zeros(2, 2);
    atom[(0, 0)] = C64::new(1.0, 0.0);
    let mut m = kron(&atom, rho_p);
    if e.p_prep > 0.0 {
        m = flip_atom_raw(&m) * C64::new(e.p_prep, 0.0) + m * C64::new(1.0 - e.p_prep, 0.0);
    }
    let plus = atom_op(&rotation_op(FRAC_PI_2));
    let minus = atom_op(&rotation_op(-FRAC_PI_2));
    m = &plus * m * plus.adjoint();
    m = apply_kraus(&m, k1);
    dephase_raw(&mut m, e.dephase);
    m = &minus * m * minus.adjoint();
    m = apply_kraus(&m, k2);
    dephase_raw(&mut m, e.dephase);
    &plus * m * plus.adjoint()
}

fn noisy_branches_raw(rho_p: &CMatrix, e: &ErrorParams, avg: &AveragingSpec) -> Result<[CMatrix; 2]> {
    let joint = match avg.correlation {
        Correlation::Independent => {
            let k1 = reflection_kraus(PHOTON1, e, &avg.points(e.sigma_dphi, 1)?);
            let k2 = reflection_kraus(PHOTON2, e, &avg.points(e.sigma_dphi, 2)?);
            noisy_joint(rho_p, e, &k1, &k2)
        }
        Correlation::Correlated => {
            let mut acc = CMatrix::zeros(8, 8);
            for (d, w) in avg.points(e.sigma_dphi, 1)? {
                let k1 = reflection_kraus(PHOTON1, e, &[(d, 1.0)]);
                let k2 = reflection_kraus(PHOTON2, e, &[(d, 1.0)]);
                acc += noisy_joint(rho_p, e, &k1, &k2) * C64::new(w, 0.0);
            }
            acc
        }
    };
    let read = detection_error(&AtomBranches::from_joint_raw(&joint), e.p_det)?;
    let f = feedback();
    let up = &f * read.up * &f;
    Ok([up, read.down].map(|m| polarization_noise_raw(&dark_count_raw(&m, e.p_dark), e.p_pol)))
}

fn check_input(input: &DensityMatrix, e: &ErrorParams, avg: &AveragingSpec) -> Result<()> {
    if input.dim() != 4 {
        return Err(Error::DimensionMismatch { expected: 4, got: input.dim() });
    }
    e.validate()?;
    avg.validate()
}

/// Runs a two-photon state through the gate with the imperfections of `e`,
/// resolving the reported atomic outcome.
pub fn run_with_errors_branches(
    input: &DensityMatrix,
    e: &ErrorParams,
    avg: &AveragingSpec,
) -> Result<OutcomeBranches> {
    check_input(input, e, avg)?;
    let raw = noisy_branches_raw(input.matrix(), e, avg)?;
    let mut probabilities = [0.0; 2];
    let mut states = [None, None];
    for (k, m) in raw.into_iter().enumerate() {
        let p = m.trace().re;
        probabilities[k] = p.max(0.0);
        if p > 1e-15 {
            states[k] = Some(DensityMatrix::from_channel_output(m)?);
        }
    }
    Ok(OutcomeBranches { probabilities, states })
}

/// Output of the imperfect gate, summed over atomic outcomes.
pub fn run_with_errors(input: &DensityMatrix, e: &ErrorParams, avg: &AveragingSpec) -> Result<DensityMatrix> {
    check_input(input, e, avg)?;
    let [up, down] = noisy_branches_raw(input.matrix(), e, avg)?;
    DensityMatrix::from_channel_output(up + down)
}

/// Largest trace distance, over `inputs`, between the measured-and-corrected
/// circuit and the variant that replaces readout and feedback by a third
/// reflection of photon 1 and discards the atom.
pub fn deferred_equivalence_check(inputs: &[StateVector]) -> Result<f64> {
    let third = cz_on(PHOTON1);
    let mut worst: f64 = 0.0;
    for input in inputs {
        let steps = ideal_steps(input)?;
        let last = steps.last().expect("six steps");
        let run = measured_branches(last)?;
        let mut measured = CMatrix::zeros(4, 4);
        for (p, out) in run.probabilities.iter().zip(&run.outputs) {
            if let Some(out) = out {
                measured += out.projector() * C64::new(*p, 0.0);
            }
        }
        let measured = DensityMatrix::from_channel_output(measured)?;
        let coherent = StateVector::new(&third * last)?.to_density();
        let deferred = partial_trace(&coherent, &JOINT_DIMS, &[PHOTON1, PHOTON2])?;
        worst = worst.max(trace_distance(&measured, &deferred)?);
    }
    Ok(worst)
}

/// Something that maps two-photon inputs to two-photon outputs.
pub trait PhotonChannel {
    fn apply(&self, rho: &DensityMatrix) -> Result<DensityMatrix>;
}

impl<F: Fn(&DensityMatrix) -> Result<DensityMatrix>> PhotonChannel for F {
    fn apply(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        self(rho)
    }
}

/// The gate as a channel, either perfect or with a given error model.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum GateModel {
    Ideal,
    Noisy { params: ErrorParams, averaging: AveragingSpec },
}

impl GateModel {
    pub fn branches(&self, rho: &DensityMatrix) -> Result<OutcomeBranches> {
        match self {
            GateModel::Ideal => run_with_errors_branches(rho, &ErrorParams::none(), &AveragingSpec::default()),
            GateModel::Noisy { params, averaging } => run_with_errors_branches(rho, params, averaging),
        }
    }
}

impl PhotonChannel for GateModel {
    fn apply(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        match self {
            GateModel::Ideal => run_with_errors(rho, &ErrorParams::none(), &AveragingSpec::default()),
            GateModel::Noisy { params, averaging } => run_with_errors(rho, params, averaging),
        }
    }
}
