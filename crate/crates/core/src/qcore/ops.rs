use super::linalg::{compose, digits, eigenvalues_hermitian, hermitian_deviation, kron, sandwich, trace, CMatrix, C64};
use super::types::{DensityMatrix, Operator, ProjectorSet, StateVector};
use super::TOL_EIGEN;
use crate::error::{check_probability, Error, Result};

/// Kronecker product within one kind of object. Mixing kinds (a state with
/// an operator, say) does not type-check.
pub trait Tensor: Sized {
    fn tensor(&self, other: &Self) -> Self;
}

impl Tensor for StateVector {
    fn tensor(&self, other: &Self) -> Self {
        StateVector::from_raw(self.amplitudes().kronecker(other.amplitudes()))
    }
}

impl Tensor for DensityMatrix {
    fn tensor(&self, other: &Self) -> Self {
        DensityMatrix::from_channel_output(kron(self.matrix(), other.matrix()))
            .expect("tensor product of valid density matrices is valid")
    }
}

impl Tensor for Operator {
    fn tensor(&self, other: &Self) -> Self {
        Operator::from_parts(kron(self.matrix(), other.matrix()), self.is_unitary() && other.is_unitary())
    }
}

pub fn tensor<T: Tensor>(a: &T, b: &T) -> T {
    a.tensor(b)
}

/// Things an operator can act on: `U|ψ⟩` for states, `UρU†` for density
/// matrices.
pub trait Evolve: Sized {
    fn evolve(&self, u: &Operator) -> Result<Self>;
}

impl Evolve for StateVector {
    fn evolve(&self, u: &Operator) -> Result<Self> {
        if u.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: u.dim(), got: self.dim() });
        }
        let out = u.matrix() * self.amplitudes();
        if u.is_unitary() {
            Ok(StateVector::from_raw(out))
        } else {
            StateVector::normalized(out)
        }
    }
}

impl Evolve for DensityMatrix {
    fn evolve(&self, u: &Operator) -> Result<Self> {
        if u.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: u.dim(), got: self.dim() });
        }
        DensityMatrix::from_channel_output(sandwich(u.matrix(), self.matrix()))
    }
}

pub fn apply<S: Evolve>(u: &Operator, s: &S) -> Result<S> {
    s.evolve(u)
}

fn check_targets(targets: &[usize], n: usize) -> Result<()> {
    for (k, &t) in targets.iter().enumerate() {
        if t >= n {
            return Err(Error::InvalidSubsystem(format!("target {t} out of range for {n} factors")));
        }
        if targets[..k].contains(&t) {
            return Err(Error::InvalidSubsystem(format!("target {t} repeated")));
        }
    }
    Ok(())
}

/// Lifts `u`, acting on `targets` (in that factor order), to the full
/// register with local dimensions `dims`; identity on the rest.
pub fn embed(u: &Operator, targets: &[usize], dims: &[usize]) -> Result<Operator> {
    check_targets(targets, dims.len())?;
    if targets.is_empty() {
        return Err(Error::InvalidSubsystem("no targets".into()));
    }
    let target_dims: Vec<usize> = targets.iter().map(|&t| dims[t]).collect();
    let sub: usize = target_dims.iter().product();
    if sub != u.dim() {
        return Err(Error::DimensionMismatch { expected: sub, got: u.dim() });
    }
    let total: usize = dims.iter().product();
    let mut out = CMatrix::zeros(total, total);
    for col in 0..total {
        let cd = digits(col, dims);
        let sub_col = compose(&targets.iter().map(|&t| cd[t]).collect::<Vec<_>>(), &target_dims);
        for sub_row in 0..sub {
            let v = u.matrix()[(sub_row, sub_col)];
            if v == C64::new(0.0, 0.0) {
                continue;
            }
            let sd = digits(sub_row, &target_dims);
            let mut rd = cd.clone();
            for (k, &t) in targets.iter().enumerate() {
                rd[t] = sd[k];
            }
            out[(compose(&rd, dims), col)] = v;
        }
    }
    Ok(Operator::from_parts(out, u.is_unitary()))
}

/// Reduced state on `keep`, listed in register order regardless of the order
/// given.
pub fn partial_trace(rho: &DensityMatrix, dims: &[usize], keep: &[usize]) -> Result<DensityMatrix> {
    let total: usize = dims.iter().product();
    if total != rho.dim() {
        return Err(Error::DimensionMismatch { expected: total, got: rho.dim() });
    }
    check_targets(keep, dims.len())?;
    if keep.is_empty() {
        return Err(Error::InvalidSubsystem("must keep at least one subsystem".into()));
    }
    let mut keep: Vec<usize> = keep.to_vec();
    keep.sort_unstable();
    let traced: Vec<usize> = (0..dims.len()).filter(|k| !keep.contains(k)).collect();
    let kdims: Vec<usize> = keep.iter().map(|&k| dims[k]).collect();
    let tdims: Vec<usize> = traced.iter().map(|&k| dims[k]).collect();
    let kn: usize = kdims.iter().product();
    let tn: usize = tdims.iter().product();

    let full_index = |kd: &[usize], td: &[usize]| {
        let mut d = vec![0; dims.len()];
        for (i, &k) in keep.iter().enumerate() {
            d[k] = kd[i];
        }
        for (i, &k) in traced.iter().enumerate() {
            d[k] = td[i];
        }
        compose(&d, dims)
    };

    let mut out = CMatrix::zeros(kn, kn);
    for a in 0..kn {
        let ad = digits(a, &kdims);
        for b in 0..kn {
            let bd = digits(b, &kdims);
            let mut acc = C64::new(0.0, 0.0);
            for t in 0..tn {
                let td = digits(t, &tdims);
                acc += rho.matrix()[(full_index(&ad, &td), full_index(&bd, &td))];
            }
            out[(a, b)] = acc;
        }
    }
    DensityMatrix::from_channel_output(out)
}

/// One measurement outcome: its probability and, when that probability is
/// non-zero, the normalised post-measurement state.
#[derive(Clone, Debug)]
pub struct Outcome {
    pub probability: f64,
    pub state: Option<DensityMatrix>,
}

pub fn measure(rho: &DensityMatrix, projectors: &ProjectorSet) -> Result<Vec<Outcome>> {
    if projectors.dim() != rho.dim() {
        return Err(Error::DimensionMismatch { expected: projectors.dim(), got: rho.dim() });
    }
    let mut outcomes = Vec::with_capacity(projectors.projectors().len());
    for p in projectors.projectors() {
        let post = p * rho.matrix() * p;
        let prob = trace(&post).re.max(0.0);
        let state = if prob > 1e-15 { Some(DensityMatrix::from_channel_output(post)?) } else { None };
        outcomes.push(Outcome { probability: prob, state });
    }
    if outcomes.iter().all(|o| o.state.is_none()) {
        return Err(Error::ZeroProbability);
    }
    Ok(outcomes)
}

/// ⟨ψ|ρ|ψ⟩, returned raw: it may leave [0, 1] slightly for unphysical ρ.
pub fn fidelity_pure(rho: &DensityMatrix, psi: &StateVector) -> Result<f64> {
    if rho.dim() != psi.dim() {
        return Err(Error::DimensionMismatch { expected: rho.dim(), got: psi.dim() });
    }
    let a = psi.amplitudes();
    Ok(a.dotc(&(rho.matrix() * a)).re)
}

/// Partial transpose of a two-qubit matrix on `subsystem` (0 or 1).
pub fn partial_transpose(rho: &DensityMatrix, subsystem: usize) -> Result<CMatrix> {
    if rho.dim() != 4 {
        return Err(Error::DimensionMismatch { expected: 4, got: rho.dim() });
    }
    if subsystem > 1 {
        return Err(Error::InvalidSubsystem(format!("bipartite subsystem must be 0 or 1, got {subsystem}")));
    }
    let m = rho.matrix();
    Ok(CMatrix::from_fn(4, 4, |r, c| {
        let (i, j) = (r / 2, r % 2);
        let (k, l) = (c / 2, c % 2);
        if subsystem == 0 {
            m[(k * 2 + j, i * 2 + l)]
        } else {
            m[(i * 2 + l, k * 2 + j)]
        }
    }))
}

pub fn min_eigenvalue(h: &CMatrix) -> Result<f64> {
    if h.nrows() != h.ncols() {
        return Err(Error::NotSquare(h.nrows(), h.ncols()));
    }
    let dev = hermitian_deviation(h);
    if dev > TOL_EIGEN {
        return Err(Error::NotHermitian(dev));
    }
    Ok(eigenvalues_hermitian(h)[0])
}

/// (1 − p)·ρ1 + p·ρ2
pub fn mix(rho1: &DensityMatrix, rho2: &DensityMatrix, p: f64) -> Result<DensityMatrix> {
    check_probability("p", p)?;
    if rho1.dim() != rho2.dim() {
        return Err(Error::DimensionMismatch { expected: rho1.dim(), got: rho2.dim() });
    }
    DensityMatrix::from_channel_output(rho1.matrix() * C64::new(1.0 - p, 0.0) + rho2.matrix() * C64::new(p, 0.0))
}

/// ½‖ρ − σ‖₁
pub fn trace_distance(a: &DensityMatrix, b: &DensityMatrix) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch { expected: a.dim(), got: b.dim() });
    }
    let diff = a.matrix() - b.matrix();
    Ok(0.5 * eigenvalues_hermitian(&diff).iter().map(|v| v.abs()).sum::<f64>())
}
