use serde::{Deserialize, Serialize};

use super::linalg::{eigenvalues_hermitian, hermitian_deviation, max_abs_diff, trace, CMatrix, CVector, C64};
use super::{TOL_EIGEN, TOL_EXACT};
use crate::error::{Error, Result};

fn check_dim(dim: usize) -> Result<()> {
    if dim >= 2 && dim.is_power_of_two() && dim <= 8 {
        Ok(())
    } else {
        Err(Error::InvalidParameter { name: "dim", reason: format!("{dim} is not one of 2, 4, 8") })
    }
}

/// Normalised pure state.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    amps: CVector,
}

impl StateVector {
    pub fn new(amps: CVector) -> Result<Self> {
        check_dim(amps.len())?;
        let norm2 = amps.norm_squared();
        if (norm2 - 1.0).abs() > TOL_EXACT {
            return Err(Error::NotNormalised(norm2));
        }
        Ok(Self { amps })
    }

    /// Builds a state from arbitrary (non-zero) amplitudes, normalising them.
    pub fn normalized(amps: CVector) -> Result<Self> {
        let norm = amps.norm();
        if norm == 0.0 {
            return Err(Error::NotNormalised(0.0));
        }
        Self::new(amps.unscale(norm))
    }

    pub fn from_slice(amps: &[C64]) -> Result<Self> {
        Self::new(CVector::from_column_slice(amps))
    }

    pub fn basis(dim: usize, index: usize) -> Result<Self> {
        check_dim(dim)?;
        if index >= dim {
            return Err(Error::DimensionMismatch { expected: dim, got: index });
        }
        let mut amps = CVector::zeros(dim);
        amps[index] = C64::new(1.0, 0.0);
        Ok(Self { amps })
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amps
    }

    /// ⟨self|other⟩
    pub fn inner(&self, other: &StateVector) -> Result<C64> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: other.dim() });
        }
        Ok(self.amps.dotc(&other.amps))
    }

    pub fn projector(&self) -> CMatrix {
        &self.amps * self.amps.adjoint()
    }

    pub fn to_density(&self) -> DensityMatrix {
        DensityMatrix { m: self.projector(), physical: true }
    }

    pub(crate) fn from_raw(amps: CVector) -> Self {
        Self { amps }
    }
}

/// Mixed state. `physical` is false when the smallest eigenvalue is below
/// `-1e-10`, which only happens for linear-inversion estimates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDensity", into = "RawDensity")]
pub struct DensityMatrix {
    m: CMatrix,
    physical: bool,
}

impl DensityMatrix {
    pub fn new(m: CMatrix) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::NotSquare(m.nrows(), m.ncols()));
        }
        check_dim(m.nrows())?;
        let dev = hermitian_deviation(&m);
        if dev > TOL_EXACT {
            return Err(Error::NotHermitian(dev));
        }
        let tr = trace(&m);
        if (tr.re - 1.0).abs() > TOL_EXACT || tr.im.abs() > TOL_EXACT {
            return Err(Error::InvalidTrace(tr.re));
        }
        let physical = eigenvalues_hermitian(&m)[0] >= -TOL_EIGEN;
        Ok(Self { m, physical })
    }

    /// Hermitian-symmetrises and trace-normalises `m` before validation.
    /// Used at the end of long channel compositions where round-off of a
    /// few ulps would otherwise trip the exact checks.
    pub fn from_channel_output(m: CMatrix) -> Result<Self> {
        let sym = (&m + m.adjoint()) * C64::new(0.5, 0.0);
        let tr = trace(&sym).re;
        if tr.abs() < f64::EPSILON {
            return Err(Error::InvalidTrace(tr));
        }
        Self::new(sym.unscale(tr))
    }

    pub fn maximally_mixed(dim: usize) -> Result<Self> {
        check_dim(dim)?;
        Ok(Self { m: CMatrix::identity(dim, dim).unscale(dim as f64), physical: true })
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.m
    }

    pub fn into_matrix(self) -> CMatrix {
        self.m
    }

    pub fn is_physical(&self) -> bool {
        self.physical
    }

    pub fn trace(&self) -> C64 {
        trace(&self.m)
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        eigenvalues_hermitian(&self.m)
    }

    pub fn purity(&self) -> f64 {
        trace(&(&self.m * &self.m)).re
    }
}

#[derive(Serialize, Deserialize)]
struct RawDensity {
    dim: usize,
    re: Vec<Vec<f64>>,
    im: Vec<Vec<f64>>,
    physical: bool,
}

impl From<DensityMatrix> for RawDensity {
    fn from(d: DensityMatrix) -> Self {
        let n = d.dim();
        let row = |f: fn(&C64) -> f64, i: usize| (0..n).map(|j| f(&d.m[(i, j)])).collect();
        RawDensity {
            dim: n,
            re: (0..n).map(|i| row(|z| z.re, i)).collect(),
            im: (0..n).map(|i| row(|z| z.im, i)).collect(),
            physical: d.physical,
        }
    }
}

impl TryFrom<RawDensity> for DensityMatrix {
    type Error = Error;

    fn try_from(raw: RawDensity) -> Result<Self> {
        let n = raw.dim;
        if raw.re.len() != n || raw.im.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: raw.re.len() });
        }
        let mut m = CMatrix::zeros(n, n);
        for i in 0..n {
            if raw.re[i].len() != n || raw.im[i].len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: raw.re[i].len() });
            }
            for j in 0..n {
                m[(i, j)] = C64::new(raw.re[i][j], raw.im[i][j]);
            }
        }
        DensityMatrix::new(m)
    }
}

/// Linear operator; `unitary` is set only by [`Operator::unitary`] after a
/// U†U = I check.
#[derive(Clone, Debug, PartialEq)]
pub struct Operator {
    m: CMatrix,
    unitary: bool,
}

impl Operator {
    pub fn new(m: CMatrix) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::NotSquare(m.nrows(), m.ncols()));
        }
        check_dim(m.nrows())?;
        Ok(Self { m, unitary: false })
    }

    pub fn unitary(m: CMatrix) -> Result<Self> {
        let mut op = Self::new(m)?;
        let n = op.dim();
        let dev = max_abs_diff(&(op.m.adjoint() * &op.m), &CMatrix::identity(n, n));
        if dev > TOL_EIGEN {
            return Err(Error::NotUnitary(dev));
        }
        op.unitary = true;
        Ok(op)
    }

    pub fn identity(dim: usize) -> Result<Self> {
        Self::unitary(CMatrix::identity(dim, dim))
    }

    pub fn diag(entries: &[C64]) -> Result<Self> {
        let m = CMatrix::from_diagonal(&CVector::from_column_slice(entries));
        Self::unitary(m.clone()).or_else(|_| Self::new(m))
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.m
    }

    pub fn is_unitary(&self) -> bool {
        self.unitary
    }

    pub fn dagger(&self) -> Operator {
        Operator { m: self.m.adjoint(), unitary: self.unitary }
    }

    /// Operator product `self · rhs`.
    pub fn compose(&self, rhs: &Operator) -> Result<Operator> {
        if self.dim() != rhs.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: rhs.dim() });
        }
        Ok(Operator { m: &self.m * &rhs.m, unitary: self.unitary && rhs.unitary })
    }

    pub(crate) fn from_parts(m: CMatrix, unitary: bool) -> Self {
        Self { m, unitary }
    }
}

/// Complete set of orthogonal projectors.
#[derive(Clone, Debug)]
pub struct ProjectorSet {
    projectors: Vec<CMatrix>,
}

impl ProjectorSet {
    pub fn new(projectors: Vec<CMatrix>) -> Result<Self> {
        let Some(first) = projectors.first() else {
            return Err(Error::InvalidProjectors("empty set".into()));
        };
        let n = first.nrows();
        let mut sum = CMatrix::zeros(n, n);
        for (k, p) in projectors.iter().enumerate() {
            if p.nrows() != n || p.ncols() != n {
                return Err(Error::DimensionMismatch { expected: n, got: p.nrows() });
            }
            if hermitian_deviation(p) > TOL_EIGEN {
                return Err(Error::InvalidProjectors(format!("projector {k} is not Hermitian")));
            }
            if max_abs_diff(&(p * p), p) > TOL_EIGEN {
                return Err(Error::InvalidProjectors(format!("projector {k} is not idempotent")));
            }
            sum += p;
        }
        if max_abs_diff(&sum, &CMatrix::identity(n, n)) > TOL_EIGEN {
            return Err(Error::InvalidProjectors("projectors do not sum to identity".into()));
        }
        Ok(Self { projectors })
    }

    /// Computational-basis projectors of one subsystem, embedded in the
    /// register with local dimensions `dims`.
    pub fn computational(dims: &[usize], subsystem: usize) -> Result<Self> {
        if subsystem >= dims.len() {
            return Err(Error::InvalidSubsystem(format!(
                "subsystem {subsystem} out of range for {} factors",
                dims.len()
            )));
        }
        let total: usize = dims.iter().product();
        let projectors = (0..dims[subsystem])
            .map(|k| {
                CMatrix::from_fn(total, total, |i, j| {
                    if i == j && super::linalg::digits(i, dims)[subsystem] == k {
                        C64::new(1.0, 0.0)
                    } else {
                        C64::new(0.0, 0.0)
                    }
                })
            })
            .collect();
        Self::new(projectors)
    }

    pub fn dim(&self) -> usize {
        self.projectors[0].nrows()
    }

    pub fn projectors(&self) -> &[CMatrix] {
        &self.projectors
    }
}
