//! Three-pulse Ramsey calibration of the atomic qubit rotations.
//!
//! Frequencies are in kHz and times in µs. The atom starts in |↑⟩ and sees
//! pulse(+π/2) · gap · pulse(−π/2) · gap · pulse(+π/2) with rectangular
//! envelopes. The effective two-photon detuning is `δ − delta_offset`; while a
//! pulse is on it is shifted further by `light_shift + pulse_detuning`.

use std::f64::consts::PI;
use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};
use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tomography::csv_error;

const MAX_ITERATIONS: usize = 200;
const MAX_DAMPING: f64 = 1e16;
const STEP_TOL: f64 = 1e-13;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RamseyParams {
    /// Two-photon Rabi frequency.
    pub rabi_khz: f64,
    /// Offset of the two-photon resonance, e.g. from stray magnetic fields.
    pub delta_offset_khz: f64,
    /// Light shift present while the Raman beams are on.
    pub light_shift_khz: f64,
    pub pulse_len_us: f64,
    /// Free evolution before the second and before the third pulse.
    pub gaps_us: [f64; 2],
    /// Extra detuning applied only during pulses.
    pub pulse_detuning_khz: f64,
}

impl Default for RamseyParams {
    fn default() -> Self {
        Self {
            rabi_khz: 250.0,
            delta_offset_khz: 0.0,
            light_shift_khz: 40.0,
            pulse_len_us: 1.0,
            gaps_us: [1.3, 1.3],
            pulse_detuning_khz: 0.0,
        }
    }
}

impl RamseyParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |name, reason: &str| Err(Error::InvalidParameter { name, reason: reason.into() });
        if !(self.rabi_khz > 0.0 && self.rabi_khz.is_finite()) {
            return bad("rabi_khz", "must be positive");
        }
        if !(self.pulse_len_us > 0.0 && self.pulse_len_us.is_finite()) {
            return bad("pulse_len_us", "must be positive");
        }
        if self.gaps_us.iter().any(|g| !(*g >= 0.0 && g.is_finite())) {
            return bad("gaps_us", "must be non-negative");
        }
        if ![self.delta_offset_khz, self.light_shift_khz, self.pulse_detuning_khz].iter().all(|x| x.is_finite()) {
            return bad("detuning", "must be finite");
        }
        Ok(())
    }

    /// Same parameters with the pulse detuning cancelling the light shift.
    pub fn compensated(self) -> Self {
        Self { pulse_detuning_khz: -self.light_shift_khz, ..self }
    }

    /// Pulse area in radians.
    pub fn pulse_area(&self) -> f64 {
        2.0 * PI * self.rabi_khz * 1e-3 * self.pulse_len_us
    }
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// Two-level propagator exp(−i t (Δσz + Ωσy)/2) for cyclic detuning and
/// Rabi frequency in kHz. A negative Rabi frequency reverses the rotation.
pub fn propagator(detuning_khz: f64, rabi_khz: f64, duration_us: f64) -> Matrix2<C64> {
    let w = 2.0 * PI * 1e-3 * duration_us / 2.0;
    let (d, o) = (w * detuning_khz, w * rabi_khz);
    let a = d.hypot(o);
    let (c, s) = (a.cos(), sinc(a));
    Matrix2::new(C64::new(c, -d * s), C64::new(-o * s, 0.0), C64::new(o * s, 0.0), C64::new(c, d * s))
}

/// Population in |↑⟩ after the three-pulse sequence at scan detuning δ.
pub fn population_up(p: &RamseyParams, delta_khz: f64) -> f64 {
    let gap = delta_khz - p.delta_offset_khz;
    let on = gap + p.light_shift_khz + p.pulse_detuning_khz;
    let pulse = |sign: f64| propagator(on, sign * p.rabi_khz, p.pulse_len_us);
    let u =
        pulse(1.0) * propagator(gap, 0.0, p.gaps_us[1]) * pulse(-1.0) * propagator(gap, 0.0, p.gaps_us[0]) * pulse(1.0);
    let psi = u * Vector2::new(C64::new(1.0, 0.0), C64::new(0.0, 0.0));
    psi[0].norm_sqr().clamp(0.0, 1.0)
}

/// Evenly spaced scan from −span/2 to +span/2.
pub fn scan_grid(span_khz: f64, points: usize) -> Vec<f64> {
    if points < 2 {
        return vec![0.0; points];
    }
    (0..points).map(|i| -span_khz / 2.0 + span_khz * i as f64 / (points - 1) as f64).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub detunings_khz: Vec<f64>,
    pub p_up: Vec<f64>,
    pub sigma: Option<Vec<f64>>,
}

impl Spectrum {
    pub fn new(detunings_khz: Vec<f64>, p_up: Vec<f64>, sigma: Option<Vec<f64>>) -> Result<Self> {
        let s = Self { detunings_khz, p_up, sigma };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.detunings_khz.len();
        if self.p_up.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: self.p_up.len() });
        }
        if let Some(s) = &self.sigma {
            if s.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: s.len() });
            }
            if let Some(&bad) = s.iter().find(|x| !(**x > 0.0 && x.is_finite())) {
                return Err(Error::InvalidParameter { name: "sigma", reason: format!("{bad} is not positive") });
            }
        }
        if self.detunings_khz.iter().any(|d| !d.is_finite()) {
            return Err(Error::InvalidParameter { name: "delta_khz", reason: "must be finite".into() });
        }
        if let Some(&bad) = self.p_up.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::InvalidProbability { name: "p_up", value: bad });
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.p_up.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p_up.is_empty()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        for i in 0..self.len() {
            let row = SpectrumRow {
                delta_khz: self.detunings_khz[i],
                p_up: self.p_up[i],
                sigma: self.sigma.as_ref().map(|s| s[i]),
            };
            wtr.serialize(row).map_err(csv_error)?;
        }
        wtr.flush()?;
        Ok(())
    }

    /// Reads `delta_khz,p_up,sigma` rows; `sigma` must be given on every row
    /// or on none. Lines starting with `#` are ignored.
    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(r);
        let (mut d, mut p, mut s) = (Vec::new(), Vec::new(), Vec::new());
        for row in rdr.deserialize::<SpectrumRow>() {
            let row = row.map_err(csv_error)?;
            d.push(row.delta_khz);
            p.push(row.p_up);
            s.push(row.sigma);
        }
        let sigma = if s.iter().all(Option::is_some) && !s.is_empty() {
            Some(s.into_iter().flatten().collect())
        } else if s.iter().all(Option::is_none) {
            None
        } else {
            return Err(Error::InvalidParameter { name: "sigma", reason: "given on some rows only".into() });
        };
        Self::new(d, p, sigma)
    }
}

#[derive(Serialize, Deserialize)]
struct SpectrumRow {
    delta_khz: f64,
    p_up: f64,
    sigma: Option<f64>,
}

pub fn simulate_three_pulse(p: &RamseyParams, deltas_khz: &[f64]) -> Result<Spectrum> {
    p.validate()?;
    let p_up = deltas_khz.iter().map(|&d| population_up(p, d)).collect();
    Spectrum::new(deltas_khz.to_vec(), p_up, None)
}

/// Spectrum with binomial shot noise. Uncertainties use the estimate
/// (k + ½)/(N + 1) so that they stay positive at the fringe extremes.
pub fn sample_spectrum(p: &RamseyParams, deltas_khz: &[f64], shots: u64, seed: u64) -> Result<Spectrum> {
    if shots == 0 {
        return Err(Error::InvalidParameter { name: "shots", reason: "must be positive".into() });
    }
    let exact = simulate_three_pulse(p, deltas_khz)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = shots as f64;
    let mut p_up = Vec::with_capacity(exact.len());
    let mut sigma = Vec::with_capacity(exact.len());
    for &q in &exact.p_up {
        let k = Binomial::new(shots, q).expect("probability in [0, 1]").sample(&mut rng) as f64;
        let est = (k + 0.5) / (n + 1.0);
        p_up.push(k / n);
        sigma.push((est * (1.0 - est) / n).sqrt());
    }
    Spectrum::new(exact.detunings_khz, p_up, Some(sigma))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FitErrors {
    pub rabi_khz: f64,
    pub delta_offset_khz: f64,
    pub light_shift_khz: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RamseyFit {
    pub params: RamseyParams,
    pub std_errors: FitErrors,
    pub chi2: f64,
    pub dof: usize,
    pub iterations: usize,
    pub max_abs_residual: f64,
}

fn with_free(guess: &RamseyParams, x: &[f64]) -> RamseyParams {
    RamseyParams { rabi_khz: x[0], delta_offset_khz: x[1], light_shift_khz: x[2], ..*guess }
}

fn check_fit_input(data: &Spectrum) -> Result<()> {
    data.validate()?;
    if data.len() < 20 {
        return Err(Error::InvalidParameter {
            name: "spectrum",
            reason: format!("{} points, need at least 20", data.len()),
        });
    }
    let mean = data.p_up.iter().sum::<f64>() / data.len() as f64;
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.sort_by(|&a, &b| data.detunings_khz[a].total_cmp(&data.detunings_khz[b]));
    let crossings = order
        .windows(2)
        .filter(|w| (data.p_up[w[0]] - mean).signum() * (data.p_up[w[1]] - mean).signum() < 0.0)
        .count();
    if crossings < 2 {
        return Err(Error::InvalidParameter { name: "spectrum", reason: "does not span a full oscillation".into() });
    }
    Ok(())
}

/// Weighted least-squares fit of Rabi frequency, detuning offset and light
/// shift. Pulse length, gaps and pulse detuning are held at the guess values.
///
/// Damped Gauss–Newton (Levenberg–Marquardt) with a central-difference
/// Jacobian; steps are measured relative to the guess magnitudes. Without
/// per-point uncertainties the covariance is scaled by the reduced χ².
pub fn fit_spectrum(data: &Spectrum, guess: &RamseyParams) -> Result<RamseyFit> {
    fit_spectrum_with(data, guess, MAX_ITERATIONS)
}

/// [`fit_spectrum`] with an explicit iteration bound.
pub fn fit_spectrum_with(data: &Spectrum, guess: &RamseyParams, max_iterations: usize) -> Result<RamseyFit> {
    check_fit_input(data)?;
    guess.validate()?;
    let n = data.len();
    let weights: Vec<f64> = match &data.sigma {
        Some(s) => s.iter().map(|x| 1.0 / x).collect(),
        None => vec![1.0; n],
    };
    let residuals = |x: &[f64]| -> DVector<f64> {
        let p = with_free(guess, x);
        DVector::from_iterator(
            n,
            (0..n).map(|i| (population_up(&p, data.detunings_khz[i]) - data.p_up[i]) * weights[i]),
        )
    };
    let scale = [
        guess.rabi_khz.abs(),
        guess.delta_offset_khz.abs().max(0.1 * guess.rabi_khz),
        guess.light_shift_khz.abs().max(0.1 * guess.rabi_khz),
    ];
    let jacobian = |x: &[f64]| -> DMatrix<f64> {
        let mut j = DMatrix::zeros(n, 3);
        for k in 0..3 {
            let h = 1e-6 * scale[k];
            let (mut up, mut dn) = (x.to_vec(), x.to_vec());
            up[k] += h;
            dn[k] -= h;
            j.set_column(k, &((residuals(&up) - residuals(&dn)) / (2.0 * h)));
        }
        j
    };

    let mut x = vec![guess.rabi_khz, guess.delta_offset_khz, guess.light_shift_khz];
    let mut r = residuals(&x);
    let mut chi2 = r.norm_squared();
    let mut lambda = 1e-3;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iterations {
        iterations += 1;
        let j = jacobian(&x);
        let jtj = j.transpose() * &j;
        let g = j.transpose() * &r;
        let mut accepted = false;
        while lambda < MAX_DAMPING {
            let mut a = jtj.clone();
            for k in 0..3 {
                a[(k, k)] += lambda * jtj[(k, k)].max(1e-300);
            }
            let Some(step) = a.cholesky().map(|c| c.solve(&(-&g))) else {
                lambda *= 10.0;
                continue;
            };
            let trial: Vec<f64> = (0..3).map(|k| x[k] + step[k]).collect();
            if trial[0] <= 0.0 {
                lambda *= 10.0;
                continue;
            }
            let r_new = residuals(&trial);
            let chi2_new = r_new.norm_squared();
            if chi2_new <= chi2 {
                let rel = (0..3).map(|k| (step[k] / scale[k]).abs()).fold(0.0, f64::max);
                x = trial;
                r = r_new;
                chi2 = chi2_new;
                lambda = (lambda / 10.0).max(1e-12);
                accepted = true;
                if rel < STEP_TOL {
                    converged = true;
                }
                break;
            }
            lambda *= 10.0;
        }
        // no descent direction left at machine precision: at a minimum
        if !accepted || converged {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NonConvergence { iterations, chi2 });
    }

    let dof = n - 3;
    let j = jacobian(&x);
    let cov = (j.transpose() * &j)
        .try_inverse()
        .ok_or_else(|| Error::RankDeficient("fit parameters are not identifiable from the spectrum".into()))?;
    let s2 = if data.sigma.is_some() { 1.0 } else { chi2 / dof as f64 };
    let se = |k: usize| (cov[(k, k)] * s2).max(0.0).sqrt();
    let max_abs_residual = r.iter().zip(&weights).map(|(ri, w)| (ri / w).abs()).fold(0.0, f64::max);
    Ok(RamseyFit {
        params: with_free(guess, &x),
        std_errors: FitErrors { rabi_khz: se(0), delta_offset_khz: se(1), light_shift_khz: se(2) },
        chi2,
        dof,
        iterations,
        max_abs_residual,
    })
}
