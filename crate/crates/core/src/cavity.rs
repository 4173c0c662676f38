//! Reflection of a single photon off the one-sided atom–cavity system.
//!
//! All rates and detunings are in units of 2π·MHz, so a detuning value of
//! `0.35` is a 0.35 MHz frequency offset. The reflection amplitude is the
//! standard single-mode input–output result for a two-level atom in a
//! one-sided cavity driven on resonance:
//!
//! ```text
//! r(δ) = 1 − 2κ_r(γ + iδ) / ((κ + iδ)(γ + iδ) + g²)
//! ```
//!
//! with `g = 0` when the atom does not couple (atom in |↓⟩ or photon in |L⟩).

use std::f64::consts::{LN_2, PI};

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{check_probability, Error, Result};
use crate::numeric::{find_root, GaussHermite};

/// Measured cavity reflectivity used to pin the outcoupling rate.
pub const REFERENCE_REFLECTIVITY: f64 = 0.67;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CavityParams {
    /// Atom–cavity coupling g.
    pub g: f64,
    /// Total cavity field decay κ.
    pub kappa: f64,
    /// Decay through the outcoupling mirror κ_r ≤ κ.
    pub kappa_r: f64,
    /// Atomic polarisation decay γ.
    pub gamma: f64,
    /// Polarisation-eigenmode splitting in kHz. Enters the gate model only
    /// through the birefringence angle of the imperfection model.
    pub delta_pol_khz: f64,
}

impl Default for CavityParams {
    /// (g, κ, γ) = 2π·(7, 2.5, 3) MHz with a perfectly one-sided mirror.
    fn default() -> Self {
        Self { g: 7.0, kappa: 2.5, kappa_r: 2.5, gamma: 3.0, delta_pol_khz: 420.0 }
    }
}

impl CavityParams {
    /// Default rates with κ_r solved so that the empty cavity reflects 67%.
    pub fn reference() -> Self {
        let base = Self::default();
        let kappa_r = solve_kappa_r(&base, REFERENCE_REFLECTIVITY).expect("default parameters admit a solution");
        Self { kappa_r, ..base }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("g", self.g), ("kappa", self.kappa), ("kappa_r", self.kappa_r), ("gamma", self.gamma)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter { name, reason: format!("rate must be positive, got {v}") });
            }
        }
        if self.kappa_r > self.kappa {
            return Err(Error::InvalidParameter {
                name: "kappa_r",
                reason: format!("outcoupling {} exceeds total decay {}", self.kappa_r, self.kappa),
            });
        }
        if !(self.delta_pol_khz >= 0.0) {
            return Err(Error::InvalidParameter { name: "delta_pol_khz", reason: "must be non-negative".into() });
        }
        Ok(())
    }

    /// C = g²/(2κγ)
    pub fn cooperativity(&self) -> f64 {
        self.g * self.g / (2.0 * self.kappa * self.gamma)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReflectionResult {
    pub r: C64,
    /// arg r in (−π, π]
    pub phase: f64,
    /// |r|²
    pub reflectivity: f64,
}

/// Wraps an angle into (−π, π].
pub fn wrap_phase(x: f64) -> f64 {
    let mut y = x.rem_euclid(2.0 * PI);
    if y > PI {
        y -= 2.0 * PI;
    }
    y
}

pub fn reflection_coefficient(p: &CavityParams, delta: f64, coupled: bool) -> ReflectionResult {
    let i = C64::i();
    let g2 = if coupled { p.g * p.g } else { 0.0 };
    let atom = p.gamma + i * delta;
    let r = 1.0 - 2.0 * p.kappa_r * atom / ((p.kappa + i * delta) * atom + g2);
    let phase = if r.im == 0.0 && r.re < 0.0 { PI } else { r.arg() };
    ReflectionResult { r, phase, reflectivity: r.norm_sqr() }
}

/// Phase of the coupled reflection relative to the empty-cavity reflection,
/// wrapped into (−π, π].
pub fn conditional_phase(p: &CavityParams, delta: f64) -> f64 {
    let coupled = reflection_coefficient(p, delta, true).r;
    let empty = reflection_coefficient(p, delta, false).r;
    let rel = coupled * empty.conj();
    if rel.im == 0.0 && rel.re < 0.0 {
        PI
    } else {
        rel.arg()
    }
}

/// Deviation of the conditional phase from π, wrapped into (−π, π].
pub fn phase_deviation(p: &CavityParams, delta: f64) -> f64 {
    wrap_phase(conditional_phase(p, delta) - PI)
}

/// Outcoupling rate giving the empty, resonant cavity a reflectivity of
/// `target`, on the overcoupled branch κ_r ∈ [κ/2, κ].
pub fn solve_kappa_r(p: &CavityParams, target: f64) -> Result<f64> {
    check_probability("reflectivity", target)?;
    let f = |kr: f64| {
        let q = CavityParams { kappa_r: kr, ..*p };
        reflection_coefficient(&q, 0.0, false).reflectivity - target
    };
    find_root(f, 0.5 * p.kappa, p.kappa, 1e-13)
}

/// Search settings for [`phase_accuracy_bandwidth`].
#[derive(Clone, Copy, Debug)]
pub struct BandSearch {
    /// Half-range of detunings examined, MHz.
    pub max_detuning: f64,
    /// Resolution of the band edges, MHz.
    pub resolution: f64,
}

impl Default for BandSearch {
    fn default() -> Self {
        Self { max_detuning: 25.0, resolution: 1e-3 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Bandwidth {
    /// No detuning other than resonance keeps the phase within tolerance.
    Empty,
    /// Full width (MHz) of the band where |phase − π| ≤ tol.
    Finite(f64),
    /// The tolerance is met over the whole searched range; carries its width.
    SpansRange(f64),
}

impl Bandwidth {
    pub fn width(&self) -> f64 {
        match *self {
            Bandwidth::Empty => 0.0,
            Bandwidth::Finite(w) | Bandwidth::SpansRange(w) => w,
        }
    }
}

fn band_edge(p: &CavityParams, tol: f64, sign: f64, search: &BandSearch) -> Option<f64> {
    let outside = |d: f64| phase_deviation(p, sign * d).abs() > tol;
    let coarse = (search.resolution * 10.0).max(1e-6);
    let mut prev = 0.0;
    let mut d = coarse;
    while d <= search.max_detuning + 0.5 * coarse {
        let d_clamped = d.min(search.max_detuning);
        if outside(d_clamped) {
            let (mut lo, mut hi) = (prev, d_clamped);
            while hi - lo > 0.1 * search.resolution {
                let mid = 0.5 * (lo + hi);
                if outside(mid) {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            return Some(lo);
        }
        prev = d_clamped;
        d += coarse;
    }
    None
}

pub fn phase_accuracy_bandwidth(p: &CavityParams, tol: f64) -> Result<Bandwidth> {
    phase_accuracy_bandwidth_with(p, tol, &BandSearch::default())
}

pub fn phase_accuracy_bandwidth_with(p: &CavityParams, tol: f64, search: &BandSearch) -> Result<Bandwidth> {
    p.validate()?;
    if !(tol > 0.0 && tol < PI) {
        return Err(Error::InvalidParameter { name: "tol", reason: format!("must lie in (0, π), got {tol}") });
    }
    let upper = band_edge(p, tol, 1.0, search);
    let lower = band_edge(p, tol, -1.0, search);
    Ok(match (upper, lower) {
        (None, None) => Bandwidth::SpansRange(2.0 * search.max_detuning),
        (u, l) => {
            let width = u.unwrap_or(search.max_detuning) + l.unwrap_or(search.max_detuning);
            if width < search.resolution {
                Bandwidth::Empty
            } else {
                Bandwidth::Finite(width)
            }
        }
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PhaseStats {
    /// Spectrally averaged conditional phase, rad.
    pub mean: f64,
    /// Its standard deviation, rad.
    pub std: f64,
}

/// Nodes used for spectral averages.
pub const SPECTRAL_NODES: usize = 48;

/// Mean and spread of the conditional phase over a Gaussian power spectrum
/// of the given FWHM (MHz) centred on resonance.
pub fn pulse_phase_statistics(p: &CavityParams, spectrum_fwhm: f64) -> Result<PhaseStats> {
    p.validate()?;
    if !(spectrum_fwhm >= 0.0 && spectrum_fwhm.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "spectrum_fwhm",
            reason: format!("must be non-negative, got {spectrum_fwhm}"),
        });
    }
    if spectrum_fwhm == 0.0 {
        return Ok(PhaseStats { mean: PI, std: 0.0 });
    }
    let sigma = fwhm_to_sigma(spectrum_fwhm);
    let gh = GaussHermite::new(SPECTRAL_NODES)?;
    let pts = gh.normal_points(0.0, sigma);
    let dev: Vec<(f64, f64)> = pts.iter().map(|&(d, w)| (phase_deviation(p, d), w)).collect();
    let mean = dev.iter().map(|(x, w)| w * x).sum::<f64>();
    let var = dev.iter().map(|(x, w)| w * (x - mean).powi(2)).sum::<f64>();
    Ok(PhaseStats { mean: PI + mean, std: var.max(0.0).sqrt() })
}

pub fn fwhm_to_sigma(fwhm: f64) -> f64 {
    fwhm / (2.0 * (2.0 * LN_2).sqrt())
}

/// Per-photon transmission chain of the gate setup.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyChain {
    pub t_fiber: f64,
    pub r_cavity: f64,
    pub t_optics: f64,
}

impl Default for EfficiencyChain {
    fn default() -> Self {
        Self { t_fiber: 0.404, r_cavity: 0.67, t_optics: 0.81 }
    }
}

impl EfficiencyChain {
    pub fn validate(&self) -> Result<()> {
        check_probability("t_fiber", self.t_fiber)?;
        check_probability("r_cavity", self.r_cavity)?;
        check_probability("t_optics", self.t_optics)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Efficiency {
    pub per_photon: f64,
    pub pair: f64,
}

pub fn efficiency_budget(c: &EfficiencyChain) -> Result<Efficiency> {
    c.validate()?;
    let per_photon = c.t_fiber * c.r_cavity * c.t_optics;
    Ok(Efficiency { per_photon, pair: per_photon * per_photon })
}
