//! Flat key–value run configuration (TOML).
//!
//! Every key is optional; missing keys take the reference values. Angles
//! with a `_pi` suffix are in units of π.

use std::f64::consts::PI;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::calibration::RamseyParams;
use crate::cavity::{pulse_phase_statistics, CavityParams, EfficiencyChain};
use crate::error::{Error, Result};
use crate::errors::{CalibrationTargets, ErrorParams};
use crate::photonsource::{multi_photon_weight, LossConvention, PulseStats};
use crate::protocol::{Averaging, AveragingSpec, Correlation, DEFAULT_NODES};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AveragingMethod {
    #[default]
    GaussHermite,
    MonteCarlo,
}

impl FromStr for AveragingMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gauss-hermite" => Ok(Self::GaussHermite),
            "monte-carlo" => Ok(Self::MonteCarlo),
            other => Err(Error::UnknownVariant { kind: "averaging method", value: other.into() }),
        }
    }
}

impl fmt::Display for AveragingMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::GaussHermite => "gauss-hermite",
            Self::MonteCarlo => "monte-carlo",
        })
    }
}

/// Ramsey scan used for synthetic spectra.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanSettings {
    pub span_khz: f64,
    pub points: usize,
    pub shots: u64,
}

impl Default for ScanSettings {
    fn default() -> Self {
        Self { span_khz: 2500.0, points: 101, shots: 1000 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Config {
    pub cavity: CavityParams,
    pub efficiency: EfficiencyChain,
    /// Imperfection parameters; `multi_photon_weight` is derived from
    /// `source` and `loss_convention`.
    pub errors: ErrorParams,
    pub source: PulseStats,
    pub loss_convention: LossConvention,
    /// FWHM of the photon spectrum, MHz.
    pub spectrum_fwhm_mhz: f64,
    pub averaging_method: AveragingMethod,
    pub correlation: Correlation,
    pub quadrature_nodes: usize,
    pub mc_samples: usize,
    pub targets: CalibrationTargets,
    pub ramsey: RamseyParams,
    pub scan: ScanSettings,
}

impl Default for Config {
    fn default() -> Self {
        Self::from_flat(Flat::default()).expect("reference configuration is valid")
    }
}

impl Config {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let flat: Flat = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        Self::from_flat(flat)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(&self.to_flat()).expect("flat configuration serialises")
    }

    /// Δφ averaging; the seed is used only in Monte Carlo mode.
    pub fn averaging(&self, seed: u64) -> AveragingSpec {
        let method = match self.averaging_method {
            AveragingMethod::GaussHermite => Averaging::GaussHermite { nodes: self.quadrature_nodes },
            AveragingMethod::MonteCarlo => Averaging::MonteCarlo { samples: self.mc_samples, seed },
        };
        AveragingSpec { method, correlation: self.correlation }
    }

    /// Phase spread produced by the finite photon bandwidth alone, rad.
    pub fn bandwidth_sigma(&self) -> Result<f64> {
        Ok(pulse_phase_statistics(&self.cavity, self.spectrum_fwhm_mhz)?.std)
    }

    pub fn validate(&self) -> Result<()> {
        self.cavity.validate()?;
        self.efficiency.validate()?;
        self.errors.validate()?;
        self.source.validate()?;
        self.ramsey.validate()?;
        self.averaging(0).validate()?;
        if !(self.spectrum_fwhm_mhz > 0.0 && self.spectrum_fwhm_mhz.is_finite()) {
            return Err(Error::InvalidParameter { name: "spectrum_fwhm_mhz", reason: "must be positive".into() });
        }
        if self.scan.points < 2 || self.scan.shots == 0 || !(self.scan.span_khz > 0.0) {
            return Err(Error::InvalidParameter {
                name: "scan",
                reason: "need span > 0, ≥ 2 points and ≥ 1 shot".into(),
            });
        }
        Ok(())
    }

    fn from_flat(f: Flat) -> Result<Self> {
        let source = PulseStats { nbar: f.nbar, eta_chain: f.eta_chain };
        source.validate()?;
        let loss_convention = f.loss_convention.parse()?;
        let cfg = Self {
            cavity: CavityParams {
                g: f.g_mhz,
                kappa: f.kappa_mhz,
                kappa_r: f.kappa_r_mhz,
                gamma: f.gamma_mhz,
                delta_pol_khz: f.delta_pol_khz,
            },
            efficiency: EfficiencyChain { t_fiber: f.t_fiber, r_cavity: f.r_cavity, t_optics: f.t_optics },
            errors: ErrorParams {
                sigma_dphi: f.sigma_dphi_pi * PI,
                xi: f.xi_pi * PI,
                p_prep: f.p_prep,
                p_det: f.p_det,
                p_dark: f.p_dark,
                p_mode: f.p_mode,
                dephase: f.dephase,
                multi_photon_weight: multi_photon_weight(&source, loss_convention)?,
                p_pol: f.p_pol,
            },
            source,
            loss_convention,
            spectrum_fwhm_mhz: f.spectrum_fwhm_mhz,
            averaging_method: f.dphi_averaging.parse()?,
            correlation: f.dphi_correlation.parse()?,
            quadrature_nodes: f.quadrature_nodes,
            mc_samples: f.mc_samples,
            targets: CalibrationTargets {
                dark_counts: f.target_dark_counts_pp,
                atom_state: f.target_atom_state_pp,
                other_optics: f.target_other_optics_pp,
            },
            ramsey: RamseyParams {
                rabi_khz: f.rabi_khz,
                delta_offset_khz: f.delta_offset_khz,
                light_shift_khz: f.light_shift_khz,
                pulse_len_us: f.pulse_len_us,
                gaps_us: [f.gap1_us, f.gap2_us],
                pulse_detuning_khz: f.pulse_detuning_khz,
            },
            scan: ScanSettings { span_khz: f.scan_span_khz, points: f.scan_points, shots: f.scan_shots },
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn to_flat(&self) -> Flat {
        let (c, e, r) = (&self.cavity, &self.errors, &self.ramsey);
        Flat {
            g_mhz: c.g,
            kappa_mhz: c.kappa,
            kappa_r_mhz: c.kappa_r,
            gamma_mhz: c.gamma,
            delta_pol_khz: c.delta_pol_khz,
            t_fiber: self.efficiency.t_fiber,
            r_cavity: self.efficiency.r_cavity,
            t_optics: self.efficiency.t_optics,
            sigma_dphi_pi: e.sigma_dphi / PI,
            xi_pi: e.xi / PI,
            p_prep: e.p_prep,
            p_det: e.p_det,
            p_dark: e.p_dark,
            p_mode: e.p_mode,
            dephase: e.dephase,
            p_pol: e.p_pol,
            nbar: self.source.nbar,
            eta_chain: self.source.eta_chain,
            loss_convention: self.loss_convention.to_string(),
            spectrum_fwhm_mhz: self.spectrum_fwhm_mhz,
            dphi_averaging: self.averaging_method.to_string(),
            dphi_correlation: self.correlation.to_string(),
            quadrature_nodes: self.quadrature_nodes,
            mc_samples: self.mc_samples,
            target_dark_counts_pp: self.targets.dark_counts,
            target_atom_state_pp: self.targets.atom_state,
            target_other_optics_pp: self.targets.other_optics,
            rabi_khz: r.rabi_khz,
            delta_offset_khz: r.delta_offset_khz,
            light_shift_khz: r.light_shift_khz,
            pulse_len_us: r.pulse_len_us,
            gap1_us: r.gaps_us[0],
            gap2_us: r.gaps_us[1],
            pulse_detuning_khz: r.pulse_detuning_khz,
            scan_span_khz: self.scan.span_khz,
            scan_points: self.scan.points,
            scan_shots: self.scan.shots,
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct Flat {
    g_mhz: f64,
    kappa_mhz: f64,
    kappa_r_mhz: f64,
    gamma_mhz: f64,
    delta_pol_khz: f64,
    t_fiber: f64,
    r_cavity: f64,
    t_optics: f64,
    sigma_dphi_pi: f64,
    xi_pi: f64,
    p_prep: f64,
    p_det: f64,
    p_dark: f64,
    p_mode: f64,
    dephase: f64,
    p_pol: f64,
    nbar: f64,
    eta_chain: f64,
    loss_convention: String,
    spectrum_fwhm_mhz: f64,
    dphi_averaging: String,
    dphi_correlation: String,
    quadrature_nodes: usize,
    mc_samples: usize,
    target_dark_counts_pp: f64,
    target_atom_state_pp: f64,
    target_other_optics_pp: f64,
    rabi_khz: f64,
    delta_offset_khz: f64,
    light_shift_khz: f64,
    pulse_len_us: f64,
    gap1_us: f64,
    gap2_us: f64,
    pulse_detuning_khz: f64,
    scan_span_khz: f64,
    scan_points: usize,
    scan_shots: u64,
}

impl Default for Flat {
    fn default() -> Self {
        let c = CavityParams::reference();
        let e = ErrorParams::reference();
        let eff = EfficiencyChain::default();
        let s = PulseStats::default();
        let t = CalibrationTargets::default();
        let r = RamseyParams::default();
        let scan = ScanSettings::default();
        Self {
            g_mhz: c.g,
            kappa_mhz: c.kappa,
            kappa_r_mhz: c.kappa_r,
            gamma_mhz: c.gamma,
            delta_pol_khz: c.delta_pol_khz,
            t_fiber: eff.t_fiber,
            r_cavity: eff.r_cavity,
            t_optics: eff.t_optics,
            sigma_dphi_pi: e.sigma_dphi / PI,
            xi_pi: e.xi / PI,
            p_prep: e.p_prep,
            p_det: e.p_det,
            p_dark: e.p_dark,
            p_mode: e.p_mode,
            dephase: e.dephase,
            p_pol: e.p_pol,
            nbar: s.nbar,
            eta_chain: s.eta_chain,
            loss_convention: LossConvention::default().to_string(),
            spectrum_fwhm_mhz: 0.7,
            dphi_averaging: AveragingMethod::default().to_string(),
            dphi_correlation: Correlation::default().to_string(),
            quadrature_nodes: DEFAULT_NODES,
            mc_samples: 4000,
            target_dark_counts_pp: t.dark_counts,
            target_atom_state_pp: t.atom_state,
            target_other_optics_pp: t.other_optics,
            rabi_khz: r.rabi_khz,
            delta_offset_khz: r.delta_offset_khz,
            light_shift_khz: r.light_shift_khz,
            pulse_len_us: r.pulse_len_us,
            gap1_us: r.gaps_us[0],
            gap2_us: r.gaps_us[1],
            pulse_detuning_khz: r.pulse_detuning_khz,
            scan_span_khz: scan.span_khz,
            scan_points: scan.points,
            scan_shots: scan.shots,
        }
    }
}
