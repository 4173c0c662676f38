//! Photon-number statistics of the weak coherent pulses used as qubits.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{check_probability, Error, Result};

/// Photon-number cutoff for all enumerations.
pub const N_MAX: u32 = 10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PulseStats {
    /// Mean photon number per qubit mode at the cavity.
    pub nbar: f64,
    /// End-to-end detection efficiency of one photon.
    pub eta_chain: f64,
}

impl Default for PulseStats {
    fn default() -> Self {
        // 22% gate efficiency times a 50% detector.
        Self { nbar: 0.17, eta_chain: 0.11 }
    }
}

impl PulseStats {
    pub fn validate(&self) -> Result<()> {
        if !(self.nbar >= 0.0 && self.nbar.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "nbar",
                reason: format!("must be non-negative, got {}", self.nbar),
            });
        }
        check_probability("eta_chain", self.eta_chain)
    }
}

/// Where photon loss is placed relative to the gate when deciding how many
/// photons a detected mode carried through the cavity.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossConvention {
    /// Loss upstream of the cavity: the detected mode's photon number at the
    /// cavity is Poissonian, conditioned on being non-empty.
    #[default]
    LossBeforeGate,
    /// All loss after the cavity: an n-photon mode is detected with
    /// probability 1 − (1 − η)ⁿ, favouring multi-photon events.
    LossAfterGate,
}

impl FromStr for LossConvention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "loss-before-gate" | "before" => Ok(Self::LossBeforeGate),
            "loss-after-gate" | "after" => Ok(Self::LossAfterGate),
            other => Err(Error::UnknownVariant { kind: "loss convention", value: other.to_string() }),
        }
    }
}

impl fmt::Display for LossConvention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::LossBeforeGate => "loss-before-gate",
            Self::LossAfterGate => "loss-after-gate",
        })
    }
}

/// e^{−n̄} n̄ⁿ / n!
pub fn poisson_pn(nbar: f64, n: u32) -> f64 {
    if nbar == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    let ln = -nbar + n as f64 * nbar.ln() - (1..=n).map(|k| (k as f64).ln()).sum::<f64>();
    ln.exp()
}

/// Probability that a detected qubit mode held two or more photons at the
/// cavity.
pub fn multi_photon_weight(s: &PulseStats, convention: LossConvention) -> Result<f64> {
    s.validate()?;
    if s.nbar == 0.0 {
        return Ok(0.0);
    }
    Ok(match convention {
        LossConvention::LossBeforeGate => {
            // summed directly: 1 − e^{−n̄}(1 + n̄) cancels badly for small n̄
            let tail: f64 = (2..=60).map(|n| poisson_pn(s.nbar, n)).sum();
            tail / -(-s.nbar).exp_m1()
        }
        LossConvention::LossAfterGate => {
            if s.eta_chain == 0.0 {
                return Err(Error::InvalidParameter {
                    name: "eta_chain",
                    reason: "zero efficiency leaves no detected modes to condition on".into(),
                });
            }
            let detected = |n: u32| poisson_pn(s.nbar, n) * (1.0 - (1.0 - s.eta_chain).powi(n as i32));
            let multi: f64 = (2..=N_MAX).map(detected).sum();
            let any: f64 = (1..=N_MAX).map(detected).sum();
            multi / any
        }
    })
}

/// Probability per trial that both temporal output modes register a
/// detection.
pub fn coincidence_probability(s: &PulseStats) -> Result<f64> {
    s.validate()?;
    let one = -(-s.eta_chain * s.nbar).exp_m1();
    Ok(one * one)
}

/// Detected pair rate for a given trial repetition rate.
pub fn pair_rate(s: &PulseStats, trial_rate: f64) -> Result<f64> {
    Ok(coincidence_probability(s)? * trial_rate)
}
