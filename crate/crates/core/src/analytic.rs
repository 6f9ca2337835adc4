//! Closed-form stationary currents. Kept free of any generator or solver
//! code so that they serve as independent references for the numerics.

use thiserror::Error;

use crate::model::RateSet;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalyticError {
    #[error("both tunneling widths vanish")]
    NoTransport,
    #[error("Gamma_L = 0 with nonzero hopping is a pole of the double-dot current")]
    EmitterPole,
    #[error("Gamma_R = 0 leaves the detector factor undefined")]
    CollectorPole,
}

/// `η = 1 + γ_L / Γ_R`, the factor by which the detector suppresses the
/// aligned-level current.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct EtaFactor(f64);

impl EtaFactor {
    pub fn new(r: &RateSet) -> Result<Self, AnalyticError> {
        if r.sys.right == 0.0 {
            return Err(AnalyticError::CollectorPole);
        }
        Ok(EtaFactor(1.0 + r.det.left / r.sys.right))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Resonant current through a single level, `w_L w_R / (w_L + w_R)`.
pub fn single_dot_current(w_left: f64, w_right: f64) -> Result<f64, AnalyticError> {
    let total = w_left + w_right;
    if total == 0.0 {
        return Err(AnalyticError::NoTransport);
    }
    Ok(w_left * w_right / total)
}

/// Current through the double dot without a detector:
/// `Γ_R Ω² / (ε² + Γ_R²/4 + Ω²(2 + Γ_R/Γ_L))`.
pub fn double_dot_current_bare(r: &RateSet) -> Result<f64, AnalyticError> {
    let (gl, gr) = (r.sys.left, r.sys.right);
    let om2 = r.omega * r.omega;
    if om2 == 0.0 {
        return Ok(0.0);
    }
    if gl == 0.0 {
        return Err(AnalyticError::EmitterPole);
    }
    let denom = r.epsilon * r.epsilon + gr * gr / 4.0 + om2 * (2.0 + gr / gl);
    Ok(gr * om2 / denom)
}

/// Current through the double dot watched in the negative-result regime:
/// `Γ_R Ω² / (ε²/η + η Γ_R²/4 + Ω²(2 + Γ_R/Γ_L))`.
pub fn double_dot_current_measured(r: &RateSet) -> Result<f64, AnalyticError> {
    let eta = EtaFactor::new(r)?.value();
    let (gl, gr) = (r.sys.left, r.sys.right);
    let om2 = r.omega * r.omega;
    if om2 == 0.0 {
        return Ok(0.0);
    }
    if gl == 0.0 {
        return Err(AnalyticError::EmitterPole);
    }
    let denom = r.epsilon * r.epsilon / eta + eta * gr * gr / 4.0 + om2 * (2.0 + gr / gl);
    Ok(gr * om2 / denom)
}

/// `ΔI_D / I_S = γ_L / Γ_R` in the negative-result limit.
pub fn amplification_ratio(r: &RateSet) -> Result<f64, AnalyticError> {
    if r.sys.right == 0.0 {
        return Err(AnalyticError::CollectorPole);
    }
    Ok(r.det.left / r.sys.right)
}
