//! Currents as weighted sums of populations.
//!
//! The current into a collector is `Σ_j σ_jj Γ_R^(j)`, summed over the states
//! in which the well next to that collector is occupied, with `Γ_R^(j)` the
//! width of `j` towards the collector.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::analytic;
use crate::model::{RateSet, Scenario, StateLabel, StateVector};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ObservableError {
    #[error("state `{0}` is not part of the `{1}` layout")]
    SlotMismatch(StateLabel, &'static str),
    #[error("gamma_L + gamma_R = 0: no reference detector current")]
    NoDetectorReference,
    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),
}

/// Collector weights per population.
pub type Weights = BTreeMap<StateLabel, f64>;

/// Detector and measured-system current weights of one scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct CurrentWeights {
    /// Empty for scenarios without detector.
    pub detector: Weights,
    pub system: Weights,
}

pub fn weights_for(scenario: Scenario, r: &RateSet) -> CurrentWeights {
    use StateLabel::*;
    let w = |entries: &[(StateLabel, f64)]| entries.iter().copied().collect::<Weights>();
    match scenario {
        Scenario::SingleDotSet => CurrentWeights {
            detector: w(&[(APrime, r.det.right), (BPrime, r.det_p.right)]),
            system: w(&[(B, r.sys.right), (BPrime, r.sys_p.right)]),
        },
        Scenario::DoubleDotBare | Scenario::ReducedDoubleDot => CurrentWeights {
            detector: Weights::new(),
            system: w(&[(C, r.sys.right)]),
        },
        Scenario::DoubleDotSet | Scenario::GeneralizedDoubleDotSet(_) => CurrentWeights {
            detector: w(&[
                (APrime, r.det.right),
                (BPrime, r.det.right),
                (CPrime, r.det.right),
            ]),
            system: w(&[(C, r.sys.right), (CPrime, r.sys.right)]),
        },
    }
}

/// Looks a scenario label up and returns its weights. The generalized model
/// is addressed through [`weights_for`] with an explicit blocking config.
pub fn weights_for_label(label: &str, r: &RateSet) -> Result<CurrentWeights, ObservableError> {
    let scenario = match label {
        "single_dot_set" => Scenario::SingleDotSet,
        "double_dot_bare" => Scenario::DoubleDotBare,
        "double_dot_set" => Scenario::DoubleDotSet,
        "reduced_double_dot" => Scenario::ReducedDoubleDot,
        other => return Err(ObservableError::UnknownScenario(other.to_string())),
    };
    Ok(weights_for(scenario, r))
}

/// Backflow into the detector emitter from primed states whose dot blocks it.
/// Reported as a diagnostic only; it is not part of the collector current.
pub fn detector_backflow_weights(scenario: Scenario, r: &RateSet) -> Weights {
    use StateLabel::*;
    match scenario {
        Scenario::DoubleDotSet => [(CPrime, r.det.left)].into_iter().collect(),
        Scenario::GeneralizedDoubleDotSet(b) if b.backflow_when_blocked => [BPrime, CPrime]
            .into_iter()
            .filter(|s| b.blocks(*s))
            .map(|s| (s, r.det.left))
            .collect(),
        Scenario::SingleDotSet => [(BPrime, r.det_p.left)].into_iter().collect(),
        _ => Weights::new(),
    }
}

/// `Σ_j x_jj w_j`.
pub fn current(x: &StateVector, weights: &Weights) -> Result<f64, ObservableError> {
    weights.iter().try_fold(0.0, |acc, (&s, &w)| {
        let p = x
            .occupation(s)
            .ok_or(ObservableError::SlotMismatch(s, x.layout.name()))?;
        Ok(acc + p * w)
    })
}

/// Undisturbed detector current `γ_L γ_R / (γ_L + γ_R)` minus the measured one.
pub fn delta_detector_current(r: &RateSet, detector_current: f64) -> Result<f64, ObservableError> {
    let reference = analytic::single_dot_current(r.det.left, r.det.right)
        .map_err(|_| ObservableError::NoDetectorReference)?;
    Ok(reference - detector_current)
}

/// Detector and system currents of one state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Currents {
    pub system: f64,
    /// `None` when the scenario has no detector.
    pub detector: Option<f64>,
    pub delta_detector: Option<f64>,
}

pub fn currents(
    scenario: Scenario,
    r: &RateSet,
    x: &StateVector,
) -> Result<Currents, ObservableError> {
    let w = weights_for(scenario, r);
    let system = current(x, &w.system)?;
    if !scenario.has_detector() {
        return Ok(Currents {
            system,
            detector: None,
            delta_detector: None,
        });
    }
    let detector = current(x, &w.detector)?;
    let delta = delta_detector_current(r, detector).ok();
    Ok(Currents {
        system,
        detector: Some(detector),
        delta_detector: delta,
    })
}
