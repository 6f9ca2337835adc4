//! Parameter sweeps and the detector Fermi-level sweep.

use thiserror::Error;

use crate::analytic;
use crate::builders::{build, BuildError};
use crate::exec::{self, Execution};
use crate::model::{
    violation_measure, BlockingConfig, EnergyConfig, ModelError, RateSet, Scenario, StateLabel,
};
use crate::observables::{currents, ObservableError};
use crate::solver::{steady_state, SolverError};

/// Sweep parameter setting `gamma_R = value · gamma_L`.
pub const GAMMA_RATIO: &str = "gamma_ratio";

/// Parameter column name of a Fermi-level sweep.
pub const FERMI_PARAMETER: &str = "EFL_det";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExperimentError {
    #[error("sweep grid is empty")]
    EmptyGrid,
    #[error("grid value {0} is not finite")]
    NonFiniteGrid(f64),
    #[error("unknown sweep parameter `{0}`")]
    UnknownParameter(String),
    #[error("detector Fermi level {value} outside ({low}, {high}); extrapolation is disabled")]
    FermiOutOfRange { value: f64, low: f64, high: f64 },
    #[error("detector Fermi level {value} is not above the detector level {e0}")]
    DetectorOffResonance { value: f64, e0: f64 },
}

/// Failure of one grid point.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum RowError {
    #[error(transparent)]
    Build(#[from] BuildError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Observable(#[from] ObservableError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub scenario: Scenario,
    pub base: RateSet,
    /// A [`RateSet::PARAMETERS`] name or [`GAMMA_RATIO`].
    pub parameter: String,
    pub grid: Vec<f64>,
}

/// Blocking regime of the detector at a given emitter Fermi level.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// Emitter below `E0 + U1`: blocked by either dot.
    Indistinguishing,
    /// Emitter in `[E0 + U1, E0 + U2)`: blocked only by the second dot.
    Distinguishing,
    /// Emitter at or above `E0 + U2`; extrapolated, with no closed-form reference.
    Extrapolated,
}

impl Regime {
    pub fn blocking(self) -> BlockingConfig {
        match self {
            Regime::Indistinguishing => BlockingConfig::INDISTINGUISHING,
            Regime::Distinguishing => BlockingConfig::DISTINGUISHING,
            Regime::Extrapolated => BlockingConfig::UNBLOCKED,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Regime::Indistinguishing => "indistinguishing",
            Regime::Distinguishing => "distinguishing",
            Regime::Extrapolated => "extrapolated",
        }
    }
}

/// Maps the detector emitter Fermi level to a blocking regime.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegimeSelector {
    pub first_threshold: f64,
    pub second_threshold: f64,
}

impl RegimeSelector {
    pub fn new(e: &EnergyConfig, r: &RateSet) -> Self {
        RegimeSelector {
            first_threshold: e.e0 + r.u1,
            second_threshold: e.e0 + r.u2,
        }
    }

    /// Half-open intervals; a level exactly at `E0 + U1` is distinguishing.
    pub fn select(&self, fermi: f64) -> Regime {
        if fermi < self.first_threshold {
            Regime::Indistinguishing
        } else if fermi < self.second_threshold {
            Regime::Distinguishing
        } else {
            Regime::Extrapolated
        }
    }
}

/// Values of one successful grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct RowValues {
    pub system_current: f64,
    /// Closed-form reference where one applies to the scenario.
    pub analytic_current: Option<f64>,
    pub detector_current: Option<f64>,
    pub delta_detector_current: Option<f64>,
    pub max_violation: f64,
    pub occupations: Vec<(StateLabel, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub param: f64,
    pub regime: Option<Regime>,
    pub outcome: Result<RowValues, RowError>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub parameter: String,
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    pub fn system_currents(&self) -> Vec<Option<f64>> {
        self.rows
            .iter()
            .map(|r| r.outcome.as_ref().ok().map(|v| v.system_current))
            .collect()
    }
}

/// Closed-form current for a scenario, when one exists.
pub fn analytic_reference(scenario: Scenario, r: &RateSet) -> Option<f64> {
    match scenario {
        Scenario::SingleDotSet => analytic::single_dot_current(r.sys.left, r.sys.right).ok(),
        Scenario::DoubleDotBare => analytic::double_dot_current_bare(r).ok(),
        Scenario::DoubleDotSet | Scenario::ReducedDoubleDot => {
            analytic::double_dot_current_measured(r).ok()
        }
        Scenario::GeneralizedDoubleDotSet(b) if b == BlockingConfig::INDISTINGUISHING => {
            analytic::double_dot_current_bare(r).ok()
        }
        Scenario::GeneralizedDoubleDotSet(b) if b == BlockingConfig::DISTINGUISHING => {
            analytic::double_dot_current_measured(r).ok()
        }
        Scenario::GeneralizedDoubleDotSet(_) => None,
    }
}

/// Steady state and currents of one scenario at one rate set.
pub fn evaluate(scenario: Scenario, r: &RateSet) -> Result<RowValues, RowError> {
    let g = build(scenario, r)?;
    let x = steady_state(&g)?;
    let c = currents(scenario, r, &x)?;
    Ok(RowValues {
        system_current: c.system,
        analytic_current: analytic_reference(scenario, r),
        detector_current: c.detector,
        delta_detector_current: c.delta_detector,
        max_violation: violation_measure(&x),
        occupations: x
            .layout
            .diagonal_labels()
            .map(|(k, s)| (s, x.values[k]))
            .collect(),
    })
}

/// Applies a sweep value to `base`. When `base` has equal primed and
/// unprimed widths they stay tied.
pub fn apply_parameter(base: &RateSet, parameter: &str, value: f64) -> Result<RateSet, ModelError> {
    let mut r = *base;
    if parameter == GAMMA_RATIO {
        r.det.right = value * r.det.left;
    } else {
        r.set(parameter, value)?;
    }
    if base.is_equal_amplitudes() && !parameter.ends_with("_p") {
        r = r.with_tied_primes();
    }
    Ok(r)
}

fn check_grid(grid: &[f64]) -> Result<(), ExperimentError> {
    if grid.is_empty() {
        return Err(ExperimentError::EmptyGrid);
    }
    if let Some(&bad) = grid.iter().find(|v| !v.is_finite()) {
        return Err(ExperimentError::NonFiniteGrid(bad));
    }
    Ok(())
}

pub fn run_sweep(spec: &SweepSpec) -> Result<SweepTable, ExperimentError> {
    run_sweep_with(spec, Execution::default())
}

/// Evaluates every grid point independently. Rows come back in grid order;
/// a failing point yields an error row instead of aborting the sweep.
pub fn run_sweep_with(spec: &SweepSpec, exec: Execution) -> Result<SweepTable, ExperimentError> {
    check_grid(&spec.grid)?;
    if spec.parameter != GAMMA_RATIO && RateSet::default().get(&spec.parameter).is_none() {
        return Err(ExperimentError::UnknownParameter(spec.parameter.clone()));
    }
    let rows = exec::map(exec, &spec.grid, |&value| SweepRow {
        param: value,
        regime: None,
        outcome: apply_parameter(&spec.base, &spec.parameter, value)
            .map_err(RowError::from)
            .and_then(|r| evaluate(spec.scenario, &r)),
    });
    Ok(SweepTable {
        parameter: spec.parameter.clone(),
        rows,
    })
}

pub fn run_fermi_sweep(
    base: &RateSet,
    energies: &EnergyConfig,
    grid: &[f64],
    extrapolate: bool,
) -> Result<SweepTable, ExperimentError> {
    run_fermi_sweep_with(base, energies, grid, extrapolate, Execution::default())
}

/// Sweeps the detector emitter Fermi level. Each point selects its blocking
/// regime and evaluates the generalized double-dot model; the detuning is
/// taken from the level energies as `E2 - E1`.
pub fn run_fermi_sweep_with(
    base: &RateSet,
    energies: &EnergyConfig,
    grid: &[f64],
    extrapolate: bool,
    exec: Execution,
) -> Result<SweepTable, ExperimentError> {
    check_grid(grid)?;
    let selector = RegimeSelector::new(energies, base);
    for &value in grid {
        if value <= energies.e0 {
            return Err(ExperimentError::DetectorOffResonance {
                value,
                e0: energies.e0,
            });
        }
        if !extrapolate && selector.select(value) == Regime::Extrapolated {
            return Err(ExperimentError::FermiOutOfRange {
                value,
                low: energies.e0,
                high: selector.second_threshold,
            });
        }
    }
    let mut rates = *base;
    rates.epsilon = energies.e2 - energies.e1;
    let rows = exec::map(exec, grid, |&value| {
        let regime = selector.select(value);
        SweepRow {
            param: value,
            regime: Some(regime),
            outcome: evaluate(Scenario::GeneralizedDoubleDotSet(regime.blocking()), &rates),
        }
    });
    Ok(SweepTable {
        parameter: FERMI_PARAMETER.to_string(),
        rows,
    })
}

/// Default rate set of the Fermi-level experiment: aligned levels,
/// `Ω = Γ_L = Γ_R = γ_L = 1`, `γ_R = 10⁴ γ_L`, `U1 = 1`, `U2 = 2`.
pub fn fig3_default_rates() -> RateSet {
    use crate::model::Widths;
    let mut r = RateSet::equal_amplitudes(Widths::new(1.0, 1e4), Widths::new(1.0, 1.0), 1.0, 0.0);
    r.u1 = 1.0;
    r.u2 = 2.0;
    r
}

/// Level energies matching [`fig3_default_rates`]: `E0 = 0`, `E1 = E2 = 0`
/// inside a system bias window `(-1, 1)`, detector collector at `-1`.
pub fn fig3_default_energies() -> EnergyConfig {
    EnergyConfig {
        e0: 0.0,
        e1: 0.0,
        e2: 0.0,
        efl_det: 1.5,
        efr_det: -1.0,
        efl_sys: 1.0,
        efr_sys: -1.0,
    }
}

/// Evenly spaced interior points of `(E0, E0 + U2)`.
pub fn fig3_default_grid(e: &EnergyConfig, r: &RateSet, points: usize) -> Vec<f64> {
    let span = r.u2;
    (1..=points)
        .map(|k| e.e0 + span * k as f64 / (points + 1) as f64)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Widths;

    fn dd() -> RateSet {
        RateSet::equal_amplitudes(Widths::new(1.0, 1.0), Widths::new(1.0, 1.0), 1.0, 0.0)
    }

    #[test]
    fn zero_hopping_gives_zero_current() {
        let spec = SweepSpec {
            scenario: Scenario::DoubleDotBare,
            base: dd(),
            parameter: "Omega".into(),
            grid: vec![0.0],
        };
        let t = run_sweep(&spec).unwrap();
        assert_eq!(t.system_currents(), vec![Some(0.0)]);
    }

    #[test]
    fn detuning_sweep_is_symmetric() {
        let grid: Vec<f64> = [-3.0, -1.0, -0.25, 0.25, 1.0, 3.0].to_vec();
        let spec = SweepSpec {
            scenario: Scenario::DoubleDotSet,
            base: dd(),
            parameter: "epsilon".into(),
            grid,
        };
        let i: Vec<f64> = run_sweep(&spec)
            .unwrap()
            .system_currents()
            .into_iter()
            .map(Option::unwrap)
            .collect();
        for k in 0..3 {
            assert!((i[k] - i[5 - k]).abs() < 1e-14 * i[k]);
        }
    }

    #[test]
    fn degenerate_point_becomes_error_row() {
        let spec = SweepSpec {
            scenario: Scenario::DoubleDotBare,
            base: dd(),
            parameter: "Gamma_L".into(),
            grid: vec![1.0, 0.0, -1.0],
        };
        let t = run_sweep(&spec).unwrap();
        assert!(t.rows[0].outcome.is_ok());
        // Γ_L = 0 with Γ_R > 0 still has the unique state a; the negative
        // width is rejected by the builder.
        assert!(matches!(t.rows[2].outcome, Err(RowError::Build(_))));
        let spec = SweepSpec {
            scenario: Scenario::SingleDotSet,
            base: RateSet::default(),
            parameter: "Omega".into(),
            grid: vec![1.0],
        };
        let t = run_sweep(&spec).unwrap();
        assert!(matches!(
            t.rows[0].outcome,
            Err(RowError::Solver(SolverError::DegenerateSteadyState { .. }))
        ));
    }

    #[test]
    fn spec_validation() {
        let mut spec = SweepSpec {
            scenario: Scenario::DoubleDotBare,
            base: dd(),
            parameter: "Omega".into(),
            grid: vec![],
        };
        assert_eq!(run_sweep(&spec), Err(ExperimentError::EmptyGrid));
        spec.grid = vec![f64::NAN];
        assert!(matches!(
            run_sweep(&spec),
            Err(ExperimentError::NonFiniteGrid(_))
        ));
        spec.grid = vec![1.0];
        spec.parameter = "Delta".into();
        assert!(matches!(
            run_sweep(&spec),
            Err(ExperimentError::UnknownParameter(_))
        ));
    }

    #[test]
    fn primes_follow_unprimed_widths() {
        let r = apply_parameter(&dd(), "gamma_R", 7.0).unwrap();
        assert_eq!(r.det_p.right, 7.0);
        let r = apply_parameter(&dd(), GAMMA_RATIO, 100.0).unwrap();
        assert_eq!((r.det.right, r.det_p.right), (100.0, 100.0));
        let r = apply_parameter(&dd(), "gamma_R_p", 7.0).unwrap();
        assert_eq!((r.det.right, r.det_p.right), (1.0, 7.0));
    }

    #[test]
    fn regime_thresholds() {
        let r = fig3_default_rates();
        let sel = RegimeSelector::new(&fig3_default_energies(), &r);
        assert_eq!(sel.select(0.5), Regime::Indistinguishing);
        assert_eq!(sel.select(1.0), Regime::Distinguishing);
        assert_eq!(sel.select(1.999), Regime::Distinguishing);
        assert_eq!(sel.select(2.0), Regime::Extrapolated);
    }

    #[test]
    fn fermi_grid_checks() {
        let r = fig3_default_rates();
        let e = fig3_default_energies();
        assert!(matches!(
            run_fermi_sweep(&r, &e, &[0.5, 2.5], false),
            Err(ExperimentError::FermiOutOfRange { .. })
        ));
        assert!(matches!(
            run_fermi_sweep(&r, &e, &[-0.5], true),
            Err(ExperimentError::DetectorOffResonance { .. })
        ));
        let t = run_fermi_sweep(&r, &e, &[0.5, 2.5], true).unwrap();
        assert_eq!(t.rows[1].regime, Some(Regime::Extrapolated));
        assert!(t.rows[1]
            .outcome
            .as_ref()
            .unwrap()
            .analytic_current
            .is_none());
    }

    #[test]
    fn decoupled_detector_has_no_step() {
        let mut r = fig3_default_rates();
        r.det.left = 0.0;
        r = r.with_tied_primes();
        let e = fig3_default_energies();
        let t = run_fermi_sweep(&r, &e, &fig3_default_grid(&e, &r, 9), false).unwrap();
        let i: Vec<f64> = t
            .system_currents()
            .into_iter()
            .map(Option::unwrap)
            .collect();
        for v in &i {
            assert!((v - i[0]).abs() < 1e-14);
        }
    }

    #[test]
    fn sequential_and_default_agree() {
        let spec = SweepSpec {
            scenario: Scenario::DoubleDotSet,
            base: dd(),
            parameter: GAMMA_RATIO.into(),
            grid: vec![1.0, 10.0, 100.0, 1000.0],
        };
        assert_eq!(
            run_sweep_with(&spec, Execution::Sequential),
            run_sweep_with(&spec, Execution::default())
        );
    }
}
