//! Shared data model: rate parameters, state labels, packed density-matrix
//! vectors and generator matrices.
//!
//! Units follow `e = ħ = 1`. Rates and energies share one arbitrary unit and
//! currents come out in units of `e × rate`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use thiserror::Error;

use crate::linalg::DenseMatrix;

/// Default tolerance for normalization and positivity checks.
pub const DEFAULT_STATE_TOL: f64 = 1e-9;

/// Tolerance on the probability sum accepted by [`pack`].
pub const PACK_NORMALIZATION_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("state `{0}` is not part of the `{1}` layout")]
    UnknownLabel(StateLabel, &'static str),
    #[error("coherence ({0},{1}) is not part of the `{2}` layout")]
    UnknownCoherence(StateLabel, StateLabel, &'static str),
    #[error("occupations sum to {sum}, expected 1")]
    Normalization { sum: f64 },
    #[error("width `{name}` is negative ({value})")]
    NegativeRate { name: &'static str, value: f64 },
    #[error("parameter `{name}` is not finite ({value})")]
    NonFinite { name: &'static str, value: f64 },
    #[error("unknown state label `{0}`")]
    BadLabel(String),
    #[error("unknown parameter `{0}`")]
    UnknownParameter(String),
    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),
}

/// Configuration of the measured system and the detector.
///
/// Unprimed labels have the detector empty, primed ones have the detector
/// occupied. `A` is the empty measured system, `B` an electron in the first
/// (or only) dot and `C` an electron in the second dot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum StateLabel {
    A,
    B,
    C,
    APrime,
    BPrime,
    CPrime,
}

impl StateLabel {
    pub const ALL: [StateLabel; 6] = [
        StateLabel::A,
        StateLabel::B,
        StateLabel::C,
        StateLabel::APrime,
        StateLabel::BPrime,
        StateLabel::CPrime,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            StateLabel::A => "a",
            StateLabel::B => "b",
            StateLabel::C => "c",
            StateLabel::APrime => "a'",
            StateLabel::BPrime => "b'",
            StateLabel::CPrime => "c'",
        }
    }

    pub fn detector_occupied(self) -> bool {
        matches!(
            self,
            StateLabel::APrime | StateLabel::BPrime | StateLabel::CPrime
        )
    }

    /// Same system configuration with the detector flipped.
    pub fn toggled(self) -> StateLabel {
        match self {
            StateLabel::A => StateLabel::APrime,
            StateLabel::B => StateLabel::BPrime,
            StateLabel::C => StateLabel::CPrime,
            StateLabel::APrime => StateLabel::A,
            StateLabel::BPrime => StateLabel::B,
            StateLabel::CPrime => StateLabel::C,
        }
    }
}

impl fmt::Display for StateLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StateLabel {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        StateLabel::ALL
            .into_iter()
            .find(|l| l.as_str() == s)
            .ok_or_else(|| ModelError::BadLabel(s.to_string()))
    }
}

/// One slot of a packed state vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variable {
    Diagonal(StateLabel),
    ReCoherence(StateLabel, StateLabel),
    ImCoherence(StateLabel, StateLabel),
}

impl fmt::Display for Variable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Variable::Diagonal(s) => write!(f, "{s}"),
            Variable::ReCoherence(i, j) => write!(f, "Re[{i}{j}]"),
            Variable::ImCoherence(i, j) => write!(f, "Im[{i}{j}]"),
        }
    }
}

/// Canonical variable ordering of a scenario. Diagonal slots come first,
/// followed by `(Re, Im)` pairs for each coherence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    name: &'static str,
    vars: Vec<Variable>,
}

impl Layout {
    fn new(
        name: &'static str,
        diagonals: &[StateLabel],
        pairs: &[(StateLabel, StateLabel)],
    ) -> Self {
        let mut vars: Vec<Variable> = diagonals.iter().map(|&s| Variable::Diagonal(s)).collect();
        for &(i, j) in pairs {
            vars.push(Variable::ReCoherence(i, j));
            vars.push(Variable::ImCoherence(i, j));
        }
        Layout { name, vars }
    }

    /// `[a, b, a', b']`
    pub fn single_dot() -> Self {
        use StateLabel::*;
        Layout::new("single_dot", &[A, B, APrime, BPrime], &[])
    }

    /// `[a, b, c, Re σ_bc, Im σ_bc]`
    pub fn double_dot() -> Self {
        use StateLabel::*;
        Layout::new("double_dot", &[A, B, C], &[(B, C)])
    }

    /// `[a, a', b, b', c, c', Re σ_bc, Im σ_bc, Re σ_b'c', Im σ_b'c']`
    pub fn double_dot_detector() -> Self {
        use StateLabel::*;
        Layout::new(
            "double_dot_detector",
            &[A, APrime, B, BPrime, C, CPrime],
            &[(B, C), (BPrime, CPrime)],
        )
    }

    pub fn name(&self) -> &'static str {
        self.name
    }

    pub fn len(&self) -> usize {
        self.vars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vars.is_empty()
    }

    pub fn variables(&self) -> &[Variable] {
        &self.vars
    }

    pub fn position(&self, var: Variable) -> Option<usize> {
        self.vars.iter().position(|&v| v == var)
    }

    pub fn diagonal(&self, s: StateLabel) -> Option<usize> {
        self.position(Variable::Diagonal(s))
    }

    /// Positions of `(Re, Im)` for the ordered pair `(i, j)`.
    pub fn coherence(&self, i: StateLabel, j: StateLabel) -> Option<(usize, usize)> {
        Some((
            self.position(Variable::ReCoherence(i, j))?,
            self.position(Variable::ImCoherence(i, j))?,
        ))
    }

    pub fn diagonal_labels(&self) -> impl Iterator<Item = (usize, StateLabel)> + '_ {
        self.vars.iter().enumerate().filter_map(|(k, v)| match v {
            Variable::Diagonal(s) => Some((k, *s)),
            _ => None,
        })
    }

    pub fn coherence_pairs(&self) -> impl Iterator<Item = (StateLabel, StateLabel)> + '_ {
        self.vars.iter().filter_map(|v| match v {
            Variable::ReCoherence(i, j) => Some((*i, *j)),
            _ => None,
        })
    }

    /// All-ones over diagonal slots, zero over coherence slots.
    pub fn trace_functional(&self) -> Vec<f64> {
        self.vars
            .iter()
            .map(|v| {
                if matches!(v, Variable::Diagonal(_)) {
                    1.0
                } else {
                    0.0
                }
            })
            .collect()
    }
}

/// Left/right tunneling widths of one level.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Widths {
    pub left: f64,
    pub right: f64,
}

impl Widths {
    pub fn new(left: f64, right: f64) -> Self {
        Widths { left, right }
    }
}

/// Tunneling widths, hopping, detuning and Coulomb shifts.
///
/// `det`/`sys` are the detector and measured-system widths; the `_p` variants
/// apply when the other subsystem is also occupied (the primed rates).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RateSet {
    pub det: Widths,
    pub det_p: Widths,
    pub sys: Widths,
    pub sys_p: Widths,
    /// Inter-dot hopping amplitude.
    pub omega: f64,
    /// Level detuning `E2 - E1`.
    pub epsilon: f64,
    pub u: f64,
    pub u1: f64,
    pub u2: f64,
}

impl RateSet {
    /// Rate set with primed widths equal to the unprimed ones.
    pub fn equal_amplitudes(det: Widths, sys: Widths, omega: f64, epsilon: f64) -> Self {
        RateSet {
            det,
            det_p: det,
            sys,
            sys_p: sys,
            omega,
            epsilon,
            ..RateSet::default()
        }
    }

    pub fn is_equal_amplitudes(&self) -> bool {
        self.det == self.det_p && self.sys == self.sys_p
    }

    /// Copy of `self` with the primed widths reset to the unprimed ones.
    pub fn with_tied_primes(mut self) -> Self {
        self.det_p = self.det;
        self.sys_p = self.sys;
        self
    }

    pub fn widths(&self) -> [(&'static str, f64); 8] {
        [
            ("gamma_L", self.det.left),
            ("gamma_R", self.det.right),
            ("gamma_L_p", self.det_p.left),
            ("gamma_R_p", self.det_p.right),
            ("Gamma_L", self.sys.left),
            ("Gamma_R", self.sys.right),
            ("Gamma_L_p", self.sys_p.left),
            ("Gamma_R_p", self.sys_p.right),
        ]
    }

    /// Parameter names as used in config files and sweeps.
    pub const PARAMETERS: [&'static str; 13] = [
        "gamma_L",
        "gamma_R",
        "gamma_L_p",
        "gamma_R_p",
        "Gamma_L",
        "Gamma_R",
        "Gamma_L_p",
        "Gamma_R_p",
        "Omega",
        "epsilon",
        "U",
        "U1",
        "U2",
    ];

    fn slot(&mut self, name: &str) -> Option<&mut f64> {
        Some(match name {
            "gamma_L" => &mut self.det.left,
            "gamma_R" => &mut self.det.right,
            "gamma_L_p" => &mut self.det_p.left,
            "gamma_R_p" => &mut self.det_p.right,
            "Gamma_L" => &mut self.sys.left,
            "Gamma_R" => &mut self.sys.right,
            "Gamma_L_p" => &mut self.sys_p.left,
            "Gamma_R_p" => &mut self.sys_p.right,
            "Omega" => &mut self.omega,
            "epsilon" => &mut self.epsilon,
            "U" => &mut self.u,
            "U1" => &mut self.u1,
            "U2" => &mut self.u2,
            _ => return None,
        })
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        let mut copy = *self;
        copy.slot(name).map(|v| *v)
    }

    pub fn set(&mut self, name: &str, value: f64) -> Result<(), ModelError> {
        let slot = self
            .slot(name)
            .ok_or_else(|| ModelError::UnknownParameter(name.to_string()))?;
        *slot = value;
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        for (name, value) in self.widths() {
            if !value.is_finite() {
                return Err(ModelError::NonFinite { name, value });
            }
            if value < 0.0 {
                return Err(ModelError::NegativeRate { name, value });
            }
        }
        for (name, value) in [
            ("Omega", self.omega),
            ("epsilon", self.epsilon),
            ("U", self.u),
            ("U1", self.u1),
            ("U2", self.u2),
        ] {
            if !value.is_finite() {
                return Err(ModelError::NonFinite { name, value });
            }
        }
        Ok(())
    }
}

/// Level positions and reservoir Fermi energies.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EnergyConfig {
    pub e0: f64,
    pub e1: f64,
    pub e2: f64,
    /// Detector emitter Fermi level.
    pub efl_det: f64,
    pub efr_det: f64,
    pub efl_sys: f64,
    pub efr_sys: f64,
}

impl EnergyConfig {
    /// Checks that the detector and system levels sit inside their bias windows.
    pub fn in_resonance_windows(&self) -> bool {
        self.efl_det > self.e0
            && self.e0 > self.efr_det
            && self.efl_sys > self.e1
            && self.e1 > self.efr_sys
    }
}

/// Packed density matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    pub values: Vec<f64>,
    pub layout: Layout,
}

/// A single failed invariant reported by [`validate_state`].
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    Normalization {
        sum: f64,
    },
    Negative {
        slot: usize,
        value: f64,
    },
    AboveOne {
        slot: usize,
        value: f64,
    },
    /// `|σ_ij|² - σ_ii σ_jj` when positive.
    CoherenceBound {
        pair: (StateLabel, StateLabel),
        excess: f64,
    },
    LengthMismatch {
        expected: usize,
        found: usize,
    },
}

impl Violation {
    /// Size of the violation, for reporting the worst offender in a table.
    pub fn magnitude(&self) -> f64 {
        match *self {
            Violation::Normalization { sum } => (sum - 1.0).abs(),
            Violation::Negative { value, .. } => -value,
            Violation::AboveOne { value, .. } => value - 1.0,
            Violation::CoherenceBound { excess, .. } => excess,
            Violation::LengthMismatch { .. } => f64::INFINITY,
        }
    }
}

impl StateVector {
    pub fn get(&self, var: Variable) -> Option<f64> {
        self.layout.position(var).map(|k| self.values[k])
    }

    pub fn occupation(&self, s: StateLabel) -> Option<f64> {
        self.get(Variable::Diagonal(s))
    }

    pub fn coherence(&self, i: StateLabel, j: StateLabel) -> Option<Complex64> {
        if let Some((re, im)) = self.layout.coherence(i, j) {
            return Some(Complex64::new(self.values[re], self.values[im]));
        }
        self.layout
            .coherence(j, i)
            .map(|(re, im)| Complex64::new(self.values[re], -self.values[im]))
    }

    pub fn trace(&self) -> f64 {
        self.layout
            .diagonal_labels()
            .map(|(k, _)| self.values[k])
            .sum()
    }

    /// Inverse of [`pack`].
    pub fn unpack(
        &self,
    ) -> (
        BTreeMap<StateLabel, f64>,
        BTreeMap<(StateLabel, StateLabel), Complex64>,
    ) {
        let occ = self
            .layout
            .diagonal_labels()
            .map(|(k, s)| (s, self.values[k]))
            .collect();
        let coh = self
            .layout
            .coherence_pairs()
            .map(|(i, j)| ((i, j), self.coherence(i, j).unwrap()))
            .collect();
        (occ, coh)
    }

    /// Pure state concentrated on `s`.
    pub fn point_mass(layout: &Layout, s: StateLabel) -> Result<Self, ModelError> {
        let k = layout
            .diagonal(s)
            .ok_or(ModelError::UnknownLabel(s, layout.name()))?;
        let mut values = vec![0.0; layout.len()];
        values[k] = 1.0;
        Ok(StateVector {
            values,
            layout: layout.clone(),
        })
    }
}

/// Packs occupations and coherences into the canonical vector of `layout`.
///
/// Labels absent from the maps are zero. A coherence may be given for either
/// ordering of its pair; the reversed one is conjugated.
pub fn pack(
    layout: &Layout,
    occupations: &BTreeMap<StateLabel, f64>,
    coherences: &BTreeMap<(StateLabel, StateLabel), Complex64>,
) -> Result<StateVector, ModelError> {
    let mut values = vec![0.0; layout.len()];
    for (&s, &p) in occupations {
        let k = layout
            .diagonal(s)
            .ok_or(ModelError::UnknownLabel(s, layout.name()))?;
        values[k] = p;
    }
    let sum: f64 = occupations.values().sum();
    if (sum - 1.0).abs() > PACK_NORMALIZATION_TOL {
        return Err(ModelError::Normalization { sum });
    }
    for (&(i, j), &z) in coherences {
        let (re, im, z) = if let Some((re, im)) = layout.coherence(i, j) {
            (re, im, z)
        } else if let Some((re, im)) = layout.coherence(j, i) {
            (re, im, z.conj())
        } else {
            return Err(ModelError::UnknownCoherence(i, j, layout.name()));
        };
        values[re] = z.re;
        values[im] = z.im;
    }
    Ok(StateVector {
        values,
        layout: layout.clone(),
    })
}

/// Lists every density-matrix invariant that `x` breaks by more than `tol`.
///
/// The coherence bound is only checked when both diagonal members are
/// nonnegative; a negative occupation is reported on its own.
pub fn validate_state(x: &StateVector, tol: f64) -> Vec<Violation> {
    let mut out = Vec::new();
    if x.values.len() != x.layout.len() {
        out.push(Violation::LengthMismatch {
            expected: x.layout.len(),
            found: x.values.len(),
        });
        return out;
    }
    let sum = x.trace();
    if (sum - 1.0).abs() > tol {
        out.push(Violation::Normalization { sum });
    }
    for (k, _) in x.layout.diagonal_labels() {
        let v = x.values[k];
        if v < -tol {
            out.push(Violation::Negative { slot: k, value: v });
        } else if v > 1.0 + tol {
            out.push(Violation::AboveOne { slot: k, value: v });
        }
    }
    for (i, j) in x.layout.coherence_pairs() {
        let (pi, pj) = (x.occupation(i).unwrap(), x.occupation(j).unwrap());
        if pi < -tol || pj < -tol {
            continue;
        }
        let excess = x.coherence(i, j).unwrap().norm_sqr() - pi * pj;
        if excess > tol {
            out.push(Violation::CoherenceBound {
                pair: (i, j),
                excess,
            });
        }
    }
    out
}

/// Single nonnegative measure of how far `x` is from a density matrix: the
/// largest of `|tr x - 1|`, the most negative population and the largest
/// coherence-bound excess.
pub fn violation_measure(x: &StateVector) -> f64 {
    let mut worst = (x.trace() - 1.0).abs();
    for (k, _) in x.layout.diagonal_labels() {
        worst = worst.max(-x.values[k]);
    }
    for (i, j) in x.layout.coherence_pairs() {
        let (pi, pj) = (x.occupation(i).unwrap(), x.occupation(j).unwrap());
        let excess = x.coherence(i, j).unwrap().norm_sqr() - pi.max(0.0) * pj.max(0.0);
        worst = worst.max(excess);
    }
    worst
}

/// Which equation set a generator encodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    SingleDotSet,
    DoubleDotBare,
    DoubleDotSet,
    ReducedDoubleDot,
    GeneralizedDoubleDotSet(BlockingConfig),
}

impl Scenario {
    pub fn name(&self) -> &'static str {
        match self {
            Scenario::SingleDotSet => "single_dot_set",
            Scenario::DoubleDotBare => "double_dot_bare",
            Scenario::DoubleDotSet => "double_dot_set",
            Scenario::ReducedDoubleDot => "reduced_double_dot",
            Scenario::GeneralizedDoubleDotSet(_) => "generalized_double_dot_set",
        }
    }

    pub fn layout(&self) -> Layout {
        match self {
            Scenario::SingleDotSet => Layout::single_dot(),
            Scenario::DoubleDotBare | Scenario::ReducedDoubleDot => Layout::double_dot(),
            Scenario::DoubleDotSet | Scenario::GeneralizedDoubleDotSet(_) => {
                Layout::double_dot_detector()
            }
        }
    }

    /// True when the scenario includes the detector dot.
    pub fn has_detector(&self) -> bool {
        matches!(
            self,
            Scenario::SingleDotSet | Scenario::DoubleDotSet | Scenario::GeneralizedDoubleDotSet(_)
        )
    }

    /// True when the builder only accepts primed widths equal to unprimed ones.
    pub fn requires_equal_amplitudes(&self) -> bool {
        matches!(
            self,
            Scenario::DoubleDotSet | Scenario::GeneralizedDoubleDotSet(_)
        )
    }
}

impl FromStr for Scenario {
    type Err = ModelError;

    /// Parses the four fixed scenarios; the generalized one is parsed with
    /// the distinguishing blocking config and adjusted by the caller.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "single_dot_set" => Scenario::SingleDotSet,
            "double_dot_bare" => Scenario::DoubleDotBare,
            "double_dot_set" => Scenario::DoubleDotSet,
            "reduced_double_dot" => Scenario::ReducedDoubleDot,
            "generalized_double_dot_set" => {
                Scenario::GeneralizedDoubleDotSet(BlockingConfig::DISTINGUISHING)
            }
            other => return Err(ModelError::UnknownScenario(other.to_string())),
        })
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// When the detector electron is kept out by the Coulomb shift of an occupied dot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct BlockingConfig {
    pub blocked_when_dot1: bool,
    pub blocked_when_dot2: bool,
    /// A detector electron pushed above the emitter Fermi level can tunnel back
    /// into the left reservoir at `γ_L`.
    pub backflow_when_blocked: bool,
}

impl BlockingConfig {
    /// Detector blocked only by the second dot; matches `build_double_dot_set`.
    pub const DISTINGUISHING: BlockingConfig = BlockingConfig {
        blocked_when_dot1: false,
        blocked_when_dot2: true,
        backflow_when_blocked: true,
    };

    /// Detector blocked by either dot, so it cannot tell them apart.
    pub const INDISTINGUISHING: BlockingConfig = BlockingConfig {
        blocked_when_dot1: true,
        blocked_when_dot2: true,
        backflow_when_blocked: true,
    };

    /// Detector never blocked. Extrapolated, with no closed-form reference.
    pub const UNBLOCKED: BlockingConfig = BlockingConfig {
        blocked_when_dot1: false,
        blocked_when_dot2: false,
        backflow_when_blocked: true,
    };

    pub fn is_extrapolated(&self) -> bool {
        !self.blocked_when_dot2
    }

    pub fn blocks(&self, s: StateLabel) -> bool {
        match s {
            StateLabel::B | StateLabel::BPrime => self.blocked_when_dot1,
            StateLabel::C | StateLabel::CPrime => self.blocked_when_dot2,
            StateLabel::A | StateLabel::APrime => false,
        }
    }
}

/// Real generator `G` of `dx/dt = G x` over a scenario layout.
#[derive(Debug, Clone, PartialEq)]
pub struct Generator {
    pub matrix: DenseMatrix,
    pub layout: Layout,
    pub scenario: Scenario,
}

impl Generator {
    pub fn dim(&self) -> usize {
        self.layout.len()
    }

    /// `max_j |Σ_i 1_diag(i) G_ij|`, zero for trace-conserving dynamics.
    pub fn trace_defect(&self) -> f64 {
        let ones = self.layout.trace_functional();
        (0..self.dim())
            .map(|j| {
                (0..self.dim())
                    .map(|i| ones[i] * self.matrix[(i, j)])
                    .sum::<f64>()
                    .abs()
            })
            .fold(0.0, f64::max)
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.matrix.mul_vec(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn occ(entries: &[(StateLabel, f64)]) -> BTreeMap<StateLabel, f64> {
        entries.iter().copied().collect()
    }

    #[test]
    fn pack_point_mass_single_dot() {
        let x = pack(
            &Layout::single_dot(),
            &occ(&[(StateLabel::A, 1.0)]),
            &BTreeMap::new(),
        )
        .unwrap();
        assert_eq!(x.values, vec![1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn pack_symmetric_superposition() {
        let mut coh = BTreeMap::new();
        coh.insert((StateLabel::B, StateLabel::C), Complex64::new(0.5, 0.0));
        let x = pack(
            &Layout::double_dot(),
            &occ(&[(StateLabel::B, 0.5), (StateLabel::C, 0.5)]),
            &coh,
        )
        .unwrap();
        assert_eq!(x.values, vec![0.0, 0.5, 0.5, 0.5, 0.0]);
        assert!(validate_state(&x, DEFAULT_STATE_TOL).is_empty());
    }

    #[test]
    fn pack_reversed_pair_is_conjugated() {
        let mut coh = BTreeMap::new();
        coh.insert((StateLabel::C, StateLabel::B), Complex64::new(0.1, 0.2));
        let x = pack(
            &Layout::double_dot(),
            &occ(&[(StateLabel::B, 0.5), (StateLabel::C, 0.5)]),
            &coh,
        )
        .unwrap();
        assert_eq!(
            x.coherence(StateLabel::B, StateLabel::C),
            Some(Complex64::new(0.1, -0.2))
        );
    }

    #[test]
    fn pack_rejects_bad_sum() {
        let err = pack(
            &Layout::single_dot(),
            &occ(&[(StateLabel::A, 0.9), (StateLabel::B, 0.2)]),
            &BTreeMap::new(),
        )
        .unwrap_err();
        assert!(matches!(err, ModelError::Normalization { .. }));
    }

    #[test]
    fn pack_rejects_unknown_label() {
        let err = pack(
            &Layout::single_dot(),
            &occ(&[(StateLabel::C, 1.0)]),
            &BTreeMap::new(),
        )
        .unwrap_err();
        assert_eq!(err, ModelError::UnknownLabel(StateLabel::C, "single_dot"));
        let mut coh = BTreeMap::new();
        coh.insert((StateLabel::A, StateLabel::B), Complex64::new(0.0, 0.0));
        let err = pack(&Layout::single_dot(), &occ(&[(StateLabel::A, 1.0)]), &coh).unwrap_err();
        assert!(matches!(err, ModelError::UnknownCoherence(..)));
    }

    #[test]
    fn validate_point_mass_is_clean() {
        let x = StateVector::point_mass(&Layout::single_dot(), StateLabel::A).unwrap();
        assert!(validate_state(&x, 1e-9).is_empty());
    }

    #[test]
    fn validate_reports_only_the_negative_slot() {
        let x = StateVector {
            values: vec![0.5, 0.6, -0.1, 0.0, 0.0],
            layout: Layout::double_dot(),
        };
        let v = validate_state(&x, 1e-9);
        assert_eq!(
            v,
            vec![Violation::Negative {
                slot: 2,
                value: -0.1
            }]
        );
    }

    #[test]
    fn validate_flags_coherence_bound() {
        let x = StateVector {
            values: vec![0.0, 0.5, 0.5, 0.6, 0.0],
            layout: Layout::double_dot(),
        };
        let v = validate_state(&x, 1e-9);
        assert_eq!(v.len(), 1);
        assert!(matches!(v[0], Violation::CoherenceBound { .. }));
    }

    #[test]
    fn canonical_layouts() {
        use StateLabel::*;
        let l = Layout::double_dot_detector();
        assert_eq!(l.len(), 10);
        assert_eq!(l.diagonal(CPrime), Some(5));
        assert_eq!(l.coherence(B, C), Some((6, 7)));
        assert_eq!(l.coherence(BPrime, CPrime), Some((8, 9)));
        assert_eq!(Layout::double_dot().coherence(B, C), Some((3, 4)));
        assert_eq!(Layout::single_dot().diagonal(BPrime), Some(3));
    }

    #[test]
    fn rate_validation() {
        let mut r =
            RateSet::equal_amplitudes(Widths::new(1.0, 1.0), Widths::new(1.0, 1.0), 1.0, 0.0);
        assert!(r.validate().is_ok());
        r.sys_p.right = -1.0;
        assert_eq!(
            r.validate(),
            Err(ModelError::NegativeRate {
                name: "Gamma_R_p",
                value: -1.0
            })
        );
        r.sys_p.right = 1.0;
        r.epsilon = f64::NAN;
        assert!(matches!(
            r.validate(),
            Err(ModelError::NonFinite {
                name: "epsilon",
                ..
            })
        ));
    }

    #[test]
    fn parameter_access() {
        let mut r = RateSet::default();
        for (k, name) in RateSet::PARAMETERS.iter().enumerate() {
            r.set(name, k as f64 + 0.5).unwrap();
        }
        for (k, name) in RateSet::PARAMETERS.iter().enumerate() {
            assert_eq!(r.get(name), Some(k as f64 + 0.5));
        }
        assert_eq!(r.sys_p.right, 7.5);
        assert!(r.set("Gamma", 1.0).is_err());
        assert_eq!(r.get("Gamma"), None);
    }

    #[test]
    fn violation_measure_matches_validate() {
        let x = StateVector {
            values: vec![0.5, 0.6, -0.1, 0.0, 0.0],
            layout: Layout::double_dot(),
        };
        assert!((violation_measure(&x) - 0.1).abs() < 1e-15);
        let x = StateVector::point_mass(&Layout::double_dot_detector(), StateLabel::C).unwrap();
        assert_eq!(violation_measure(&x), 0.0);
    }

    #[test]
    fn label_round_trip() {
        for s in StateLabel::ALL {
            assert_eq!(s.as_str().parse::<StateLabel>().unwrap(), s);
            assert_eq!(s.toggled().toggled(), s);
        }
    }
}
