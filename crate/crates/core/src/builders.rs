//! Generator matrices for each transport scenario.
//!
//! Complex coherences are carried as `(Re, Im)` pairs. For a pair `(i, j)`
//! with hopping `Ω` between `i` and `j`, the term `iΩ(σ_ij - σ_ji)` in the
//! population equations equals `-2Ω Im σ_ij`, and the rotation `iε σ_ij`
//! becomes the block `[[0, -ε], [ε, 0]]` on `(Re, Im)`.

use thiserror::Error;

use crate::linalg::DenseMatrix;
use crate::model::{BlockingConfig, Generator, Layout, ModelError, RateSet, Scenario, StateLabel};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BuildError {
    #[error(transparent)]
    Rates(#[from] ModelError),
    #[error("{0} requires primed widths equal to the unprimed ones")]
    UnequalAmplitudes(&'static str),
}

/// Builds the generator for `scenario`.
pub fn build(scenario: Scenario, r: &RateSet) -> Result<Generator, BuildError> {
    match scenario {
        Scenario::SingleDotSet => build_single_dot_set(r),
        Scenario::DoubleDotBare => build_double_dot_bare(r),
        Scenario::DoubleDotSet => build_double_dot_set(r),
        Scenario::ReducedDoubleDot => build_reduced_double_dot(r),
        Scenario::GeneralizedDoubleDotSet(b) => build_generalized_double_dot_set(r, b),
    }
}

/// Single dot watched by the detector dot, over `[a, b, a', b']`.
///
/// Populations only; there is no hopping between isolated states, so no
/// coherence enters.
pub fn build_single_dot_set(r: &RateSet) -> Result<Generator, BuildError> {
    r.validate()?;
    let layout = Layout::single_dot();
    let (a, b, ap, bp) = (0, 1, 2, 3);
    let mut g = DenseMatrix::zeros(4);

    g[(a, a)] = -(r.det.left + r.sys.left);
    g[(a, ap)] = r.det.right;
    g[(a, b)] = r.sys.right;

    g[(b, b)] = -r.sys.right;
    g[(b, a)] = r.sys.left;
    g[(b, bp)] = r.det_p.left + r.det_p.right;

    g[(ap, ap)] = -(r.det.right + r.sys_p.left);
    g[(ap, a)] = r.det.left;
    g[(ap, bp)] = r.sys_p.right;

    g[(bp, bp)] = -(r.det_p.left + r.det_p.right + r.sys_p.right);
    g[(bp, ap)] = r.sys_p.left;

    Ok(Generator {
        matrix: g,
        layout,
        scenario: Scenario::SingleDotSet,
    })
}

/// Hopping, detuning rotation and decay for one coherence pair.
fn coherent_block(
    g: &mut DenseMatrix,
    (b, c): (usize, usize),
    (re, im): (usize, usize),
    omega: f64,
    detuning: f64,
    decay: f64,
) {
    g[(b, im)] += -2.0 * omega;
    g[(c, im)] += 2.0 * omega;
    g[(re, re)] += -decay;
    g[(re, im)] += -detuning;
    g[(im, re)] += detuning;
    g[(im, im)] += -decay;
    g[(im, b)] += omega;
    g[(im, c)] += -omega;
}

fn double_dot(r: &RateSet, coherence_decay: f64, scenario: Scenario) -> Generator {
    let layout = Layout::double_dot();
    let (a, b, c, re, im) = (0, 1, 2, 3, 4);
    let mut g = DenseMatrix::zeros(5);

    g[(a, a)] = -r.sys.left;
    g[(a, c)] = r.sys.right;
    g[(b, a)] = r.sys.left;
    g[(c, c)] = -r.sys.right;
    coherent_block(
        &mut g,
        (b, c),
        (re, im),
        r.omega,
        r.epsilon,
        coherence_decay,
    );

    Generator {
        matrix: g,
        layout,
        scenario,
    }
}

/// Double dot without detector, over `[a, b, c, Re σ_bc, Im σ_bc]`.
pub fn build_double_dot_bare(r: &RateSet) -> Result<Generator, BuildError> {
    r.validate()?;
    Ok(double_dot(r, 0.5 * r.sys.right, Scenario::DoubleDotBare))
}

/// Detector-traced double dot in the negative-result limit. Same as the bare
/// double dot with the coherence decay raised by `γ_L / 2`.
pub fn build_reduced_double_dot(r: &RateSet) -> Result<Generator, BuildError> {
    r.validate()?;
    Ok(double_dot(
        r,
        0.5 * (r.sys.right + r.det.left),
        Scenario::ReducedDoubleDot,
    ))
}

fn require_equal_amplitudes(r: &RateSet, who: &'static str) -> Result<(), BuildError> {
    r.validate()?;
    if !r.is_equal_amplitudes() {
        return Err(BuildError::UnequalAmplitudes(who));
    }
    Ok(())
}

/// Double dot plus detector with the detector blocked only when the second
/// dot is occupied. Layout
/// `[a, a', b, b', c, c', Re σ_bc, Im σ_bc, Re σ_b'c', Im σ_b'c']`.
///
/// Written out equation by equation; [`build_generalized_double_dot_set`]
/// must reproduce it bit for bit, so composite coefficients are summed in the
/// same order the rule-based builder uses.
pub fn build_double_dot_set(r: &RateSet) -> Result<Generator, BuildError> {
    require_equal_amplitudes(r, "double_dot_set")?;
    let (gl, gr) = (r.det.left, r.det.right);
    let (sl, sr) = (r.sys.left, r.sys.right);
    let (a, ap, b, bp, c, cp) = (0, 1, 2, 3, 4, 5);
    let (re, im, re_p, im_p) = (6, 7, 8, 9);
    let mut g = DenseMatrix::zeros(10);

    // σ_aa
    g[(a, a)] = -(sl + gl);
    g[(a, ap)] = gr;
    g[(a, c)] = sr;
    // σ_a'a'
    g[(ap, ap)] = -(sl + gr);
    g[(ap, a)] = gl;
    g[(ap, cp)] = sr;
    // σ_bb
    g[(b, a)] = sl;
    g[(b, b)] = -gl;
    g[(b, bp)] = gr;
    // σ_b'b'
    g[(bp, ap)] = sl;
    g[(bp, b)] = gl;
    g[(bp, bp)] = -gr;
    // σ_cc
    g[(c, c)] = -sr;
    g[(c, cp)] = gl + gr;
    // σ_c'c': decays through Γ_R and back out of the detector through γ_L + γ_R
    g[(cp, cp)] = -(sr + (gl + gr));

    // σ_bc: decay (Γ_R + γ_L)/2, fed by detector exit from σ_b'c'
    coherent_block(
        &mut g,
        (b, c),
        (re, im),
        r.omega,
        r.epsilon,
        0.5 * (sr + gl),
    );
    g[(re, re_p)] = gr;
    g[(im, im_p)] = gr;

    // σ_b'c': detuning ε - U1 + U2, decay (γ_L + 2γ_R + Γ_R)/2
    coherent_block(
        &mut g,
        (bp, cp),
        (re_p, im_p),
        r.omega,
        r.epsilon - r.u1 + r.u2,
        0.5 * (gr + (gl + gr + sr)),
    );

    Ok(Generator {
        matrix: g,
        layout: Layout::double_dot_detector(),
        scenario: Scenario::DoubleDotSet,
    })
}

/// Outgoing channels of one basis state in the generalized model.
#[derive(Debug, Clone, Copy, Default)]
struct Channels {
    /// Electron enters the detector from the left reservoir.
    entry: f64,
    /// Detector electron pushed above the emitter returns to it.
    backflow: f64,
    /// Detector electron leaves to its collector.
    exit: f64,
    /// Measured-system tunneling (`a → b` at Γ_L, `c → a` at Γ_R).
    system: f64,
}

impl Channels {
    fn total(&self) -> f64 {
        self.entry + self.backflow + self.exit + self.system
    }
}

/// Double dot plus detector with configurable blocking, assembled from
/// channel rules:
///
/// 1. the detector can be entered (`γ_L`, `s → s'`) unless the occupied dot
///    blocks it;
/// 2. a primed state whose dot blocks the detector leaks back to the emitter
///    at `γ_L` in addition to `γ_R` when backflow is enabled;
/// 3. a coherence decays at half the summed decay rates of its two states;
/// 4. a detector transition available to both members of a coherent pair
///    carries the coherence along at its rate.
///
/// With [`BlockingConfig::DISTINGUISHING`] the result equals
/// [`build_double_dot_set`] exactly.
pub fn build_generalized_double_dot_set(
    r: &RateSet,
    blocking: BlockingConfig,
) -> Result<Generator, BuildError> {
    require_equal_amplitudes(r, "generalized_double_dot_set")?;
    use StateLabel::*;
    let layout = Layout::double_dot_detector();
    let idx = |s: StateLabel| layout.diagonal(s).unwrap();
    let (gl, gr) = (r.det.left, r.det.right);
    let (sl, sr) = (r.sys.left, r.sys.right);

    let channels = |s: StateLabel| -> Channels {
        let blocked = blocking.blocks(s);
        let mut ch = Channels::default();
        if s.detector_occupied() {
            if blocked && blocking.backflow_when_blocked {
                ch.backflow = gl;
            }
            ch.exit = gr;
        } else if !blocked {
            ch.entry = gl;
        }
        ch.system = match s {
            A | APrime => sl,
            C | CPrime => sr,
            B | BPrime => 0.0,
        };
        ch
    };

    let mut g = DenseMatrix::zeros(layout.len());
    for s in [A, APrime, B, BPrime, C, CPrime] {
        let ch = channels(s);
        let (from, partner) = (idx(s), idx(s.toggled()));
        g[(from, from)] = -ch.total();
        if s.detector_occupied() {
            g[(partner, from)] += ch.backflow;
            g[(partner, from)] += ch.exit;
        } else {
            g[(partner, from)] += ch.entry;
        }
        match s {
            A => g[(idx(B), from)] += sl,
            APrime => g[(idx(BPrime), from)] += sl,
            C => g[(idx(A), from)] += sr,
            CPrime => g[(idx(APrime), from)] += sr,
            B | BPrime => {}
        }
    }

    let pairs = [
        ((B, C), r.epsilon),
        ((BPrime, CPrime), r.epsilon - r.u1 + r.u2),
    ];
    for ((i, j), detuning) in pairs {
        let coh = layout.coherence(i, j).unwrap();
        let decay = 0.5 * (channels(i).total() + channels(j).total());
        coherent_block(&mut g, (idx(i), idx(j)), coh, r.omega, detuning, decay);
    }

    // Transfer of σ_b'c' into σ_bc through exit channels shared by b' and c',
    // and of σ_bc into σ_b'c' when both b and c can enter the detector.
    let (bp, cp) = (channels(BPrime), channels(CPrime));
    let shared_backflow = if bp.backflow > 0.0 && cp.backflow > 0.0 {
        gl
    } else {
        0.0
    };
    let down = 0.0 + shared_backflow + gr;
    let (b, c) = (channels(B), channels(C));
    let up = if b.entry > 0.0 && c.entry > 0.0 {
        gl
    } else {
        0.0
    };

    let (re, im) = layout.coherence(B, C).unwrap();
    let (re_p, im_p) = layout.coherence(BPrime, CPrime).unwrap();
    g[(re, re_p)] += down;
    g[(im, im_p)] += down;
    g[(re_p, re)] += up;
    g[(im_p, im)] += up;

    Ok(Generator {
        matrix: g,
        layout,
        scenario: Scenario::GeneralizedDoubleDotSet(blocking),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Widths;

    fn ones() -> RateSet {
        RateSet::equal_amplitudes(Widths::new(1.0, 1.0), Widths::new(1.0, 1.0), 1.0, 0.0)
    }

    #[test]
    fn single_dot_matrix_terms() {
        let mut r = ones();
        r.det_p = Widths::new(0.3, 0.7);
        r.sys_p = Widths::new(0.2, 0.9);
        let g = build_single_dot_set(&r).unwrap().matrix;
        // b' decays at γ'_L + γ'_R into b and at Γ'_R into a'
        assert_eq!(g[(3, 3)], -(0.3 + 0.7 + 0.9));
        assert_eq!(g[(1, 3)], 0.3 + 0.7);
        assert_eq!(g[(2, 3)], 0.9);
        assert_eq!(g[(3, 2)], 0.2);
        assert_eq!(g[(2, 2)], -(1.0 + 0.2));
    }

    #[test]
    fn bare_double_dot_real_form() {
        let mut r = ones();
        r.omega = 0.7;
        r.epsilon = 0.3;
        r.sys = Widths::new(2.0, 5.0);
        let g = build_double_dot_bare(&r).unwrap().matrix;
        let expected = DenseMatrix::from_rows(&[
            vec![-2.0, 0.0, 5.0, 0.0, 0.0],
            vec![2.0, 0.0, 0.0, 0.0, -1.4],
            vec![0.0, 0.0, -5.0, 0.0, 1.4],
            vec![0.0, 0.0, 0.0, -2.5, -0.3],
            vec![0.0, 0.7, -0.7, 0.3, -2.5],
        ]);
        assert_eq!(g, expected);
    }

    #[test]
    fn reduced_matches_bare_without_detector() {
        let mut r = ones();
        r.det.left = 0.0;
        r.epsilon = -1.7;
        let bare = build_double_dot_bare(&r).unwrap();
        let reduced = build_reduced_double_dot(&r).unwrap();
        assert_eq!(bare.matrix, reduced.matrix);
        r.det.left = 0.4;
        let reduced = build_reduced_double_dot(&r).unwrap();
        assert_eq!(reduced.matrix[(3, 3)], -0.5 * 1.4);
    }

    #[test]
    fn generalized_regime_i_is_golden() {
        let mut r = ones();
        r.det = Widths::new(0.37, 123.4);
        r.sys = Widths::new(0.11, 2.9);
        r = r.with_tied_primes();
        r.omega = 0.77;
        r.epsilon = -0.3;
        r.u1 = 0.25;
        r.u2 = 1.5;
        let a = build_double_dot_set(&r).unwrap();
        let b = build_generalized_double_dot_set(&r, BlockingConfig::DISTINGUISHING).unwrap();
        assert_eq!(a.matrix, b.matrix);
    }

    #[test]
    fn unequal_amplitudes_rejected() {
        let mut r = ones();
        r.det_p.left = 2.0;
        assert_eq!(
            build_double_dot_set(&r),
            Err(BuildError::UnequalAmplitudes("double_dot_set"))
        );
        assert!(build_generalized_double_dot_set(&r, BlockingConfig::INDISTINGUISHING).is_err());
        assert!(build_single_dot_set(&r).is_ok());
    }

    #[test]
    fn negative_rate_rejected() {
        let mut r = ones();
        r.sys.left = -0.1;
        for s in [
            Scenario::SingleDotSet,
            Scenario::DoubleDotBare,
            Scenario::DoubleDotSet,
            Scenario::ReducedDoubleDot,
        ] {
            assert!(matches!(build(s, &r), Err(BuildError::Rates(_))), "{s}");
        }
    }

    #[test]
    fn zero_rates_give_zero_generator() {
        let r = RateSet::default();
        for s in [
            Scenario::SingleDotSet,
            Scenario::DoubleDotBare,
            Scenario::DoubleDotSet,
            Scenario::ReducedDoubleDot,
            Scenario::GeneralizedDoubleDotSet(BlockingConfig::INDISTINGUISHING),
        ] {
            let g = build(s, &r).unwrap();
            assert_eq!(g.matrix.max_abs(), 0.0, "{s}");
        }
    }

    #[test]
    fn regime_ii_coherence_rates() {
        let mut r = ones();
        r.det = Widths::new(2.0, 10.0);
        r = r.with_tied_primes();
        let g = build_generalized_double_dot_set(&r, BlockingConfig::INDISTINGUISHING)
            .unwrap()
            .matrix;
        // b can no longer enter the detector
        assert_eq!(g[(2, 2)], 0.0);
        // σ_bc decays only through Γ_R/2
        assert_eq!(g[(6, 6)], -0.5);
        // b' and c' both leak back at γ_L and exit at γ_R
        assert_eq!(g[(2, 3)], 12.0);
        assert_eq!(g[(6, 8)], 12.0);
        assert_eq!(g[(8, 8)], -0.5 * (12.0 + 13.0));
    }
}
