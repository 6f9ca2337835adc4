//! Stationary states and time evolution of `dx/dt = G x`.

use thiserror::Error;

use crate::linalg::{DenseMatrix, LuFactors};
use crate::model::{validate_state, Generator, StateLabel, StateVector, Violation};

/// Pivot ratio below which the normalized system counts as rank deficient.
pub const RANK_TOL: f64 = 1e-10;

/// Largest `dt · ‖G‖∞` accepted by [`evolve`]. The real-axis stability
/// interval of classical RK4 ends near 2.785.
pub const RK4_STABILITY_LIMIT: f64 = 2.5;

/// Trace drift per step that aborts an integration.
pub const MAX_TRACE_DRIFT_PER_STEP: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("steady state is not unique (pivot ratio {pivot_ratio:.3e})")]
    DegenerateSteadyState { pivot_ratio: f64 },
    #[error("step {dt} too large: {reason}")]
    StepTooLarge { dt: f64, reason: String },
    #[error("no relaxation to within {tol} before t = {horizon}")]
    NoConvergence { tol: f64, horizon: f64 },
    #[error("invalid time grid: {0}")]
    InvalidTimeGrid(String),
    #[error("initial state does not match the generator layout")]
    LayoutMismatch,
}

/// Stationary state of `g`: `G x = 0` with unit trace.
///
/// The first population row of `G` is replaced by the normalization
/// constraint and the system solved by LU with partial pivoting, followed by
/// one refinement step.
pub fn steady_state(g: &Generator) -> Result<StateVector, SolverError> {
    let n = g.dim();
    let ones = g.layout.trace_functional();
    let row = ones
        .iter()
        .position(|&w| w == 1.0)
        .expect("every layout has a population slot");

    let mut a = g.matrix.clone();
    a.row_mut(row).copy_from_slice(&ones);
    let mut rhs = vec![0.0; n];
    rhs[row] = 1.0;

    let lu =
        LuFactors::factor(a.clone(), RANK_TOL).map_err(|s| SolverError::DegenerateSteadyState {
            pivot_ratio: s.pivot_ratio,
        })?;
    let mut x = lu.solve(&rhs);
    let ax = a.mul_vec(&x);
    let residual: Vec<f64> = rhs.iter().zip(&ax).map(|(b, v)| b - v).collect();
    for (xi, d) in x.iter_mut().zip(lu.solve(&residual)) {
        *xi += d;
    }
    Ok(StateVector {
        values: x,
        layout: g.layout.clone(),
    })
}

/// `‖G x‖∞ / ‖G‖∞`, or `‖G x‖∞` for the zero generator.
pub fn relative_residual(g: &Generator, x: &StateVector) -> f64 {
    let r = g
        .apply(&x.values)
        .into_iter()
        .fold(0.0f64, |m, v| m.max(v.abs()));
    let norm = g.matrix.norm_inf();
    if norm > 0.0 {
        r / norm
    } else {
        r
    }
}

/// Sampled time evolution.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<StateVector>,
}

impl Trajectory {
    pub fn last(&self) -> &StateVector {
        self.states
            .last()
            .expect("trajectory holds the initial state")
    }

    /// Largest `|tr x(t) - tr x(0)| / t` over the samples.
    pub fn trace_drift_rate(&self) -> f64 {
        let t0 = self.times[0];
        let tr0 = self.states[0].trace();
        self.times
            .iter()
            .zip(&self.states)
            .skip(1)
            .map(|(t, s)| (s.trace() - tr0).abs() / (t - t0))
            .fold(0.0, f64::max)
    }

    /// Most negative population seen, as a nonnegative number.
    pub fn max_negativity(&self) -> f64 {
        self.states
            .iter()
            .flat_map(|s| s.layout.diagonal_labels().map(move |(k, _)| s.values[k]))
            .fold(0.0, |m, v| m.max(-v))
    }

    pub fn violations(&self, tol: f64) -> Vec<(f64, Vec<Violation>)> {
        self.times
            .iter()
            .zip(&self.states)
            .map(|(&t, s)| (t, validate_state(s, tol)))
            .filter(|(_, v)| !v.is_empty())
            .collect()
    }
}

/// Default step: `0.1 / max |G_ij|`, or 0.1 for the zero generator.
pub fn default_dt(g: &Generator) -> f64 {
    let m = g.matrix.max_abs();
    if m > 0.0 {
        0.1 / m
    } else {
        0.1
    }
}

fn rk4_step(m: &DenseMatrix, x: &[f64], h: f64) -> Vec<f64> {
    let axpy = |a: &[f64], k: &[f64], s: f64| -> Vec<f64> {
        a.iter().zip(k).map(|(u, v)| u + s * v).collect()
    };
    let k1 = m.mul_vec(x);
    let k2 = m.mul_vec(&axpy(x, &k1, 0.5 * h));
    let k3 = m.mul_vec(&axpy(x, &k2, 0.5 * h));
    let k4 = m.mul_vec(&axpy(x, &k3, h));
    x.iter()
        .enumerate()
        .map(|(i, xi)| xi + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect()
}

/// Fixed-step RK4 integration over `[0, t_final]`.
///
/// The interval is split into `ceil(t_final / dt)` equal steps, so the
/// step actually taken never exceeds `dt` and the last sample lands on
/// `t_final`. Every step is recorded.
pub fn evolve(
    g: &Generator,
    x0: &StateVector,
    t_final: f64,
    dt: f64,
) -> Result<Trajectory, SolverError> {
    evolve_from(g, x0, 0.0, t_final, dt)
}

fn evolve_from(
    g: &Generator,
    x0: &StateVector,
    t_start: f64,
    t_final: f64,
    dt: f64,
) -> Result<Trajectory, SolverError> {
    if x0.layout != g.layout || x0.values.len() != g.dim() {
        return Err(SolverError::LayoutMismatch);
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(SolverError::InvalidTimeGrid(format!("dt = {dt}")));
    }
    let span = t_final - t_start;
    if !(span >= 0.0 && span.is_finite()) {
        return Err(SolverError::InvalidTimeGrid(format!(
            "t_final = {t_final} before start {t_start}"
        )));
    }
    let steps = (span / dt).ceil() as usize;
    let h = if steps > 0 { span / steps as f64 } else { 0.0 };
    let norm = g.matrix.norm_inf();
    if h * norm > RK4_STABILITY_LIMIT {
        return Err(SolverError::StepTooLarge {
            dt,
            reason: format!("dt·‖G‖∞ = {:.3} exceeds {RK4_STABILITY_LIMIT}", h * norm),
        });
    }

    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    times.push(t_start);
    states.push(x0.clone());
    let mut x = x0.values.clone();
    let mut trace = x0.trace();
    for k in 1..=steps {
        x = rk4_step(&g.matrix, &x, h);
        let s = StateVector {
            values: x.clone(),
            layout: g.layout.clone(),
        };
        let new_trace = s.trace();
        if !new_trace.is_finite() || (new_trace - trace).abs() > MAX_TRACE_DRIFT_PER_STEP {
            return Err(SolverError::StepTooLarge {
                dt,
                reason: format!("trace drift {:.3e} in one step", (new_trace - trace).abs()),
            });
        }
        trace = new_trace;
        times.push(t_start + k as f64 * h);
        states.push(s);
    }
    Ok(Trajectory { times, states })
}

/// Limits for [`relaxation_check`].
#[derive(Debug, Clone, Copy)]
pub struct RelaxationOptions {
    /// Integration step; [`default_dt`] when `None`.
    pub dt: Option<f64>,
    /// Give up past this time.
    pub horizon_cap: f64,
    /// Give up past this many steps.
    pub max_steps: usize,
}

impl Default for RelaxationOptions {
    fn default() -> Self {
        RelaxationOptions {
            dt: None,
            horizon_cap: 1e6,
            max_steps: 5_000_000,
        }
    }
}

/// Earliest sampled time at which the evolution from the pure `|a⟩` state is
/// within `tol` (max norm) of the stationary state.
///
/// The horizon starts at one step-scale inverse rate and doubles until the
/// condition is met or the cap is reached. A generator without a unique
/// stationary state never relaxes.
pub fn relaxation_check(g: &Generator, tol: f64) -> Result<f64, SolverError> {
    relaxation_check_with(g, tol, RelaxationOptions::default())
}

pub fn relaxation_check_with(
    g: &Generator,
    tol: f64,
    opts: RelaxationOptions,
) -> Result<f64, SolverError> {
    let no_convergence = |horizon| SolverError::NoConvergence { tol, horizon };
    let target = steady_state(g).map_err(|_| no_convergence(0.0))?;
    let dt = opts.dt.unwrap_or_else(|| default_dt(g));
    let distance = |s: &StateVector| {
        s.values
            .iter()
            .zip(&target.values)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
    };

    let mut x = StateVector::point_mass(&g.layout, StateLabel::A)
        .expect("all layouts contain the empty state");
    if distance(&x) < tol {
        return Ok(0.0);
    }
    let mut t = 0.0;
    let mut horizon = 1.0 / g.matrix.max_abs().max(f64::MIN_POSITIVE);
    let mut steps_used = 0usize;
    loop {
        let horizon_end = horizon.min(opts.horizon_cap);
        let traj = evolve_from(g, &x, t, horizon_end, dt)?;
        steps_used += traj.times.len() - 1;
        if let Some((&hit, _)) = traj
            .times
            .iter()
            .zip(&traj.states)
            .skip(1)
            .find(|(_, s)| distance(s) < tol)
        {
            return Ok(hit);
        }
        t = horizon_end;
        x = traj.last().clone();
        if horizon_end >= opts.horizon_cap || steps_used >= opts.max_steps {
            return Err(no_convergence(horizon_end));
        }
        horizon *= 2.0;
    }
}
