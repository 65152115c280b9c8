//! Solver for `∂_t n = ∂_x(∂_x n + n(t,0) n)` on the half-line with zero total
//! flux at `x = 0`.
//!
//! Each step advances the drift-diffusion problem implicitly, with the
//! boundary value `b ≈ n(t,0)` taken from the updated field. Total mass is
//! conserved because both end fluxes are exactly zero.

use std::sync::Arc;

use serde::Serialize;

use crate::diagnostics::{self, DiagnosticsRecord};
use crate::error::{Error, Result};
use crate::grid::{DensityField, Grid};
use crate::profiles::StationaryProfile;
use crate::scheme;

/// Retries allowed when a step produces a negative value.
const MAX_HALVINGS: u32 = 30;

/// Factor by which the step may grow after a successful step.
const DT_GROWTH: f64 = 1.25;

/// Time-step and blow-up detection parameters.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepControl {
    /// First step. Later steps grow geometrically, capped by the CFL bound.
    pub dt_initial: f64,
    /// Halving below this is reported as a step underflow.
    pub dt_min: f64,
    /// Fraction of the drift CFL limit `Δx / b` a step may use.
    pub safety_factor: f64,
    /// `B_max`: blow-up is declared when `b` exceeds this.
    pub blowup_threshold: f64,
    /// Blow-up is also declared once `b Δx` exceeds this: the boundary
    /// layer `1/b` is then narrower than two cells and the grid can no
    /// longer follow the concentration.
    pub resolution_limit: f64,
}

impl Default for StepControl {
    fn default() -> Self {
        Self {
            dt_initial: 1e-4,
            dt_min: 1e-12,
            safety_factor: 0.5,
            blowup_threshold: 1e6,
            resolution_limit: 0.5,
        }
    }
}

impl StepControl {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if !(self.dt_initial > 0.0) {
            return bad(format!("dt_initial must be positive, got {}", self.dt_initial));
        }
        if !(self.dt_min > 0.0 && self.dt_min < self.dt_initial) {
            return bad(format!(
                "dt_min must lie in (0, dt_initial), got {}",
                self.dt_min
            ));
        }
        if !(self.safety_factor > 0.0 && self.safety_factor <= 1.0) {
            return bad(format!(
                "safety_factor must lie in (0, 1], got {}",
                self.safety_factor
            ));
        }
        if !(self.blowup_threshold > 0.0) {
            return bad(format!(
                "B_max must be positive, got {}",
                self.blowup_threshold
            ));
        }
        if !(self.resolution_limit > 0.0) {
            return bad(format!(
                "resolution_limit must be positive, got {}",
                self.resolution_limit
            ));
        }
        Ok(())
    }

    /// Largest admissible step for drift speed `speed` on `grid`. Speeds
    /// below one are treated as one so that a vanishing drift does not
    /// lift the bound altogether.
    pub(crate) fn step_bound(&self, grid: &Grid, speed: f64) -> f64 {
        self.safety_factor * grid.min_width() / speed.max(1.0)
    }

    /// Step to attempt after a step of size `previous`, at most `remaining`.
    pub(crate) fn next_dt(&self, previous: f64, remaining: f64) -> f64 {
        (previous * DT_GROWTH).min(remaining)
    }

    /// Boundary value above which a run is declared blown up on `grid`.
    pub fn detection_threshold(&self, grid: &Grid) -> f64 {
        self.blowup_threshold
            .min(self.resolution_limit / grid.min_width())
    }
}

/// Density, time and boundary value of a physical-frame run.
#[derive(Debug, Clone)]
pub struct SolverState {
    pub field: DensityField,
    pub time: f64,
    pub boundary_value: f64,
    /// Proposed size of the next step.
    pub dt: f64,
    pub step_index: u64,
    /// Set when the boundary reconstruction went negative and was clamped.
    pub boundary_clamped: bool,
    /// Conserved mass of the run.
    pub mass: f64,
}

impl SolverState {
    pub fn new(field: DensityField, dt: f64) -> Self {
        let (b, clamped) = scheme::boundary_value(field.grid(), field.values());
        Self {
            mass: field.mass(),
            field,
            time: 0.0,
            boundary_value: b,
            dt,
            step_index: 0,
            boundary_clamped: clamped,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BlowupReason {
    BoundaryExceededThreshold,
    DtUnderflow,
    NotDetected,
}

impl BlowupReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            BlowupReason::BoundaryExceededThreshold => "boundary_exceeded_threshold",
            BlowupReason::DtUnderflow => "dt_underflow",
            BlowupReason::NotDetected => "not_detected",
        }
    }
}

/// Outcome of blow-up monitoring for one run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlowupCertificate {
    pub detected: bool,
    pub detection_time: Option<f64>,
    /// `J(0)² / (M² (M-1))` when `M > 1`.
    pub moment_bound: Option<f64>,
    /// Whether the initial data were nonincreasing, the hypothesis under
    /// which `moment_bound` bounds the blow-up time.
    pub bound_applies: bool,
    pub reason: BlowupReason,
}

/// Upper bound on the blow-up time from `d(J²)/dt ≤ M² (1 - M)`.
pub fn blowup_time_bound(mass: f64, first_moment: f64) -> Result<f64> {
    if !(mass > 1.0) {
        return Err(Error::InvalidParameter(format!(
            "no blow-up bound for M = {mass} <= 1"
        )));
    }
    if !(first_moment > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "first moment must be positive, got {first_moment}"
        )));
    }
    Ok(first_moment * first_moment / (mass * mass * (mass - 1.0)))
}

/// Advances `state` by `dt` with the drift frozen at `drift`, without any
/// step-size control. Returns the new cell values.
pub fn advance_with_drift(field: &DensityField, drift: f64, dt: f64) -> Vec<f64> {
    let grid = field.grid();
    let speeds = vec![drift; grid.len() - 1];
    let coeffs = scheme::interface_coefficients(grid, 1.0, &speeds);
    scheme::implicit_step(grid, field.values(), &coeffs, dt, 0.0)
}

/// Iterations allowed for the boundary value within one step.
const MAX_BOUNDARY_ITERATIONS: usize = 25;
const BOUNDARY_TOLERANCE: f64 = 1e-13;

/// One conservative step of size at most `state.dt`, reduced to the drift
/// CFL bound.
///
/// The boundary value driving the step is the one extracted from the
/// updated field: starting from the value at the step start, the linear
/// implicit solve is repeated until `b` is self-consistent. A step whose
/// iteration does not settle, or that produces a negative value, is retried
/// with half the time step.
pub fn step(state: &SolverState, control: &StepControl) -> Result<SolverState> {
    let grid = state.field.grid();
    let mut dt = state.dt.min(control.step_bound(grid, state.boundary_value));
    for _ in 0..=MAX_HALVINGS {
        if dt < control.dt_min {
            break;
        }
        if let Some((mut values, b)) = implicit_boundary_step(&state.field, state.boundary_value, dt) {
            if values.iter().all(|&v| v >= 0.0) {
                scheme::restore_mass(grid, &mut values, state.mass);
                let field = DensityField::from_raw(Arc::clone(state.field.grid_arc()), values);
                let (b_new, clamped) = scheme::boundary_value(field.grid(), field.values());
                debug_assert!((b_new - b).abs() <= 1e-10 * (1.0 + b));
                return Ok(SolverState {
                    field,
                    time: state.time + dt,
                    boundary_value: b_new,
                    dt,
                    step_index: state.step_index + 1,
                    boundary_clamped: clamped,
                    mass: state.mass,
                });
            }
        }
        dt *= 0.5;
    }
    Err(Error::StepUnderflow {
        dt,
        dt_min: control.dt_min,
        time: state.time,
    })
}

fn implicit_boundary_step(field: &DensityField, b_start: f64, dt: f64) -> Option<(Vec<f64>, f64)> {
    // Residual g(b) = b(solve(b)) - b, driven to zero by secant iteration
    // seeded with one fixed-point step.
    let eval = |b: f64| {
        let values = advance_with_drift(field, b, dt);
        let g = scheme::boundary_value(field.grid(), &values).0 - b;
        (values, g)
    };
    let (mut b_prev, (mut values, mut g_prev)) = (b_start, eval(b_start));
    let mut b = b_start + g_prev;
    if g_prev.abs() <= BOUNDARY_TOLERANCE * (1.0 + b_start) {
        return Some((values, b_start));
    }
    for _ in 0..MAX_BOUNDARY_ITERATIONS {
        if !b.is_finite() {
            return None;
        }
        let g;
        (values, g) = eval(b);
        if !g.is_finite() {
            return None;
        }
        if g.abs() <= BOUNDARY_TOLERANCE * (1.0 + b) {
            return Some((values, b));
        }
        let slope = (g - g_prev) / (b - b_prev);
        let next = if slope.is_finite() && slope != 0.0 { b - g / slope } else { b + g };
        (b_prev, g_prev) = (b, g);
        b = next.max(0.0);
    }
    None
}

/// Result of [`run`].
#[derive(Debug, Clone)]
pub struct PhysicalRun {
    pub state: SolverState,
    pub certificate: BlowupCertificate,
    pub records: Vec<DiagnosticsRecord>,
    /// `α = 1/J(0)` when the mass is critical.
    pub reference_alpha: Option<f64>,
    /// `n` in the last cell relative to `max n` at the end of the run.
    pub far_field_ratio: f64,
}

/// Mass treated as critical when `|M - 1|` is below this.
pub const CRITICAL_MASS_TOLERANCE: f64 = 1e-9;

/// Runs until `t_final` or until blow-up is detected, recording diagnostics
/// every `diag_every` steps plus the initial and final states.
pub fn run(
    initial: DensityField,
    t_final: f64,
    control: &StepControl,
    diag_every: usize,
) -> Result<PhysicalRun> {
    control.validate()?;
    if !(t_final >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "T_final must be nonnegative, got {t_final}"
        )));
    }
    let diag_every = diag_every.max(1);
    let mass = initial.mass();
    let j0 = diagnostics::first_moment(&initial);
    let nonincreasing = initial.is_nonincreasing();
    let moment_bound = if mass > 1.0 && j0 > 0.0 {
        Some(blowup_time_bound(mass, j0)?)
    } else {
        None
    };
    let (reference_alpha, reference) = if (mass - 1.0).abs() <= CRITICAL_MASS_TOLERANCE && j0 > 0.0 {
        let alpha = 1.0 / j0;
        let h = StationaryProfile::new(alpha)?.field(Arc::clone(initial.grid_arc()));
        (Some(alpha), Some(h))
    } else {
        (None, None)
    };
    let threshold = control.detection_threshold(initial.grid());

    let record = |s: &SolverState| -> Result<DiagnosticsRecord> {
        let mut r = DiagnosticsRecord::snapshot(&s.field, s.boundary_value, s.time);
        if let Some(h) = &reference {
            r.relative_entropy = Some(diagnostics::relative_entropy(&s.field, h)?);
        }
        Ok(r)
    };

    let mut state = SolverState::new(initial, control.dt_initial);
    let mut records = vec![record(&state)?];
    let mut reason = BlowupReason::NotDetected;
    let mut clamp_count = 0u64;

    if state.boundary_value > threshold {
        reason = BlowupReason::BoundaryExceededThreshold;
    }
    while reason == BlowupReason::NotDetected && state.time < t_final {
        let remaining = t_final - state.time;
        state.dt = if state.step_index == 0 {
            control.dt_initial.min(remaining)
        } else {
            control.next_dt(state.dt, remaining)
        };
        if remaining <= control.dt_min {
            break;
        }
        match step(&state, control) {
            Ok(next) => state = next,
            Err(Error::StepUnderflow { .. }) => {
                reason = BlowupReason::DtUnderflow;
                break;
            }
            Err(e) => return Err(e),
        }
        if state.boundary_clamped {
            clamp_count += 1;
        }
        if state.boundary_value > threshold {
            reason = BlowupReason::BoundaryExceededThreshold;
        }
        if state.step_index.is_multiple_of(diag_every as u64) && reason == BlowupReason::NotDetected {
            records.push(record(&state)?);
        }
    }
    if records.last().map(|r| r.t) != Some(state.time) {
        records.push(record(&state)?);
    }
    if clamp_count > 0 {
        log::warn!("boundary reconstruction clamped in {clamp_count} steps (under-resolved)");
    }

    let max = state.field.values().iter().copied().fold(0.0, f64::max);
    let last = *state.field.values().last().unwrap_or(&0.0);
    let far_field_ratio = if max > 0.0 { last / max } else { 0.0 };
    if far_field_ratio > 1e-10 {
        log::warn!(
            "density at x = L is {far_field_ratio:e} of its maximum; consider a longer domain"
        );
    }

    let detected = reason != BlowupReason::NotDetected;
    Ok(PhysicalRun {
        certificate: BlowupCertificate {
            detected,
            detection_time: detected.then_some(state.time),
            moment_bound,
            bound_applies: moment_bound.is_some() && nonincreasing,
            reason,
        },
        state,
        records,
        reference_alpha,
        far_field_ratio,
    })
}
