//! The equation in self-similar variables,
//! `∂_τ u = ∂_yy u + ∂_y(y u) + u(τ,0) ∂_y u`, and the change of frame
//! `n(t,x) = s⁻¹ u(log s, x/s)` with `s = √(1+2t)`.

use std::sync::Arc;

use crate::diagnostics::{self, DiagnosticsRecord};
use crate::error::{Error, Result};
use crate::grid::{resample_conservative, DensityField, Grid};
use crate::kernel::StepControl;
use crate::profiles::{solve_alpha_for_mass, SelfSimilarProfile};
use crate::scheme;

const MAX_HALVINGS: u32 = 30;

/// Density in self-similar variables.
#[derive(Debug, Clone)]
pub struct RescaledState {
    pub field: DensityField,
    pub tau: f64,
    pub boundary_value: f64,
    pub dt: f64,
    pub step_index: u64,
    pub mass: f64,
}

impl RescaledState {
    pub fn new(field: DensityField, tau: f64, dt: f64) -> Self {
        let b = scheme::boundary_value(field.grid(), field.values()).0;
        Self {
            mass: field.mass(),
            field,
            tau,
            boundary_value: b,
            dt,
            step_index: 0,
        }
    }
}

/// Dilation factor `√(1+2t)`.
pub fn dilation(t: f64) -> f64 {
    (1.0 + 2.0 * t).sqrt()
}

/// `τ = log √(1+2t)`.
pub fn tau_of_time(t: f64) -> f64 {
    dilation(t).ln()
}

/// `t = (e^{2τ} - 1) / 2`.
pub fn time_of_tau(tau: f64) -> f64 {
    0.5 * (2.0 * tau).exp_m1()
}

/// Maps a physical-frame density at time `t` to self-similar variables.
///
/// The result lives on the dilated grid (cell `i` covers `[x_i/s, x_{i+1}/s]`),
/// which makes the map exact cell by cell.
pub fn to_selfsimilar(n_field: &DensityField, t: f64) -> Result<RescaledState> {
    if !(t >= 0.0) {
        return Err(Error::InvalidParameter(format!("t must be nonnegative, got {t}")));
    }
    let s = dilation(t);
    let grid = n_field.grid();
    let rescaled = Arc::new(Grid::uniform(grid.length() / s, grid.len())?);
    let values = n_field.values().iter().map(|v| v * s).collect();
    Ok(RescaledState::new(
        DensityField::from_raw(rescaled, values),
        tau_of_time(t),
        1e-4,
    ))
}

/// Like [`to_selfsimilar`] but redistributes the mass conservatively onto
/// `target`.
pub fn to_selfsimilar_on(n_field: &DensityField, t: f64, target: Arc<Grid>) -> Result<RescaledState> {
    let on_dilated = to_selfsimilar(n_field, t)?;
    let field = resample_conservative(&on_dilated.field, target);
    Ok(RescaledState::new(field, on_dilated.tau, on_dilated.dt))
}

/// Which terms of the rescaled operator a step includes; all on by default.
/// Used by tests to isolate individual terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RescaledTerms {
    pub diffusion: bool,
    pub confinement: bool,
    /// Replaces the extracted boundary value when set.
    pub boundary_override: Option<f64>,
}

impl Default for RescaledTerms {
    fn default() -> Self {
        Self {
            diffusion: true,
            confinement: true,
            boundary_override: None,
        }
    }
}

/// One step of size `dt` with the given terms and no step control.
pub fn advance_rescaled(field: &DensityField, b: f64, dt: f64, terms: RescaledTerms) -> Vec<f64> {
    let grid = field.grid();
    let b = terms.boundary_override.unwrap_or(b);
    let edges = grid.edges();
    let speeds: Vec<f64> = (1..grid.len())
        .map(|k| if terms.confinement { edges[k] + b } else { b })
        .collect();
    let diffusion = if terms.diffusion { 1.0 } else { 0.0 };
    let coeffs = scheme::interface_coefficients(grid, diffusion, &speeds);
    scheme::implicit_step(grid, field.values(), &coeffs, dt, 0.0)
}

/// One conservative step with the boundary value lagged.
pub fn step_rescaled(state: &RescaledState, control: &StepControl) -> Result<RescaledState> {
    step_rescaled_with(state, control, RescaledTerms::default())
}

pub fn step_rescaled_with(
    state: &RescaledState,
    control: &StepControl,
    terms: RescaledTerms,
) -> Result<RescaledState> {
    let grid = state.field.grid();
    let b = terms.boundary_override.unwrap_or(state.boundary_value);
    // Fastest interface speed: confinement `y` at the far edge plus `b`.
    let speed = if terms.confinement { b + grid.length() } else { b };
    let mut dt = state.dt.min(control.step_bound(grid, speed));
    for _ in 0..=MAX_HALVINGS {
        if dt < control.dt_min {
            break;
        }
        let mut values = advance_rescaled(&state.field, b, dt, terms);
        if values.iter().all(|&v| v >= 0.0) {
            scheme::restore_mass(grid, &mut values, state.mass);
            let field = DensityField::from_raw(Arc::clone(state.field.grid_arc()), values);
            let b_new = scheme::boundary_value(field.grid(), field.values()).0;
            return Ok(RescaledState {
                field,
                tau: state.tau + dt,
                boundary_value: b_new,
                dt,
                step_index: state.step_index + 1,
                mass: state.mass,
            });
        }
        dt *= 0.5;
    }
    Err(Error::StepUnderflow {
        dt,
        dt_min: control.dt_min,
        time: state.tau,
    })
}

/// Result of [`run_rescaled`].
#[derive(Debug, Clone)]
pub struct RescaledRun {
    pub state: RescaledState,
    pub records: Vec<DiagnosticsRecord>,
    /// Root of `P(α) = M`.
    pub alpha: f64,
    /// `α (1 - M)`, the limit of the first moment.
    pub target_moment: f64,
}

/// Default rescaled domain length for decay rate `alpha`.
pub fn default_rescaled_length(alpha: f64) -> f64 {
    10f64.max(alpha + 8.0)
}

/// Runs the rescaled equation from `τ = 0` to `tau_final`. Only subcritical
/// masses are accepted.
pub fn run_rescaled(
    initial: DensityField,
    tau_final: f64,
    control: &StepControl,
    diag_every: usize,
) -> Result<RescaledRun> {
    control.validate()?;
    let mass = initial.mass();
    if !(mass < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "the rescaled solver only covers subcritical mass M < 1, got M = {mass}"
        )));
    }
    if !(mass > 0.0) {
        return Err(Error::InvalidInitialData("initial mass is zero".into()));
    }
    let alpha = solve_alpha_for_mass(mass)?;
    let target_moment = alpha * (1.0 - mass);
    let reference = SelfSimilarProfile::new(alpha)?.field(Arc::clone(initial.grid_arc()));
    let diag_every = diag_every.max(1);

    let record = |s: &RescaledState| -> Result<DiagnosticsRecord> {
        let mut r = DiagnosticsRecord::snapshot(&s.field, s.boundary_value, s.tau);
        r.relative_entropy = Some(diagnostics::relative_entropy(&s.field, &reference)?);
        r.lyapunov = Some(diagnostics::lyapunov_with_reference(
            &s.field, mass, alpha, &reference,
        )?);
        Ok(r)
    };

    let mut state = RescaledState::new(initial, 0.0, control.dt_initial);
    let mut records = vec![record(&state)?];
    while tau_final - state.tau > control.dt_min {
        state.dt = if state.step_index == 0 {
            control.dt_initial.min(tau_final - state.tau)
        } else {
            control.next_dt(state.dt, tau_final - state.tau)
        };
        state = step_rescaled(&state, control)?;
        if state.step_index.is_multiple_of(diag_every as u64) {
            records.push(record(&state)?);
        }
    }
    if records.last().map(|r| r.t) != Some(state.tau) {
        records.push(record(&state)?);
    }
    Ok(RescaledRun {
        state,
        records,
        alpha,
        target_moment,
    })
}
