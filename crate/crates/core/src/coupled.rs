//! Bulk density exchanging particles with a boundary reservoir `μ(t)`:
//!
//! ```text
//! ∂_t n = ∂_xx n + μ ∂_x n,    μ' = n(t,0) - μ,
//! ∂_x n(t,0) + μ n(t,0) = μ'.
//! ```
//!
//! Each step computes the exchange rate `r = b - μ` once and uses the same
//! value for the boundary flux of the bulk and for the reservoir update, so
//! `∫ n + μ` is conserved to rounding.

use std::sync::Arc;

use crate::diagnostics::{self, DiagnosticsRecord};
use crate::error::{Error, Result};
use crate::grid::DensityField;
use crate::kernel::StepControl;
use crate::profiles::coupled_equilibrium;
use crate::scheme;

const MAX_HALVINGS: u32 = 30;

#[derive(Debug, Clone)]
pub struct CoupledState {
    pub field: DensityField,
    pub mu: f64,
    pub time: f64,
    pub dt: f64,
    pub step_index: u64,
    /// Boundary value extracted at the start of the last step.
    pub boundary_value: f64,
    /// `μ'` used in the last step.
    pub exchange_rate: f64,
    /// Conserved total `∫ n + μ`.
    pub total: f64,
}

impl CoupledState {
    pub fn new(field: DensityField, mu: f64, dt: f64) -> Result<Self> {
        if !(mu >= 0.0) || !mu.is_finite() {
            return Err(Error::InvalidInitialData(format!(
                "reservoir level must be nonnegative, got {mu}"
            )));
        }
        let b = scheme::boundary_value(field.grid(), field.values()).0;
        let field_mass = field.mass();
        Ok(Self {
            field,
            mu,
            time: 0.0,
            dt,
            step_index: 0,
            boundary_value: b,
            exchange_rate: b - mu,
            total: field_mass + mu,
        })
    }

    /// `∫ n dx + μ`.
    pub fn total_mass(&self) -> f64 {
        self.field.mass() + self.mu
    }
}

/// Bulk values after one step of size `dt` with drift `mu` and exchange
/// rate `rate` leaving the bulk through `x = 0`.
pub fn advance_coupled(field: &DensityField, mu: f64, rate: f64, dt: f64) -> Vec<f64> {
    let grid = field.grid();
    let speeds = vec![mu; grid.len() - 1];
    let coeffs = scheme::interface_coefficients(grid, 1.0, &speeds);
    scheme::implicit_step(grid, field.values(), &coeffs, dt, -rate)
}

/// One split step: extract `b`, set `r = b - μ`, advance the bulk with the
/// drift frozen at `μ` and boundary outflow `r`, then `μ ← μ + dt r`.
pub fn step_coupled(state: &CoupledState, control: &StepControl) -> Result<CoupledState> {
    let grid = state.field.grid();
    let (b, _) = scheme::boundary_value(grid, state.field.values());
    let rate = b - state.mu;
    let mut dt = state.dt.min(control.step_bound(grid, state.mu));
    for _ in 0..=MAX_HALVINGS {
        if dt < control.dt_min {
            break;
        }
        let exchanged = dt * rate;
        let mu = state.mu + exchanged;
        let mut values = advance_coupled(&state.field, state.mu, rate, dt);
        if mu >= 0.0 && values.iter().all(|&v| v >= 0.0) {
            scheme::restore_mass(grid, &mut values, state.total - mu);
            return Ok(CoupledState {
                field: DensityField::from_raw(Arc::clone(state.field.grid_arc()), values),
                mu,
                time: state.time + dt,
                dt,
                step_index: state.step_index + 1,
                boundary_value: b,
                exchange_rate: rate,
                total: state.total,
            });
        }
        dt *= 0.5;
    }
    Err(Error::StepUnderflow {
        dt,
        dt_min: control.dt_min,
        time: state.time,
    })
}

/// Result of [`run_coupled`].
#[derive(Debug, Clone)]
pub struct CoupledRun {
    pub state: CoupledState,
    pub records: Vec<DiagnosticsRecord>,
    pub total_mass: f64,
    /// `M - 1` when `M > 1`.
    pub mu_bar: Option<f64>,
    /// False when `M ≤ 1`, where no positive equilibrium reservoir exists.
    pub in_convergence_regime: bool,
}

pub fn run_coupled(
    initial_field: DensityField,
    mu0: f64,
    t_final: f64,
    control: &StepControl,
    diag_every: usize,
) -> Result<CoupledRun> {
    control.validate()?;
    if initial_field.grid().is_empty() {
        return Err(Error::InvalidInitialData("empty field".into()));
    }
    let state = CoupledState::new(initial_field, mu0, control.dt_initial)?;
    let total_mass = state.total_mass();
    let equilibrium = coupled_equilibrium(total_mass).ok();
    if equilibrium.is_none() {
        log::warn!("total mass {total_mass} <= 1: outside the convergence regime of the coupled model");
    }
    let reference = equilibrium.map(|(_, h)| h.field(Arc::clone(state.field.grid_arc())));
    let diag_every = diag_every.max(1);

    let record = |s: &CoupledState| -> Result<DiagnosticsRecord> {
        let b = scheme::boundary_value(s.field.grid(), s.field.values()).0;
        let mut r = DiagnosticsRecord::snapshot(&s.field, b, s.time);
        let m = s.field.mass();
        r.mu = Some(s.mu);
        r.m = Some(m);
        if let Some(h) = &reference {
            if m > 0.0 {
                let normalized = s.field.scaled(1.0 / m);
                r.relative_entropy = Some(diagnostics::relative_entropy(&normalized, h)?);
            }
        }
        Ok(r)
    };

    let mut state = state;
    let mut records = vec![record(&state)?];
    while t_final - state.time > control.dt_min {
        state.dt = if state.step_index == 0 {
            control.dt_initial.min(t_final - state.time)
        } else {
            control.next_dt(state.dt, t_final - state.time)
        };
        state = step_coupled(&state, control)?;
        if state.step_index.is_multiple_of(diag_every as u64) {
            records.push(record(&state)?);
        }
    }
    if records.last().map(|r| r.t) != Some(state.time) {
        records.push(record(&state)?);
    }
    Ok(CoupledRun {
        state,
        records,
        total_mass,
        mu_bar: equilibrium.map(|(mu, _)| mu),
        in_convergence_regime: equilibrium.is_some(),
    })
}
