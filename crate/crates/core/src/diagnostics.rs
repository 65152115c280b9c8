//! Functionals of a density field and the per-step records built from them.
//!
//! All quantities are computed from the same cell averages the solvers
//! evolve. Cells below [`TINY`] contribute nothing to log-based integrands
//! (`0 log 0 = 0`).

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{quadrature, DensityField};
use crate::profiles::SelfSimilarProfile;
use crate::scheme;

/// Densities below this are treated as zero in entropy-type integrals.
pub const TINY: f64 = 1e-300;

/// One timestamped row of diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagnosticsRecord {
    /// Physical time `t`, or `τ` for self-similar runs.
    pub t: f64,
    pub mass: f64,
    pub moment1: f64,
    pub moment2: f64,
    pub boundary_value: f64,
    pub entropy: f64,
    pub fisher: f64,
    /// `M I - b²`, nonnegative up to discretization error.
    pub trace_residual: f64,
    pub relative_entropy: Option<f64>,
    pub lyapunov: Option<f64>,
    pub mu: Option<f64>,
    pub m: Option<f64>,
}

impl DiagnosticsRecord {
    /// Field functionals at time `t` with boundary value `b`; the optional
    /// columns are left empty.
    pub fn snapshot(field: &DensityField, boundary_value: f64, t: f64) -> Self {
        let mass = field.mass();
        let fisher = fisher(field);
        Self {
            t,
            mass,
            moment1: first_moment(field),
            moment2: second_moment(field),
            boundary_value,
            entropy: entropy(field),
            fisher,
            trace_residual: mass * fisher - boundary_value * boundary_value,
            relative_entropy: None,
            lyapunov: None,
            mu: None,
            m: None,
        }
    }
}

pub fn first_moment(field: &DensityField) -> f64 {
    quadrature(field, |x| x)
}

pub fn second_moment(field: &DensityField) -> f64 {
    quadrature(field, |x| x * x)
}

/// `∫ n log n dx`.
pub fn entropy(field: &DensityField) -> f64 {
    field
        .values()
        .iter()
        .zip(field.grid().widths())
        .filter(|(&n, _)| n > TINY)
        .map(|(&n, &w)| n * n.ln() * w)
        .sum()
}

/// `∫ (∂_x log n)² n dx`.
///
/// Log-gradients live on interfaces between neighbouring cells and are
/// weighted by the geometric mean of the two cell values, which is exact for
/// exponentials. The half cells next to `x = 0` and `x = L` reuse the
/// nearest interface gradient.
pub fn fisher(field: &DensityField) -> f64 {
    let n = field.values();
    let grid = field.grid();
    let x = grid.centers();
    let w = grid.widths();
    let mut total = 0.0;
    let mut first_grad = None;
    let mut last_grad = None;
    for k in 0..n.len() - 1 {
        if n[k] <= TINY || n[k + 1] <= TINY {
            continue;
        }
        let dx = x[k + 1] - x[k];
        let g = (n[k + 1].ln() - n[k].ln()) / dx;
        total += g * g * (n[k] * n[k + 1]).sqrt() * dx;
        if k == 0 {
            first_grad = Some(g);
        }
        if k == n.len() - 2 {
            last_grad = Some(g);
        }
    }
    let last = n.len() - 1;
    if let Some(g) = first_grad {
        total += g * g * n[0] * 0.5 * w[0];
    }
    if let Some(g) = last_grad {
        total += g * g * n[last] * 0.5 * w[last];
    }
    total
}

/// Extracted boundary value `n(t, 0)`; see [`scheme::boundary_value`].
pub fn boundary_value(field: &DensityField) -> f64 {
    scheme::boundary_value(field.grid(), field.values()).0
}

/// `M · I - b²`, the slack in the trace inequality `b² ≤ M I`.
pub fn trace_residual(field: &DensityField, boundary_value: f64) -> f64 {
    field.mass() * fisher(field) - boundary_value * boundary_value
}

/// `2 b J - M²`, the slack in the interpolation bound `M² ≤ 2 n(0) J` that
/// holds for nonincreasing densities.
pub fn jensen_residual(field: &DensityField, boundary_value: f64) -> f64 {
    let m = field.mass();
    2.0 * boundary_value * first_moment(field) - m * m
}

/// `∫ n log(n / h̃) dx` with `h̃ = h · mass(n) / mass(h)`, so both densities
/// carry the same mass and the result is nonnegative.
pub fn relative_entropy(field: &DensityField, reference: &DensityField) -> Result<f64> {
    if field.grid() != reference.grid() {
        return Err(Error::InvalidParameter(
            "relative entropy needs both fields on the same grid".into(),
        ));
    }
    let mass = field.mass();
    if mass <= 0.0 {
        return Ok(0.0);
    }
    let scale = mass / reference.mass();
    let mut total = 0.0;
    for (i, ((&n, &h), &w)) in field
        .values()
        .iter()
        .zip(reference.values())
        .zip(field.grid().widths())
        .enumerate()
    {
        if n <= TINY {
            continue;
        }
        if h <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "reference vanishes in cell {i} inside the support of the field"
            )));
        }
        total += n * (n / (scale * h)).ln() * w;
    }
    Ok(total)
}

/// Composite functional `H(u | g_α) + (J - α(1-M))² / (2(1-M))` of the
/// self-similar frame.
pub fn lyapunov_subcritical(field: &DensityField, mass: f64, alpha: f64) -> Result<f64> {
    let profile = SelfSimilarProfile::new(alpha)?;
    let reference = profile.field(field.grid_arc().clone());
    lyapunov_with_reference(field, mass, alpha, &reference)
}

pub(crate) fn lyapunov_with_reference(
    field: &DensityField,
    mass: f64,
    alpha: f64,
    reference: &DensityField,
) -> Result<f64> {
    if !(mass < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "the self-similar Lyapunov functional needs M < 1, got {mass}"
        )));
    }
    let h = relative_entropy(field, reference)?;
    let gap = first_moment(field) - alpha * (1.0 - mass);
    Ok(h + gap * gap / (2.0 * (1.0 - mass)))
}

/// Potential of the associated Stefan problem: `φ(x) = ∫_0^x n`, sampled at
/// the right edge of every cell, and the free-boundary speed `s' = n(t, 0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct StefanPotential {
    pub free_boundary_speed: f64,
    pub potential: Vec<f64>,
}

pub fn stefan_transform(field: &DensityField) -> StefanPotential {
    let potential = field
        .values()
        .iter()
        .zip(field.grid().widths())
        .scan(0.0, |acc, (&n, &w)| {
            *acc += n * w;
            Some(*acc)
        })
        .collect();
    StefanPotential {
        free_boundary_speed: boundary_value(field),
        potential,
    }
}

/// Both sides of the continuity estimate
/// `(n_i - n_j)² ≤ (∫_{x_i}^{x_j} n) (∫_{x_i}^{x_j} (∂ log n)² n)` for `i < j`.
pub fn continuity_bound(field: &DensityField, i: usize, j: usize) -> (f64, f64) {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    let n = field.values();
    let grid = field.grid();
    let x = grid.centers();
    let w = grid.widths();
    let lhs = (n[i] - n[j]).powi(2);
    let mut mass = 0.0;
    let mut info = 0.0;
    for k in i..j {
        mass += 0.5 * (n[k] * w[k] + n[k + 1] * w[k + 1]);
        if n[k] > TINY && n[k + 1] > TINY {
            let dx = x[k + 1] - x[k];
            let g = (n[k + 1].ln() - n[k].ln()) / dx;
            info += g * g * (n[k] * n[k + 1]).sqrt() * dx;
        }
    }
    (lhs, mass * info)
}
