//! Closed-form equilibria and self-similar profiles, and the mass relation
//! that selects the self-similar decay rate.
//!
//! * `h_α(x) = α e^{-αx}` is stationary at unit mass for every `α > 0`.
//! * `g_α(y) = α exp(-αy - y²/2)` is stationary in self-similar variables,
//!   with mass `P(α) = ∫_0^∞ exp(-y - y²/(2α²)) dy`.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{DensityField, Grid};
use crate::gauss_kronrod;

/// Absolute tolerance used for `P(α)`.
const P_TOLERANCE: f64 = 1e-13;

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "alpha must be positive and finite, got {alpha}"
        )))
    }
}

/// Exponential equilibrium `h_α`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StationaryProfile {
    alpha: f64,
}

impl StationaryProfile {
    pub fn new(alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        Ok(Self { alpha })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.alpha * (-self.alpha * x).exp()
    }

    /// Exact cell averages on `grid`.
    pub fn field(&self, grid: Arc<Grid>) -> DensityField {
        let a = self.alpha;
        let values = grid
            .edges()
            .windows(2)
            .map(|e| ((-a * e[0]).exp() - (-a * e[1]).exp()) / (e[1] - e[0]))
            .collect();
        DensityField::from_raw(grid, values)
    }
}

/// Self-similar profile `g_α`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelfSimilarProfile {
    alpha: f64,
}

impl SelfSimilarProfile {
    pub fn new(alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        Ok(Self { alpha })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn eval(&self, y: f64) -> f64 {
        self.alpha * (-self.alpha * y - 0.5 * y * y).exp()
    }

    /// Total mass, `P(α)`.
    pub fn mass(&self) -> f64 {
        mass_relation_p(self.alpha)
    }

    /// `∫ y g_α dy = α (1 - P(α))`, from `g' = -(α + y) g`.
    pub fn first_moment(&self) -> f64 {
        self.alpha * (1.0 - self.mass())
    }

    /// Cell averages on `grid` (Gauss-Legendre per cell).
    pub fn field(&self, grid: Arc<Grid>) -> DensityField {
        let values = grid.cell_averages(|y| self.eval(y));
        DensityField::from_raw(grid, values)
    }
}

/// Cell averages of `h_α` on `grid`.
pub fn stationary_profile(alpha: f64, grid: Arc<Grid>) -> Result<DensityField> {
    Ok(StationaryProfile::new(alpha)?.field(grid))
}

/// Cell averages of `g_α` on `grid`.
pub fn selfsimilar_profile(alpha: f64, grid: Arc<Grid>) -> Result<DensityField> {
    Ok(SelfSimilarProfile::new(alpha)?.field(grid))
}

/// `P(α) = ∫_0^∞ exp(-y - y²/(2α²)) dy`, increasing from 0 to 1.
///
/// The domain is cut where the integrand drops below `e^{-36}`; for
/// `α ≤ 0` the value is 0 (the `α → 0` limit).
pub fn mass_relation_p(alpha: f64) -> f64 {
    if !(alpha > 0.0) {
        return 0.0;
    }
    let inv = 0.5 / (alpha * alpha);
    let cutoff = 36.0f64.min(alpha * 72.0f64.sqrt());
    gauss_kronrod::integrate(|y| (-y - y * y * inv).exp(), 0.0, cutoff, P_TOLERANCE)
}

/// Inverts `P(α) = mass` for `0 < mass < 1`.
///
/// A bracket is grown by doubling or halving from `α = 1`, narrowed by
/// bisection, then finished with a safeguarded secant iteration.
pub fn solve_alpha_for_mass(mass: f64) -> Result<f64> {
    if !(mass > 0.0 && mass < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "self-similar profiles exist only for 0 < M < 1, got M = {mass}"
        )));
    }
    let residual = |a: f64| mass_relation_p(a) - mass;

    let (mut lo, mut hi) = (1.0, 1.0);
    let mut f_lo = residual(lo);
    let mut f_hi = f_lo;
    if f_lo == 0.0 {
        return Ok(1.0);
    }
    if f_lo < 0.0 {
        while f_hi < 0.0 {
            lo = hi;
            f_lo = f_hi;
            hi *= 2.0;
            f_hi = residual(hi);
            if hi > 1e12 {
                return Err(Error::InvalidParameter(format!(
                    "no root bracket for M = {mass}"
                )));
            }
        }
    } else {
        while f_lo > 0.0 {
            hi = lo;
            f_hi = f_lo;
            lo *= 0.5;
            f_lo = residual(lo);
            if lo < 1e-12 {
                return Err(Error::InvalidParameter(format!(
                    "no root bracket for M = {mass}"
                )));
            }
        }
    }

    while hi - lo > 1e-3 * hi {
        let mid = 0.5 * (lo + hi);
        let f_mid = residual(mid);
        if f_mid < 0.0 {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
            f_hi = f_mid;
        }
    }

    let mut best = if f_lo.abs() < f_hi.abs() { lo } else { hi };
    for _ in 0..100 {
        let mut x = hi - f_hi * (hi - lo) / (f_hi - f_lo);
        if !(x > lo && x < hi) {
            x = 0.5 * (lo + hi);
        }
        let fx = residual(x);
        best = x;
        if fx.abs() <= 1e-14 || hi - lo <= 1e-15 * hi {
            break;
        }
        if fx < 0.0 {
            lo = x;
            f_lo = fx;
        } else {
            hi = x;
            f_hi = fx;
        }
    }
    Ok(best)
}

/// Limit of the coupled model for total mass `M > 1`: reservoir level
/// `μ̄ = M - 1` and bulk profile `h_{μ̄}` of unit mass.
pub fn coupled_equilibrium(total_mass: f64) -> Result<(f64, StationaryProfile)> {
    if !(total_mass > 1.0) || !total_mass.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "the coupled equilibrium needs M > 1, got M = {total_mass}"
        )));
    }
    let mu_bar = total_mass - 1.0;
    Ok((mu_bar, StationaryProfile::new(mu_bar)?))
}
