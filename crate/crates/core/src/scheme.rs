//! Conservative implicit finite-volume step shared by all three solvers.
//!
//! Every model here is a drift-diffusion equation in flux form,
//! `∂_t n = ∂_x(D ∂_x n + v n)` with a leftward speed `v`, closed by zero
//! flux at `x = L` and a prescribed (usually zero) flux at `x = 0`. Interface
//! fluxes use exponential fitting (Scharfetter-Gummel), which is exact on
//! `e^{-v x / D}` profiles, reduces to upwinding as `v Δx / D → ∞`, and makes
//! the implicit matrix an M-matrix for every `dt`.

use crate::grid::Grid;

/// `z / (e^z - 1)`, continuous at `z = 0`.
pub fn bernoulli(z: f64) -> f64 {
    if z.abs() < 1e-10 {
        1.0 - 0.5 * z
    } else {
        z / z.exp_m1()
    }
}

/// Coefficients of `F_{k+1/2} = a_k n_k - c_k n_{k+1}` at the interior interfaces.
#[derive(Debug, Clone)]
pub struct InterfaceCoefficients {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

/// Interface coefficients for diffusion `diffusion` and leftward speeds
/// `speeds[k]` at the interface between cells `k` and `k + 1`.
pub fn interface_coefficients(grid: &Grid, diffusion: f64, speeds: &[f64]) -> InterfaceCoefficients {
    let widths = grid.widths();
    debug_assert_eq!(speeds.len() + 1, widths.len());
    let mut lower = Vec::with_capacity(speeds.len());
    let mut upper = Vec::with_capacity(speeds.len());
    let mut cached: Option<(f64, f64, f64, f64)> = None;
    for (k, &v) in speeds.iter().enumerate() {
        let dx = 0.5 * (widths[k] + widths[k + 1]);
        if let Some((cdx, cv, a, c)) = cached {
            if cdx == dx && cv == v {
                lower.push(a);
                upper.push(c);
                continue;
            }
        }
        let (a, c) = if diffusion > 0.0 {
            let z = v * dx / diffusion;
            let d = diffusion / dx;
            (d * bernoulli(z), d * bernoulli(-z))
        } else if v >= 0.0 {
            (0.0, v)
        } else {
            (-v, 0.0)
        };
        cached = Some((dx, v, a, c));
        lower.push(a);
        upper.push(c);
    }
    InterfaceCoefficients { lower, upper }
}

/// Explicit interface fluxes for the given coefficients.
pub fn fluxes(coeffs: &InterfaceCoefficients, values: &[f64]) -> Vec<f64> {
    coeffs
        .lower
        .iter()
        .zip(&coeffs.upper)
        .enumerate()
        .map(|(k, (a, c))| a * values[k] - c * values[k + 1])
        .collect()
}

/// One backward-Euler step. `inflow` is the flux entering through `x = 0`
/// (positive adds mass to cell 0); the flux through `x = L` is zero.
pub fn implicit_step(
    grid: &Grid,
    values: &[f64],
    coeffs: &InterfaceCoefficients,
    dt: f64,
    inflow: f64,
) -> Vec<f64> {
    let n = values.len();
    let widths = grid.widths();
    let mut sub = vec![0.0; n];
    let mut diag = vec![1.0; n];
    let mut sup = vec![0.0; n];
    let ratio: Vec<f64> = widths.iter().map(|w| dt / w).collect();
    for k in 0..n - 1 {
        let (a, c) = (coeffs.lower[k], coeffs.upper[k]);
        // F_k leaves cell k and enters cell k+1.
        let sk = ratio[k];
        let sk1 = ratio[k + 1];
        diag[k] += sk * a;
        sup[k] -= sk * c;
        diag[k + 1] += sk1 * c;
        sub[k + 1] -= sk1 * a;
    }
    let mut rhs = values.to_vec();
    rhs[0] += dt * inflow / widths[0];
    solve_tridiagonal(&sub, &diag, &sup, &mut rhs);
    rhs
}

/// Rescales `values` so their discrete mass equals `target`, removing the
/// rounding drift a long run of solves accumulates.
pub fn restore_mass(grid: &Grid, values: &mut [f64], target: f64) {
    let mass: f64 = values.iter().zip(grid.widths()).map(|(v, w)| v * w).sum();
    if mass > 0.0 && target > 0.0 {
        let factor = target / mass;
        values.iter_mut().for_each(|v| *v *= factor);
    }
}

/// Thomas algorithm; `rhs` is overwritten with the solution. The systems
/// assembled here are M-matrices, so no pivoting is needed.
pub fn solve_tridiagonal(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &mut [f64]) {
    let n = diag.len();
    let mut c_prime = vec![0.0; n];
    let inv = 1.0 / diag[0];
    c_prime[0] = sup[0] * inv;
    rhs[0] *= inv;
    for i in 1..n {
        let inv = 1.0 / (diag[i] - sub[i] * c_prime[i - 1]);
        c_prime[i] = sup[i] * inv;
        rhs[i] = (rhs[i] - sub[i] * rhs[i - 1]) * inv;
    }
    for i in (0..n - 1).rev() {
        rhs[i] -= c_prime[i] * rhs[i + 1];
    }
}

/// Cells used by the boundary reconstruction.
pub const STENCIL: usize = 4;

/// Value at `x = 0` of the cubic whose averages over the first four cells
/// match `values[0..4]`. Fourth-order accurate for smooth data.
///
/// Returns `(value, clamped)`; a negative reconstruction falls back to the
/// first cell average and sets `clamped`.
pub fn boundary_value(grid: &Grid, values: &[f64]) -> (f64, bool) {
    let e = grid.edges();
    let w = grid.widths();
    // Primitive P(x) = ∫_0^x n at the first edges, then P'(0) from the
    // polynomial through (0, 0) and those points.
    let mut nodes = [0.0; STENCIL];
    let mut prim = [0.0; STENCIL];
    let mut acc = 0.0;
    for k in 0..STENCIL {
        acc += values[k] * w[k];
        nodes[k] = e[k + 1];
        prim[k] = acc;
    }
    let mut b = 0.0;
    for j in 0..STENCIL {
        let mut weight = 1.0 / nodes[j];
        for m in 0..STENCIL {
            if m != j {
                weight *= -nodes[m] / (nodes[j] - nodes[m]);
            }
        }
        b += weight * prim[j];
    }
    if b < 0.0 {
        (values[0], true)
    } else {
        (b, false)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_uniform_grid;
    use approx::assert_relative_eq;

    #[test]
    fn bernoulli_limits() {
        assert_eq!(bernoulli(0.0), 1.0);
        assert_relative_eq!(bernoulli(1e-12), 1.0, epsilon = 1e-11);
        assert_relative_eq!(bernoulli(1.0), 1.0 / (1f64.exp() - 1.0), max_relative = 1e-15);
        assert_relative_eq!(bernoulli(-50.0), 50.0, max_relative = 1e-15);
        assert!(bernoulli(800.0) >= 0.0 && bernoulli(800.0) < 1e-300);
        // B(-z) - B(z) = z
        for &z in &[1e-6, 0.3, 2.0, 17.0] {
            assert_relative_eq!(bernoulli(-z) - bernoulli(z), z, max_relative = 1e-12);
        }
    }

    #[test]
    fn uniform_reconstruction_weights() {
        let g = make_uniform_grid(1.0, 10).unwrap();
        let (b, clamped) = boundary_value(&g, &[1.0, 0.0, 0.0, 0.0]);
        assert!(!clamped);
        assert_relative_eq!(b, 25.0 / 12.0, max_relative = 1e-14);
        let (b, _) = boundary_value(&g, &[0.0, 0.0, 1.0, 0.0]);
        assert_relative_eq!(b, 13.0 / 12.0, max_relative = 1e-14);
        let (b, _) = boundary_value(&g, &[1.0, 1.0, 0.0, 0.0]);
        assert_relative_eq!(b, 2.0 / 12.0, max_relative = 1e-14);
        let (b, _) = boundary_value(&g, &[2.5, 2.5, 2.5, 2.5]);
        assert_relative_eq!(b, 2.5, max_relative = 1e-14);
    }

    #[test]
    fn negative_reconstruction_is_clamped() {
        let g = make_uniform_grid(1.0, 10).unwrap();
        let (b, clamped) = boundary_value(&g, &[0.1, 1.0, 0.1, 0.0]);
        assert!(clamped);
        assert_eq!(b, 0.1);
    }

    #[test]
    fn reconstruction_is_fourth_order() {
        let err = |n: usize| {
            let g = make_uniform_grid(4.0, n).unwrap();
            let v = g.cell_averages(|x| (1.0 + x).recip());
            (boundary_value(&g, &v).0 - 1.0).abs()
        };
        let ratio = err(200) / err(400);
        assert!((ratio - 16.0).abs() < 1.5, "ratio {ratio}");
    }

    #[test]
    fn tridiagonal_solve() {
        let sub = [0.0, -1.0, -1.0];
        let diag = [2.0, 2.0, 2.0];
        let sup = [-1.0, -1.0, 0.0];
        let mut rhs = [1.0, 0.0, 1.0];
        solve_tridiagonal(&sub, &diag, &sup, &mut rhs);
        for v in rhs {
            assert_relative_eq!(v, 1.0, max_relative = 1e-15);
        }
    }

    #[test]
    fn fitted_flux_vanishes_on_matching_exponential() {
        let g = make_uniform_grid(5.0, 50).unwrap();
        let v = 1.7;
        let values = g.sample(|x| (-v * x).exp());
        let c = interface_coefficients(&g, 1.0, &vec![v; 49]);
        for f in fluxes(&c, &values) {
            assert!(f.abs() < 1e-14);
        }
    }
}
