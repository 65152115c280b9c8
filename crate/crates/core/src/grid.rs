//! Truncated half-line discretization and the cell-average fields living on it.
//!
//! Every solver in the crate works on cell averages over `[0, L]`. Cells are
//! described by explicit edges so that a graded mesh only needs a new
//! constructor.

use std::sync::Arc;

use crate::error::{Error, Result};

/// Five-point Gauss-Legendre nodes and weights on `[-1, 1]`.
const GL5_NODES: [f64; 5] = [
    -0.906_179_845_938_664,
    -0.538_469_310_105_683,
    0.0,
    0.538_469_310_105_683,
    0.906_179_845_938_664,
];
const GL5_WEIGHTS: [f64; 5] = [
    0.236_926_885_056_189,
    0.478_628_670_499_366,
    0.568_888_888_888_889,
    0.478_628_670_499_366,
    0.236_926_885_056_189,
];

/// A partition of `[0, L]` into `N` cells.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    edges: Vec<f64>,
    centers: Vec<f64>,
    widths: Vec<f64>,
}

impl Grid {
    /// Uniform grid of `n` cells on `[0, length]`.
    pub fn uniform(length: f64, n: usize) -> Result<Self> {
        if !(length > 0.0) || !length.is_finite() {
            return Err(Error::InvalidGrid(format!(
                "length must be positive and finite, got {length}"
            )));
        }
        if n < 4 {
            return Err(Error::InvalidGrid(format!(
                "need at least 4 cells, got {n}"
            )));
        }
        let h = length / n as f64;
        let mut edges: Vec<f64> = (0..=n).map(|i| i as f64 * h).collect();
        edges[n] = length;
        let mut grid = Self::from_edges_unchecked(edges);
        // Identical widths keep per-interface quantities bitwise equal.
        grid.widths.fill(h);
        Ok(grid)
    }

    fn from_edges_unchecked(edges: Vec<f64>) -> Self {
        let centers = edges.windows(2).map(|e| 0.5 * (e[0] + e[1])).collect();
        let widths = edges.windows(2).map(|e| e[1] - e[0]).collect();
        Self {
            edges,
            centers,
            widths,
        }
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn length(&self) -> f64 {
        self.edges[self.edges.len() - 1]
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    pub fn widths(&self) -> &[f64] {
        &self.widths
    }

    /// Smallest cell width; the resolution scale used by blow-up detection.
    pub fn min_width(&self) -> f64 {
        self.widths.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_width(&self) -> f64 {
        self.widths.iter().copied().fold(0.0, f64::max)
    }

    /// Cell averages of `f`, by five-point Gauss-Legendre on every cell.
    pub fn cell_averages<F: Fn(f64) -> f64>(&self, f: F) -> Vec<f64> {
        self.edges
            .windows(2)
            .map(|e| {
                let mid = 0.5 * (e[0] + e[1]);
                let half = 0.5 * (e[1] - e[0]);
                let sum: f64 = GL5_NODES
                    .iter()
                    .zip(GL5_WEIGHTS.iter())
                    .map(|(&t, &w)| w * f(mid + half * t))
                    .sum();
                0.5 * sum
            })
            .collect()
    }

    /// Point values of `f` at the cell centers.
    pub fn sample<F: Fn(f64) -> f64>(&self, f: F) -> Vec<f64> {
        self.centers.iter().map(|&x| f(x)).collect()
    }
}

/// Builds a uniform grid; rejects `length <= 0` and fewer than four cells.
pub fn make_uniform_grid(length: f64, n: usize) -> Result<Grid> {
    Grid::uniform(length, n)
}

/// Nonnegative cell averages of a density on a shared [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct DensityField {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl DensityField {
    pub fn new(grid: Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidInitialData(format!(
                "{} values for a grid of {} cells",
                values.len(),
                grid.len()
            )));
        }
        if let Some((i, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(**v >= 0.0) || !v.is_finite())
        {
            return Err(Error::InvalidInitialData(format!(
                "value {v} in cell {i} is negative or not finite"
            )));
        }
        Ok(Self { grid, values })
    }

    /// Field of zeros.
    pub fn zeros(grid: Arc<Grid>) -> Self {
        let values = vec![0.0; grid.len()];
        Self { grid, values }
    }

    /// Cell averages of `f`.
    pub fn from_fn<F: Fn(f64) -> f64>(grid: Arc<Grid>, f: F) -> Result<Self> {
        let values = grid.cell_averages(f);
        Self::new(grid, values)
    }

    pub(crate) fn from_raw(grid: Arc<Grid>, values: Vec<f64>) -> Self {
        debug_assert_eq!(grid.len(), values.len());
        Self { grid, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn grid_arc(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// `∫ n dx` (midpoint sum of cell averages).
    pub fn mass(&self) -> f64 {
        self.values
            .iter()
            .zip(self.grid.widths())
            .map(|(v, w)| v * w)
            .sum()
    }

    /// Multiplies every value by `factor` (must be nonnegative).
    pub fn scaled(&self, factor: f64) -> Self {
        debug_assert!(factor >= 0.0);
        Self {
            grid: Arc::clone(&self.grid),
            values: self.values.iter().map(|v| v * factor).collect(),
        }
    }

    /// Rescales so the discrete mass equals `mass` exactly up to rounding.
    pub fn normalized_to(&self, mass: f64) -> Result<Self> {
        let current = self.mass();
        if !(current > 0.0) {
            return Err(Error::InvalidInitialData(
                "cannot normalize a field with zero mass".into(),
            ));
        }
        Ok(self.scaled(mass / current))
    }

    /// True when the cell averages are nonincreasing in space.
    pub fn is_nonincreasing(&self) -> bool {
        self.values.windows(2).all(|w| w[1] <= w[0])
    }
}

/// Midpoint quadrature `Σ weight(x_i) n_i Δx_i`.
pub fn quadrature<F: Fn(f64) -> f64>(field: &DensityField, weight: F) -> f64 {
    let grid = field.grid();
    field
        .values()
        .iter()
        .zip(grid.centers())
        .zip(grid.widths())
        .map(|((&n, &x), &w)| weight(x) * n * w)
        .sum()
}

/// Conservative piecewise-constant redistribution of `field` onto `target`:
/// each target cell receives the mass of the source cells it overlaps.
/// Mass beyond the end of `target` is dropped.
pub fn resample_conservative(field: &DensityField, target: Arc<Grid>) -> DensityField {
    let src = field.grid();
    let src_edges = src.edges();
    let dst_edges = target.edges().to_vec();
    let mut out = vec![0.0; target.len()];
    let (mut i, mut j) = (0usize, 0usize);
    while i < src.len() && j < target.len() {
        let lo = src_edges[i].max(dst_edges[j]);
        let hi = src_edges[i + 1].min(dst_edges[j + 1]);
        if hi > lo {
            out[j] += field.values()[i] * (hi - lo);
        }
        if src_edges[i + 1] <= dst_edges[j + 1] {
            i += 1;
        } else {
            j += 1;
        }
    }
    for (v, w) in out.iter_mut().zip(target.widths()) {
        *v /= w;
    }
    DensityField::from_raw(target, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn uniform_grid_matches_partition() {
        let g = make_uniform_grid(10.0, 5).unwrap();
        assert_eq!(g.centers(), &[1.0, 3.0, 5.0, 7.0, 9.0]);
        assert!(g.widths().iter().all(|&w| w == 2.0));

        let g = make_uniform_grid(1.0, 4).unwrap();
        assert_eq!(g.centers(), &[0.125, 0.375, 0.625, 0.875]);
    }

    #[test]
    fn degenerate_grids_are_rejected() {
        assert!(make_uniform_grid(0.0, 10).is_err());
        assert!(make_uniform_grid(-1.0, 10).is_err());
        assert!(make_uniform_grid(1.0, 3).is_err());
        assert!(make_uniform_grid(f64::NAN, 10).is_err());
    }

    #[test]
    fn widths_sum_to_length() {
        for &(l, n) in &[(40.0, 4000), (1.0, 7), (3.3, 1234)] {
            let g = make_uniform_grid(l, n).unwrap();
            let s: f64 = g.widths().iter().sum();
            assert!((s - l).abs() <= 1e-12 * l);
            assert!(g.centers().windows(2).all(|c| c[1] > c[0]));
        }
    }

    #[test]
    fn quadrature_examples() {
        let g = Arc::new(make_uniform_grid(10.0, 50).unwrap());
        let ones = DensityField::new(g.clone(), vec![1.0; 50]).unwrap();
        assert_relative_eq!(quadrature(&ones, |_| 1.0), 10.0, epsilon = 1e-12);
        let zero = DensityField::zeros(g);
        assert_eq!(quadrature(&zero, |x| x * x + 3.0), 0.0);

        let g = Arc::new(make_uniform_grid(40.0, 4000).unwrap());
        let f = DensityField::new(g.clone(), g.sample(|x| (-x).exp())).unwrap();
        assert!((quadrature(&f, |x| x) - 1.0).abs() < 1e-4);
    }

    #[test]
    fn midpoint_quadrature_is_second_order() {
        // ∫_0^4 x e^{-x} dx = 1 - 5 e^{-4}
        let exact = 1.0 - 5.0 * (-4.0f64).exp();
        let err = |n: usize| {
            let g = Arc::new(make_uniform_grid(4.0, n).unwrap());
            let f = DensityField::new(g.clone(), g.sample(|x| (-x).exp())).unwrap();
            (quadrature(&f, |x| x) - exact).abs()
        };
        let ratio = err(100) / err(200);
        assert!((ratio - 4.0).abs() < 0.05, "ratio {ratio}");
    }

    #[test]
    fn negative_values_rejected() {
        let g = Arc::new(make_uniform_grid(1.0, 4).unwrap());
        assert!(DensityField::new(g.clone(), vec![1.0, -1e-3, 0.0, 0.0]).is_err());
        assert!(DensityField::new(g, vec![1.0; 3]).is_err());
    }

    #[test]
    fn resampling_preserves_mass() {
        let g = Arc::new(make_uniform_grid(10.0, 97).unwrap());
        let f = DensityField::from_fn(g, |x| (-(x - 3.0) * (x - 3.0)).exp()).unwrap();
        let target = Arc::new(make_uniform_grid(12.0, 61).unwrap());
        let r = resample_conservative(&f, target);
        assert_relative_eq!(r.mass(), f.mass(), max_relative = 1e-13);
    }
}
