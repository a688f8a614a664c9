//! Eulerian densities on a uniform grid of finite-volume cells.

mod initial;
mod transport;

pub use initial::{InitialDatum, InitialProfile, OSCILLATING_CUTOFF};
pub use transport::{wasserstein, PiecewiseLinearCdf, QuantileFunction, WassersteinOrder};

use crate::error::{check_positive, Error, Result};
use crate::kernel::InteractionKernel;

/// Uniform partition of `[x_left, x_right]` into cells of width `dx`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    x_left: f64,
    dx: f64,
    cells: usize,
}

impl Grid {
    pub fn new(x_left: f64, x_right: f64, dx: f64) -> Result<Self> {
        check_positive("dx", dx)?;
        let length = x_right - x_left;
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::InvalidParameter {
                name: "domain",
                reason: format!("empty or non-finite interval [{x_left}, {x_right}]"),
            });
        }
        let cells = (length / dx).round();
        if cells < 1.0 || (cells * dx - length).abs() > 1e-9 * length {
            return Err(Error::GridMismatch {
                left: x_left,
                right: x_right,
                dx,
            });
        }
        Ok(Self {
            x_left,
            dx,
            cells: cells as usize,
        })
    }

    pub fn x_left(&self) -> f64 {
        self.x_left
    }

    pub fn x_right(&self) -> f64 {
        self.edge(self.cells)
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn len(&self) -> usize {
        self.cells
    }

    pub fn is_empty(&self) -> bool {
        self.cells == 0
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.x_left + self.x_right())
    }

    /// Center of cell `i`.
    #[inline]
    pub fn center(&self, i: usize) -> f64 {
        self.x_left + (i as f64 + 0.5) * self.dx
    }

    /// Edge `k`; edge `k` separates cells `k - 1` and `k`.
    #[inline]
    pub fn edge(&self, k: usize) -> f64 {
        self.x_left + k as f64 * self.dx
    }

    pub fn centers(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.cells).map(move |i| self.center(i))
    }

    pub fn contains(&self, left: f64, right: f64) -> bool {
        let slack = 1e-12 * (1.0 + self.x_left.abs().max(self.x_right().abs()));
        left >= self.x_left - slack && right <= self.x_right() + slack
    }
}

/// Nonnegative cell averages on a [`Grid`].
#[derive(Clone, Debug, PartialEq)]
pub struct GridDensity {
    grid: Grid,
    values: Vec<f64>,
}

impl GridDensity {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidParameter {
                name: "values",
                reason: format!("expected {} cell averages, got {}", grid.len(), values.len()),
            });
        }
        if let Some(i) = values.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidParameter {
                name: "values",
                reason: format!("cell {i} holds {}; densities must be finite and nonnegative", values[i]),
            });
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    /// Samples `f` at cell centers, clamping negatives to zero.
    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> f64) -> Self {
        let values = grid.centers().map(|x| f(x).max(0.0)).collect();
        Self { grid, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn dx(&self) -> f64 {
        self.grid.dx
    }

    pub fn mass(&self) -> f64 {
        self.grid.dx * self.values.iter().sum::<f64>()
    }

    /// `int |x|^p rho dx` by the midpoint rule.
    pub fn moment(&self, p: u32) -> f64 {
        let dx = self.grid.dx;
        self.values
            .iter()
            .enumerate()
            .map(|(i, v)| self.grid.center(i).abs().powi(p as i32) * v)
            .sum::<f64>()
            * dx
    }

    /// `int x^p rho dx` with signed `x`.
    pub fn signed_moment(&self, p: u32) -> f64 {
        let dx = self.grid.dx;
        self.values
            .iter()
            .enumerate()
            .map(|(i, v)| self.grid.center(i).powi(p as i32) * v)
            .sum::<f64>()
            * dx
    }

    pub fn center_of_mass(&self) -> Result<f64> {
        let m = self.mass();
        if m <= 0.0 {
            return Err(Error::ZeroMass);
        }
        Ok(self.signed_moment(1) / m)
    }

    pub fn linf_norm(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    pub fn l2_norm_sq(&self) -> f64 {
        self.grid.dx * self.values.iter().map(|v| v * v).sum::<f64>()
    }

    /// Edges of the first and last nonzero cells.
    pub fn support(&self) -> Option<(f64, f64)> {
        let first = self.values.iter().position(|&v| v > 0.0)?;
        let last = self.values.iter().rposition(|&v| v > 0.0)?;
        Some((self.grid.edge(first), self.grid.edge(last + 1)))
    }

    /// Indices of the first and last nonzero cells.
    pub fn support_cells(&self) -> Option<(usize, usize)> {
        let first = self.values.iter().position(|&v| v > 0.0)?;
        let last = self.values.iter().rposition(|&v| v > 0.0)?;
        Some((first, last))
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|v| v * factor).collect(),
        }
    }

    /// Rescales to the requested mass.
    pub fn normalized(&self, mass: f64) -> Result<Self> {
        let m = self.mass();
        if m <= 0.0 {
            return Err(Error::ZeroMass);
        }
        Ok(self.scaled(mass / m))
    }

    /// `(G^(k) * rho)(x_i) = dx sum_j G^(k)(x_i - x_j) rho_j`, one kernel
    /// evaluation per grid offset.
    pub fn convolve(&self, kernel: &InteractionKernel, order: u8) -> Vec<f64> {
        let n = self.grid.len();
        let dx = self.grid.dx;
        let table = offset_table(kernel, order, n, dx);
        let mut out = vec![0.0; n];
        for (j, &rho_j) in self.values.iter().enumerate() {
            if rho_j == 0.0 {
                continue;
            }
            // table[n - 1 + i - j] = G(x_i - x_j)
            let row = &table[n - 1 - j..2 * n - 1 - j];
            for (o, g) in out.iter_mut().zip(row) {
                *o += g * rho_j;
            }
        }
        out.iter_mut().for_each(|o| *o *= dx);
        out
    }

    /// Reference double sum with a kernel evaluation per pair.
    pub fn convolve_direct(&self, kernel: &InteractionKernel, order: u8) -> Vec<f64> {
        let dx = self.grid.dx;
        (0..self.grid.len())
            .map(|i| {
                let xi = self.grid.center(i);
                dx * self
                    .values
                    .iter()
                    .enumerate()
                    .map(|(j, v)| kernel.eval_derivative(order, xi - self.grid.center(j)) * v)
                    .sum::<f64>()
            })
            .collect()
    }

    /// Cumulative mass at each of the `n + 1` edges, clamped to `[0, mass]`.
    pub fn cdf(&self) -> Vec<f64> {
        let dx = self.grid.dx;
        let mut acc = 0.0;
        let mut out = Vec::with_capacity(self.values.len() + 1);
        out.push(0.0);
        for v in &self.values {
            acc += v * dx;
            out.push(acc);
        }
        let total = acc;
        out.iter_mut().for_each(|f| *f = f.clamp(0.0, total));
        out
    }

    /// Cumulative distribution, linear inside each cell.
    pub fn cdf_at(&self, x: f64) -> f64 {
        let g = &self.grid;
        if x <= g.x_left {
            return 0.0;
        }
        let edges = self.cdf();
        if x >= g.x_right() {
            return edges[g.len()];
        }
        let s = (x - g.x_left) / g.dx;
        let i = (s.floor() as usize).min(g.len() - 1);
        let frac = s - i as f64;
        edges[i] + frac * (edges[i + 1] - edges[i])
    }

    pub fn cumulative(&self) -> PiecewiseLinearCdf {
        let edges: Vec<f64> = (0..=self.grid.len()).map(|k| self.grid.edge(k)).collect();
        PiecewiseLinearCdf::from_parts(edges, self.cdf())
    }

    /// Pseudo-inverse `u(z) = inf { x : F(x) > z }` sampled at `z_j = j / m`.
    pub fn pseudo_inverse(&self, m: usize) -> Result<QuantileFunction> {
        require_unit_mass(self.mass(), 1e-8)?;
        self.cumulative().quantile_function(m)
    }

    pub fn wasserstein(&self, other: &GridDensity, order: WassersteinOrder, m: usize) -> Result<f64> {
        wasserstein(&self.cumulative(), &other.cumulative(), order, m)
    }

    /// Exact cell-overlap average of this density shifted by `shift`; whole-cell
    /// shifts move values without resampling. Mass pushed off the grid is lost.
    pub fn translated(&self, shift: f64) -> Self {
        let g = self.grid;
        let cells = shift / g.dx;
        if (cells - cells.round()).abs() < 1e-9 {
            return self.shifted_cells(cells.round() as i64);
        }
        let mut out = vec![0.0; g.len()];
        let cdf = self.cumulative();
        let edge_mass: Vec<f64> = (0..=g.len()).map(|k| cdf.eval(g.edge(k) - shift)).collect();
        for (i, o) in out.iter_mut().enumerate() {
            *o = ((edge_mass[i + 1] - edge_mass[i]) / g.dx).max(0.0);
        }
        Self { grid: g, values: out }
    }

    /// Moves every value `k` cells to the right.
    pub fn shifted_cells(&self, k: i64) -> Self {
        let n = self.values.len() as i64;
        let mut values = vec![0.0; self.values.len()];
        for (i, v) in self.values.iter().enumerate() {
            let j = i as i64 + k;
            if (0..n).contains(&j) {
                values[j as usize] = *v;
            }
        }
        Self { grid: self.grid, values }
    }

    /// Mirror image about the grid midpoint.
    pub fn reflected(&self) -> Self {
        let mut values = self.values.clone();
        values.reverse();
        Self { grid: self.grid, values }
    }
}

/// Precomputes `G^(k)(d dx)` for `d = -(n - 1) ..= n - 1`.
pub(crate) fn offset_table(kernel: &InteractionKernel, order: u8, n: usize, dx: f64) -> Vec<f64> {
    (0..2 * n - 1)
        .map(|k| kernel.eval_derivative(order, (k as f64 - (n as f64 - 1.0)) * dx))
        .collect()
}

pub(crate) fn require_unit_mass(mass: f64, tol: f64) -> Result<()> {
    if (mass - 1.0).abs() > tol {
        Err(Error::MassMismatch { mass, expected: 1.0 })
    } else {
        Ok(())
    }
}
