//! Positivity-preserving semi-discrete finite-volume scheme with
//! minmod-limited upwind fluxes, advanced in time by SSP-RK3.
//!
//! Cells are indexed `0..n`; edge `k` separates cells `k - 1` and `k`, so the
//! domain boundary edges are `0` and `n`. Both carry zero flux.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::density::{Grid, GridDensity};
use crate::diagnostics::DiagnosticsRow;
use crate::error::{Error, Result};
use crate::kernel::InteractionKernel;

/// Tolerated total negative mass that is silently redistributed after a step.
const NEGATIVE_MASS_TOL: f64 = 1e-12;
/// Mass allowed in the two boundary cells before a run aborts.
const BOUNDARY_LEAK_TOL: f64 = 1e-8;
/// Active ranges at least this long are convolved through the FFT.
const SPECTRAL_MIN: usize = 96;

#[derive(Clone, Debug)]
pub struct FvConfig {
    pub epsilon: f64,
    pub cfl: f64,
    pub dt_max: f64,
    pub t_end: f64,
    pub snapshot_times: Vec<f64>,
    /// Cadence of diagnostics rows; `None` records only `t = 0` and `t_end`.
    pub diagnostics_dt: Option<f64>,
    /// Density the `w2_to_ref` column is measured against.
    pub reference: Option<GridDensity>,
    /// Quantile nodes used for Wasserstein distances in diagnostics.
    pub quantile_nodes: usize,
}

impl FvConfig {
    pub fn new(epsilon: f64, t_end: f64) -> Self {
        Self {
            epsilon,
            cfl: 0.4,
            dt_max: 0.05,
            t_end,
            snapshot_times: Vec::new(),
            diagnostics_dt: None,
            reference: None,
            quantile_nodes: 4000,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "epsilon",
                reason: format!("must be finite and nonnegative, got {}", self.epsilon),
            });
        }
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return Err(Error::InvalidParameter {
                name: "cfl",
                reason: format!("must lie in (0, 1], got {}", self.cfl),
            });
        }
        crate::error::check_positive("dt_max", self.dt_max)?;
        crate::error::check_positive("t_end", self.t_end)?;
        if let Some(d) = self.diagnostics_dt {
            crate::error::check_positive("diagnostics_dt", d)?;
        }
        if self.snapshot_times.iter().any(|&s| !(0.0..=self.t_end).contains(&s)) {
            return Err(Error::InvalidParameter {
                name: "snapshot_times",
                reason: format!("snapshot times must lie in [0, {}]", self.t_end),
            });
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FvState {
    pub time: f64,
    pub density: GridDensity,
}

/// `minmod(a, b, c)`: the smallest of three positive arguments, the largest of
/// three negative ones, zero otherwise.
#[inline]
pub fn minmod(a1: f64, a2: f64, a3: f64) -> f64 {
    if a1 > 0.0 && a2 > 0.0 && a3 > 0.0 {
        a1.min(a2).min(a3)
    } else if a1 < 0.0 && a2 < 0.0 && a3 < 0.0 {
        a1.max(a2).max(a3)
    } else {
        0.0
    }
}

/// Limited slope in cell `i`; zero in the two boundary cells.
#[inline]
pub fn limited_slope(rho: &[f64], dx: f64, i: usize) -> f64 {
    if i == 0 || i + 1 >= rho.len() {
        return 0.0;
    }
    let (l, c, r) = (rho[i - 1], rho[i], rho[i + 1]);
    minmod(2.0 * (r - c) / dx, (r - l) / (2.0 * dx), 2.0 * (c - l) / dx)
}

/// Circular convolution with the offset table, padded so that no wrap-around
/// reaches the entries that are read back.
#[derive(Clone)]
struct SpectralKernel {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    /// Transform of the offset table, divided by the transform length.
    spectrum: Vec<Complex<f64>>,
}

impl SpectralKernel {
    fn new(table: &[f64], n: usize) -> Self {
        let size = (2 * n - 1).next_power_of_two();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(size);
        let inverse = planner.plan_fft_inverse(size);
        let mut spectrum = padded(table, size);
        forward.process(&mut spectrum);
        let scale = 1.0 / size as f64;
        spectrum.iter_mut().for_each(|c| *c *= scale);
        Self {
            n,
            forward,
            inverse,
            spectrum,
        }
    }

    fn potential(&self, rho: &[f64], lo: usize, hi: usize) -> Vec<f64> {
        let mut buf = padded(rho, self.spectrum.len());
        self.forward.process(&mut buf);
        buf.iter_mut().zip(&self.spectrum).for_each(|(b, s)| *b *= s);
        self.inverse.process(&mut buf);
        // entry i + n - 1 holds sum_j rho_j table[i - j + n - 1]
        buf[lo + self.n - 1..=hi + self.n - 1].iter().map(|c| c.re).collect()
    }
}

impl std::fmt::Debug for SpectralKernel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpectralKernel").field("size", &self.spectrum.len()).finish()
    }
}

fn padded(values: &[f64], size: usize) -> Vec<Complex<f64>> {
    let mut out = vec![Complex::new(0.0, 0.0); size];
    for (o, v) in out.iter_mut().zip(values) {
        o.re = *v;
    }
    out
}

/// The spatial discretization for one kernel, diffusion constant and grid.
#[derive(Clone, Debug)]
pub struct FvScheme {
    kernel: InteractionKernel,
    epsilon: f64,
    grid: Grid,
    /// `G(d dx)` for `d = -(n - 1) ..= n - 1`.
    table: Vec<f64>,
    spectral: Option<SpectralKernel>,
}

impl FvScheme {
    pub fn new(kernel: &InteractionKernel, epsilon: f64, grid: Grid) -> Result<Self> {
        if !(epsilon >= 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "epsilon",
                reason: format!("must be finite and nonnegative, got {epsilon}"),
            });
        }
        let table = crate::density::offset_table(kernel, 0, grid.len(), grid.dx());
        let spectral = (grid.len() >= SPECTRAL_MIN).then(|| SpectralKernel::new(&table, grid.len()));
        Ok(Self {
            kernel: kernel.clone(),
            epsilon,
            grid,
            table,
            spectral,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn kernel(&self) -> &InteractionKernel {
        &self.kernel
    }

    /// `psi_i = sum_j rho_j G(x_i - x_j)` for cells `lo..=hi`.
    fn potential(&self, rho: &[f64], lo: usize, hi: usize) -> Vec<f64> {
        match &self.spectral {
            Some(s) if hi + 1 - lo >= SPECTRAL_MIN => s.potential(rho, lo, hi),
            _ => self.potential_direct(rho, lo, hi),
        }
    }

    fn potential_direct(&self, rho: &[f64], lo: usize, hi: usize) -> Vec<f64> {
        let n = self.grid.len();
        let mut out = vec![0.0; hi + 1 - lo];
        for (j, &rj) in rho.iter().enumerate() {
            if rj == 0.0 {
                continue;
            }
            let start = n - 1 + lo - j;
            let row = &self.table[start..start + out.len()];
            for (o, g) in out.iter_mut().zip(row) {
                *o += rj * g;
            }
        }
        out
    }

    /// Discrete velocity at interior edge `k` (between cells `k - 1` and `k`):
    /// `sum_j rho_j (G(x_k - x_j) - G(x_{k-1} - x_j)) - (eps / dx) (rho_k - rho_{k-1})`.
    pub fn edge_velocity(&self, rho: &[f64], edge: usize) -> f64 {
        assert!(edge >= 1 && edge < self.grid.len(), "edge {edge} is not interior");
        let psi = self.potential(rho, edge - 1, edge);
        psi[1] - psi[0] - self.epsilon / self.grid.dx() * (rho[edge] - rho[edge - 1])
    }

    /// Upwind flux at edge `k`; zero on the domain boundary.
    pub fn numerical_flux(&self, rho: &[f64], edge: usize) -> f64 {
        if edge == 0 || edge >= self.grid.len() {
            return 0.0;
        }
        let u = self.edge_velocity(rho, edge);
        self.upwind(rho, edge, u)
    }

    #[inline]
    fn upwind(&self, rho: &[f64], edge: usize, u: f64) -> f64 {
        let dx = self.grid.dx();
        if u > 0.0 {
            let i = edge - 1;
            u * (rho[i] + 0.5 * dx * limited_slope(rho, dx, i))
        } else if u < 0.0 {
            let i = edge;
            u * (rho[i] - 0.5 * dx * limited_slope(rho, dx, i))
        } else {
            0.0
        }
    }

    /// Edges touching at least one occupied cell, as an inclusive range.
    fn active_edges(&self, rho: &[f64]) -> Option<(usize, usize)> {
        let n = self.grid.len();
        let first = rho.iter().position(|&v| v != 0.0)?;
        let last = rho.iter().rposition(|&v| v != 0.0)?;
        Some((first.max(1), (last + 1).min(n - 1)))
    }

    /// Velocities at all `n + 1` edges; boundary and vacuum edges get the
    /// formula's value only where at least one neighbor is occupied.
    fn velocities_into(&self, rho: &[f64], u: &mut [f64]) -> Option<(usize, usize)> {
        u.iter_mut().for_each(|v| *v = 0.0);
        let (e_lo, e_hi) = self.active_edges(rho)?;
        if e_lo > e_hi {
            return None;
        }
        let psi = self.potential(rho, e_lo - 1, e_hi);
        let diffusion = self.epsilon / self.grid.dx();
        for k in e_lo..=e_hi {
            let p = k - e_lo;
            u[k] = psi[p + 1] - psi[p] - diffusion * (rho[k] - rho[k - 1]);
        }
        Some((e_lo, e_hi))
    }

    /// Numerical fluxes at all `n + 1` edges.
    pub fn fluxes(&self, rho: &[f64]) -> Vec<f64> {
        let mut u = vec![0.0; rho.len() + 1];
        let range = self.velocities_into(rho, &mut u);
        self.fluxes_from(rho, &u, range)
    }

    fn fluxes_from(&self, rho: &[f64], u: &[f64], range: Option<(usize, usize)>) -> Vec<f64> {
        let mut flux = vec![0.0; rho.len() + 1];
        if let Some((lo, hi)) = range {
            for k in lo..=hi {
                flux[k] = self.upwind(rho, k, u[k]);
            }
        }
        flux
    }

    /// `d rho_i / dt = -(F_{i+1/2} - F_{i-1/2}) / dx`.
    pub fn rhs(&self, rho: &[f64]) -> Vec<f64> {
        let mut u = vec![0.0; rho.len() + 1];
        let range = self.velocities_into(rho, &mut u);
        self.rhs_from(rho, &u, range)
    }

    fn rhs_from(&self, rho: &[f64], u: &[f64], range: Option<(usize, usize)>) -> Vec<f64> {
        let flux = self.fluxes_from(rho, u, range);
        let inv_dx = 1.0 / self.grid.dx();
        flux.windows(2).map(|w| -(w[1] - w[0]) * inv_dx).collect()
    }

    /// Largest stable step: `cfl * min(dx / max|u|, dx^2 / (2 eps max rho))`.
    pub fn stable_dt(&self, rho: &[f64], cfl: f64) -> f64 {
        let mut u = vec![0.0; rho.len() + 1];
        self.velocities_into(rho, &mut u);
        self.dt_limit(rho, &u, cfl)
    }

    fn dt_limit(&self, rho: &[f64], u: &[f64], cfl: f64) -> f64 {
        let dx = self.grid.dx();
        let max_u = u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let max_rho = rho.iter().copied().fold(0.0f64, f64::max);
        let advective = if max_u > 0.0 { cfl * dx / max_u } else { f64::INFINITY };
        let diffusive = if self.epsilon > 0.0 && max_rho > 0.0 {
            cfl * dx * dx / (2.0 * self.epsilon * max_rho)
        } else {
            f64::INFINITY
        };
        advective.min(diffusive)
    }

    /// One SSP-RK3 step of size `dt`, rejected if `dt` exceeds [`stable_dt`](Self::stable_dt).
    pub fn ssp_rk3_step(&self, state: &FvState, dt: f64, cfl: f64) -> Result<FvState> {
        let rho0 = state.density.values();
        let mut u = vec![0.0; rho0.len() + 1];
        let range = self.velocities_into(rho0, &mut u);
        let limit = self.dt_limit(rho0, &u, cfl);
        if dt > limit * (1.0 + 1e-9) {
            return Err(Error::CflViolation { dt, limit });
        }
        self.advance(state, &u, range, dt)
    }

    /// SSP-RK3 step whose first stage reuses the velocities `u` of `state`.
    fn advance(&self, state: &FvState, u: &[f64], range: Option<(usize, usize)>, dt: f64) -> Result<FvState> {
        let rho0 = state.density.values();
        let stage = |base: &[f64]| -> Vec<f64> {
            let l = self.rhs(base);
            base.iter().zip(&l).map(|(r, d)| r + dt * d).collect()
        };
        let l0 = self.rhs_from(rho0, u, range);
        let rho1: Vec<f64> = rho0.iter().zip(&l0).map(|(r, d)| r + dt * d).collect();
        let e1 = stage(&rho1);
        let rho2: Vec<f64> = rho0.iter().zip(&e1).map(|(a, b)| 0.75 * a + 0.25 * b).collect();
        let e2 = stage(&rho2);
        let mut next: Vec<f64> = rho0
            .iter()
            .zip(&e2)
            .map(|(a, b)| (a + 2.0 * b) / 3.0)
            .collect();

        let time = state.time + dt;
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::NotFinite { time });
        }
        restore_positivity(&mut next, self.grid.dx(), time)?;
        Ok(FvState {
            time,
            density: GridDensity::new(self.grid, next)?,
        })
    }
}

/// Zeroes negative cells, taking the (tiny) deficit proportionally from the
/// positive cells so that the total mass is unchanged. Subnormal values are
/// flushed: they stall instead of draining and keep vacuum cells active.
fn restore_positivity(values: &mut [f64], dx: f64, time: f64) -> Result<()> {
    for v in values.iter_mut() {
        if *v > 0.0 && *v < f64::MIN_POSITIVE {
            *v = 0.0;
        }
    }
    let deficit: f64 = -values.iter().filter(|v| **v < 0.0).sum::<f64>() * dx;
    if deficit == 0.0 {
        return Ok(());
    }
    if deficit >= NEGATIVE_MASS_TOL {
        return Err(Error::NegativeDensity { deficit, time });
    }
    let positive: f64 = values.iter().filter(|v| **v > 0.0).sum::<f64>() * dx;
    let scale = if positive > 0.0 { (positive - deficit) / positive } else { 0.0 };
    for v in values.iter_mut() {
        *v = if *v < 0.0 { 0.0 } else { *v * scale };
    }
    Ok(())
}

#[derive(Clone, Debug)]
pub struct FvRun {
    pub snapshots: Vec<FvState>,
    pub diagnostics: Vec<DiagnosticsRow>,
    pub final_state: FvState,
    pub steps: usize,
}

/// Integrates from `initial` to `config.t_end`, landing exactly on every
/// snapshot and diagnostics time.
pub fn run(initial: &GridDensity, kernel: &InteractionKernel, config: &FvConfig) -> Result<FvRun> {
    config.validate()?;
    let scheme = FvScheme::new(kernel, config.epsilon, *initial.grid())?;
    let grid = *initial.grid();
    let t_end = config.t_end;

    let mut snapshot_times: Vec<f64> = config.snapshot_times.clone();
    snapshot_times.sort_by(f64::total_cmp);
    snapshot_times.dedup();
    let mut next_snapshot = snapshot_times.iter().copied().peekable();

    let diag_times: Vec<f64> = match config.diagnostics_dt {
        Some(d) => {
            let count = (t_end / d).floor() as usize;
            (1..=count).map(|k| k as f64 * d).filter(|&t| t < t_end * (1.0 - 1e-12)).collect()
        }
        None => Vec::new(),
    };
    let mut next_diag = diag_times.iter().copied().peekable();

    let row = |state: &FvState| {
        DiagnosticsRow::evaluate(
            state.time,
            &state.density,
            kernel,
            config.epsilon,
            config.reference.as_ref(),
            config.quantile_nodes,
        )
    };

    let mut state = FvState {
        time: 0.0,
        density: initial.clone(),
    };
    let mut snapshots = Vec::new();
    let mut diagnostics = vec![row(&state)?];
    while next_snapshot.peek().is_some_and(|&s| s <= 0.0) {
        next_snapshot.next();
        snapshots.push(state.clone());
    }

    let mut steps = 0;
    let mut u = vec![0.0; grid.len() + 1];
    while state.time < t_end {
        let target = [next_snapshot.peek().copied(), next_diag.peek().copied(), Some(t_end)]
            .into_iter()
            .flatten()
            .fold(f64::INFINITY, f64::min);
        let range = scheme.velocities_into(state.density.values(), &mut u);
        let dt_stable = scheme.dt_limit(state.density.values(), &u, config.cfl).min(config.dt_max);
        let remaining = target - state.time;
        let hits = dt_stable >= remaining * (1.0 - 1e-12);
        let dt = if hits { remaining } else { dt_stable };
        state = scheme.advance(&state, &u, range, dt)?;
        steps += 1;
        if hits {
            state.time = target;
        }

        let v = state.density.values();
        let leak = (v[0] + v[grid.len() - 1]) * grid.dx();
        if leak > BOUNDARY_LEAK_TOL {
            return Err(Error::BoundaryLeak { mass: leak, time: state.time });
        }

        if hits {
            let mut emit_row = false;
            while next_snapshot.peek().is_some_and(|&s| s <= target) {
                next_snapshot.next();
                snapshots.push(state.clone());
            }
            while next_diag.peek().is_some_and(|&s| s <= target) {
                next_diag.next();
                emit_row = true;
            }
            if emit_row || target >= t_end {
                diagnostics.push(row(&state)?);
            }
        }
    }

    Ok(FvRun {
        snapshots,
        diagnostics,
        final_state: state,
        steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::InitialDatum;
    use crate::kernel::KernelProfile;
    use proptest::prelude::*;
    use std::sync::Arc;

    #[derive(Debug)]
    struct Zero;

    impl KernelProfile for Zero {
        fn value(&self, _x: f64) -> f64 {
            0.0
        }
        fn d1(&self, _x: f64) -> f64 {
            0.0
        }
        fn d2(&self, _x: f64) -> f64 {
            0.0
        }
    }

    fn zero_kernel() -> InteractionKernel {
        InteractionKernel::custom(Arc::new(Zero))
    }

    #[test]
    fn minmod_branches() {
        assert_eq!(minmod(1.0, 2.0, 3.0), 1.0);
        assert_eq!(minmod(-1.0, -2.0, -3.0), -1.0);
        assert_eq!(minmod(-1.0, 2.0, 3.0), 0.0);
        assert_eq!(minmod(0.0, 2.0, 3.0), 0.0);
    }

    #[test]
    fn slopes() {
        let dx = 0.1;
        let linear: Vec<f64> = (0..10).map(|i| 2.5 * i as f64 * dx).collect();
        for i in 1..9 {
            assert!((limited_slope(&linear, dx, i) - 2.5).abs() < 1e-12);
        }
        assert_eq!(limited_slope(&[0.0, 1.0, 0.0], dx, 1), 0.0);
        assert_eq!(limited_slope(&linear, dx, 0), 0.0);
        assert_eq!(limited_slope(&linear, dx, 9), 0.0);
    }

    #[test]
    fn velocity_of_empty_state_is_zero() {
        let grid = Grid::new(-1.0, 1.0, 0.1).unwrap();
        let scheme = FvScheme::new(&InteractionKernel::gaussian(), 0.5, grid).unwrap();
        let rho = vec![0.0; grid.len()];
        for k in 1..grid.len() {
            assert_eq!(scheme.edge_velocity(&rho, k), 0.0);
            assert_eq!(scheme.numerical_flux(&rho, k), 0.0);
        }
        assert!(scheme.rhs(&rho).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn pure_diffusion_velocity_points_downhill() {
        let grid = Grid::new(0.0, 1.0, 0.1).unwrap();
        let scheme = FvScheme::new(&zero_kernel(), 0.3, grid).unwrap();
        let rho: Vec<f64> = (0..10).map(|i| 1.0 + i as f64).collect();
        for k in 1..10 {
            let u = scheme.edge_velocity(&rho, k);
            assert!((u + 0.3 / 0.1).abs() < 1e-12);
        }
    }

    #[test]
    fn single_cell_velocity() {
        // Cell j0 occupied; velocity at edge k is rho_j0 (G(x_k - x_j0) - G(x_{k-1} - x_j0)).
        let grid = Grid::new(-1.0, 1.0, 0.1).unwrap();
        let g = InteractionKernel::gaussian();
        let scheme = FvScheme::new(&g, 0.0, grid).unwrap();
        let mut rho = vec![0.0; grid.len()];
        rho[10] = 2.0;
        let x0 = grid.center(10);
        for k in 12..grid.len() {
            let expected = 2.0 * ((-(grid.center(k) - x0).powi(2)).exp() - (-(grid.center(k - 1) - x0).powi(2)).exp())
                / std::f64::consts::PI.sqrt();
            let u = scheme.edge_velocity(&rho, k);
            assert!((u - expected).abs() < 1e-14);
            assert!(u < 0.0);
        }
    }

    #[test]
    fn flat_profile_flux() {
        let grid = Grid::new(0.0, 1.0, 0.1).unwrap();
        let scheme = FvScheme::new(&zero_kernel(), 0.0, grid).unwrap();
        let rho = vec![0.7; 10];
        assert_eq!(scheme.upwind(&rho, 4, 2.0), 1.4);
        assert_eq!(scheme.upwind(&rho, 4, -2.0), -1.4);
        assert_eq!(scheme.numerical_flux(&rho, 0), 0.0);
        assert_eq!(scheme.numerical_flux(&rho, 10), 0.0);
    }

    #[test]
    fn symmetric_state_has_even_rhs() {
        let grid = Grid::new(-1.0, 1.0, 0.02).unwrap();
        let raw = InitialDatum::parabola(9.0 / 8.0, 9.0 / 4.0).build(&grid).unwrap();
        let rho: Vec<f64> = raw.values().iter().zip(raw.reflected().values()).map(|(a, b)| 0.5 * (a + b)).collect();
        let scheme = FvScheme::new(&InteractionKernel::gaussian(), 0.5, grid).unwrap();
        let r = scheme.rhs(&rho);
        let n = r.len();
        let scale = r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for i in 0..n {
            assert!((r[i] - r[n - 1 - i]).abs() < 1e-12 * scale, "cell {i}");
        }
    }

    #[test]
    fn zero_state_step_is_unchanged() {
        let grid = Grid::new(-1.0, 1.0, 0.1).unwrap();
        let scheme = FvScheme::new(&InteractionKernel::gaussian(), 1.0, grid).unwrap();
        let s = FvState { time: 0.0, density: GridDensity::zeros(grid) };
        let next = scheme.ssp_rk3_step(&s, 0.01, 0.4).unwrap();
        assert_eq!(next.density, s.density);
    }

    #[test]
    fn step_beyond_cfl_is_rejected() {
        let grid = Grid::new(-1.0, 1.0, 0.01).unwrap();
        let rho = InitialDatum::uniform_box(0.5).build(&grid).unwrap();
        let scheme = FvScheme::new(&InteractionKernel::gaussian(), 2.0, grid).unwrap();
        let s = FvState { time: 0.0, density: rho };
        assert!(matches!(scheme.ssp_rk3_step(&s, 1.0, 0.4), Err(Error::CflViolation { .. })));
    }

    #[test]
    fn box_spreads_under_diffusion() {
        // Independent oracle: forward Euler with a step 100x smaller, compared at t = 1e-4.
        let grid = Grid::new(-1.0, 1.0, 0.01).unwrap();
        let rho = InitialDatum::uniform_box(0.5).build(&grid).unwrap();
        let scheme = FvScheme::new(&InteractionKernel::gaussian(), 2.0, grid).unwrap();
        let dt = 1e-5;
        let mut s = FvState { time: 0.0, density: rho.clone() };
        for _ in 0..10 {
            s = scheme.ssp_rk3_step(&s, dt, 0.5).unwrap();
        }
        let mut euler = rho.values().to_vec();
        for _ in 0..1000 {
            let r = scheme.rhs(&euler);
            euler.iter_mut().zip(&r).for_each(|(v, d)| *v += 1e-7 * d);
        }
        let diff = s.density.values().iter().zip(&euler).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(diff < 1e-3, "max difference {diff}");
        // Cells 50..=149 hold the box: the edge cells drain outward.
        let (inside, outside) = (149, 150);
        assert!(s.density.values()[inside] < rho.values()[inside]);
        assert_eq!(rho.values()[outside], 0.0);
        assert!(s.density.values()[outside] > 0.0);
        assert!(s.density.values()[49] > 0.0);
        assert!((s.density.mass() - rho.mass()).abs() < 1e-12);
    }

    #[test]
    fn spectral_potential_matches_direct_sum() {
        let grid = Grid::new(-2.0, 2.0, 0.01).unwrap();
        let scheme = FvScheme::new(&InteractionKernel::gaussian(), 0.5, grid).unwrap();
        assert!(scheme.spectral.is_some());
        let rho = GridDensity::from_fn(grid, |x| (1.5 - x * x).max(0.0) * (1.0 + 0.5 * (9.0 * x).cos()));
        let v = rho.values();
        for (lo, hi) in [(0, 399), (37, 250), (100, 195)] {
            let fast = scheme.potential(v, lo, hi);
            let direct = scheme.potential_direct(v, lo, hi);
            let scale = direct.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            for (a, b) in fast.iter().zip(&direct) {
                assert!((a - b).abs() <= 1e-13 * scale, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn restore_positivity_rules() {
        let mut v = vec![1.0, -1e-15, 1.0];
        restore_positivity(&mut v, 1.0, 0.0).unwrap();
        assert_eq!(v[1], 0.0);
        assert!((v.iter().sum::<f64>() - (2.0 - 1e-15)).abs() < 1e-15);
        let mut bad = vec![1.0, -1e-6, 1.0];
        assert!(matches!(restore_positivity(&mut bad, 1.0, 0.0), Err(Error::NegativeDensity { .. })));
        let mut tiny = vec![1e-320, 1.0, 3e-300];
        restore_positivity(&mut tiny, 1.0, 0.0).unwrap();
        assert_eq!(tiny, vec![0.0, 1.0, 3e-300]);
    }

    proptest! {
        #[test]
        fn reconstruction_stays_nonnegative(values in proptest::collection::vec(0.0f64..5.0, 3..40)) {
            let dx = 0.05;
            for i in 0..values.len() {
                let s = limited_slope(&values, dx, i);
                prop_assert!(values[i] + 0.5 * dx * s >= -1e-14);
                prop_assert!(values[i] - 0.5 * dx * s >= -1e-14);
            }
        }

        #[test]
        fn rhs_conserves_mass(values in proptest::collection::vec(0.0f64..3.0, 40)) {
            let grid = Grid::new(-1.0, 1.0, 0.05).unwrap();
            let scheme = FvScheme::new(&InteractionKernel::gaussian(), 0.3, grid).unwrap();
            let r = scheme.rhs(&values);
            prop_assert!((r.iter().sum::<f64>() * grid.dx()).abs() < 1e-13);
        }

        #[test]
        fn fluxes_match_pointwise_formula(values in proptest::collection::vec(0.0f64..3.0, 30)) {
            let grid = Grid::new(-0.75, 0.75, 0.05).unwrap();
            let scheme = FvScheme::new(&InteractionKernel::gaussian(), 0.3, grid).unwrap();
            let f = scheme.fluxes(&values);
            for k in 0..=grid.len() {
                prop_assert!((f[k] - scheme.numerical_flux(&values, k)).abs() < 1e-12);
            }
        }
    }
}
