//! Deterministic equal-mass particle method: `N` ordered particles whose
//! neighbour gaps carry the diffusion and whose pairwise kernel forces carry
//! the aggregation.

use rayon::prelude::*;

use crate::density::{Grid, GridDensity, PiecewiseLinearCdf};
use crate::error::{Error, Result};
use crate::kernel::InteractionKernel;
use crate::ode::{self, IntegrationStats, OdeSystem, Rk23Options};

/// Smallest admissible distance between neighbours.
pub const MIN_GAP: f64 = 1e-12;

/// Ensembles at least this large evaluate interactions in parallel.
const PARALLEL_THRESHOLD: usize = 256;
/// Ensembles at least this large try the Chebyshev interaction proxy.
const PROXY_MIN: usize = 128;
/// Trailing Chebyshev coefficients must fall below this fraction of the largest.
const PROXY_TOL: f64 = 1e-14;

/// Coefficient of the neighbour pressure term.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum PressureScaling {
    /// `eps N (R_{i-1}^2 - R_i^2)`, as displayed for the particle method and
    /// for the two-particle toy model.
    Displayed,
    /// `(eps N / 2)(R_{i-1}^2 - R_i^2)`, the discretization of
    /// `-(eps/2) d_z (d_z u)^{-2}` in the pseudo-inverse equation. Only this
    /// scaling approximates the density equation with diffusion `eps`.
    #[default]
    Continuum,
}

impl PressureScaling {
    pub fn factor(self) -> f64 {
        match self {
            Self::Displayed => 1.0,
            Self::Continuum => 0.5,
        }
    }
}

/// How `sum_k G'(X_i - X_k)` is evaluated.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum InteractionSum {
    /// Every pair.
    Direct,
    /// A Chebyshev interpolant of the interaction field over the ensemble's
    /// hull when its coefficients converge to [`PROXY_TOL`] with fewer than
    /// `N/4` nodes, every pair otherwise.
    #[default]
    Auto,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParticleEnsemble {
    positions: Vec<f64>,
    time: f64,
}

impl ParticleEnsemble {
    pub fn new(positions: Vec<f64>, time: f64) -> Result<Self> {
        if positions.len() < 2 {
            return Err(Error::InvalidParameter {
                name: "N",
                reason: format!("need at least 2 particles, got {}", positions.len()),
            });
        }
        if let Some(index) = first_disorder(&positions) {
            return Err(Error::Unordered { index });
        }
        Ok(Self { positions, time })
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn mass_per_particle(&self) -> f64 {
        1.0 / self.len() as f64
    }

    pub fn center_of_mass(&self) -> f64 {
        self.positions.iter().sum::<f64>() / self.len() as f64
    }

    /// `(1/N) sum X_i^2`.
    pub fn second_moment(&self) -> f64 {
        self.positions.iter().map(|x| x * x).sum::<f64>() / self.len() as f64
    }

    pub fn min_gap(&self) -> f64 {
        self.positions.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min)
    }

    pub fn max_gap(&self) -> f64 {
        self.positions.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
    }
}

/// Index of the first particle not strictly left of its successor by at least [`MIN_GAP`].
fn first_disorder(x: &[f64]) -> Option<usize> {
    x.windows(2).position(|w| !(w[1] - w[0] >= MIN_GAP) || !w[0].is_finite() || !w[1].is_finite())
}

/// Places `N` particles at the `k/(N-1)` quantiles of the cell-average
/// density, so each gap initially carries mass `1/(N-1)`.
pub fn init_particles(rho0: &GridDensity, n: usize) -> Result<ParticleEnsemble> {
    crate::density::require_unit_mass(rho0.mass(), 1e-8)?;
    init_particles_from_cdf(&rho0.cumulative(), n)
}

/// As [`init_particles`] for any piecewise-linear distribution function.
pub fn init_particles_from_cdf(cdf: &PiecewiseLinearCdf, n: usize) -> Result<ParticleEnsemble> {
    if n < 2 {
        return Err(Error::InvalidParameter {
            name: "N",
            reason: format!("need at least 2 particles, got {n}"),
        });
    }
    let q = cdf.quantile_function(n - 1)?;
    ParticleEnsemble::new(q.values().to_vec(), 0.0)
}

/// The particle ODE as an [`OdeSystem`], with an optional interaction cutoff
/// beyond which `G'` is treated as zero.
#[derive(Clone, Debug)]
pub struct ParticleSystem {
    kernel: InteractionKernel,
    epsilon: f64,
    n: usize,
    cutoff: Option<f64>,
    scaling: PressureScaling,
    sum: InteractionSum,
}

impl ParticleSystem {
    pub fn new(kernel: &InteractionKernel, epsilon: f64, n: usize, cutoff: Option<f64>) -> Result<Self> {
        if !(epsilon >= 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "epsilon",
                reason: format!("must be finite and nonnegative, got {epsilon}"),
            });
        }
        if let Some(c) = cutoff {
            crate::error::check_positive("cutoff", c)?;
        }
        Ok(Self {
            kernel: kernel.clone(),
            epsilon,
            n,
            cutoff,
            scaling: PressureScaling::Displayed,
            sum: InteractionSum::Direct,
        })
    }

    pub fn with_scaling(mut self, scaling: PressureScaling) -> Self {
        self.scaling = scaling;
        self
    }

    pub fn with_interaction(mut self, sum: InteractionSum) -> Self {
        self.sum = sum;
        self
    }

    fn field(&self, x: &[f64], at: f64) -> f64 {
        x.iter().map(|&xk| self.kernel.eval_d1(at - xk)).sum()
    }

    /// Interaction sums for every particle through a Chebyshev interpolant of
    /// `phi(y) = sum_k G'(y - X_k)` on `[X_1, X_N]`, sampled at the extrema
    /// nodes, doubled until the trailing coefficients are negligible. `None`
    /// when that would cost as much as the direct sum. `G'(0) = 0` makes the
    /// self term vanish.
    fn proxy_interactions(&self, x: &[f64]) -> Option<Vec<f64>> {
        let n = x.len();
        let (lo, hi) = (x[0], x[n - 1]);
        let (mid, half) = (0.5 * (lo + hi), 0.5 * (hi - lo));
        let node = |j: usize, m: usize| mid + half * (std::f64::consts::PI * j as f64 / m as f64).cos();
        let sample = |nodes: Vec<f64>| -> Vec<f64> {
            if n >= PARALLEL_THRESHOLD {
                nodes.par_iter().map(|&y| self.field(x, y)).collect()
            } else {
                nodes.iter().map(|&y| self.field(x, y)).collect()
            }
        };
        let mut m = 16;
        let mut values = sample((0..=m).map(|j| node(j, m)).collect());
        while 4 * m <= n {
            let coeffs = chebyshev_coefficients(&values);
            let scale = coeffs.iter().fold(0.0f64, |a, c| a.max(c.abs()));
            let tail = coeffs[m - 3..].iter().fold(0.0f64, |a, c| a.max(c.abs()));
            if tail <= PROXY_TOL * scale {
                let eval = |xi: &f64| clenshaw(&coeffs, ((xi - mid) / half).clamp(-1.0, 1.0));
                return Some(if n >= PARALLEL_THRESHOLD {
                    x.par_iter().map(eval).collect()
                } else {
                    x.iter().map(eval).collect()
                });
            }
            // nodes of the doubled set at even indices are the current ones
            let odd = sample((0..m).map(|j| node(2 * j + 1, 2 * m)).collect());
            let mut next = Vec::with_capacity(2 * m + 1);
            for j in 0..m {
                next.push(values[j]);
                next.push(odd[j]);
            }
            next.push(values[m]);
            values = next;
            m *= 2;
        }
        None
    }

    fn interaction(&self, x: &[f64], i: usize) -> f64 {
        let xi = x[i];
        let mut sum = 0.0;
        match self.cutoff {
            None => {
                for (k, &xk) in x.iter().enumerate() {
                    if k != i {
                        sum += self.kernel.eval_d1(xi - xk);
                    }
                }
            }
            Some(r) => {
                for &xk in x[..i].iter().rev() {
                    if xi - xk > r {
                        break;
                    }
                    sum += self.kernel.eval_d1(xi - xk);
                }
                for &xk in &x[i + 1..] {
                    if xk - xi > r {
                        break;
                    }
                    sum += self.kernel.eval_d1(xi - xk);
                }
            }
        }
        sum
    }

    fn pressure_velocity(&self, x: &[f64], i: usize) -> f64 {
        let n = x.len() as f64;
        // eps N R^2 with R = 1 / (N h) is eps / (N h^2).
        let coeff = self.scaling.factor() * self.epsilon / n;
        let pressure = |h: f64| coeff / (h * h);
        let left = if i > 0 { pressure(x[i] - x[i - 1]) } else { 0.0 };
        let right = if i + 1 < x.len() { pressure(x[i + 1] - x[i]) } else { 0.0 };
        left - right
    }

    fn velocity(&self, x: &[f64], i: usize) -> f64 {
        self.pressure_velocity(x, i) + self.interaction(x, i) / x.len() as f64
    }
}

impl OdeSystem for ParticleSystem {
    fn dim(&self) -> usize {
        self.n
    }

    fn rhs(&self, _t: f64, y: &[f64], dydt: &mut [f64]) -> Result<()> {
        if let Some(index) = first_disorder(y) {
            return Err(Error::Unordered { index });
        }
        let proxy = match (self.sum, self.cutoff) {
            (InteractionSum::Auto, None) if y.len() >= PROXY_MIN => self.proxy_interactions(y),
            _ => None,
        };
        if let Some(forces) = proxy {
            let n = y.len() as f64;
            for (i, d) in dydt.iter_mut().enumerate() {
                *d = self.pressure_velocity(y, i) + forces[i] / n;
            }
        } else if y.len() >= PARALLEL_THRESHOLD {
            dydt.par_iter_mut().enumerate().for_each(|(i, d)| *d = self.velocity(y, i));
        } else {
            for (i, d) in dydt.iter_mut().enumerate() {
                *d = self.velocity(y, i);
            }
        }
        Ok(())
    }

    fn admissible(&self, y: &[f64]) -> bool {
        first_disorder(y).is_none()
    }
}

/// Coefficients `c_k` of `sum_k c_k T_k` interpolating `values` at the nodes
/// `cos(pi j / m)`, `j = 0..=m`.
fn chebyshev_coefficients(values: &[f64]) -> Vec<f64> {
    let m = values.len() - 1;
    let weight = |j: usize| if j == 0 || j == m { 0.5 } else { 1.0 };
    let cos: Vec<f64> = (0..2 * m).map(|r| (std::f64::consts::PI * r as f64 / m as f64).cos()).collect();
    (0..=m)
        .map(|k| {
            let sum: f64 = values
                .iter()
                .enumerate()
                .map(|(j, f)| weight(j) * f * cos[(k * j) % (2 * m)])
                .sum();
            weight(k) * 2.0 / m as f64 * sum
        })
        .collect()
}

fn clenshaw(coeffs: &[f64], t: f64) -> f64 {
    let (mut b1, mut b2) = (0.0, 0.0);
    for c in coeffs[1..].iter().rev() {
        let b0 = 2.0 * t * b1 - b2 + c;
        b2 = b1;
        b1 = b0;
    }
    t * b1 - b2 + coeffs[0]
}

/// `dX_i/dt = eps N (R_{i-1}^2 - R_i^2) + (1/N) sum_{k != i} G'(X_i - X_k)`,
/// `R_i = 1 / (N (X_{i+1} - X_i))`, with the missing `R` dropped at the two ends.
pub fn particle_rhs(ensemble: &ParticleEnsemble, kernel: &InteractionKernel, epsilon: f64) -> Result<Vec<f64>> {
    let system = ParticleSystem::new(kernel, epsilon, ensemble.len(), None)?;
    let mut out = vec![0.0; ensemble.len()];
    system.rhs(ensemble.time, &ensemble.positions, &mut out)?;
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct ParticleStep {
    /// The advanced ensemble when accepted, the input otherwise.
    pub ensemble: ParticleEnsemble,
    pub dt_next: f64,
    pub accepted: bool,
    pub error: f64,
}

/// One adaptive Bogacki-Shampine attempt; steps producing disordered
/// positions or gaps below [`MIN_GAP`] are rejected.
pub fn rk23_step(
    ensemble: &ParticleEnsemble,
    kernel: &InteractionKernel,
    epsilon: f64,
    dt: f64,
    opts: &Rk23Options,
) -> Result<ParticleStep> {
    crate::error::check_positive("dt", dt)?;
    let system = ParticleSystem::new(kernel, epsilon, ensemble.len(), None)?;
    let mut f0 = vec![0.0; ensemble.len()];
    system.rhs(ensemble.time, &ensemble.positions, &mut f0)?;
    let attempt = ode::rk23_step(&system, ensemble.time, &ensemble.positions, &f0, dt, opts)?;
    let next = if attempt.accepted {
        ParticleEnsemble {
            positions: attempt.y_new,
            time: ensemble.time + dt,
        }
    } else {
        ensemble.clone()
    };
    Ok(ParticleStep {
        ensemble: next,
        dt_next: attempt.dt_next,
        accepted: attempt.accepted,
        error: attempt.error,
    })
}

/// Piecewise-constant density with mass `1/(N-1)` in each gap.
#[derive(Clone, Debug, PartialEq)]
pub struct ParticleDensity {
    positions: Vec<f64>,
}

impl ParticleDensity {
    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    /// Density on each of the `N - 1` gaps.
    pub fn gap_values(&self) -> Vec<f64> {
        let gaps = (self.positions.len() - 1) as f64;
        self.positions.windows(2).map(|w| 1.0 / (gaps * (w[1] - w[0]))).collect()
    }

    pub fn value(&self, x: f64) -> f64 {
        let p = &self.positions;
        if x < p[0] || x > p[p.len() - 1] {
            return 0.0;
        }
        let k = p.partition_point(|&q| q <= x).clamp(1, p.len() - 1);
        1.0 / ((p.len() - 1) as f64 * (p[k] - p[k - 1]))
    }

    pub fn cumulative(&self) -> PiecewiseLinearCdf {
        let gaps = (self.positions.len() - 1) as f64;
        let fs = (0..self.positions.len()).map(|k| k as f64 / gaps).collect();
        PiecewiseLinearCdf::from_parts(self.positions.clone(), fs)
    }

    /// Exact cell-overlap averages on `grid`; mass outside the grid is lost.
    pub fn on_grid(&self, grid: &Grid) -> Result<GridDensity> {
        let cdf = self.cumulative();
        let edges: Vec<f64> = (0..=grid.len()).map(|k| cdf.eval(grid.edge(k))).collect();
        let values = edges.windows(2).map(|w| ((w[1] - w[0]) / grid.dx()).max(0.0)).collect();
        GridDensity::new(*grid, values)
    }
}

pub fn reconstruct_density(ensemble: &ParticleEnsemble) -> ParticleDensity {
    ParticleDensity {
        positions: ensemble.positions.clone(),
    }
}

#[derive(Clone, Debug)]
pub struct ParticleConfig {
    pub epsilon: f64,
    pub t_end: f64,
    pub snapshot_times: Vec<f64>,
    pub tolerances: Rk23Options,
    /// Interaction radius; `None` sums over all pairs.
    pub cutoff: Option<f64>,
    pub scaling: PressureScaling,
    pub interaction: InteractionSum,
}

impl ParticleConfig {
    pub fn new(epsilon: f64, t_end: f64) -> Self {
        Self {
            epsilon,
            t_end,
            snapshot_times: Vec::new(),
            tolerances: Rk23Options::default(),
            cutoff: None,
            scaling: PressureScaling::default(),
            interaction: InteractionSum::default(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct ParticleRun {
    /// Ensembles at `t = 0`, each requested snapshot time, and `t_end`.
    pub snapshots: Vec<ParticleEnsemble>,
    pub stats: IntegrationStats,
}

impl ParticleRun {
    pub fn final_ensemble(&self) -> &ParticleEnsemble {
        self.snapshots.last().expect("a run records at least its initial state")
    }
}

/// Integrates the particle system from the `k/(N-1)` quantiles of `rho0`.
pub fn run_particles(
    rho0: &GridDensity,
    n: usize,
    kernel: &InteractionKernel,
    config: &ParticleConfig,
) -> Result<ParticleRun> {
    let start = init_particles(rho0, n)?;
    run_ensemble(&start, kernel, config)
}

/// Integrates the particle system from an explicit starting ensemble.
pub fn run_ensemble(start: &ParticleEnsemble, kernel: &InteractionKernel, config: &ParticleConfig) -> Result<ParticleRun> {
    crate::error::check_positive("t_end", config.t_end)?;
    let system = ParticleSystem::new(kernel, config.epsilon, start.len(), config.cutoff)?
        .with_scaling(config.scaling)
        .with_interaction(config.interaction);
    let mut snapshots = Vec::new();
    let (_, stats) = ode::integrate(
        &system,
        start.time,
        &start.positions,
        start.time + config.t_end,
        &config.snapshot_times.iter().map(|s| s + start.time).collect::<Vec<_>>(),
        &config.tolerances,
        |t, y| {
            snapshots.push(ParticleEnsemble {
                positions: y.to_vec(),
                time: t,
            });
            Ok(())
        },
    )?;
    Ok(ParticleRun { snapshots, stats })
}
