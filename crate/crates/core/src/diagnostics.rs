//! Energy, dissipation, moment rates, steady states and decay fits.

use std::f64::consts::PI;

use crate::density::{Grid, GridDensity, WassersteinOrder};
use crate::error::{Error, Result};
use crate::kernel::InteractionKernel;
use crate::quadrature::{self, QuadratureOptions};

/// Cells below this value count as vacuum when differentiating.
const VACUUM: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct DiagnosticsRow {
    pub t: f64,
    pub mass: f64,
    pub linf: f64,
    pub l2sq: f64,
    pub m2: f64,
    pub energy: f64,
    pub dissipation: f64,
    pub w2_to_ref: Option<f64>,
}

impl DiagnosticsRow {
    pub fn evaluate(
        t: f64,
        rho: &GridDensity,
        kernel: &InteractionKernel,
        epsilon: f64,
        reference: Option<&GridDensity>,
        quantile_nodes: usize,
    ) -> Result<Self> {
        let conv = rho.convolve(kernel, 0);
        let w2_to_ref = match reference {
            Some(r) => Some(rho.wasserstein(r, WassersteinOrder::Two, quantile_nodes)?),
            None => None,
        };
        Ok(Self {
            t,
            mass: rho.mass(),
            linf: rho.linf_norm(),
            l2sq: rho.l2_norm_sq(),
            m2: rho.moment(2),
            energy: energy_with(rho, &conv, epsilon),
            dissipation: dissipation_with(rho, &conv, epsilon),
            w2_to_ref,
        })
    }
}

fn energy_with(rho: &GridDensity, conv: &[f64], epsilon: f64) -> f64 {
    let dx = rho.dx();
    let v = rho.values();
    let quad: f64 = v.iter().map(|r| r * r).sum();
    let inter: f64 = v.iter().zip(conv).map(|(r, c)| r * c).sum();
    0.5 * epsilon * dx * quad - 0.5 * dx * inter
}

/// `(eps/2) dx sum rho_i^2 - (1/2) dx sum rho_i (G * rho)(x_i)`.
pub fn energy(rho: &GridDensity, kernel: &InteractionKernel, epsilon: f64) -> f64 {
    energy_with(rho, &rho.convolve(kernel, 0), epsilon)
}

fn dissipation_with(rho: &GridDensity, conv: &[f64], epsilon: f64) -> f64 {
    let dx = rho.dx();
    let v = rho.values();
    let n = v.len();
    let xi: Vec<f64> = v.iter().zip(conv).map(|(r, c)| epsilon * r - c).collect();
    let occupied = |i: usize| v[i] > VACUUM;
    let mut sum = 0.0;
    for i in 0..n {
        if !occupied(i) {
            continue;
        }
        let left = i > 0 && occupied(i - 1);
        let right = i + 1 < n && occupied(i + 1);
        let grad = match (left, right) {
            (true, true) => (xi[i + 1] - xi[i - 1]) / (2.0 * dx),
            (false, true) => (xi[i + 1] - xi[i]) / dx,
            (true, false) => (xi[i] - xi[i - 1]) / dx,
            (false, false) => 0.0,
        };
        sum += v[i] * grad * grad;
    }
    dx * sum
}

/// `dx sum rho_i |D(eps rho - G * rho)_i|^2` with centred differences inside
/// the support and one-sided ones at its edges.
pub fn dissipation(rho: &GridDensity, kernel: &InteractionKernel, epsilon: f64) -> f64 {
    dissipation_with(rho, &rho.convolve(kernel, 0), epsilon)
}

/// `eps int rho^2 + int int (x - y) G'(x - y) rho(x) rho(y)` on the grid.
pub fn second_moment_rate(rho: &GridDensity, kernel: &InteractionKernel, epsilon: f64) -> f64 {
    let n = rho.grid().len();
    let dx = rho.dx();
    let v = rho.values();
    let table: Vec<f64> = (0..2 * n - 1)
        .map(|k| {
            let z = (k as f64 - (n as f64 - 1.0)) * dx;
            z * kernel.eval_d1(z)
        })
        .collect();
    let occupied: Vec<(usize, f64)> = v.iter().copied().enumerate().filter(|(_, r)| *r != 0.0).collect();
    let mut pair = 0.0;
    for &(i, ri) in &occupied {
        let mut inner = 0.0;
        for &(j, rj) in &occupied {
            inner += table[n - 1 + i - j] * rj;
        }
        pair += ri * inner;
    }
    epsilon * rho.l2_norm_sq() + dx * dx * pair
}

fn quad_opts() -> QuadratureOptions {
    QuadratureOptions {
        abs_tol: 1e-15,
        rel_tol: 1e-12,
        max_intervals: 4000,
    }
}

/// Second-moment rate of the uniform box of half-width `r`:
/// `eps/(2R) + (1/(4R^2)) int_{-2R}^{2R} (2R - |z|) z G'(z) dz`.
pub fn box_second_moment_rate(kernel: &InteractionKernel, epsilon: f64, radius: f64) -> Result<f64> {
    crate::error::check_positive("radius", radius)?;
    let w = 2.0 * radius;
    // The integrand is even.
    let half = quadrature::integrate(|z| (w - z) * z * kernel.eval_d1(z), 0.0, w, quad_opts())?;
    Ok(epsilon / w + 2.0 * half / (4.0 * radius * radius))
}

/// The box radius `R0` at which the box second-moment rate changes sign
/// (positive below, negative above). Requires `eps < ||G||_1`.
pub fn critical_box_radius(kernel: &InteractionKernel, epsilon: f64) -> Result<f64> {
    let norm = kernel.l1_norm()?;
    if !(epsilon > 0.0 && epsilon < norm) {
        return Err(Error::Precondition(format!(
            "a sign change needs 0 < eps < ||G||_1 = {norm}, got {epsilon}"
        )));
    }
    let rate = |r: f64| box_second_moment_rate(kernel, epsilon, r);
    let mut lo = 1e-3;
    if rate(lo)? <= 0.0 {
        return Err(Error::Precondition("second-moment rate is not positive for small boxes".into()));
    }
    let mut hi = 2.0 * lo;
    while rate(hi)? > 0.0 {
        lo = hi;
        hi *= 2.0;
        if hi > 1e8 {
            return Err(Error::Precondition("second-moment rate never becomes negative".into()));
        }
    }
    while hi - lo > 1e-12 * hi {
        let mid = 0.5 * (lo + hi);
        if rate(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Small-`delta` rate of the oscillating datum: `(delta / sqrt(8 pi)) (3 eps - 1)`.
pub fn second_moment_rate_asymptotic(epsilon: f64, delta: f64) -> Result<f64> {
    crate::error::check_positive("delta", delta)?;
    Ok(delta / (8.0 * PI).sqrt() * (3.0 * epsilon - 1.0))
}

#[derive(Clone, Debug)]
pub struct SteadyState {
    pub density: GridDensity,
    /// `C` in `eps rho = G * rho - C` on the support.
    pub lagrange_constant: f64,
    /// `max |eps rho - G * rho + C|` over the support, before any recentring.
    pub residual: f64,
    pub converged: bool,
    /// The zero state returned when `eps >= ||G||_1`.
    pub trivial: bool,
    pub iterations: usize,
}

impl SteadyState {
    pub fn support(&self) -> Option<(f64, f64)> {
        self.density.support()
    }
}

#[derive(Clone, Debug)]
pub struct SteadyStateOptions {
    pub omega: f64,
    /// Stop when successive iterates are closer than this in `W_2`.
    pub tol: f64,
    pub max_iter: usize,
    /// Starting density; symmetrized about the grid midpoint and scaled to the target mass.
    pub seed: Option<GridDensity>,
    pub quantile_nodes: usize,
}

impl Default for SteadyStateOptions {
    fn default() -> Self {
        Self {
            omega: 0.5,
            tol: 1e-10,
            max_iter: 100_000,
            seed: None,
            quantile_nodes: 4000,
        }
    }
}

/// The `C` for which `dx sum max(phi_i - C, 0) / eps = mass`, solved exactly
/// on the piecewise-linear mass function.
fn lagrange_constant(phi: &[f64], dx: f64, epsilon: f64, mass: f64) -> f64 {
    let mut sorted: Vec<f64> = phi.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let target = epsilon * mass / dx;
    let mut partial = 0.0;
    for k in 0..sorted.len() {
        partial += sorted[k];
        let c = (partial - target) / (k + 1) as f64;
        let next = sorted.get(k + 1).copied().unwrap_or(f64::NEG_INFINITY);
        if c >= next {
            return c;
        }
    }
    unreachable!("mass function is unbounded as C decreases")
}

/// One damped fixed-point update `(1 - w) rho + w max(G * rho - C, 0) / eps`,
/// returning the new density and the `C` used.
pub fn fixed_point_map(
    rho: &GridDensity,
    kernel: &InteractionKernel,
    epsilon: f64,
    omega: f64,
) -> Result<(GridDensity, f64)> {
    crate::error::check_positive("epsilon", epsilon)?;
    let phi = rho.convolve(kernel, 0);
    let c = lagrange_constant(&phi, rho.dx(), epsilon, rho.mass());
    let values = rho
        .values()
        .iter()
        .zip(&phi)
        .map(|(r, p)| (1.0 - omega) * r + omega * ((p - c).max(0.0) / epsilon))
        .collect();
    Ok((GridDensity::new(*rho.grid(), values)?, c))
}

fn symmetrize(rho: &GridDensity) -> Result<GridDensity> {
    let r = rho.reflected();
    let values = rho.values().iter().zip(r.values()).map(|(a, b)| 0.5 * (a + b)).collect();
    GridDensity::new(*rho.grid(), values)
}

fn residual(rho: &GridDensity, kernel: &InteractionKernel, epsilon: f64, c: f64) -> f64 {
    let phi = rho.convolve(kernel, 0);
    rho.values()
        .iter()
        .zip(&phi)
        .filter(|(r, _)| **r > 0.0)
        .map(|(r, p)| (epsilon * r - p + c).abs())
        .fold(0.0, f64::max)
}

/// Steady state of mass `mass` on `grid` centred at `center`, with default options.
pub fn compute_steady_state(
    kernel: &InteractionKernel,
    epsilon: f64,
    mass: f64,
    center: f64,
    grid: &Grid,
) -> Result<SteadyState> {
    compute_steady_state_with(kernel, epsilon, mass, center, grid, &SteadyStateOptions::default())
}

/// Damped fixed-point iteration for `eps rho = (G * rho - C)_+`, kept even
/// about the grid midpoint (which removes the neutral translation mode) and
/// finally moved to `center`.
pub fn compute_steady_state_with(
    kernel: &InteractionKernel,
    epsilon: f64,
    mass: f64,
    center: f64,
    grid: &Grid,
    opts: &SteadyStateOptions,
) -> Result<SteadyState> {
    crate::error::check_positive("mass", mass)?;
    crate::error::check_positive("epsilon", epsilon)?;
    if !(opts.omega > 0.0 && opts.omega <= 1.0) {
        return Err(Error::InvalidParameter {
            name: "omega",
            reason: format!("must lie in (0, 1], got {}", opts.omega),
        });
    }
    if epsilon >= kernel.l1_norm()? {
        return Ok(SteadyState {
            density: GridDensity::zeros(*grid),
            lagrange_constant: 0.0,
            residual: 0.0,
            converged: true,
            trivial: true,
            iterations: 0,
        });
    }

    let mid = grid.midpoint();
    let seed = match &opts.seed {
        Some(s) => {
            if s.grid() != grid {
                return Err(Error::Precondition("seed lives on a different grid".into()));
            }
            s.clone()
        }
        None => {
            let half = 0.25 * (grid.x_right() - grid.x_left());
            GridDensity::from_fn(*grid, |x| (1.0 - ((x - mid) / half).powi(2)).max(0.0))
        }
    };
    let mut rho = symmetrize(&seed)?.normalized(mass)?;

    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iter {
        let (next, _) = fixed_point_map(&rho, kernel, epsilon, opts.omega)?;
        let next = symmetrize(&next)?;
        iterations += 1;
        let change = rho.scaled(1.0 / mass).wasserstein(
            &next.scaled(1.0 / mass),
            WassersteinOrder::Two,
            opts.quantile_nodes,
        )?;
        rho = next;
        if change < opts.tol {
            converged = true;
            break;
        }
    }
    // The damped iterates keep geometrically small tails outside the true
    // support; one undamped map removes them.
    let (rho, c) = fixed_point_map(&rho, kernel, epsilon, 1.0)?;
    let rho = symmetrize(&rho)?;
    let res = residual(&rho, kernel, epsilon, c);

    let density = rho.translated(center - mid);
    Ok(SteadyState {
        density,
        lagrange_constant: c,
        residual: res,
        converged,
        trivial: false,
        iterations,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecayFit {
    /// `-d log(w2) / dt`.
    pub rate: f64,
    pub r_squared: f64,
    pub points: usize,
}

/// Least-squares exponential rate of a `W_2` series.
///
/// Fits `log w2` over the window `1e-10 <= w2 <= w2(0) / 2`; if fewer than
/// five samples fall inside it, all samples with `w2 > 1e-12` are used.
pub fn w2_decay_fit(series: &[(f64, f64)]) -> Result<DecayFit> {
    const REQUIRED: usize = 5;
    let valid: Vec<(f64, f64)> = series.iter().copied().filter(|&(_, w)| w > 1e-12 && w.is_finite()).collect();
    if valid.len() < REQUIRED {
        return Err(Error::TooFewPoints {
            found: valid.len(),
            required: REQUIRED,
        });
    }
    let w0 = series[0].1;
    let window: Vec<(f64, f64)> = valid.iter().copied().filter(|&(_, w)| w >= 1e-10 && w <= 0.5 * w0).collect();
    let pts = if window.len() >= REQUIRED { window } else { valid };

    let n = pts.len() as f64;
    let mean_t = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = pts.iter().map(|p| p.1.ln()).sum::<f64>() / n;
    let (mut stt, mut sty, mut syy) = (0.0, 0.0, 0.0);
    for &(t, w) in &pts {
        let (dt, dy) = (t - mean_t, w.ln() - mean_y);
        stt += dt * dt;
        sty += dt * dy;
        syy += dy * dy;
    }
    if stt == 0.0 {
        return Err(Error::Precondition("decay fit needs at least two distinct times".into()));
    }
    let slope = sty / stt;
    let ss_res: f64 = pts
        .iter()
        .map(|&(t, w)| {
            let r = w.ln() - (mean_y + slope * (t - mean_t));
            r * r
        })
        .sum();
    let r_squared = if syy == 0.0 { 1.0 } else { 1.0 - ss_res / syy };
    Ok(DecayFit {
        rate: -slope,
        r_squared,
        points: pts.len(),
    })
}

/// Local-stability hypotheses: the steady state's quantile function and
/// its distance to the initial one must both stay below `lambda / 4`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HypothesisReport {
    pub lambda: f64,
    pub threshold: f64,
    pub center: f64,
    /// `||u_inf||_inf`: the steady support's largest distance from the centre.
    pub steady_extent: f64,
    /// `W_inf(rho0, rho_inf) = ||u0 - u_inf||_inf`.
    pub w_inf: f64,
    pub condition_i: bool,
    pub condition_ii: bool,
}

impl HypothesisReport {
    pub fn satisfied(&self) -> bool {
        self.condition_i && self.condition_ii
    }

    pub fn margin_i(&self) -> f64 {
        self.threshold - self.steady_extent
    }

    pub fn margin_ii(&self) -> f64 {
        self.threshold - self.w_inf
    }

    pub fn summary(&self) -> String {
        let verdict = |ok: bool| if ok { "satisfied" } else { "violated" };
        format!(
            "lambda/4 = {:.6}; (i) |u_inf| = {:.6} {} (margin {:.6}); (ii) W_inf = {:.6} {} (margin {:.6})",
            self.threshold,
            self.steady_extent,
            verdict(self.condition_i),
            self.margin_i(),
            self.w_inf,
            verdict(self.condition_ii),
            self.margin_ii()
        )
    }
}

pub fn stability_hypotheses_check(
    rho0: &GridDensity,
    steady: &SteadyState,
    kernel: &InteractionKernel,
) -> Result<HypothesisReport> {
    if steady.trivial {
        return Err(Error::Precondition("the zero steady state has no quantile function".into()));
    }
    let lambda = kernel.concavity_radius()?;
    let threshold = lambda / 4.0;
    let center = rho0.center_of_mass()?;
    let steady_center = steady.density.center_of_mass()?;
    let tol = rho0.dx().max(steady.density.dx());
    if (steady_center - center).abs() > tol {
        return Err(Error::Precondition(format!(
            "steady state centred at {steady_center}, initial datum at {center}"
        )));
    }
    let (l, r) = steady.support().ok_or(Error::ZeroMass)?;
    let steady_extent = (center - l).max(r - center);
    let a = rho0.cumulative();
    let b = steady.density.cumulative();
    let w_inf = crate::density::wasserstein(&a, &b, WassersteinOrder::Infinity, 4000)?;
    Ok(HypothesisReport {
        lambda,
        threshold,
        center,
        steady_extent,
        w_inf,
        condition_i: steady_extent < threshold,
        condition_ii: w_inf < threshold,
    })
}
