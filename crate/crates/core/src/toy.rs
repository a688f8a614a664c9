//! Symmetric two-particle model `X' = eps / (8 X^2) + G'(2X) / 2`, its
//! equilibria and their basins.

use crate::error::{Error, Result};
use crate::kernel::InteractionKernel;
use crate::ode::{self, IntegrationStats, OdeSystem, Rk23Options};

const SCAN_MIN: f64 = 1e-6;
const SCAN_MAX: f64 = 50.0;
const SCAN_POINTS: usize = 10_000;
const ROOT_TOL: f64 = 1e-10;
/// Distance from `b` within which a start is reported as on the separatrix.
pub const SEPARATRIX_TOL: f64 = 1e-8;
/// Relative distance from the fold value within which the two roots are merged.
const FOLD_REL_TOL: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct ToyProblem {
    epsilon: f64,
    kernel: InteractionKernel,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stability {
    Stable,
    Unstable,
    /// Tangential root at the fold: attracting from the left, repelling to the right.
    SemiStable,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Equilibrium {
    pub x: f64,
    pub stability: Stability,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Basin {
    ConvergesToA,
    OnSeparatrix,
    Diverges,
}

impl Basin {
    pub fn label(self) -> &'static str {
        match self {
            Basin::ConvergesToA => "converges_to_a",
            Basin::OnSeparatrix => "on_separatrix",
            Basin::Diverges => "diverges",
        }
    }
}

impl ToyProblem {
    pub fn new(epsilon: f64, kernel: &InteractionKernel) -> Result<Self> {
        crate::error::check_positive("epsilon", epsilon)?;
        Ok(Self {
            epsilon,
            kernel: kernel.clone(),
        })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn kernel(&self) -> &InteractionKernel {
        &self.kernel
    }

    /// `8 X^2` times the right-hand side: `eps + 4 X^2 G'(2X)`.
    pub fn balance(&self, x: f64) -> f64 {
        self.epsilon + 4.0 * x * x * self.kernel.eval_d1(2.0 * x)
    }

    fn balance_slope(&self, x: f64) -> f64 {
        8.0 * x * self.kernel.eval_d1(2.0 * x) + 8.0 * x * x * self.kernel.eval_d2(2.0 * x)
    }
}

pub fn toy_rhs(problem: &ToyProblem, x: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::NonPositivePosition(x));
    }
    Ok(problem.epsilon / (8.0 * x * x) + 0.5 * problem.kernel.eval_d1(2.0 * x))
}

fn scan_points() -> impl Iterator<Item = f64> {
    let (lo, hi) = (SCAN_MIN.ln(), SCAN_MAX.ln());
    (0..SCAN_POINTS).map(move |k| (lo + (hi - lo) * k as f64 / (SCAN_POINTS - 1) as f64).exp())
}

fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let mut f_lo = f(lo);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        let f_mid = f(mid);
        if f_mid == 0.0 {
            return mid;
        }
        if (f_mid > 0.0) == (f_lo > 0.0) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Position and value of the maximum of `-4 X^2 G'(2X)` over the scan range:
/// the largest `eps` for which equilibria exist.
pub fn fold_point(kernel: &InteractionKernel) -> (f64, f64) {
    let h = |x: f64| -4.0 * x * x * kernel.eval_d1(2.0 * x);
    let pts: Vec<f64> = scan_points().collect();
    let best = (0..pts.len()).max_by(|&i, &j| h(pts[i]).total_cmp(&h(pts[j]))).expect("nonempty scan");
    let lo = pts[best.saturating_sub(1)];
    let hi = pts[(best + 1).min(pts.len() - 1)];
    // The maximum is where the derivative of h changes sign.
    let dh = |x: f64| -(8.0 * x * kernel.eval_d1(2.0 * x) + 8.0 * x * x * kernel.eval_d2(2.0 * x));
    let x = if dh(lo) > 0.0 && dh(hi) < 0.0 { bisect(dh, lo, hi, 1e-14) } else { pts[best] };
    (x, h(x))
}

pub fn fold_epsilon(kernel: &InteractionKernel) -> f64 {
    fold_point(kernel).1
}

/// Zeros of the right-hand side on `[1e-6, 50]`, in increasing order.
///
/// Sign changes of the balance function on a log-spaced scan are refined by
/// bisection; within a relative `1e-12` of the fold value the tangential root
/// is returned as a single semi-stable equilibrium.
pub fn find_equilibria(problem: &ToyProblem) -> Vec<Equilibrium> {
    let (x_fold, eps_fold) = fold_point(&problem.kernel);
    if (problem.epsilon - eps_fold).abs() <= FOLD_REL_TOL * eps_fold {
        return vec![Equilibrium {
            x: x_fold,
            stability: Stability::SemiStable,
        }];
    }
    let f = |x: f64| problem.balance(x);
    let pts: Vec<f64> = scan_points().collect();
    let mut roots = Vec::new();
    for w in pts.windows(2) {
        let (a, b) = (f(w[0]), f(w[1]));
        if a == 0.0 || (a > 0.0) != (b > 0.0) && b != 0.0 {
            let x = if a == 0.0 { w[0] } else { bisect(f, w[0], w[1], ROOT_TOL) };
            let slope = problem.balance_slope(x) / (8.0 * x * x);
            roots.push(Equilibrium {
                x,
                stability: if slope < 0.0 { Stability::Stable } else { Stability::Unstable },
            });
        }
    }
    roots
}

struct ToySystem<'a>(&'a ToyProblem);

impl OdeSystem for ToySystem<'_> {
    fn dim(&self) -> usize {
        1
    }

    fn rhs(&self, _t: f64, y: &[f64], dydt: &mut [f64]) -> Result<()> {
        dydt[0] = toy_rhs(self.0, y[0])?;
        Ok(())
    }

    fn admissible(&self, y: &[f64]) -> bool {
        y[0] > 0.0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ToyTrajectory {
    pub times: Vec<f64>,
    pub positions: Vec<f64>,
}

impl ToyTrajectory {
    pub fn final_position(&self) -> f64 {
        *self.positions.last().expect("trajectory records its start")
    }
}

/// Adaptive integration from `x0`, recorded at `t = 0`, every output time and `t_end`.
pub fn integrate_toy(
    problem: &ToyProblem,
    x0: f64,
    t_end: f64,
    output_times: &[f64],
    opts: &Rk23Options,
) -> Result<(ToyTrajectory, IntegrationStats)> {
    if !(x0 > 0.0) {
        return Err(Error::NonPositivePosition(x0));
    }
    crate::error::check_positive("t_end", t_end)?;
    let mut traj = ToyTrajectory {
        times: Vec::new(),
        positions: Vec::new(),
    };
    let (_, stats) = ode::integrate(&ToySystem(problem), 0.0, &[x0], t_end, output_times, opts, |t, y| {
        traj.times.push(t);
        traj.positions.push(y[0]);
        Ok(())
    })?;
    Ok((traj, stats))
}

/// Which side of the unstable equilibrium `b` the start lies on.
pub fn classify_basin(problem: &ToyProblem, x0: f64) -> Result<Basin> {
    if !(x0 > 0.0) {
        return Err(Error::NonPositivePosition(x0));
    }
    let eq = find_equilibria(problem);
    let Some(b) = eq.iter().rev().find(|e| e.stability != Stability::Stable) else {
        return Ok(Basin::Diverges);
    };
    Ok(if (x0 - b.x).abs() <= SEPARATRIX_TOL {
        Basin::OnSeparatrix
    } else if x0 < b.x {
        Basin::ConvergesToA
    } else {
        Basin::Diverges
    })
}
