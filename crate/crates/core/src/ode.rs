//! Embedded Bogacki-Shampine 2(3) Runge-Kutta integrator with step-size
//! control, shared by the particle solver and the two-particle toy model.

use crate::error::{Error, Result};

pub trait OdeSystem {
    fn dim(&self) -> usize;

    fn rhs(&self, t: f64, y: &[f64], dydt: &mut [f64]) -> Result<()>;

    /// States the integrator must never step onto; trial stages landing
    /// outside are treated as rejected steps.
    fn admissible(&self, _y: &[f64]) -> bool {
        true
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rk23Options {
    pub tol_abs: f64,
    pub tol_rel: f64,
    pub safety: f64,
    pub min_factor: f64,
    pub max_factor: f64,
    /// Abort threshold for the step size.
    pub min_dt: f64,
    pub max_dt: f64,
    pub initial_dt: Option<f64>,
}

impl Default for Rk23Options {
    fn default() -> Self {
        Self {
            tol_abs: 1e-6,
            tol_rel: 1e-6,
            safety: 0.9,
            min_factor: 0.2,
            max_factor: 5.0,
            min_dt: 1e-14,
            max_dt: f64::INFINITY,
            initial_dt: None,
        }
    }
}

impl Rk23Options {
    pub fn with_tolerance(tol: f64) -> Self {
        Self {
            tol_abs: tol,
            tol_rel: tol,
            ..Self::default()
        }
    }
}

#[derive(Clone, Debug)]
pub struct StepAttempt {
    pub y_new: Vec<f64>,
    /// Derivative at the new state (first stage of the next step).
    pub f_new: Vec<f64>,
    pub error: f64,
    pub dt_next: f64,
    pub accepted: bool,
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn axpy(y: &[f64], h: f64, terms: &[(f64, &[f64])]) -> Vec<f64> {
    let mut out = y.to_vec();
    for &(c, k) in terms {
        let hc = h * c;
        for (o, ki) in out.iter_mut().zip(k) {
            *o += hc * ki;
        }
    }
    out
}

/// One attempted step of size `dt` from `(t, y)` with `f0 = f(t, y)`.
///
/// Accepts when `max|err| <= tol_abs + tol_rel * max|y|`; the proposed next
/// step is `dt * clamp(safety * (tol / err)^(1/3), min_factor, max_factor)`.
pub fn rk23_step<S: OdeSystem + ?Sized>(
    system: &S,
    t: f64,
    y: &[f64],
    f0: &[f64],
    dt: f64,
    opts: &Rk23Options,
) -> Result<StepAttempt> {
    let n = y.len();
    let rejected = |dt_next: f64| StepAttempt {
        y_new: y.to_vec(),
        f_new: f0.to_vec(),
        error: f64::INFINITY,
        dt_next,
        accepted: false,
    };

    let y2 = axpy(y, dt, &[(0.5, f0)]);
    if !system.admissible(&y2) {
        return Ok(rejected(0.5 * dt));
    }
    let mut k2 = vec![0.0; n];
    system.rhs(t + 0.5 * dt, &y2, &mut k2)?;

    let y3 = axpy(y, dt, &[(0.75, &k2)]);
    if !system.admissible(&y3) {
        return Ok(rejected(0.5 * dt));
    }
    let mut k3 = vec![0.0; n];
    system.rhs(t + 0.75 * dt, &y3, &mut k3)?;

    let y_new = axpy(y, dt, &[(2.0 / 9.0, f0), (1.0 / 3.0, &k2), (4.0 / 9.0, &k3)]);
    if !system.admissible(&y_new) {
        return Ok(rejected(0.5 * dt));
    }
    let mut k4 = vec![0.0; n];
    system.rhs(t + dt, &y_new, &mut k4)?;

    // Third-order minus embedded second-order solution.
    let error = (0..n)
        .map(|i| {
            (dt * (-5.0 / 72.0 * f0[i] + 1.0 / 12.0 * k2[i] + 1.0 / 9.0 * k3[i] - 1.0 / 8.0 * k4[i])).abs()
        })
        .fold(0.0f64, f64::max);
    if !error.is_finite() || y_new.iter().any(|v| !v.is_finite()) {
        return Ok(rejected(0.5 * dt));
    }
    let tol = opts.tol_abs + opts.tol_rel * max_abs(y).max(max_abs(&y_new));
    let factor = if error == 0.0 {
        opts.max_factor
    } else {
        (opts.safety * (tol / error).powf(1.0 / 3.0)).clamp(opts.min_factor, opts.max_factor)
    };
    let accepted = error <= tol;
    Ok(StepAttempt {
        y_new,
        f_new: k4,
        error,
        dt_next: (dt * factor).min(opts.max_dt),
        accepted,
    })
}

#[derive(Clone, Debug, Default)]
pub struct IntegrationStats {
    pub accepted: usize,
    pub rejected: usize,
}

/// Advances `y0` from `t0` to `t_end`, truncating steps to land exactly on
/// each requested output time. `observe` runs at `t0` and at every output
/// time (including `t_end`).
pub fn integrate<S, F>(
    system: &S,
    t0: f64,
    y0: &[f64],
    t_end: f64,
    output_times: &[f64],
    opts: &Rk23Options,
    mut observe: F,
) -> Result<(Vec<f64>, IntegrationStats)>
where
    S: OdeSystem + ?Sized,
    F: FnMut(f64, &[f64]) -> Result<()>,
{
    let mut outputs: Vec<f64> = output_times
        .iter()
        .copied()
        .filter(|&s| s > t0 && s < t_end)
        .collect();
    outputs.push(t_end);
    outputs.sort_by(f64::total_cmp);
    outputs.dedup();

    let mut t = t0;
    let mut y = y0.to_vec();
    let mut f = vec![0.0; y.len()];
    system.rhs(t, &y, &mut f)?;
    observe(t, &y)?;
    let mut stats = IntegrationStats::default();
    if t_end <= t0 {
        return Ok((y, stats));
    }

    let mut dt = opts.initial_dt.unwrap_or_else(|| initial_step(&y, &f, opts)).min(opts.max_dt);
    for &target in &outputs {
        while t < target {
            let remaining = target - t;
            let hits = dt >= remaining * (1.0 - 1e-12);
            let h = if hits { remaining } else { dt };
            if h < opts.min_dt && !hits {
                return Err(Error::StepUnderflow { time: t, dt: h });
            }
            let attempt = rk23_step(system, t, &y, &f, h, opts)?;
            if attempt.accepted {
                stats.accepted += 1;
                t = if hits { target } else { t + h };
                y = attempt.y_new;
                f = attempt.f_new;
                // A truncated step says nothing about the natural step size.
                dt = if hits { dt.max(attempt.dt_next) } else { attempt.dt_next };
            } else {
                stats.rejected += 1;
                dt = attempt.dt_next.min(0.999 * h);
                if dt < opts.min_dt {
                    return Err(Error::StepUnderflow { time: t, dt });
                }
            }
        }
        observe(t, &y)?;
    }
    Ok((y, stats))
}

fn initial_step(y: &[f64], f: &[f64], opts: &Rk23Options) -> f64 {
    let d0 = max_abs(y).max(1e-5);
    let d1 = max_abs(f);
    let h = if d1 > 0.0 { 0.01 * d0 / d1 } else { 1e-3 * d0 };
    h.max(10.0 * opts.min_dt)
}
