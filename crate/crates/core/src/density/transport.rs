//! One-dimensional optimal transport through quantile functions.
//!
//! Every density handled here (grid cell averages, particle gaps) is
//! piecewise constant, so its distribution function is piecewise linear and
//! the pseudo-inverse `u(z) = inf { x : F(x) > z }` is piecewise linear too.

use crate::error::{Error, Result};

/// A nondecreasing piecewise-linear distribution function through the points
/// `(xs[k], fs[k])`, equal to `0` left of `xs[0]` and `total` right of the last point.
#[derive(Clone, Debug, PartialEq)]
pub struct PiecewiseLinearCdf {
    xs: Vec<f64>,
    fs: Vec<f64>,
}

impl PiecewiseLinearCdf {
    /// `xs` must be strictly increasing, `fs` nondecreasing starting at zero.
    pub fn from_parts(xs: Vec<f64>, fs: Vec<f64>) -> Self {
        assert_eq!(xs.len(), fs.len(), "mismatched breakpoint arrays");
        assert!(xs.len() >= 2, "need at least two breakpoints");
        debug_assert!(xs.windows(2).all(|w| w[0] < w[1]));
        debug_assert!(fs.windows(2).all(|w| w[0] <= w[1]));
        Self { xs, fs }
    }

    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    pub fn fs(&self) -> &[f64] {
        &self.fs
    }

    pub fn total(&self) -> f64 {
        *self.fs.last().expect("nonempty")
    }

    pub fn eval(&self, x: f64) -> f64 {
        if x <= self.xs[0] {
            return 0.0;
        }
        let k = self.xs.partition_point(|&p| p < x);
        if k >= self.xs.len() {
            return self.total();
        }
        let (x0, x1) = (self.xs[k - 1], self.xs[k]);
        let (f0, f1) = (self.fs[k - 1], self.fs[k]);
        f0 + (x - x0) / (x1 - x0) * (f1 - f0)
    }

    fn normalized(&self) -> Result<Normalized<'_>> {
        let total = self.total();
        if !(total > 0.0) {
            return Err(Error::ZeroMass);
        }
        let mut zs: Vec<f64> = self.fs.iter().map(|f| f / total).collect();
        // Pin the top so that z = 1 is reached exactly.
        let top = zs.len() - 1;
        zs[top] = 1.0;
        for z in zs.iter_mut().rev().skip(1) {
            if *z > 1.0 {
                *z = 1.0;
            }
        }
        Ok(Normalized { xs: &self.xs, zs })
    }

    /// Pseudo-inverse sampled at `z_j = j / m`, `j = 0..=m`.
    pub fn quantile_function(&self, m: usize) -> Result<QuantileFunction> {
        if m < 2 {
            return Err(Error::InvalidParameter {
                name: "m",
                reason: format!("need at least 2 quantile intervals, got {m}"),
            });
        }
        let norm = self.normalized()?;
        let values = (0..=m).map(|j| norm.quantile(j as f64 / m as f64)).collect();
        Ok(QuantileFunction { values })
    }

    /// Pseudo-inverse of the mass-normalized distribution at a single level.
    pub fn quantile(&self, z: f64) -> Result<f64> {
        Ok(self.normalized()?.quantile(z))
    }
}

struct Normalized<'a> {
    xs: &'a [f64],
    zs: Vec<f64>,
}

impl Normalized<'_> {
    fn interpolate(&self, k: usize, z: f64) -> f64 {
        let (z0, z1) = (self.zs[k - 1], self.zs[k]);
        let (x0, x1) = (self.xs[k - 1], self.xs[k]);
        (x0 + (z - z0) / (z1 - z0) * (x1 - x0)).clamp(x0, x1)
    }

    /// Right-continuous `inf { x : F(x) > z }`; `z >= 1` maps to the right end of the support.
    fn quantile(&self, z: f64) -> f64 {
        if z >= 1.0 {
            return self.quantile_left(1.0);
        }
        let z = z.max(0.0);
        let k = self.zs.partition_point(|&f| f <= z);
        self.interpolate(k, z)
    }

    /// Left limit `inf { x : F(x) >= z }`.
    fn quantile_left(&self, z: f64) -> f64 {
        if z <= 0.0 {
            return self.quantile(0.0);
        }
        let k = self.zs.partition_point(|&f| f < z.min(1.0));
        self.interpolate(k, z.min(1.0))
    }
}

/// Pseudo-inverse values `u(z_j)` on the uniform nodes `z_j = j / m`.
#[derive(Clone, Debug, PartialEq)]
pub struct QuantileFunction {
    values: Vec<f64>,
}

impl QuantileFunction {
    pub fn from_values(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn intervals(&self) -> usize {
        self.values.len() - 1
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        let m = self.intervals() as f64;
        (0..self.values.len()).map(move |j| j as f64 / m)
    }

    /// Trapezoid-rule `L^p([0, 1])` norm of the difference with `other`.
    pub fn lp_distance(&self, other: &QuantileFunction, p: f64) -> f64 {
        assert_eq!(self.values.len(), other.values.len(), "quantile grids differ");
        let m = self.intervals() as f64;
        let last = self.values.len() - 1;
        let sum: f64 = self
            .values
            .iter()
            .zip(&other.values)
            .enumerate()
            .map(|(j, (a, b))| {
                let w = if j == 0 || j == last { 0.5 } else { 1.0 };
                w * (a - b).abs().powf(p)
            })
            .sum();
        (sum / m).powf(1.0 / p)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WassersteinOrder {
    One,
    Two,
    Infinity,
}

/// `W_p` between two distributions with equal mass (within `1e-6`).
///
/// `W_1` and `W_2` use the trapezoid rule on `m + 1` quantile nodes; `W_inf`
/// is the exact supremum over all breakpoints of both quantile functions.
pub fn wasserstein(
    a: &PiecewiseLinearCdf,
    b: &PiecewiseLinearCdf,
    order: WassersteinOrder,
    m: usize,
) -> Result<f64> {
    let (ma, mb) = (a.total(), b.total());
    if (ma - mb).abs() > 1e-6 {
        return Err(Error::MassMismatch { mass: ma, expected: mb });
    }
    match order {
        WassersteinOrder::One => Ok(a.quantile_function(m)?.lp_distance(&b.quantile_function(m)?, 1.0)),
        WassersteinOrder::Two => Ok(a.quantile_function(m)?.lp_distance(&b.quantile_function(m)?, 2.0)),
        WassersteinOrder::Infinity => {
            let na = a.normalized()?;
            let nb = b.normalized()?;
            let mut sup = 0.0f64;
            let nodes = (0..=m).map(|j| j as f64 / m as f64);
            for z in na.zs.iter().chain(&nb.zs).copied().chain(nodes) {
                sup = sup.max((na.quantile(z) - nb.quantile(z)).abs());
                sup = sup.max((na.quantile_left(z) - nb.quantile_left(z)).abs());
            }
            Ok(sup)
        }
    }
}
