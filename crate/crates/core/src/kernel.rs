//! Attractive interaction potentials `G` and the analytic quantities the
//! solvers and diagnostics need from them.
//!
//! A kernel must be even, nonnegative, integrable, `C^2`, and strictly
//! decreasing on `(0, inf)`. The Gaussian `A exp(-(x/w)^2)` is built in; other
//! kernels plug in through [`KernelProfile`] with closed-form derivatives.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::error::{check_positive, Error, Result};
use crate::quadrature::{self, QuadratureOptions};

/// User-supplied even kernel with closed-form first and second derivatives.
pub trait KernelProfile: Send + Sync + fmt::Debug {
    fn value(&self, x: f64) -> f64;
    fn d1(&self, x: f64) -> f64;
    fn d2(&self, x: f64) -> f64;

    /// Closed-form `L^1` norm, when known.
    fn l1_norm(&self) -> Option<f64> {
        None
    }
}

#[derive(Clone, Debug)]
pub enum KernelForm {
    Gaussian { amplitude: f64, width: f64 },
    Custom(Arc<dyn KernelProfile>),
}

#[derive(Clone, Debug)]
pub struct InteractionKernel {
    form: KernelForm,
}

/// A certified concavity bound: `G'' <= -c` on `[-inner_radius, inner_radius]`,
/// with `lambda` the full radius of strict concavity.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConcavityInterval {
    pub lambda: f64,
    pub c: f64,
    pub inner_radius: f64,
}

const BISECTION_TOL: f64 = 1e-10;

impl InteractionKernel {
    /// `G(x) = exp(-x^2) / sqrt(pi)`, unit mass.
    pub fn gaussian() -> Self {
        Self {
            form: KernelForm::Gaussian {
                amplitude: 1.0 / PI.sqrt(),
                width: 1.0,
            },
        }
    }

    /// `G(x) = amplitude * exp(-(x / width)^2)`.
    pub fn scaled_gaussian(amplitude: f64, width: f64) -> Result<Self> {
        check_positive("amplitude", amplitude)?;
        check_positive("width", width)?;
        Ok(Self {
            form: KernelForm::Gaussian { amplitude, width },
        })
    }

    pub fn custom(profile: Arc<dyn KernelProfile>) -> Self {
        Self {
            form: KernelForm::Custom(profile),
        }
    }

    /// Builds a kernel by name, as used in experiment configs.
    pub fn by_name(name: &str, amplitude: Option<f64>, width: Option<f64>) -> Result<Self> {
        match name {
            "gaussian" => match (amplitude, width) {
                (None, None) => Ok(Self::gaussian()),
                (a, w) => Self::scaled_gaussian(a.unwrap_or(1.0 / PI.sqrt()), w.unwrap_or(1.0)),
            },
            other => Err(Error::InvalidParameter {
                name: "kernel",
                reason: format!("unknown kernel `{other}` (available: gaussian)"),
            }),
        }
    }

    pub fn form(&self) -> &KernelForm {
        &self.form
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        match &self.form {
            KernelForm::Gaussian { amplitude, width } => {
                let s = x / width;
                amplitude * (-s * s).exp()
            }
            KernelForm::Custom(p) => p.value(x),
        }
    }

    #[inline]
    pub fn eval_d1(&self, x: f64) -> f64 {
        match &self.form {
            KernelForm::Gaussian { amplitude, width } => {
                let s = x / width;
                -2.0 * s / width * amplitude * (-s * s).exp()
            }
            KernelForm::Custom(p) => p.d1(x),
        }
    }

    #[inline]
    pub fn eval_d2(&self, x: f64) -> f64 {
        match &self.form {
            KernelForm::Gaussian { amplitude, width } => {
                let s = x / width;
                (4.0 * s * s - 2.0) / (width * width) * amplitude * (-s * s).exp()
            }
            KernelForm::Custom(p) => p.d2(x),
        }
    }

    /// `G`, `G'` or `G''` depending on `order`.
    pub fn eval_derivative(&self, order: u8, x: f64) -> f64 {
        match order {
            0 => self.eval(x),
            1 => self.eval_d1(x),
            2 => self.eval_d2(x),
            _ => panic!("kernel derivatives are available up to order 2, got {order}"),
        }
    }

    /// `int G dx`, closed form when available, adaptive quadrature otherwise.
    pub fn l1_norm(&self) -> Result<f64> {
        match &self.form {
            KernelForm::Gaussian { amplitude, width } => Ok(amplitude * width * PI.sqrt()),
            KernelForm::Custom(p) => match p.l1_norm() {
                Some(v) => Ok(v),
                None => self.l1_norm_quadrature(),
            },
        }
    }

    /// `int G dx` by adaptive quadrature over the half line, relative error <= 1e-10.
    pub fn l1_norm_quadrature(&self) -> Result<f64> {
        let opts = QuadratureOptions {
            abs_tol: 1e-14,
            rel_tol: 1e-11,
            max_intervals: 4000,
        };
        let half = quadrature::integrate_to_infinity(|x| self.eval(x), 0.0, opts)?;
        Ok(2.0 * half)
    }

    /// Largest `r` with `G'' < 0` on `(-r, r)`.
    pub fn concavity_radius(&self) -> Result<f64> {
        let d2_at_zero = self.eval_d2(0.0);
        if !(d2_at_zero < 0.0) {
            return Err(Error::NotConcaveAtOrigin { d2_at_zero });
        }
        if let KernelForm::Gaussian { width, .. } = self.form {
            return Ok(width / 2f64.sqrt());
        }
        // Expand until G'' changes sign, then bisect.
        let mut lo = 0.0;
        let mut hi = 1e-3;
        while self.eval_d2(hi) < 0.0 {
            lo = hi;
            hi *= 2.0;
            if hi > 1e12 {
                return Err(Error::InvalidParameter {
                    name: "kernel",
                    reason: "G'' never becomes nonnegative; kernel is not integrable".into(),
                });
            }
        }
        while hi - lo > BISECTION_TOL {
            let mid = 0.5 * (lo + hi);
            if self.eval_d2(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// Returns `lambda` and the best constant `c` with `G'' <= -c` on
    /// `[-inner_radius, inner_radius]`, which must lie strictly inside `(-lambda, lambda)`.
    pub fn concavity_interval(&self, inner_radius: f64) -> Result<ConcavityInterval> {
        let lambda = self.concavity_radius()?;
        if !(inner_radius >= 0.0 && inner_radius < lambda) {
            return Err(Error::InvalidParameter {
                name: "inner_radius",
                reason: format!("must lie in [0, {lambda}), got {inner_radius}"),
            });
        }
        let max_d2 = match self.form {
            // G'' is increasing on [0, lambda] for the Gaussian.
            KernelForm::Gaussian { .. } => self.eval_d2(inner_radius),
            KernelForm::Custom(_) => {
                let samples = 2000;
                (0..=samples)
                    .map(|k| self.eval_d2(inner_radius * k as f64 / samples as f64))
                    .fold(f64::NEG_INFINITY, f64::max)
            }
        };
        Ok(ConcavityInterval {
            lambda,
            c: -max_d2,
            inner_radius,
        })
    }

    /// Smallest `r` (up to bisection tolerance) such that `|G|` and `|G'|`
    /// stay below `tol` for `|x| >= r`. Assumes monotone tails.
    pub fn decay_radius(&self, tol: f64) -> f64 {
        let big = |x: f64| self.eval(x).abs().max(self.eval_d1(x).abs()) > tol;
        let mut lo = 0.0;
        let mut hi = 1.0;
        while big(hi) {
            lo = hi;
            hi *= 2.0;
            if hi > 1e12 {
                return f64::INFINITY;
            }
        }
        // The tail test is monotone only beyond the first crossing from above.
        while hi - lo > 1e-9 * hi.max(1.0) {
            let mid = 0.5 * (lo + hi);
            if big(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        hi
    }
}

impl Default for InteractionKernel {
    fn default() -> Self {
        Self::gaussian()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const SQRT_PI: f64 = 1.772_453_850_905_516;

    #[derive(Debug)]
    struct Lorentzian;

    // G(x) = 1 / (pi (1 + x^2)); concave for |x| < 1/sqrt(3), mass 1.
    impl KernelProfile for Lorentzian {
        fn value(&self, x: f64) -> f64 {
            1.0 / (PI * (1.0 + x * x))
        }
        fn d1(&self, x: f64) -> f64 {
            -2.0 * x / (PI * (1.0 + x * x).powi(2))
        }
        fn d2(&self, x: f64) -> f64 {
            (6.0 * x * x - 2.0) / (PI * (1.0 + x * x).powi(3))
        }
    }

    #[derive(Debug)]
    struct HeavyTail;

    impl KernelProfile for HeavyTail {
        fn value(&self, x: f64) -> f64 {
            1.0 / (1.0 + x.abs())
        }
        fn d1(&self, x: f64) -> f64 {
            -x.signum() / (1.0 + x.abs()).powi(2)
        }
        fn d2(&self, x: f64) -> f64 {
            2.0 / (1.0 + x.abs()).powi(3)
        }
    }

    #[test]
    fn gaussian_values() {
        let g = InteractionKernel::gaussian();
        assert!((g.eval(0.0) - 0.564_189_583_547_756_3).abs() < 1e-15);
        assert!((g.eval(1.0) - 0.207_553_748_710_297_8).abs() < 1e-15);
        assert_eq!(g.eval(-1.0), g.eval(1.0));
    }

    #[test]
    fn gaussian_first_derivative() {
        let g = InteractionKernel::gaussian();
        assert_eq!(g.eval_d1(0.0), 0.0);
        assert!((g.eval_d1(1.0) + 0.415_107_497_420_595_6).abs() < 1e-15);
        assert!((g.eval_d1(-1.0) - 0.415_107_497_420_595_6).abs() < 1e-15);
    }

    #[test]
    fn gaussian_second_derivative() {
        let g = InteractionKernel::gaussian();
        assert!((g.eval_d2(0.0) + 2.0 / SQRT_PI).abs() < 1e-15);
        assert!(g.eval_d2(std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        // (4x^2 - 2) e^{-x^2} / sqrt(pi) at x = 2, evaluated by hand.
        let expected = 14.0 * (-4.0f64).exp() / SQRT_PI;
        assert!((g.eval_d2(2.0) - expected).abs() < 1e-15);
        assert!((expected - 0.144_6).abs() < 1e-4);
    }

    #[test]
    fn gaussian_concavity() {
        let g = InteractionKernel::gaussian();
        let lambda = g.concavity_radius().unwrap();
        assert!((lambda - 0.707_106_781_186_547_6).abs() < 1e-15);

        let half = g.concavity_interval(0.5).unwrap();
        let expected = -(4.0 * 0.25 - 2.0) * (-0.25f64).exp() / SQRT_PI;
        assert!((half.c - expected).abs() < 1e-14);
        assert!((half.c - 0.4394).abs() < 1e-4);
        // Brute-force minimum of |G''| over the interval agrees.
        let brute = (0..=10_000)
            .map(|k| -g.eval_d2(-0.5 + k as f64 * 1e-4))
            .fold(f64::INFINITY, f64::min);
        assert!((brute - half.c).abs() < 1e-12);

        let zero = g.concavity_interval(0.0).unwrap();
        assert!((zero.c - 2.0 / SQRT_PI).abs() < 1e-15);

        assert!(g.concavity_interval(0.8).is_err());
    }

    #[test]
    fn l1_norms() {
        let g = InteractionKernel::gaussian();
        assert!((g.l1_norm().unwrap() - 1.0).abs() < 1e-15);
        let g2 = InteractionKernel::scaled_gaussian(2.0 / SQRT_PI, 1.0).unwrap();
        assert!((g2.l1_norm().unwrap() - 2.0).abs() < 1e-14);
        assert!((g.l1_norm_quadrature().unwrap() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn custom_kernel_uses_bisection_and_quadrature() {
        let k = InteractionKernel::custom(Arc::new(Lorentzian));
        let lambda = k.concavity_radius().unwrap();
        assert!((lambda - 1.0 / 3f64.sqrt()).abs() < 1e-9);
        assert!((k.l1_norm().unwrap() - 1.0).abs() < 1e-10);
        let ci = k.concavity_interval(0.3).unwrap();
        assert!((ci.c + k.eval_d2(0.3)).abs() < 1e-12);
    }

    #[test]
    fn divergent_and_convex_kernels_fail() {
        let k = InteractionKernel::custom(Arc::new(HeavyTail));
        assert!(k.l1_norm().is_err());
        assert!(matches!(k.concavity_radius(), Err(Error::NotConcaveAtOrigin { .. })));
    }

    #[test]
    fn by_name() {
        assert!(InteractionKernel::by_name("gaussian", None, None).is_ok());
        let k = InteractionKernel::by_name("gaussian", Some(1.0), Some(2.0)).unwrap();
        assert!((k.l1_norm().unwrap() - 2.0 * SQRT_PI).abs() < 1e-12);
        assert!(InteractionKernel::by_name("newtonian", None, None).is_err());
    }

    #[test]
    fn decay_radius_bounds_tail() {
        let g = InteractionKernel::gaussian();
        let r = g.decay_radius(1e-16);
        assert!(g.eval(r).abs() <= 1e-16 && g.eval_d1(r).abs() <= 1e-16);
        assert!(g.eval_d1(r - 0.01).abs() > 1e-16);
    }

    #[test]
    fn sign_structure() {
        let g = InteractionKernel::gaussian();
        let lambda = std::f64::consts::FRAC_1_SQRT_2;
        for k in 1..=10_000 {
            let x = k as f64 * 1e-3;
            assert!(g.eval(x) >= 0.0);
            assert!(g.eval_d1(x) < 0.0, "G'({x})");
            if x < lambda - 1e-12 {
                assert!(g.eval_d2(x) < 0.0);
            } else if x > lambda + 1e-12 {
                assert!(g.eval_d2(x) > 0.0);
            }
        }
    }

    #[test]
    fn finite_differences_match_derivatives() {
        let g = InteractionKernel::gaussian();
        let h = 1e-5;
        for k in 0..=1000 {
            let x = -5.0 + k as f64 * 0.01;
            let fd1 = (g.eval(x + h) - g.eval(x - h)) / (2.0 * h);
            let fd2 = (g.eval_d1(x + h) - g.eval_d1(x - h)) / (2.0 * h);
            assert!((fd1 - g.eval_d1(x)).abs() < 1e-8, "G' at {x}");
            assert!((fd2 - g.eval_d2(x)).abs() < 1e-8, "G'' at {x}");
        }
    }

    proptest! {
        #[test]
        fn evenness_and_oddness(x in -50.0f64..50.0) {
            let g = InteractionKernel::gaussian();
            prop_assert_eq!(g.eval(x), g.eval(-x));
            prop_assert_eq!(g.eval_d1(x), -g.eval_d1(-x));
            prop_assert_eq!(g.eval_d2(x), g.eval_d2(-x));
        }
    }
}
