use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use super::{Grid, GridDensity};
use crate::error::{check_positive, Error, Result};

/// Level below which the oscillating Gaussian datum is treated as vacuum
/// when deciding whether a domain is large enough.
pub const OSCILLATING_CUTOFF: f64 = 1e-14;

#[derive(Clone)]
pub enum InitialProfile {
    /// `amplitude * (1 - curvature x^2)_+`.
    Parabola { amplitude: f64, curvature: f64 },
    /// `1 / (2 radius)` on `[-radius, radius]`.
    UniformBox { radius: f64 },
    /// `2 delta / (sqrt(pi) (1 + exp(-1/delta^2))) exp(-(delta x)^2) cos^2(x)`.
    OscillatingGaussian { delta: f64 },
    /// Arbitrary density vanishing outside `support`.
    Custom {
        density: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
        support: (f64, f64),
    },
}

impl fmt::Debug for InitialProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Parabola { amplitude, curvature } => f
                .debug_struct("Parabola")
                .field("amplitude", amplitude)
                .field("curvature", curvature)
                .finish(),
            Self::UniformBox { radius } => f.debug_struct("UniformBox").field("radius", radius).finish(),
            Self::OscillatingGaussian { delta } => {
                f.debug_struct("OscillatingGaussian").field("delta", delta).finish()
            }
            Self::Custom { support, .. } => f.debug_struct("Custom").field("support", support).finish(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct InitialDatum {
    pub profile: InitialProfile,
    /// Translation applied after construction.
    pub center: f64,
}

const GAUSS3_NODE: f64 = 0.774_596_669_241_483_4; // sqrt(3/5)
const GAUSS3_OUTER: f64 = 5.0 / 9.0;
const GAUSS3_INNER: f64 = 8.0 / 9.0;

impl InitialDatum {
    pub fn new(profile: InitialProfile) -> Self {
        Self { profile, center: 0.0 }
    }

    pub fn centered_at(mut self, center: f64) -> Self {
        self.center = center;
        self
    }

    pub fn parabola(amplitude: f64, curvature: f64) -> Self {
        Self::new(InitialProfile::Parabola { amplitude, curvature })
    }

    pub fn uniform_box(radius: f64) -> Self {
        Self::new(InitialProfile::UniformBox { radius })
    }

    pub fn oscillating_gaussian(delta: f64) -> Self {
        Self::new(InitialProfile::OscillatingGaussian { delta })
    }

    fn validate(&self) -> Result<()> {
        match &self.profile {
            InitialProfile::Parabola { amplitude, curvature } => {
                check_positive("amplitude", *amplitude)?;
                check_positive("curvature", *curvature)
            }
            InitialProfile::UniformBox { radius } => check_positive("radius", *radius),
            InitialProfile::OscillatingGaussian { delta } => check_positive("delta", *delta),
            InitialProfile::Custom { support: (a, b), .. } => {
                if a < b {
                    Ok(())
                } else {
                    Err(Error::InvalidParameter {
                        name: "support",
                        reason: format!("empty support [{a}, {b}]"),
                    })
                }
            }
        }
    }

    /// Point value of the profile at `x` (after translation).
    pub fn value(&self, x: f64) -> f64 {
        let y = x - self.center;
        match &self.profile {
            InitialProfile::Parabola { amplitude, curvature } => {
                (amplitude * (1.0 - curvature * y * y)).max(0.0)
            }
            InitialProfile::UniformBox { radius } => {
                if y.abs() <= *radius {
                    0.5 / radius
                } else {
                    0.0
                }
            }
            InitialProfile::OscillatingGaussian { delta } => {
                oscillating_prefactor(*delta) * (-(delta * y).powi(2)).exp() * y.cos().powi(2)
            }
            InitialProfile::Custom { density, support } => {
                if y < support.0 || y > support.1 {
                    0.0
                } else {
                    density(y).max(0.0)
                }
            }
        }
    }

    /// Support (or effective support above [`OSCILLATING_CUTOFF`]) after translation.
    pub fn support(&self) -> Result<(f64, f64)> {
        self.validate()?;
        let (a, b) = match &self.profile {
            InitialProfile::Parabola { curvature, .. } => {
                let r = 1.0 / curvature.sqrt();
                (-r, r)
            }
            InitialProfile::UniformBox { radius } => (-radius, *radius),
            InitialProfile::OscillatingGaussian { delta } => {
                let p = oscillating_prefactor(*delta);
                let r = if p > OSCILLATING_CUTOFF {
                    (p / OSCILLATING_CUTOFF).ln().sqrt() / delta
                } else {
                    0.0
                };
                (-r, r)
            }
            InitialProfile::Custom { support, .. } => *support,
        };
        Ok((a + self.center, b + self.center))
    }

    /// Exact-support interval used for quadrature (the whole line for the
    /// oscillating profile, which is smooth everywhere).
    fn quadrature_support(&self) -> Result<(f64, f64)> {
        match self.profile {
            InitialProfile::OscillatingGaussian { .. } => Ok((f64::NEG_INFINITY, f64::INFINITY)),
            _ => self.support(),
        }
    }

    /// Unnormalized cell averages by 3-point Gauss quadrature on each cell's
    /// intersection with the support.
    pub fn cell_averages(&self, grid: &Grid) -> Result<Vec<f64>> {
        let (s_left, s_right) = self.support()?;
        if !grid.contains(s_left, s_right) {
            return Err(Error::DomainTooSmall {
                left: grid.x_left(),
                right: grid.x_right(),
                support_left: s_left,
                support_right: s_right,
            });
        }
        let (q_left, q_right) = self.quadrature_support()?;
        let dx = grid.dx();
        Ok((0..grid.len())
            .map(|i| {
                let lo = grid.edge(i).max(q_left);
                let hi = grid.edge(i + 1).min(q_right);
                if hi <= lo {
                    return 0.0;
                }
                let mid = 0.5 * (lo + hi);
                let half = 0.5 * (hi - lo);
                let integral = half
                    * (GAUSS3_OUTER * self.value(mid - GAUSS3_NODE * half)
                        + GAUSS3_INNER * self.value(mid)
                        + GAUSS3_OUTER * self.value(mid + GAUSS3_NODE * half));
                integral / dx
            })
            .collect())
    }

    /// Cell averages renormalized to unit mass.
    pub fn build(&self, grid: &Grid) -> Result<GridDensity> {
        let values = self.cell_averages(grid)?;
        GridDensity::new(*grid, values)?.normalized(1.0)
    }
}

pub(crate) fn oscillating_prefactor(delta: f64) -> f64 {
    2.0 * delta / (PI.sqrt() * (1.0 + (-1.0 / (delta * delta)).exp()))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Composite Simpson rule, independent of the Gauss path.
    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let n = n + n % 2;
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for k in 1..n {
            s += if k % 2 == 1 { 4.0 } else { 2.0 } * f(a + k as f64 * h);
        }
        s * h / 3.0
    }

    #[test]
    fn reference_parabola_has_unit_mass() {
        // a (4/3) c with c = 1 / sqrt(b).
        let (a, b): (f64, f64) = (93.0 / 8.0, 961.0 / 4.0);
        let c: f64 = 2.0 / 31.0;
        assert!((1.0 / b.sqrt() - c).abs() < 1e-15);
        assert!((a * (2.0 * c - 2.0 / 3.0 * b * c.powi(3)) - 1.0).abs() < 1e-14);

        let datum = InitialDatum::parabola(a, b);
        let (l, r) = datum.support().unwrap();
        assert!((l + c).abs() < 1e-15 && (r - c).abs() < 1e-15);
        let grid = Grid::new(-0.1, 0.1, 1e-4).unwrap();
        let raw: f64 = datum.cell_averages(&grid).unwrap().iter().sum::<f64>() * grid.dx();
        assert!((raw - 1.0).abs() < 1e-8);
        let rho = datum.build(&grid).unwrap();
        assert!((rho.mass() - 1.0).abs() < 1e-13);
    }

    #[test]
    fn parabola_mass_on_coarse_grid() {
        // Exact clipping at the support edge keeps the mass exact on coarse grids too.
        for (a, b) in [(21.0 / 8.0, 49.0 / 4.0), (9.0 / 8.0, 9.0 / 4.0), (105.0 / 400.0, 0.1225)] {
            let datum = InitialDatum::parabola(a, b);
            let grid = Grid::new(-40.0, 40.0, 0.05).unwrap();
            let raw: f64 = datum.cell_averages(&grid).unwrap().iter().sum::<f64>() * grid.dx();
            assert!((raw - 1.0).abs() < 1e-12, "({a}, {b}) -> {raw}");
        }
    }

    #[test]
    fn uniform_box_cells() {
        let grid = Grid::new(-2.0, 2.0, 0.01).unwrap();
        let rho = InitialDatum::uniform_box(1.0).build(&grid).unwrap();
        for (i, v) in rho.values().iter().enumerate() {
            let x = grid.center(i);
            let expected = if x.abs() < 1.0 { 0.5 } else { 0.0 };
            assert!((v - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn oscillating_gaussian_mass() {
        let delta = 0.05;
        let datum = InitialDatum::oscillating_gaussian(delta);
        let (l, r) = datum.support().unwrap();
        // Oracle: fine Simpson rule over the effective support.
        let oracle = simpson(|x| datum.value(x), l, r, 400_000);
        assert!((oracle - 1.0).abs() < 1e-9);
        let grid = Grid::new(-110.0, 110.0, 0.05).unwrap();
        let raw: f64 = datum.cell_averages(&grid).unwrap().iter().sum::<f64>() * grid.dx();
        assert!((raw - 1.0).abs() < 1e-6);
        assert!((raw - oracle).abs() < 1e-9);
    }

    #[test]
    fn translation_and_errors() {
        let grid = Grid::new(-2.0, 2.0, 0.01).unwrap();
        let rho = InitialDatum::uniform_box(0.5).centered_at(0.7).build(&grid).unwrap();
        assert!((rho.center_of_mass().unwrap() - 0.7).abs() < 1e-12);

        let too_big = InitialDatum::uniform_box(3.0).build(&grid);
        assert!(matches!(too_big, Err(Error::DomainTooSmall { .. })));
        assert!(InitialDatum::parabola(-1.0, 1.0).build(&grid).is_err());
        assert!(InitialDatum::oscillating_gaussian(0.0).build(&grid).is_err());
    }

    #[test]
    fn custom_profile() {
        let datum = InitialDatum::new(InitialProfile::Custom {
            density: Arc::new(|x: f64| 1.0 - x.abs()),
            support: (-1.0, 1.0),
        });
        let grid = Grid::new(-1.0, 1.0, 0.1).unwrap();
        let rho = datum.build(&grid).unwrap();
        assert!((rho.mass() - 1.0).abs() < 1e-14);
        assert!((rho.values()[9] - 0.95).abs() < 1e-12);
    }
}
