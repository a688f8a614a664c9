//! Solvers and diagnostics for the one-dimensional aggregation-diffusion
//! equation `rho_t = (rho (eps rho - G * rho)_x)_x` with an attractive,
//! integrable interaction kernel `G`.
//!
//! Two independent discretizations are provided: a positivity-preserving
//! finite-volume scheme ([`fv`]) and a deterministic particle method
//! ([`particles`]). [`toy`] holds the symmetric two-particle reduction and
//! [`diagnostics`] the energy, moment and steady-state machinery.

pub mod density;
pub mod diagnostics;
pub mod error;
pub mod fv;
pub mod io;
pub mod kernel;
pub mod ode;
pub mod particles;
pub mod quadrature;
pub mod toy;

pub use density::{
    wasserstein, Grid, GridDensity, InitialDatum, InitialProfile, PiecewiseLinearCdf, QuantileFunction,
    WassersteinOrder,
};
pub use diagnostics::{DecayFit, DiagnosticsRow, HypothesisReport, SteadyState, SteadyStateOptions};
pub use error::{Error, Result};
pub use fv::{FvConfig, FvRun, FvScheme, FvState};
pub use kernel::{ConcavityInterval, InteractionKernel, KernelProfile};
pub use ode::Rk23Options;
pub use particles::{
    InteractionSum, ParticleConfig, ParticleDensity, ParticleEnsemble, ParticleRun, PressureScaling,
};
pub use toy::{Basin, Equilibrium, Stability, ToyProblem};
