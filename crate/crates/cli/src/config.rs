//! Declarative experiment configuration (TOML) and its validation.

use std::fmt;
use std::path::{Path, PathBuf};

use aggdiff_core::{Grid, InitialDatum, InteractionKernel, ParticleConfig, PressureScaling, Rk23Options};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverChoice {
    Fv,
    Particles,
    Both,
}

impl SolverChoice {
    pub fn runs_fv(self) -> bool {
        matches!(self, Self::Fv | Self::Both)
    }

    pub fn runs_particles(self) -> bool {
        matches!(self, Self::Particles | Self::Both)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceChoice {
    #[default]
    None,
    ComputedSteadyState,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSpec {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amplitude: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width: Option<f64>,
}

impl Default for KernelSpec {
    fn default() -> Self {
        Self {
            name: "gaussian".into(),
            amplitude: None,
            width: None,
        }
    }
}

impl KernelSpec {
    pub fn build(&self) -> aggdiff_core::Result<InteractionKernel> {
        InteractionKernel::by_name(&self.name, self.amplitude, self.width)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialSpec {
    /// `amplitude * (1 - curvature x^2)_+`.
    Parabola {
        amplitude: f64,
        curvature: f64,
        #[serde(default)]
        center: f64,
    },
    UniformBox {
        radius: f64,
        #[serde(default)]
        center: f64,
    },
    OscillatingGaussian {
        delta: f64,
        #[serde(default)]
        center: f64,
    },
}

impl InitialSpec {
    pub fn datum(&self) -> InitialDatum {
        match *self {
            Self::Parabola {
                amplitude,
                curvature,
                center,
            } => InitialDatum::parabola(amplitude, curvature).centered_at(center),
            Self::UniformBox { radius, center } => InitialDatum::uniform_box(radius).centered_at(center),
            Self::OscillatingGaussian { delta, center } => {
                InitialDatum::oscillating_gaussian(delta).centered_at(center)
            }
        }
    }
}

/// Particle pressure coefficient: `continuum` is consistent with the
/// finite-volume solver, `displayed` doubles it.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PressureChoice {
    #[default]
    Continuum,
    Displayed,
}

impl From<PressureChoice> for PressureScaling {
    fn from(p: PressureChoice) -> Self {
        match p {
            PressureChoice::Continuum => Self::Continuum,
            PressureChoice::Displayed => Self::Displayed,
        }
    }
}

fn default_particles() -> usize {
    200
}

fn default_cfl() -> f64 {
    0.4
}

fn default_tol() -> f64 {
    1e-6
}

fn default_quantile_nodes() -> usize {
    4000
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed_label: String,
    pub solver: SolverChoice,
    #[serde(default)]
    pub kernel: KernelSpec,
    pub epsilon: f64,
    pub initial: InitialSpec,
    pub domain: [f64; 2],
    pub dx: f64,
    /// Number of particles.
    #[serde(default = "default_particles")]
    pub n: usize,
    pub t_end: f64,
    #[serde(default)]
    pub snapshot_times: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostics_dt: Option<f64>,
    #[serde(default)]
    pub reference: ReferenceChoice,
    pub output_dir: PathBuf,
    #[serde(default = "default_cfl")]
    pub cfl: f64,
    /// Absolute and relative tolerance of the particle integrator.
    #[serde(default = "default_tol")]
    pub tol: f64,
    /// Particle interaction radius; all pairs when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cutoff: Option<f64>,
    #[serde(default = "default_quantile_nodes")]
    pub quantile_nodes: usize,
    #[serde(default)]
    pub pressure: PressureChoice,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError {
            line: e.span().map(|s| line_of(text, s.start)),
            message: e.message().to_owned(),
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn grid(&self) -> aggdiff_core::Result<Grid> {
        Grid::new(self.domain[0], self.domain[1], self.dx)
    }

    pub fn particle_config(&self) -> ParticleConfig {
        let mut p = ParticleConfig::new(self.epsilon, self.t_end);
        p.tolerances = Rk23Options {
            tol_abs: self.tol,
            tol_rel: self.tol,
            ..Rk23Options::default()
        };
        p.cutoff = self.cutoff;
        p.scaling = self.pressure.into();
        p
    }
}

/// A config file that could not be parsed.
#[derive(Clone, Debug, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// One failed check, naming the offending field.
#[derive(Clone, Debug, PartialEq)]
pub struct Violation {
    pub field: &'static str,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

/// All consistency checks; an empty list means the config can be run.
pub fn validate_config(cfg: &ExperimentConfig) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut fail = |field: &'static str, message: String| out.push(Violation { field, message });

    if !(cfg.epsilon.is_finite() && cfg.epsilon >= 0.0) {
        fail("epsilon", format!("must be finite and nonnegative, got {}", cfg.epsilon));
    }
    let [left, right] = cfg.domain;
    let domain_ok = left.is_finite() && right.is_finite() && left < right;
    if !domain_ok {
        fail("domain", format!("need x_left < x_right, got [{left}, {right}]"));
    }
    let dx_ok = cfg.dx.is_finite() && cfg.dx > 0.0;
    if !dx_ok {
        fail("dx", format!("must be positive, got {}", cfg.dx));
    } else if domain_ok && cfg.grid().is_err() {
        fail("dx", format!("{} does not divide [{left}, {right}] evenly", cfg.dx));
    }
    if cfg.solver.runs_particles() && cfg.n < 2 {
        fail("n", format!("need at least 2 particles, got {}", cfg.n));
    }
    if !(cfg.t_end.is_finite() && cfg.t_end > 0.0) {
        fail("t_end", format!("must be positive, got {}", cfg.t_end));
    }
    if let Some(s) = cfg.snapshot_times.iter().find(|s| !(**s >= 0.0 && **s <= cfg.t_end)) {
        fail("snapshot_times", format!("{s} lies outside [0, t_end = {}]", cfg.t_end));
    }
    if let Some(d) = cfg.diagnostics_dt {
        if !(d.is_finite() && d > 0.0) {
            fail("diagnostics_dt", format!("must be positive, got {d}"));
        }
    }
    if !(cfg.cfl > 0.0 && cfg.cfl <= 1.0) {
        fail("cfl", format!("must lie in (0, 1], got {}", cfg.cfl));
    }
    if !(cfg.tol.is_finite() && cfg.tol > 0.0) {
        fail("tol", format!("must be positive, got {}", cfg.tol));
    }
    if let Some(c) = cfg.cutoff {
        if !(c.is_finite() && c > 0.0) {
            fail("cutoff", format!("must be positive, got {c}"));
        }
    }
    if cfg.quantile_nodes < 2 {
        fail("quantile_nodes", format!("need at least 2, got {}", cfg.quantile_nodes));
    }
    if let Err(e) = cfg.kernel.build() {
        fail("kernel", e.to_string());
    }
    match cfg.initial.datum().support() {
        Err(e) => fail("initial", e.to_string()),
        Ok((a, b)) if domain_ok => {
            if a < left {
                fail("domain", format!("x_left = {left} cuts the initial support, which starts at {a}"));
            }
            if b > right {
                fail("domain", format!("x_right = {right} cuts the initial support, which ends at {b}"));
            }
        }
        Ok(_) => {}
    }
    out
}

/// Reads and parses a config file, or the built-in preset of that name.
pub fn load_config(source: &str) -> anyhow::Result<ExperimentConfig> {
    let path = Path::new(source);
    let text = if path.exists() {
        std::fs::read_to_string(path)?
    } else if let Some(text) = crate::presets::preset(source) {
        text.to_owned()
    } else {
        anyhow::bail!(
            "`{source}` is neither a file nor a preset (presets: {})",
            crate::presets::names().join(", ")
        );
    };
    ExperimentConfig::from_toml(&text).map_err(|e| anyhow::anyhow!("{source}: {e}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
solver = "fv"
epsilon = 0.5
domain = [-2.0, 2.0]
dx = 0.01
t_end = 1.0
output_dir = "out"

[initial]
type = "parabola"
amplitude = 1.125
curvature = 2.25
"#;

    #[test]
    fn defaults_fill_in() {
        let c = ExperimentConfig::from_toml(BASE).unwrap();
        assert_eq!(c.kernel.name, "gaussian");
        assert_eq!(c.n, 200);
        assert_eq!(c.reference, ReferenceChoice::None);
        assert_eq!(c.pressure, PressureChoice::Continuum);
        assert!(validate_config(&c).is_empty());
    }

    #[test]
    fn round_trip() {
        let c = ExperimentConfig::from_toml(BASE).unwrap();
        assert_eq!(ExperimentConfig::from_toml(&c.to_toml()).unwrap(), c);
    }

    #[test]
    fn parse_errors_carry_lines() {
        let bad = BASE.replace("dx = 0.01", "dx = \"small\"");
        let e = ExperimentConfig::from_toml(&bad).unwrap_err();
        assert_eq!(e.line, Some(5));
        let unknown = format!("{BASE}\n[extra]\nx = 1\n");
        assert!(ExperimentConfig::from_toml(&unknown).is_err());
    }

    #[test]
    fn zero_dx_is_one_violation() {
        let mut c = ExperimentConfig::from_toml(BASE).unwrap();
        c.dx = 0.0;
        let v = validate_config(&c);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].field, "dx");
    }

    #[test]
    fn uneven_dx() {
        let mut c = ExperimentConfig::from_toml(BASE).unwrap();
        c.dx = 0.03;
        let v = validate_config(&c);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].field, "dx");
    }

    #[test]
    fn support_outside_domain() {
        let mut c = ExperimentConfig::from_toml(BASE).unwrap();
        c.domain = [-0.5, 2.0];
        let v = validate_config(&c);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].field, "domain");
        assert!(v[0].message.contains("x_left"));
    }

    #[test]
    fn several_violations() {
        let mut c = ExperimentConfig::from_toml(BASE).unwrap();
        c.solver = SolverChoice::Both;
        c.n = 1;
        c.epsilon = -1.0;
        c.snapshot_times = vec![0.5, 3.0];
        let fields: Vec<_> = validate_config(&c).iter().map(|v| v.field).collect();
        assert_eq!(fields, vec!["epsilon", "n", "snapshot_times"]);
    }
}
