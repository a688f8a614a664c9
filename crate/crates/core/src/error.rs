use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("grid spacing {dx} does not divide the domain [{left}, {right}] evenly")]
    GridMismatch { left: f64, right: f64, dx: f64 },

    #[error("domain [{left}, {right}] does not contain the support [{support_left}, {support_right}]")]
    DomainTooSmall {
        left: f64,
        right: f64,
        support_left: f64,
        support_right: f64,
    },

    #[error("density has mass {mass}, expected {expected}")]
    MassMismatch { mass: f64, expected: f64 },

    #[error("density has zero mass")]
    ZeroMass,

    #[error("kernel is not strictly concave at the origin (G''(0) = {d2_at_zero})")]
    NotConcaveAtOrigin { d2_at_zero: f64 },

    #[error("integral failed to converge: {0}")]
    QuadratureFailed(String),

    #[error("time step {dt} exceeds the stability limit {limit}")]
    CflViolation { dt: f64, limit: f64 },

    #[error("negative density deficit {deficit} at t = {time}")]
    NegativeDensity { deficit: f64, time: f64 },

    #[error("mass {mass} reached the domain boundary at t = {time}")]
    BoundaryLeak { mass: f64, time: f64 },

    #[error("non-finite value encountered at t = {time}")]
    NotFinite { time: f64 },

    #[error("particles are not strictly ordered (index {index})")]
    Unordered { index: usize },

    #[error("step size underflow at t = {time} (dt = {dt}); particles collided")]
    StepUnderflow { time: f64, dt: f64 },

    #[error("toy-model position must be positive, got {0}")]
    NonPositivePosition(f64),

    #[error("not enough points for a decay fit: {found} usable, {required} required")]
    TooFewPoints { found: usize, required: usize },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("i/o error: {0}")]
    Io(String),

    #[error("malformed csv at line {line}: {reason}")]
    Csv { line: usize, reason: String },
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}

pub(crate) fn check_positive(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            reason: format!("must be positive and finite, got {value}"),
        })
    }
}
