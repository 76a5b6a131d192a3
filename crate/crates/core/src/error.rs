use thiserror::Error;

/// Failures reported by the domain, field, flow and certificate operations.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("target spacing {spacing} exceeds the smallest patch radius {min_radius}")]
    SpacingTooCoarse { spacing: f64, min_radius: f64 },

    #[error("ball of radius {delta} misses the boundary (|d(P)| = {distance})")]
    BallMissesBoundary { distance: f64, delta: f64 },

    #[error("degenerate direction combination (|sum| = {norm:e})")]
    DegenerateCombination { norm: f64 },

    #[error("boundary point {index} lies in no quarter-radius patch ball")]
    CoverGap { index: usize },

    #[error("fixed point did not converge after {iterations} iterations (last step {last_step:e})")]
    NoConvergence { iterations: usize, last_step: f64 },

    #[error("point too close to the boundary for a finite-difference gradient (rho = {rho:e}, step = {step:e})")]
    TooCloseToBoundary { rho: f64, step: f64 },

    #[error("collar too thin: point at signed distance {distance:e} with |rho| < {required:e} lies outside the field collar")]
    CollarTooThin { distance: f64, required: f64 },

    #[error("adaptive step underflow at t = {t:e} (h = {h:e})")]
    StepUnderflow { t: f64, h: f64 },

    #[error("could not bracket level {target:e} within time horizon {horizon:e}")]
    BracketFailure { target: f64, horizon: f64 },

    #[error("rho(x) = {rho:e} lies outside the band [0, 3 eps] for eps = {eps:e}")]
    OutOfBand { rho: f64, eps: f64 },

    #[error("degenerate level set: |grad rho| = {grad:e} at a refined vertex")]
    DegenerateLevel { grad: f64 },

    #[error("point is outside the domain of the map (rho = {rho:e})")]
    OutsideDomain { rho: f64 },

    #[error("root bracket failure in map inversion")]
    RootBracketFailure,

    #[error("flood fill found no complement components")]
    ComponentDetectionFailure,

    #[error("level {level:e} lies outside the flow band (-{band:e}, {band:e})")]
    LevelTimeOutOfBand { level: f64, band: f64 },

    #[error("angular jump {angle} rad between carrier vertices {index} and its successor")]
    JumpTooLarge { index: usize, angle: f64 },

    #[error("spherical image of triangle {index} has diameter {diameter} rad")]
    TriangleTooCoarse { index: usize, diameter: f64 },

    #[error("degree residual {residual} exceeds the rounding gate")]
    DegreeRejected { residual: f64 },

    #[error("non-manifold mesh: edge ({0}, {1}) has {2} incident faces")]
    NonManifoldMesh(usize, usize, usize),

    #[error("complement component {component} is thinner than two grid cells")]
    ResolutionTooCoarse { component: usize },

    #[error("{0}")]
    NotC0(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::InvalidInput(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
