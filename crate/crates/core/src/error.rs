use thiserror::Error;

/// Errors raised by the solver library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("point is singular for this map: {0}")]
    Singular(&'static str),

    #[error("argument out of domain: {0}")]
    Domain(String),

    #[error("invalid dimension n = {0} (need n >= 3)")]
    Dimension(usize),

    #[error("grid too small: {nodes} nodes (need at least {min})")]
    GridTooSmall { nodes: usize, min: usize },

    #[error("spectral cutoff {k_max} exceeds what {nodes} nodes can resolve")]
    Truncation { k_max: usize, nodes: usize },

    #[error("unresolved function: tail mass {tail:.3e} exceeds {threshold:.1e}")]
    Aliasing { tail: f64, threshold: f64 },

    #[error("function is negative at node {node} (value {value:.3e})")]
    Negative { node: usize, value: f64 },

    #[error("function vanishes identically")]
    ZeroFunction,

    #[error("unknown curvature profile `{0}`")]
    UnknownProfile(String),

    #[error("invalid profile parameter: {0}")]
    ProfileParameter(String),

    #[error("r0 = {r0} is not a critical point (|h'| = {slope:.3e})")]
    NotCritical { r0: f64, slope: f64 },

    #[error("degenerate flatness fit: h - h(r0) vanishes or changes sign at offset {0:.1e}")]
    DegenerateFit(f64),

    #[error("optimizer did not converge: {0}")]
    NoConvergence(String),

    #[error("singular Jacobian in Newton iteration {iteration}")]
    SingularJacobian { iteration: usize },

    #[error("Lagrange multiplier {0} is not positive")]
    NonPositiveMultiplier(f64),

    #[error("invalid exponent p = {p} (need 1 < p <= {tau})")]
    Exponent { p: f64, tau: f64 },

    #[error("invalid continuation schedule: {0}")]
    Schedule(String),
}

pub type Result<T> = std::result::Result<T, Error>;
