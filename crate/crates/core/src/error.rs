use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// An argument had the wrong length for the spec or grid it was used with.
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },
    /// `d^2 M / dU^2` was singular at the given point of the Newton path.
    SingularHessian {
        u: Vec<f64>,
        l: Vec<f64>,
    },
    /// Newton iteration exhausted its budget; `best` is the iterate with the
    /// smallest residual seen.
    NotConverged {
        best: Vec<f64>,
        residual_norm: f64,
        iterations: usize,
    },
    /// A potential or coupling failed its construction-time self-consistency
    /// checks.
    InvalidSpec(String),
    InvalidGrid(String),
    InvalidArgument(String),
    ComponentOutOfRange {
        comp: usize,
        components: usize,
    },
    NonFinite(&'static str),
    /// `det L` fell below the invertibility threshold at the listed nodes.
    SingularL {
        nodes: Vec<usize>,
        min_abs_det: f64,
    },
    /// A nodal monotonicity margin (e.g. `c - dx(lambda)` for the Burgers
    /// dual) was violated.
    InvertibilityMargin {
        node: usize,
        value: f64,
        margin: f64,
    },
    /// The requested final time is too close to the first characteristic
    /// crossing.
    ShockGuard {
        t_max: f64,
        t_shock: f64,
        guard: f64,
    },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::DimensionMismatch {
                context,
                expected,
                found,
            } => write!(f, "{context}: expected length {expected}, found {found}"),
            Error::SingularHessian { u, l } => {
                write!(f, "singular d2M/dU2 at U = {u:?}, L = {l:?}")
            }
            Error::NotConverged {
                residual_norm,
                iterations,
                ..
            } => write!(
                f,
                "implicit solve did not converge after {iterations} iterations (residual {residual_norm:e})"
            ),
            Error::InvalidSpec(msg) => write!(f, "invalid potential/coupling: {msg}"),
            Error::InvalidGrid(msg) => write!(f, "invalid grid: {msg}"),
            Error::InvalidArgument(msg) => write!(f, "invalid argument: {msg}"),
            Error::ComponentOutOfRange { comp, components } => {
                write!(f, "component {comp} out of range for a {components}-component field")
            }
            Error::NonFinite(what) => write!(f, "non-finite value in {what}"),
            Error::SingularL { nodes, min_abs_det } => write!(
                f,
                "matrix L = cI + grad(lambda) + grad(lambda)^T is singular at {} node(s) (first {:?}, min |det| {min_abs_det:e})",
                nodes.len(),
                nodes.first()
            ),
            Error::InvertibilityMargin {
                node,
                value,
                margin,
            } => write!(
                f,
                "invertibility margin violated at node {node}: {value} < {margin}"
            ),
            Error::ShockGuard {
                t_max,
                t_shock,
                guard,
            } => write!(
                f,
                "t_max = {t_max} is within the guard {guard} of the shock time {t_shock}"
            ),
        }
    }
}

impl core::error::Error for Error {}
