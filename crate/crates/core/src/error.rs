use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{what}: argument {value} outside domain [{lower}, {upper}]")]
    Domain {
        what: &'static str,
        value: f64,
        lower: f64,
        upper: f64,
    },

    #[error("target value {target} exceeds the attainable maximum {max}")]
    InfeasibleTarget { target: f64, max: f64 },

    #[error("invalid revenue function: {0}")]
    InvalidFunction(String),

    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("{solver} did not converge after {iterations} iterations (gap {gap:e})")]
    NonConvergence {
        solver: &'static str,
        iterations: usize,
        gap: f64,
    },

    #[error("grid enumeration needs {points:e} points, budget is {budget:e}")]
    BudgetExceeded { points: f64, budget: f64 },

    #[error("quadrature did not settle: {nodes} nodes, last change {change:e}")]
    Quadrature { nodes: usize, change: f64 },

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(what: &'static str, value: f64, lower: f64, upper: f64) -> Self {
        Error::Domain {
            what,
            value,
            lower,
            upper,
        }
    }
}
