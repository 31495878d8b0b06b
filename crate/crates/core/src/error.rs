use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A parameter or argument fell outside the domain of the operation.
    #[error("{name} = {value} violates {constraint}")]
    Domain {
        name: &'static str,
        value: f64,
        constraint: &'static str,
    },

    /// Adaptive quadrature exhausted its subdivision budget.
    #[error(
        "quadrature did not converge{context}: value {value:e}, error estimate {error_estimate:e} after {evaluations} evaluations"
    )]
    NonConvergence {
        value: f64,
        error_estimate: f64,
        evaluations: usize,
        context: String,
    },

    /// The integrand returned NaN or an infinity at an interior point.
    #[error("integrand is not finite at {abscissa:e} (value {value}){context}")]
    NonFiniteIntegrand {
        abscissa: f64,
        value: f64,
        context: String,
    },

    #[error("no sign change found: {0}")]
    NoSignChange(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("invalid configuration: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn domain(name: &'static str, value: f64, constraint: &'static str) -> Self {
        Error::Domain {
            name,
            value,
            constraint,
        }
    }

    /// Appends caller context (parameter values, identity name) to quadrature errors.
    pub fn with_context(self, extra: impl AsRef<str>) -> Self {
        let extra = extra.as_ref();
        match self {
            Error::NonConvergence {
                value,
                error_estimate,
                evaluations,
                context,
            } => Error::NonConvergence {
                value,
                error_estimate,
                evaluations,
                context: format!("{context} [{extra}]"),
            },
            Error::NonFiniteIntegrand {
                abscissa,
                value,
                context,
            } => Error::NonFiniteIntegrand {
                abscissa,
                value,
                context: format!("{context} [{extra}]"),
            },
            other => other,
        }
    }

    pub fn is_non_convergence(&self) -> bool {
        matches!(self, Error::NonConvergence { .. })
    }
}

/// Validates a finite real strictly above `bound`.
pub(crate) fn check_gt(name: &'static str, value: f64, bound: f64, constraint: &'static str) -> Result<f64> {
    if value.is_finite() && value > bound {
        Ok(value)
    } else {
        Err(Error::domain(name, value, constraint))
    }
}

/// Validates a probability in the open unit interval.
pub(crate) fn check_open_unit(name: &'static str, value: f64) -> Result<f64> {
    if value > 0.0 && value < 1.0 {
        Ok(value)
    } else {
        Err(Error::domain(name, value, "0 < p < 1"))
    }
}
