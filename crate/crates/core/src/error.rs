use std::fmt;

use thiserror::Error;

/// One violated invariant found while validating a distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    /// Where the problem is, e.g. `atoms[2].prob`.
    pub location: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.location, self.message)
    }
}

/// Every invariant violation found in a raw distribution.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub(crate) fn push(&mut self, location: impl Into<String>, message: impl Into<String>) {
        self.violations.push(Violation {
            location: location.into(),
            message: message.into(),
        });
    }

    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    pub(crate) fn prefixed(mut self, prefix: &str) -> Self {
        for v in &mut self.violations {
            v.location = format!("{prefix}.{}", v.location);
        }
        self
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum Error {
    /// An argument is outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid distribution: {0}")]
    Validation(ValidationReport),

    /// A proven identity or inequality failed beyond tolerance. This always
    /// indicates a defect in the computation, never bad input.
    #[error("invariant violated: {name} (slack {slack:e}, tolerance {tolerance:e})")]
    InvariantViolation {
        name: String,
        slack: f64,
        tolerance: f64,
    },

    #[error("numeric failure: {0}")]
    Numeric(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
