use alloc::string::String;

/// Errors raised by the simulation core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid specification: {0}")]
    InvalidSpecification(String),

    /// Trace drifted away from one during a segment; the step is too large.
    #[error("integrator diverged: trace drift {drift:.3e} exceeds {limit:.1e}")]
    IntegratorDivergence { drift: f64, limit: f64 },

    #[error("positivity violated: density matrix has an eigenvalue below {limit:.1e}")]
    PositivityViolation { limit: f64 },

    /// Population at the truncation edge is too large for the Fock cutoff.
    #[error("truncation violated: edge population {population:.3e} exceeds {limit:.1e}")]
    TruncationViolation { population: f64, limit: f64 },

    #[error("classical oscillator left [0, 1]: p = {value}")]
    Instability { value: f64 },

    #[error("sample {index}: {source}")]
    AtSample {
        index: usize,
        #[source]
        source: alloc::boxed::Box<Error>,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidSpecification(msg.into())
    }

    pub(crate) fn at_sample(self, index: usize) -> Self {
        Error::AtSample {
            index,
            source: alloc::boxed::Box::new(self),
        }
    }

    /// The error with any sample-index wrappers removed.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtSample { source, .. } => source.root(),
            other => other,
        }
    }

    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        !matches!(self.root(), Error::InvalidSpecification(_))
    }
}

pub type Result<T> = core::result::Result<T, Error>;
