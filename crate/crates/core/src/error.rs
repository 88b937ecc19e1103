use std::fmt;

use thiserror::Error;

/// A single invariant violation found while validating a configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct Diagnostic {
    pub field: &'static str,
    pub message: String,
}

impl Diagnostic {
    pub fn new(field: &'static str, message: impl Into<String>) -> Self {
        Self { field, message: message.into() }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

fn join(diags: &[Diagnostic]) -> String {
    diags.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("; ")
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("resolution error: {0}")]
    Resolution(String),

    #[error("invalid tissue volume: {0}")]
    Volume(String),

    #[error("invalid contact program: {0}")]
    Program(String),

    #[error("invalid waveform: {}", join(.0))]
    Waveform(Vec<Diagnostic>),

    #[error("solver did not converge after {iterations} iterations (relative residual {residual:.3e})")]
    Solver { iterations: usize, residual: f64 },

    #[error("sampling error: {0}")]
    Sampling(String),

    #[error("numerical blow-up in compartment {compartment} at t = {time_ms:.4} ms")]
    BlowUp { compartment: usize, time_ms: f64 },

    #[error("calibration error: {0}")]
    Calibration(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    /// Failure inside one cell of a sweep.
    #[error("{cell}: {source}")]
    Cell { cell: String, source: Box<Error> },
}

impl Error {
    pub fn in_cell(self, cell: impl Into<String>) -> Self {
        Error::Cell { cell: cell.into(), source: Box::new(self) }
    }

    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io { context: context.into(), source }
    }

    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::Cell { source, .. } => source.is_numerical(),
            e => matches!(e, Error::Solver { .. } | Error::BlowUp { .. } | Error::Calibration(_)),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
