use std::fmt;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("frequency grid mismatch: expected {expected} points, found {found}")]
    GridMismatch { expected: usize, found: usize },

    #[error("{what} overflows at bin {bin} (f = {freq_hz} Hz)")]
    Overflow {
        what: &'static str,
        bin: usize,
        freq_hz: f64,
    },

    #[error("{what} is singular at bin {bin} (f = {freq_hz} Hz)")]
    SingularBin {
        what: &'static str,
        bin: usize,
        freq_hz: f64,
    },

    #[error(
        "spectrum carries {fraction:.3e} of its energy in the top 5% of the grid; \
         extend the grid or narrow the filters"
    )]
    Aliasing { fraction: f64 },

    #[error("kernel cannot reach energy threshold {threshold}: precursor holds {precursor:.3e} of the energy")]
    Truncation { threshold: f64, precursor: f64 },

    #[error("block size {p} must exceed channel memory {l}")]
    BlockTooSmall { p: usize, l: usize },

    #[error("matrix is rank deficient (numerical rank {rank} of {cols}, condition estimate {condition:.3e}){hint}")]
    RankDeficient {
        rank: usize,
        cols: usize,
        condition: f64,
        hint: &'static str,
    },

    #[error("{p} observations per block cannot identify {required} unknowns; need P >= (2M+1)*taps")]
    Underdetermined { p: usize, required: usize },

    #[error("linear system is numerically singular (solution growth {growth:.3e})")]
    IllConditioned { growth: f64 },

    #[error("lifted structure violated: {0}")]
    Structure(String),

    #[error(transparent)]
    Parse(#[from] ParseError),

    #[error("malformed data file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A positioned diagnostic from the topology or cable-library parser.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
    pub expected: Vec<String>,
}

impl ParseError {
    pub fn new(line: usize, column: usize, message: impl Into<String>) -> Self {
        Self {
            line,
            column,
            message: message.into(),
            expected: Vec::new(),
        }
    }

    pub fn expecting(mut self, expected: &[&str]) -> Self {
        self.expected = expected.iter().map(|s| s.to_string()).collect();
        self
    }
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.line, self.column, self.message)?;
        if !self.expected.is_empty() {
            write!(f, " (expected one of: {})", self.expected.join(", "))?;
        }
        Ok(())
    }
}

impl std::error::Error for ParseError {}
