use thiserror::Error;

pub type Result<T> = std::result::Result<T, KlError>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KlError {
    /// Argument outside the domain `[0, eta)` (or `(0, eta)` for derivatives).
    #[error("domain error: t = {t} is outside the domain (eta = {eta})")]
    Domain { t: f64, eta: f64 },

    #[error("invalid argument: {0}")]
    Argument(String),

    /// Quadrature or sampling did not reach its target; `partial` is the best
    /// value found, NaN when there is none.
    #[error("numeric error: {message}")]
    Numeric { message: String, partial: f64 },

    /// A hypothesis of a calculus rule failed its numerical check.
    #[error("assumption failed: {0}")]
    Assumption(String),

    /// A stationary point inside the level slice makes `h(s) = +inf`.
    #[error("modulus undefined: {count} stationary point(s) in the slice, largest gap {max_gap}")]
    ModulusUndefined {
        count: usize,
        max_gap: f64,
        points: Vec<Vec<f64>>,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("io error: {0}")]
    Io(String),
}

impl KlError {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        KlError::Argument(msg.into())
    }

    pub(crate) fn numeric(msg: impl Into<String>) -> Self {
        KlError::Numeric {
            message: msg.into(),
            partial: f64::NAN,
        }
    }

    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        KlError::Parse {
            line,
            message: msg.into(),
        }
    }
}

impl From<std::io::Error> for KlError {
    fn from(e: std::io::Error) -> Self {
        KlError::Io(e.to_string())
    }
}
