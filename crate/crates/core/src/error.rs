use thiserror::Error;

/// Errors raised by the laboratory.
///
/// The variants map onto the CLI exit codes: input problems are configuration
/// errors, `Capacity` is a capacity error, `Inadmissible` flags a coefficient
/// system that fails the determinant conditions, and the numeric variants
/// cover solver failures.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Input(String),

    #[error("capacity exceeded: {0}")]
    Capacity(String),

    #[error("singular system: |det| = {det:e} below {tol:e}")]
    Singular { det: f64, tol: f64 },

    #[error("inadmissible coefficient system: kappa_star = {kappa_star}")]
    Inadmissible { kappa_star: f64 },

    #[error("degenerate margin: sigma = {sigma:e} is below {floor:e}")]
    DegenerateMargin { sigma: f64, floor: f64 },

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("malformed data: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn input<S: Into<String>>(msg: S) -> Error {
    Error::Input(msg.into())
}
