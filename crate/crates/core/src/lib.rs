//! Precoder design and link-level simulation for K-user interference channels
//! with finite-alphabet signaling.
//!
//! The crate covers the full experiment pipeline:
//!
//! - [`scenario`]: experiment description and seeded channel generation,
//!   including symbol-extended (block-diagonal / diagonal) channels.
//! - [`constellation`]: finite-alphabet signal sets, exhaustive vector-symbol
//!   enumeration, error vectors and bit-error weights.
//! - [`alignment`]: closed-form aligned precoder constructions for 3-user
//!   MIMO and SISO channels, the K-user asymptotic construction, column
//!   selection and subspace/rank verification.
//! - [`metrics`]: interference-plus-noise covariances, receiver distance
//!   tables, the objective functions and their weight matrices.
//! - [`optimizer`]: analytic precoder gradients and projected conjugate
//!   gradient descent, plus optimality diagnostics.
//! - [`receivers`]: LMMSE combining and the exhaustive minimum-distance
//!   detector.
//! - [`simulate`]: Monte Carlo BER/SER sweeps with common random numbers,
//!   the alternating min-MSE baseline and error-floor detection.
//! - [`cli`]: config parsing and the command-line front end.

pub mod alignment;
pub mod cli;
pub mod constellation;
pub mod linalg;
pub mod metrics;
pub mod optimizer;
pub mod receivers;
pub mod scenario;
pub mod simulate;

/// Complex scalar used throughout the crate.
pub type C64 = num_complex::Complex<f64>;

/// Crate-wide error type.
///
/// The CLI maps `Validation` to exit code 1 and `Conditioning` to exit
/// code 2; everything else is reported as a generic failure.
#[derive(Debug)]
pub enum Error {
    /// Invalid configuration or arguments (bad shapes, ranges, selections).
    Validation(String),
    /// A required matrix inverse or factorization is too ill-conditioned.
    Conditioning(String),
    /// Vector-symbol enumeration would exceed the configured cap.
    Capacity { requested: usize, cap: usize },
    /// A construction is infeasible for the requested dimensions.
    Infeasible(String),
    /// A distance metric is exactly zero where a positive value is required.
    SingularDistance { user: usize, pair: (usize, usize) },
    /// I/O failure (config or output files).
    Io(std::io::Error),
}

impl std::fmt::Display for Error {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Error::Validation(msg) => write!(f, "validation error: {msg}"),
            Error::Conditioning(msg) => write!(f, "numerical conditioning error: {msg}"),
            Error::Capacity { requested, cap } => write!(
                f,
                "enumeration capacity exceeded: {requested} vector symbols requested, cap is {cap}"
            ),
            Error::Infeasible(msg) => write!(f, "infeasible construction: {msg}"),
            Error::SingularDistance { user, pair } => write!(
                f,
                "singular distance: d[{}][{}] = 0 at receiver {} (degenerate precoder)",
                pair.0, pair.1, user
            ),
            Error::Io(err) => write!(f, "i/o error: {err}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io(err) => Some(err),
            _ => None,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err)
    }
}

pub type Result<T> = std::result::Result<T, Error>;
