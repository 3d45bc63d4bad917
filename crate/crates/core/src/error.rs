use thiserror::Error;

/// Errors raised by the modeling engines, the optimizer and the experiment runner.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The sinusoidal current normalization `sin(k0 l / 2)` vanishes.
    #[error("singular dipole length {length} m: sin(k0*l/2) = {sine:e}")]
    SingularLength { length: f64, sine: f64 },

    /// Overlapping wires, coincident cells or unsupported orientations.
    #[error("geometry error: {0}")]
    Geometry(String),

    /// A matrix that must be inverted is singular or too ill-conditioned.
    #[error("ill-conditioned {what}: condition estimate {estimate:e}")]
    Conditioning { what: String, estimate: f64 },

    /// Dimensions or indices do not fit together.
    #[error("structural error: {0}")]
    Structural(String),

    /// Invalid configuration value.
    #[error("configuration error: {0}")]
    Configuration(String),

    /// Sherman-Morrison denominator `1 + delta * inv[n, n]` vanishes.
    #[error("singular rank-1 update at index {index}: denominator {denominator}")]
    SingularUpdate { index: usize, denominator: num_complex::Complex64 },

    #[error("failed to parse {source_name}: {message}")]
    Parse { source_name: String, message: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io { path: path.as_ref().display().to_string(), source }
    }
}
