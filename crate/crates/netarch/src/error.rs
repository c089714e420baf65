//! Crate-wide error type.

use thiserror::Error;

/// Errors produced anywhere in the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// Fewer than two positive-intensity cells: the Venables denominator is zero.
    #[error("degenerate activity grid: fewer than 2 cells with positive intensity")]
    DegenerateGrid,

    /// Case count of zero at a window endpoint makes the growth rate undefined.
    #[error("zero case count at window endpoint (log undefined)")]
    ZeroCases,

    /// Pairwise matrix asymmetric beyond tolerance.
    #[error("asymmetric pairwise matrix: |a[{i}][{j}] - a[{j}][{i}]| = {deviation:e} exceeds tolerance")]
    AsymmetricMatrix { i: usize, j: usize, deviation: f64 },

    /// Percentage change is undefined against a zero baseline.
    #[error("zero baseline value at index {0}")]
    ZeroBaseline(usize),

    /// Edge endpoint not present in the attribute table.
    #[error("unknown node `{0}` in edge records")]
    UnknownNode(String),

    /// Requested embedding dimension exceeds node count.
    #[error("embedding dimension {d} exceeds node count {n}")]
    DimensionTooLarge { d: usize, n: usize },

    /// A solver iterate overflowed; the configuration is ill-conditioned.
    #[error("non-finite value in solver iterate at iteration {0}")]
    NonFinite(usize),

    /// More clusters requested than points available.
    #[error("cannot form {k} clusters from {n} points")]
    TooManyClusters { k: usize, n: usize },

    /// Covariance regularization floor failed to restore positive definiteness.
    #[error("singular covariance in mixture component {0}")]
    SingularCovariance(usize),

    /// Silhouette/Dunn are undefined for a single cluster.
    #[error("fewer than 2 non-empty clusters")]
    SingleCluster,

    /// Every cluster diameter is zero; the Dunn index denominator vanishes.
    #[error("zero maximum cluster diameter")]
    ZeroDiameter,

    /// Per-timestep assignments do not share a node universe.
    #[error("mismatched node sets across timestep assignments: {0}")]
    MismatchedNodes(String),

    /// Not enough observations for the requested test.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// Bad configuration value.
    #[error("config error: {0}")]
    Config(String),

    /// Malformed or inconsistent input data.
    #[error("input error: {0}")]
    Input(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Stable machine-readable kind tag, used by the CLI error line.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::DegenerateGrid => "DegenerateGrid",
            Error::ZeroCases => "ZeroCases",
            Error::AsymmetricMatrix { .. } => "AsymmetricMatrix",
            Error::ZeroBaseline(_) => "ZeroBaseline",
            Error::UnknownNode(_) => "UnknownNode",
            Error::DimensionTooLarge { .. } => "DimensionTooLarge",
            Error::NonFinite(_) => "NonFinite",
            Error::TooManyClusters { .. } => "TooManyClusters",
            Error::SingularCovariance(_) => "SingularCovariance",
            Error::SingleCluster => "SingleCluster",
            Error::ZeroDiameter => "ZeroDiameter",
            Error::MismatchedNodes(_) => "MismatchedNodes",
            Error::InsufficientData(_) => "InsufficientData",
            Error::Config(_) => "ConfigError",
            Error::Input(_) => "InputError",
            Error::Io { .. } => "IoError",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
