use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid manifold specification `{0}` (expected circle:R, sphere2:R or torus2:a,b)")]
    ManifoldSpec(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("eps = {eps} must satisfy 0 < eps < i0/2 = {limit}")]
    EpsTooLarge { eps: f64, limit: f64 },
    #[error("Voronoi cell {cell} received no quadrature samples; raise the oversample factor")]
    EmptyCell { cell: usize },
    #[error(
        "point set is not {eps}-dense: covering radius {covering} over the quadrature samples"
    )]
    NotDense { eps: f64, covering: f64 },
    #[error("rho = {rho} must satisfy eps = {eps} < rho < i0/2 = {limit}")]
    RhoOutOfRange { rho: f64, eps: f64, limit: f64 },
    #[error("smoothing radius rho - 2 eps = {0} is not positive")]
    RadiusNonpositive(f64),
    #[error("smoothing radius r = {r} must satisfy 0 < r < i0/2 = {limit}")]
    SmoothingRadius { r: f64, limit: f64 },
    #[error("normalizer theta is not positive at quadrature sample {sample} (value {value})")]
    ThetaNonpositive { sample: usize, value: f64 },
    #[error("unknown eigenfunction label {0}")]
    UnknownMode(String),
    #[error("k = {k} exceeds the number of vertices {n}")]
    KTooLarge { k: usize, n: usize },
    #[error(
        "eigensolver did not converge after {iterations} restarts (worst residual {residual:e})"
    )]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("interval upper end {hi} exceeds the largest resolved eigenvalue {resolved}")]
    IntervalNotResolved { hi: f64, resolved: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid sweep configuration: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    pub(crate) fn json(path: impl AsRef<std::path::Path>, source: serde_json::Error) -> Self {
        Error::Json {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
