use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected dim={expected}, got dim={got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("{kernel} kernel: coordinate {coordinate} has value {value} outside the kernel domain{}", point_suffix(*.point))]
    Domain { kernel: &'static str, coordinate: usize, value: f64, point: Option<usize> },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("k must satisfy 1 <= k <= n (k={k}, n={n})")]
    InvalidK { k: usize, n: usize },

    #[error("cluster {0} is empty")]
    EmptyCluster(usize),

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("{0} kernel does not decompose over input coordinates")]
    NotDecomposable(&'static str),

    #[error("feature mode {mode} is not available for the {kernel} kernel")]
    IncompatibleFeatureMode { mode: &'static str, kernel: &'static str },

    #[error("centers are identical in every feature column")]
    DegenerateCenters,

    #[error("reference clustering found {found} non-empty clusters, expected {expected}")]
    DegenerateClustering { found: usize, expected: usize },

    #[error("feature column {column} is not consistent with its declared monotone profile")]
    InconsistentProfile { column: usize },

    #[error("cut translation changed the data split at node {node}")]
    SplitMismatch { node: usize },

    #[error("{what}: instance too large ({size} > {limit})")]
    TooLarge { what: &'static str, size: usize, limit: usize },

    #[error("target leaf count {target} is below the current leaf count {current}")]
    LeafTarget { target: usize, current: usize },

    #[error("cut leaves one side empty")]
    EmptySide,

    #[error("negative value passed to {0}")]
    Negative(&'static str),

    #[error("CSV row {row}, column {column}: {message}")]
    Csv { row: usize, column: usize, message: String },

    #[error("tree format: {0}")]
    TreeFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn point_suffix(point: Option<usize>) -> String {
    match point {
        Some(p) => format!(" (point {p})"),
        None => String::new(),
    }
}
