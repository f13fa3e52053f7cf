use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, HaloError>;

#[derive(Debug, Error)]
pub enum HaloError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("incomplete profile: expected 256 entries, got {0}")]
    IncompleteProfile(usize),

    #[error("malformed profile: {0}")]
    MalformedProfile(String),

    #[error("empty candidate set: no weight value reaches {target_ghz} GHz")]
    EmptyCodebook { target_ghz: f64 },

    #[error("no feasible DVFS level for critical path {critical_path_ps} ps")]
    NoFeasibleLevel { critical_path_ps: f64 },

    #[error("unmapped class label {0}")]
    UnmappedClass(usize),

    #[error("timing violation: group at {freq_ghz} GHz cannot cover {delay_ps} ps critical path")]
    TimingViolation { freq_ghz: f64, delay_ps: u32 },

    #[error("tile {tile_rows}x{tile_cols} does not fit array {array_rows}x{array_cols}")]
    TileTooLarge {
        tile_rows: usize,
        tile_cols: usize,
        array_rows: usize,
        array_cols: usize,
    },

    #[error("index out of bounds: {0}")]
    IndexOutOfBounds(String),

    #[error("empty container")]
    EmptyContainer,

    #[error("malformed container: {0}")]
    MalformedContainer(String),

    #[error("malformed model: {0}")]
    MalformedModel(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl HaloError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        HaloError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn json(path: impl Into<PathBuf>, source: serde_json::Error) -> Self {
        HaloError::Json {
            path: path.into(),
            source,
        }
    }
}
