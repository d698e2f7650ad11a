use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed vertex encoding: {0}")]
    Encoding(String),

    #[error("{op} requires a tree host, got {host}")]
    NotATree { op: &'static str, host: String },

    #[error("ball radius must be at least 1")]
    InvalidRadius,

    #[error("ball exceeds vertex cap {cap} (reached {reached} vertices)")]
    VertexCap { cap: usize, reached: usize },

    #[error("index {index} is not a boundary vertex")]
    NotBoundary { index: u32 },

    #[error("traces were recorded without paths; rerun with path recording enabled")]
    MissingPath,

    #[error("graph with {size} vertices exceeds the exact-oracle cap of {cap}")]
    OracleTooLarge { size: usize, cap: usize },

    #[error("singular system: {0}")]
    Singular(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
