use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("no sentences")]
    NoSentences,

    #[error("configuration error: {0}")]
    Config(String),

    #[error(
        "cluster {cluster} is not admissible: word {word:?} carries both {first} and {second}"
    )]
    ConstraintViolation {
        cluster: String,
        word: String,
        first: String,
        second: String,
    },

    #[error("cannot merge cluster {0} with itself")]
    SelfMerge(usize),

    #[error("cluster index {index} out of range ({len} clusters)")]
    ClusterIndex { index: usize, len: usize },

    #[error("unknown word {0:?}")]
    UnknownWord(String),

    #[error("word {word:?} has no tag in cluster {cluster}")]
    Inconsistent { word: String, cluster: String },

    #[error("mapping does not partition the tagset: {0}")]
    NotAPartition(String),

    #[error("empty n-gram counts")]
    EmptyCounts,

    #[error("empty sentence")]
    EmptySentence,

    #[error("clustering part is empty")]
    EmptyClusteringPart,

    #[error("no known tokens")]
    NoKnownTokens,

    #[error("length mismatch: {0}")]
    LengthMismatch(String),

    #[error("model file line {line}: {message}")]
    ModelFormat { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}
