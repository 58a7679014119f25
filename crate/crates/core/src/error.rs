use std::path::PathBuf;

use crate::engine::TopicId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("corpus is empty after preprocessing")]
    EmptyCorpus,

    #[error("file not found: {0}")]
    MissingFile(PathBuf),

    #[error("malformed record at line {line}: {reason}")]
    MalformedRecord { line: usize, reason: String },

    #[error("invalid hyperparameter: {0}")]
    InvalidHyperparams(String),

    #[error("invalid concept prior: {0}")]
    InvalidPrior(String),

    #[error("unknown word: {0:?}")]
    UnknownWord(String),

    #[error("unknown document: {0:?}")]
    UnknownDocument(String),

    #[error("topic {0} is not active")]
    InactiveTopic(TopicId),

    #[error("invalid refinement: {0}")]
    InvalidRefinement(String),

    #[error("no pending refinements to apply")]
    EmptyPending,

    #[error("no embeddable words among the top words of topic {0}")]
    NoEmbeddableWords(TopicId),

    #[error("phrase has no token with an embedding: {0:?}")]
    OutOfVocabularyPhrase(String),

    #[error("zero vector has no direction")]
    ZeroVector,

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("not a probability distribution: {0}")]
    NotADistribution(String),

    #[error("corpus has no category labels")]
    MissingLabels,

    #[error("coherence is undefined: no scorable word pairs")]
    UndefinedCoherence,

    #[error("unknown model node {0}")]
    UnknownNode(u64),

    #[error("node {child} is not a direct child of node {parent}")]
    NotAdjacent { parent: u64, child: u64 },

    #[error("a commit needs a nonempty edge log")]
    EmptyEdgeLog,

    #[error("no node ids given")]
    EmptySelection,

    #[error("unsupported format version {found} (expected {expected})")]
    VersionMismatch { expected: u32, found: u32 },

    #[error("corrupt archive: {0}")]
    Corrupt(String),

    #[error("snapshot does not match the corpus it is loaded against")]
    CorpusMismatch,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
