use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid probability vector: {0}")]
    InvalidProbVector(String),
    #[error("invalid node: symbol {symbol} outside alphabet of size {alphabet}")]
    InvalidNode { symbol: usize, alphabet: usize },
    #[error("{what}: {count} exceeds the cap of {cap}")]
    TooLarge {
        what: &'static str,
        count: String,
        cap: u64,
    },
    #[error("height mismatch: {left} vs {right}")]
    HeightMismatch { left: usize, right: usize },
    #[error("tree names use different probability vectors")]
    VectorMismatch,
    #[error("tree names use different label spaces")]
    MetricMismatch,
    #[error("invalid tree name: {0}")]
    InvalidTreeName(String),
    #[error("invalid tree automorphism: {0}")]
    InvalidAutomorphism(String),
    #[error("not a stochastic matrix: {0}")]
    NotStochastic(String),
    #[error("matrix is reducible")]
    Reducible,
    #[error("not a p-endomorphism: {0}")]
    NotEndomorphism(String),
    #[error("invalid preimage graph: {0}")]
    InvalidGraph(String),
    #[error("row/column sums are not constant: {0}")]
    NonConstantSums(String),
    #[error("no perfect matching on the positive support (tolerance violation)")]
    NoPerfectMatching,
    #[error("invalid block coupling: {0}")]
    InvalidCoupling(String),
    #[error("missing coupling for reachable node pair {v:?} / {u:?}")]
    MissingCoupling { v: Vec<usize>, u: Vec<usize> },
    #[error("invalid system descriptor: {0}")]
    InvalidDescriptor(String),
    #[error("label mode {mode} is not available for {kind} systems")]
    LabelKindMismatch {
        mode: &'static str,
        kind: &'static str,
    },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    pub(crate) fn too_large(what: &'static str, count: impl ToString, cap: u64) -> Self {
        Error::TooLarge {
            what,
            count: count.to_string(),
            cap,
        }
    }
}
