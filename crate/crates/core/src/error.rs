use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("vertex {vertex} out of range for hypergraph on {num_vertices} vertices")]
    InvalidVertex { vertex: usize, num_vertices: usize },
    #[error("vertex {0} appears more than once in a hyperedge")]
    DuplicateVertex(usize),
    #[error("hypergraph has {0} patch(es); a patch-free hypergraph is required")]
    PatchesPresent(usize),
    #[error("edge {label} has cardinality {cardinality}; only 2-edges are allowed")]
    NotAGraph { label: usize, cardinality: usize },
    #[error("argument out of domain: {0}")]
    DomainError(String),
    #[error("assumption violated: {0}")]
    AssumptionViolated(String),
    #[error("chain already stopped (no patches left)")]
    ChainStopped,
    #[error("empty sample")]
    EmptySample,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
