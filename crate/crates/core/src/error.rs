use thiserror::Error;

/// Errors raised anywhere in the compiler.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid gate: {0}")]
    InvalidGate(String),
    #[error("qubit index {index} out of range for {num_qubits} qubits")]
    QubitOutOfRange { index: usize, num_qubits: usize },
    #[error("unsupported gate `{0}`")]
    UnsupportedGate(String),
    #[error("parse error at line {line}, column {col}: {msg}")]
    Parse { line: usize, col: usize, msg: String },
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("circuit too wide for dense unitary ({0} qubits, limit {1})")]
    TooWide(usize, usize),
    #[error("matrix is not unitary (deviation {0:.3e})")]
    NotUnitary(f64),
    #[error("node {node} does not act on qubit {qubit}")]
    NotOnWire { node: usize, qubit: usize },
    #[error("no such node {0}")]
    NoSuchNode(usize),
    #[error("qubit map is not a bijection onto the node's qubits")]
    BadQubitMap,
    #[error("invalid coupling map: {0}")]
    Coupling(String),
    #[error("qubits {0} and {1} are not coupled")]
    NotAnEdge(usize, usize),
    #[error("triple ({0}, {1}, {2}) is not connected")]
    TripleNotConnected(usize, usize, usize),
    #[error("routing failed: {0}")]
    Routing(String),
    #[error("variant library: {0}")]
    Library(String),
    #[error("synthesis failed (best residual {0:.3e})")]
    Synthesis(f64),
    #[error("verification failed: phase distance {0:.3e}")]
    Verification(f64),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("json error: {0}")]
    Json(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Json(e.to_string())
    }
}
