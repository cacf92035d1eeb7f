use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid rational `{0}` (expected n/d)")]
pub struct ParseRationalError(pub String);

/// A single broken model invariant.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Violation {
    #[error("alternation broken: edge {0} -> {1} joins two {2} vertices")]
    AlternationBroken(String, String, &'static str),
    #[error("no out-edge from {0}")]
    NoOutEdge(String),
    #[error("probabilities of {0} sum to {1} ≠ 1")]
    ProbabilitySum(String, String),
    #[error("non-positive probability {2} on edge {0} -> {1}")]
    NonPositiveProbability(String, String, String),
    #[error("probability on player edge {0} -> {1}")]
    ProbabilityOnPlayerEdge(String, String),
    #[error("missing probability on random edge {0} -> {1}")]
    MissingProbability(String, String),
    #[error("duplicate edge {0} -> {1}")]
    DuplicateEdge(String, String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("line {line}: unknown vertex `{name}`")]
    UnknownVertex { line: usize, name: String },
    #[error("line {line}: duplicate vertex id `{name}`")]
    DuplicateVertex { line: usize, name: String },
    #[error("line {line}: probability on player edge {src} -> {dst}")]
    ProbabilityOnPlayerEdge { line: usize, src: String, dst: String },
    #[error("line {line}: missing probability on random edge {src} -> {dst}")]
    MissingProbability { line: usize, src: String, dst: String },
    #[error("{}", join_violations(.0))]
    Invalid(Vec<Violation>),
}

fn join_violations(v: &[Violation]) -> String {
    v.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; ")
}

/// Errors raised by the analysis and synthesis routines.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SolverError {
    #[error("unknown vertex `{0}`")]
    UnknownVertex(String),
    #[error("restriction is not closed at vertex {0}")]
    NotClosed(String),
    #[error("vertex set is not a maximal end component")]
    NotAMec,
    #[error("invalid lasso: {0}")]
    InvalidLasso(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("no loop vertex is reachable from {0}")]
    NoLoopReachable(String),
    #[error("commit set is not reached almost surely")]
    CommitNotAlmostSure,
    #[error("malformed linear program: {0}")]
    MalformedLp(String),
    #[error("no witness: the decision is no")]
    NoWitness,
    #[error("instance too large for the oracle ({0} product states)")]
    TooLarge(usize),
    #[error("strategy: {0}")]
    Strategy(String),
}

pub type Result<T, E = SolverError> = std::result::Result<T, E>;
