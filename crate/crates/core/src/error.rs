use thiserror::Error;

/// Errors raised by mesh construction, assembly, solution and estimation.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("nonconforming mesh: edge ({0}, {1}) is shared by more than two triangles")]
    Topology(usize, usize),

    #[error("macroelement partition failed: {0}")]
    Partition(String),

    #[error("stabilisation edge {0} lies on the domain boundary")]
    BoundaryStabilisationEdge(usize),

    #[error("degenerate triangle {0} (signed area {1:e})")]
    DegenerateTriangle(usize, f64),

    #[error("no boundary value supplied for displacement dof {0}")]
    MissingBoundaryValue(usize),

    #[error("singular factorisation at pivot {0}")]
    Singular(usize),

    #[error("solution does not match the mesh: {0}")]
    MeshMismatch(String),

    #[error("triangle {0} has no interior edge, local bubble space is empty")]
    UnsupportedElement(usize),

    #[error("problem {0} has no exact solution")]
    NoExactSolution(&'static str),

    #[error("mesh parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("i/o error: {0}")]
    Io(String),

    #[error("at refinement level {level}: {source}")]
    AtLevel { level: usize, source: Box<Error> },
}

impl Error {
    /// Strips level context.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtLevel { source, .. } => source.root(),
            e => e,
        }
    }

    /// Failures of the linear solve as opposed to invalid input.
    pub fn is_solver_failure(&self) -> bool {
        matches!(self.root(), Error::Singular(_) | Error::DegenerateTriangle(..))
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
