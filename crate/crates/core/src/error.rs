use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("graph is not connected: vertex `{0}` is unreachable from `{1}`")]
    DisconnectedGraph(String, String),
    #[error("edge {edge} has non-positive or non-finite length {length}")]
    NonpositiveLength { edge: usize, length: f64 },
    #[error("edge {edge} references unknown vertex `{vertex}`")]
    DanglingVertexReference { edge: usize, vertex: String },
    #[error("vertex `{0}` is listed twice")]
    DuplicateVertex(String),
    #[error("graph has no edges")]
    Empty,
    #[error("point on edge {edge} has coordinate {s} outside [-{half}, {half}]")]
    InvalidPoint { edge: usize, s: f64, half: f64 },
    #[error("failed to parse graph description: {0}")]
    Parse(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HeatError {
    #[error("eigendecomposition residual {residual:e} exceeds tolerance {tol:e}")]
    SolverFailure { residual: f64, tol: f64 },
    #[error("requested {requested} eigenpairs but the grid has only {available} nodes")]
    TooManyEigenpairs { requested: usize, available: usize },
    #[error("heat kernel needs t > 0, got {0}")]
    NonpositiveTime(f64),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FunctionalError {
    #[error("operands live on different grids")]
    GridMismatch,
    #[error("measure has atoms; a density is required")]
    AtomicMeasure,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TransportError {
    #[error("total masses differ: {0} vs {1}")]
    MassMismatch(f64, f64),
    #[error("measures live on different grids")]
    GridMismatch,
    #[error("measure has negative mass {0}")]
    NegativeMass(f64),
    #[error("measure is not supported on a path graph")]
    NotAPath,
    #[error("continuity-equation speed needs densities, not atoms")]
    AtomicMeasure,
    #[error("density vanishes on a whole cell; the weighted Laplacian is singular")]
    DegenerateWeights,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CurvatureError {
    #[error("all denominators fell below the guard threshold")]
    DegenerateDenominator,
    #[error("entropy of {0} is +inf")]
    EntropyInfinite(&'static str),
    #[error(transparent)]
    Heat(#[from] HeatError),
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error(transparent)]
    Functional(#[from] FunctionalError),
}

#[derive(Debug, Error)]
pub enum SuiteError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Curvature(#[from] CurvatureError),
}

impl From<HeatError> for SuiteError {
    fn from(e: HeatError) -> Self {
        SuiteError::Curvature(e.into())
    }
}

impl From<TransportError> for SuiteError {
    fn from(e: TransportError) -> Self {
        SuiteError::Curvature(e.into())
    }
}
