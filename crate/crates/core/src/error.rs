//! Error types shared across the crate.
//!
//! Each subsystem has its own enum; [`Error`] wraps them for the pipeline
//! and maps every category onto a process exit code.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("point {point:?} lies outside the domain boxes")]
    Domain { point: Vec<f64> },
    #[error("mixed cost Hessian is degenerate at {point:?}: |det| = {det:e} < {tol:e}")]
    DegenerateCost { point: Vec<f64>, det: f64, tol: f64 },
    #[error("finite-difference stencil leaves the domain near {point:?}")]
    StencilOutOfDomain { point: Vec<f64> },
    #[error("metric is singular at {point:?}")]
    SingularMetric { point: Vec<f64> },
    #[error("tangent pair is not orthogonal: |g(xi, xibar)| = {residual:e} > {tol:e}")]
    NotOrthogonal { residual: f64, tol: f64 },
    #[error("density is not strictly positive at {point:?} (value {value:e})")]
    NonpositiveDensity { point: Vec<f64>, value: f64 },
    #[error("quantity undefined: {0}")]
    Undefined(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error("marginal masses differ: source {source_mass}, target {target_mass}")]
    InfeasibleMarginals { source_mass: f64, target_mass: f64 },
    #[error("network simplex stalled after {iterations} pivots")]
    SolverStall { iterations: usize },
    #[error("numerical overflow in entropic solver at epsilon = {epsilon:e}")]
    NumericalOverflow { epsilon: f64 },
    #[error("no convergence after {iterations} iterations (marginal residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("map is not locally injective at atom {index} (|det DF| = {det:e})")]
    NonInjectiveMap { index: usize, det: f64 },
    #[error("atom {index} has no centered-difference neighbourhood or an unsharp plan row")]
    NotInterior { index: usize },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GraphError {
    #[error("induced metric is not positive definite (smallest eigenvalue {min_eigenvalue:e})")]
    NotSpacelike { min_eigenvalue: f64 },
    #[error("Gram-Schmidt pivot {pivot:e} fell below tolerance")]
    FrameDegeneracy { pivot: f64 },
    #[error("mean curvature {norm:e} exceeds the applicability threshold {threshold:e}")]
    MeanCurvatureTooLarge { norm: f64, threshold: f64 },
    #[error("Hessian metric comparison requires a bilinear or quadratic cost, got {0}")]
    WrongCostKind(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EstimateError {
    #[error("cutoff ball (center {center:?}, radius {radius}) is not contained in the region")]
    SupportEscapesRegion { center: Vec<f64>, radius: f64 },
    #[error("cutoff vanishes at every sampled point")]
    EmptySupport,
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("cannot parse scenario: {0}")]
    Parse(String),
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Estimate(#[from] EstimateError),
    #[error("stage `{stage}` failed: {source}")]
    StageFailure {
        stage: String,
        #[source]
        source: Box<Error>,
    },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub fn stage(stage: &str, source: impl Into<Error>) -> Self {
        Error::StageFailure { stage: stage.to_string(), source: Box::new(source.into()) }
    }

    /// Process exit code: 2 config, 3 solver, 4 geometry, 5 io.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Solver(SolverError::Geometry(_)) => 4,
            Error::Solver(_) => 3,
            Error::Geometry(_) => 4,
            Error::Graph(GraphError::Solver(_)) => 3,
            Error::Graph(_) => 4,
            Error::Estimate(EstimateError::Solver(_)) => 3,
            Error::Estimate(_) => 4,
            Error::StageFailure { source, .. } => source.exit_code(),
            Error::Io { .. } => 5,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
