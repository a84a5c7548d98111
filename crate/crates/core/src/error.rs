use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// A single schema violation inside a surface spec.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct Violation {
    pub path: String,
    pub message: String,
}

#[derive(Debug, Error)]
pub enum Error {
    // geometry
    #[error("point ({re}, {im}) is not in the upper half-plane")]
    InvalidPoint { re: f64, im: f64 },
    #[error("geodesics intersect or are asymptotic; no common perpendicular")]
    NoPerpendicular,
    #[error("invalid length {0}")]
    InvalidLength(f64),
    #[error("value out of representable range: {0}")]
    Range(&'static str),

    // collar
    #[error("{what} = {value} is outside the allowed range")]
    Domain { what: &'static str, value: f64 },
    #[error("point cannot be located: {0}")]
    Location(String),
    #[error("precondition failed: {0}")]
    Precondition(String),

    // pants / meshing
    #[error("incomplete gluing: {0}")]
    IncompleteGluing(String),
    #[error("{0} pants do not give an integer genus >= 2")]
    Genus(usize),
    #[error("invalid pants graph: {0}")]
    InvalidGraph(String),
    #[error("mesh size too coarse to resolve cuff {cuff}: {detail}")]
    Resolution { cuff: String, detail: String },

    // spectral
    #[error("triangle {0} is degenerate")]
    DegenerateTriangle(usize),
    #[error("eigensolver did not converge after {iterations} iterations (worst residual {residual:e})")]
    Convergence { iterations: usize, residual: f64 },
    #[error("requested {requested} but only {available} resolved")]
    Coverage { requested: String, available: String },
    #[error("factorization failed: {0}")]
    Factorization(String),
    #[error("suspicious near-zero eigenvalues ({0}); mesh may be disconnected")]
    Connectivity(usize),
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    // extremal / graph
    #[error("vertex {0} is unreachable")]
    Unreachable(usize),
    #[error("degenerate disc pair: {0}")]
    DegeneratePair(String),
    #[error("no valid disc pair could be sampled")]
    Sampling,
    #[error("linear solve did not converge (relative residual {0:e})")]
    LinearSolve(f64),
    #[error("graph setting error: {0}")]
    Setting(String),
    #[error("graph is disconnected")]
    Disconnected,
    #[error("graph with {0} vertices exceeds the dense limit")]
    TooLarge(usize),

    // sharpness
    #[error("test function {0} has zero norm")]
    DegenerateProfile(usize),
    #[error("invalid test-function count k = {k} for n = {n}")]
    InvalidK { k: usize, n: usize },
    #[error("heat trace truncation unsafe at t = {0}")]
    Remainder(f64),

    // harness
    #[error("spec violations: {}", format_violations(.0))]
    Spec(Vec<Violation>),
    #[error("unsupported feature: {0}")]
    Unsupported(String),
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("command error: {0}")]
    Command(String),
}

fn format_violations(v: &[Violation]) -> String {
    v.iter()
        .map(|x| format!("{}: {}", x.path, x.message))
        .collect::<Vec<_>>()
        .join("; ")
}

impl Error {
    /// Stable machine-readable code, prefixed with the owning module.
    pub fn code(&self) -> &'static str {
        use Error::*;
        match self {
            InvalidPoint { .. } => "hypgeom.invalid_point",
            NoPerpendicular => "hypgeom.no_perpendicular",
            InvalidLength(_) => "hypgeom.invalid_length",
            Range(_) => "hypgeom.range",
            Domain { .. } => "collar.domain",
            Location(_) => "collar.location",
            Precondition(_) => "collar.precondition",
            IncompleteGluing(_) => "pants.incomplete_gluing",
            Genus(_) => "pants.genus",
            InvalidGraph(_) => "pants.invalid_graph",
            Resolution { .. } => "pants.resolution",
            DegenerateTriangle(_) => "spectral.degenerate_triangle",
            Convergence { .. } => "spectral.convergence",
            Coverage { .. } => "spectral.coverage",
            Factorization(_) => "spectral.factorization",
            Connectivity(_) => "spectral.connectivity",
            Dimension(_) => "spectral.dimension",
            Unreachable(_) => "extremal.unreachable",
            DegeneratePair(_) => "extremal.degenerate_pair",
            Sampling => "extremal.sampling",
            LinearSolve(_) => "extremal.linear_solve",
            Setting(_) => "graphana.setting",
            Disconnected => "graphana.disconnected",
            TooLarge(_) => "graphana.too_large",
            DegenerateProfile(_) => "sharpness.degenerate_profile",
            InvalidK { .. } => "sharpness.invalid_k",
            Remainder(_) => "sharpness.remainder",
            Spec(_) => "harness.spec",
            Unsupported(_) => "harness.unsupported",
            Parse { .. } => "harness.parse",
            Io(_) => "harness.io",
            Command(_) => "harness.command",
        }
    }
}
