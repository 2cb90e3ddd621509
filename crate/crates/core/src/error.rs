use thiserror::Error;

/// Errors raised anywhere in the pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("degenerate lattice: |a1 x a2| = {cross:e} is below threshold")]
    DegenerateLattice { cross: f64 },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("model parse error: {0}")]
    ParseError(String),

    #[error("hopping term R=({m1},{m2}) has no Hermitian partner at -R (mismatch {mismatch:e})")]
    HermiticityViolation { m1: i64, m2: i64, mismatch: f64 },

    #[error("unknown model '{0}'")]
    UnknownModel(String),

    #[error("matrix is not Hermitian (deviation {0:e})")]
    NonHermitianInput(f64),

    #[error("near-degenerate eigenvalue: gap {gap:e} below tolerance {tol:e}{}", at_suffix(.at))]
    NearDegenerate {
        gap: f64,
        tol: f64,
        at: Option<(f64, f64)>,
    },

    #[error("Poisson problem not solvable: source mean {mean:e} exceeds tolerance {tol:e}")]
    NotSolvable { mean: f64, tol: f64 },

    #[error("ambiguous winding number: residual {residual:e}")]
    AmbiguousWinding { residual: f64 },

    #[error("phase unwrapping requires zero winding, got {c1}")]
    ObstructedBranch { c1: i64 },

    #[error("window radius {w} exceeds n/2 = {half}")]
    WindowTooLarge { w: usize, half: usize },

    #[error("path-order check failed: deviation {0:e}")]
    IntegrabilityViolation(f64),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error: {0}")]
    Io(String),
}

fn at_suffix(at: &Option<(f64, f64)>) -> String {
    match at {
        Some((k1, k2)) => format!(" at kappa=({k1}, {k2})"),
        None => String::new(),
    }
}

impl Error {
    /// Wraps the error with a pipeline stage label.
    pub fn in_stage(self, stage: &'static str) -> Error {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// Attaches the node coordinates to a `NearDegenerate` error.
    pub fn at_node(self, k1: f64, k2: f64) -> Error {
        match self {
            Error::NearDegenerate { gap, tol, .. } => Error::NearDegenerate {
                gap,
                tol,
                at: Some((k1, k2)),
            },
            other => other,
        }
    }

    /// Innermost error, with stage labels removed.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            e => e,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
