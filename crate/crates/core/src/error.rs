use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parameter out of range: {0}")]
    Range(String),

    #[error("degenerate Möbius map: |ad - bc| = {0:e}")]
    DegenerateMobius(f64),

    #[error("inversion is undefined: the origin lies on the disk boundary")]
    BoundaryPole,

    #[error("point {point} is within {distance:e} of a branch seam (step {step:e})")]
    NearSeam { point: String, distance: f64, step: f64 },

    #[error("point {0} is too close to the pole of the map")]
    NearPole(String),

    #[error("region is unbounded; supply a clip disk")]
    Unbounded,

    #[error("the pole {0} lies inside (or too close to) the integration region")]
    PoleInRegion(String),

    #[error("sample budget is zero")]
    EmptyBudget,

    #[error("infeasible stacking chain: {0}")]
    InfeasibleChain(String),

    #[error("weight normalization failed: sum p_j w_j^K = {0}")]
    Normalization(f64),

    #[error("non-finite sample at {0}")]
    NonFinite(String),

    #[error("field support violates the window margin: {0}")]
    SupportMargin(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("Neumann iteration did not converge in {iterations} steps (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("negative weight sample detected")]
    NegativeWeight,

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub(crate) fn range_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Range(msg.into()))
}
