use thiserror::Error;

pub type Result<T, E = VexpaError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum VexpaError {
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("invalid sampling grid: {0}")]
    InvalidGrid(String),
    #[error("sample index {index} out of range for {len} samples")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("insufficient samples: need {needed}, have {available}")]
    InsufficientSamples { needed: usize, available: usize },
    #[error("singular pencil: reciprocal condition number {rcond:e}")]
    SingularPencil { rcond: f64 },
    #[error("rank deficient: requested order {requested}, numerical rank {rank}")]
    RankDeficient { requested: usize, rank: usize },
    #[error("eigenvalue iteration did not converge")]
    NoConvergence,
    #[error("coincident nodes at positions {0} and {1}")]
    CoincidentNodes(usize, usize),
    #[error("u = {u} and s = {s} are not coprime")]
    NotCoprime { u: usize, s: usize },
    #[error("aliased nodes {0} and {1} collide")]
    Collision(usize, usize),
    #[error("fisher information matrix is singular, parameters are not identifiable (rcond {rcond:e})")]
    NotIdentifiable { rcond: f64 },
    #[error("degenerate sequence: all values are numerically zero")]
    DegenerateSequence,
    #[error("underdetermined system: {rows} equations for {unknowns} unknowns")]
    Underdetermined { rows: usize, unknowns: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("non-finite value for {0}")]
    NonFinite(&'static str),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
