use thiserror::Error;

use crate::lattice::{Plaquet, Site};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid box: {0}")]
    InvalidBox(String),

    #[error("sites {initial} and {terminal} are not nearest neighbours")]
    NotNeighbors { initial: Site, terminal: Site },

    #[error("plaquet with corner {} is not contained in the box", .0.corner)]
    PlaquetOutsideBox(Plaquet),

    #[error("field is defined on {found} but {expected} was required")]
    BoxMismatch { expected: String, found: String },

    #[error("invalid flux density: {0}")]
    InvalidDensity(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("matrix is not Hermitian (max |H - H^*| = {0:e})")]
    NotHermitian(f64),

    #[error("eigenvalue iteration did not converge for index {index} after {iterations} sweeps")]
    NoConvergence { index: usize, iterations: usize },

    #[error("spectrum is degenerate within {gap:e} near the requested eigenvalues")]
    NearDegenerate { gap: f64 },

    #[error("{0}")]
    Certificate(String),

    #[error("run aborted: {failed} sample(s) failed after retries, {completed} completed")]
    Aborted { completed: usize, failed: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
