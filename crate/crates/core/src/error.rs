use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    Geometry(String),

    #[error("mesh error: {0}")]
    Mesh(String),

    #[error("{path}:{line}: {message}")]
    MshParse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("trace error on curve {curve}: {message}")]
    Trace { curve: i32, message: String },

    #[error("material error: {0}")]
    Material(String),

    #[error("assembly error: {0}")]
    Assembly(String),

    #[error("boundary condition error: {0}")]
    Boundary(String),

    #[error("thin shell error: {0}")]
    Tsa(String),

    #[error("mortar error: {0}")]
    Mortar(String),

    #[error("linear solver error: {0}")]
    LinearSolver(String),

    #[error("Picard iteration did not converge after {iterations} iterations (last relative update {last_update:.3e}) at t = {time}")]
    PicardNonConvergence {
        iterations: usize,
        last_update: f64,
        time: f64,
    },

    #[error("solver error: {0}")]
    Solver(String),

    #[error("post-processing error: {0}")]
    Postproc(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
