use thiserror::Error;

use crate::compose::ComposeError;
use crate::geometry::GeometryError;
use crate::mesh::MeshError;
use crate::model::ModelError;
use crate::sampler::SamplerError;
use crate::solids::SolidsError;
use crate::solver::SolverError;
use crate::svg::SvgError;

/// Any failure raised by the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Solids(#[from] SolidsError),
    #[error(transparent)]
    Compose(#[from] ComposeError),
    #[error(transparent)]
    Svg(#[from] SvgError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of the numerical machinery (as opposed to bad input).
    pub fn is_numeric(&self) -> bool {
        match self {
            Error::Solver(_) => true,
            Error::Sampler(e) => e.is_numeric(),
            Error::Compose(e) => e.is_numeric(),
            _ => false,
        }
    }
}
