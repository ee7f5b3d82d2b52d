use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Core(#[from] centralpath::Error),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn is_numeric(&self) -> bool {
        matches!(self, CliError::Core(e) if e.is_numeric())
    }

    /// 2 for numerical failures, 1 for everything the caller can fix.
    pub fn exit_code(&self) -> i32 {
        if self.is_numeric() {
            2
        } else {
            1
        }
    }
}

macro_rules! core_from {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Core(e.into())
            }
        }
    )*};
}

core_from!(
    centralpath::model::ModelError,
    centralpath::sampler::SamplerError,
    centralpath::geometry::GeometryError,
    centralpath::solids::SolidsError,
    centralpath::compose::ComposeError,
    centralpath::svg::SvgError,
    centralpath::mesh::MeshError,
    serde_json::Error
);
