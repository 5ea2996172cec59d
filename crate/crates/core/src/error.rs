use thiserror::Error;

/// Errors surfaced by the library.
///
/// `Validation`-style variants map to CLI exit code 1, `Numerical` to exit
/// code 2.
#[derive(Debug, Error)]
pub enum ArtError {
    #[error("validation error: {0}")]
    Validation(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("track file error: {0}")]
    TrackFile(String),

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("degenerate blend: blended real part norm {0:.3e} below 1e-12")]
    DegenerateBlend(f64),

    #[error("numerical abort: {0}")]
    Numerical(String),

    #[error("pipeline stage '{stage}' failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<ArtError>,
    },
}

impl ArtError {
    pub fn validation(msg: impl Into<String>) -> Self {
        ArtError::Validation(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        ArtError::Config(msg.into())
    }

    pub fn numerical(msg: impl Into<String>) -> Self {
        ArtError::Numerical(msg.into())
    }

    /// Exit code the CLI should use for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            ArtError::Numerical(_) | ArtError::DegenerateBlend(_) => 2,
            ArtError::Stage { source, .. } => source.exit_code(),
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, ArtError>;
