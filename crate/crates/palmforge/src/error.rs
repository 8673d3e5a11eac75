use std::io;
use std::path::{Path, PathBuf};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },

    #[error("{}: {source}", path.display())]
    Image { path: PathBuf, source: image::ImageError },

    #[error("{}: {source}", path.display())]
    Toml { path: PathBuf, source: toml::de::Error },

    #[error("{}: {source}", path.display())]
    Json { path: PathBuf, source: serde_json::Error },

    #[error("{}: {source}", path.display())]
    Parse { path: PathBuf, source: palmforge_core::Error },

    #[error("{0}")]
    Config(String),

    #[error("image {image}: {source}")]
    Generation { image: String, source: palmforge_core::Error },

    #[error("variant {variant}: {source}")]
    Variant { variant: String, source: Box<Error> },

    #[error("no image id appears in both {} and {}", gt.display(), det.display())]
    NoOverlap { gt: PathBuf, det: PathBuf },

    #[error("{} exists and is not empty (pass --overwrite to replace it)", .0.display())]
    OutputExists(PathBuf),

    #[error(transparent)]
    Core(#[from] palmforge_core::Error),
}

impl Error {
    pub fn io(path: impl AsRef<Path>, source: io::Error) -> Self {
        Error::Io { path: path.as_ref().to_path_buf(), source }
    }

    /// Process exit status: 2 for IO failures, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } => 2,
            Error::Image { source: image::ImageError::IoError(_), .. } => 2,
            Error::Variant { source, .. } => source.exit_code(),
            _ => 1,
        }
    }
}

pub(crate) trait IoContext<T> {
    fn at(self, path: impl AsRef<Path>) -> Result<T>;
}

impl<T> IoContext<T> for io::Result<T> {
    fn at(self, path: impl AsRef<Path>) -> Result<T> {
        self.map_err(|e| Error::io(path, e))
    }
}
