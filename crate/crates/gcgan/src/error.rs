use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] gcgan_core::Error),

    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },

    #[error("cannot decode image {}: {msg}", path.display())]
    Decode { path: PathBuf, msg: String },

    #[error("no PNG or JPEG images in {}", .0.display())]
    EmptyDir(PathBuf),

    #[error("{}: {msg}", path.display())]
    Checkpoint { path: PathBuf, msg: String },

    #[error("{}: checkpoint format version {found}, this build reads version {expected}", path.display())]
    VersionMismatch { path: PathBuf, found: u32, expected: u32 },

    #[error("{origin}:{line}: {msg}")]
    Config { origin: String, line: usize, msg: String },

    #[error("files without a counterpart in {}: {}", dir.display(), names.join(", "))]
    Unmatched { dir: PathBuf, names: Vec<String> },

    #[error("{0}")]
    Invalid(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Error {
        let path = path.into();
        move |source| Error::Io { path, source }
    }
}
