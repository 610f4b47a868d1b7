use std::io;
use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("degenerate retraction: x + step is the zero vector")]
    DegenerateRetraction,

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("{path}: no token occurs at least {min_count} times")]
    EmptyCorpus { path: PathBuf, min_count: u64 },

    #[error("taxonomy: {0}")]
    Taxonomy(#[from] TaxonomyError),

    #[error("corrupted model file: {0}")]
    Corrupted(String),

    #[error("unsupported model version {found} (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },

    #[error("{matrix} row {row} has norm {norm}, expected 1")]
    NormViolation { matrix: &'static str, row: usize, norm: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}:{line}: {message}")]
    Format {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("doc_id {0} present in one label set but not the other")]
    MissingDocId(u32),

    #[error("taxonomy has no categories besides ROOT")]
    EmptyTaxonomy,
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum TaxonomyError {
    #[error("line {line}: expected `parent<TAB>child`, got {text:?}")]
    Malformed { line: usize, text: String },

    #[error("cycle through {0:?}")]
    Cycle(String),

    #[error("{0:?} appears more than once")]
    DuplicateName(String),

    #[error("{0:?} is not a vocabulary token")]
    NotInVocabulary(String),

    #[error("multiple roots: {0:?} (only ROOT may lack a parent)")]
    MultipleRoots(Vec<String>),

    #[error("no edges leave ROOT")]
    MissingRoot,
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
