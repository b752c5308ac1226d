use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid species tree: {0}")]
    InvalidSpeciesTree(String),

    #[error("invalid gene tree: {0}")]
    InvalidGeneTree(String),

    #[error("gene tree inconsistent with species tree: {0}")]
    Inconsistent(String),

    #[error("empty dataset: at least one locus is required")]
    EmptyDataset,

    #[error("internal branch length must be finite and non-negative, got {0}")]
    InvalidBranchLength(f64),

    #[error("threshold {threshold} does not exceed the mean {mean}")]
    ThresholdNotAboveMean { threshold: f64, mean: f64 },

    #[error("no point s > 0 with finite moment-generating function crosses the threshold")]
    NoBracket,

    #[error("root solver failed: {0}")]
    Solver(String),

    #[error("exact enumeration supports at most {max} loci, got {loci}")]
    TooManyLoci { loci: usize, max: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
