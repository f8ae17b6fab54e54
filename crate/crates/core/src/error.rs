use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("tail diverges: kernel is not explosive")]
    TailDiverges,
    #[error("no finite k_p for p = {0} (need p > 1)")]
    NoCriticalIndex(f64),
    #[error("invalid kernel: {0}")]
    InvalidKernel(String),
    #[error("unknown vertex {0}")]
    UnknownVertex(String),
    #[error("invalid label: {0}")]
    InvalidLabel(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("rate overflow at degree {0}")]
    RateOverflow(usize),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
