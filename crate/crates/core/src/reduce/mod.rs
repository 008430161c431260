//! Dimensionality reduction of 256-d fingerprints to index-sized embeddings.

mod pca;
mod srp;

pub use pca::{pca_fit, PcaAccumulator, PcaModel};
pub use srp::SparseProjection;

use thiserror::Error;

use crate::embedding::EmbeddingError;
use crate::formats::FormatError;

#[derive(Debug, Error)]
pub enum ReduceError {
    #[error("need at least 2 samples to fit, got {0}")]
    TooFewSamples(u64),
    #[error("output dimension {d_out} must be between 1 and {max}")]
    OutputDimension { d_out: usize, max: usize },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },
    #[error("input contains a non-finite value")]
    NonFinite,
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error(transparent)]
    Format(#[from] FormatError),
}

impl From<std::io::Error> for ReduceError {
    fn from(e: std::io::Error) -> Self {
        ReduceError::Format(FormatError::Io(e))
    }
}
