//! Disk-backed k-d tree over low-dimensional embeddings.
//!
//! The index file holds a header, an array of internal nodes in preorder and a
//! section of leaf pages. Opening an index loads the header and internal
//! nodes; leaf pages are read on demand with positioned reads, so an open
//! index needs roughly `24 × n / leaf_capacity` bytes of resident memory no
//! matter how large the file is, and may be queried from many threads.
//!
//! Building is bulk-only: each node splits its points at the exact lower
//! median of its widest dimension. Nodes whose points fit in the memory
//! budget are partitioned in memory; larger nodes are partitioned on disk,
//! with the median found by radix selection over temporary node files.

mod build;
mod format;
mod query;

use std::convert::Infallible;
use std::io;

use thiserror::Error;

pub use build::{build, BuildOptions, BuildSummary, DEFAULT_LEAF_CAPACITY};
pub use format::{ChildRef, Header, InternalNode, HEADER_LEN, NODE_LEN};
pub use query::{AuditReport, IndexStats, KdIndex, QueryStats};

use crate::embedding::EmbeddingError;
use crate::formats::FormatError;

#[derive(Debug, Error)]
pub enum KdError {
    #[error("no points to index")]
    Empty,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },
    #[error("unsupported dimension {0}")]
    BadDimension(usize),
    #[error("leaf capacity must be between 1 and {max}", max = u32::MAX)]
    LeafCapacity,
    #[error("memory budget of {budget} bytes is below one leaf page ({page} bytes)")]
    MemoryBudget { budget: u64, page: u64 },
    #[error("k must be at least 1")]
    InvalidK,
    #[error("query coordinate {0} is not finite")]
    NonFiniteQuery(usize),
    #[error("range bounds inverted or invalid in dimension {0}")]
    InvertedBounds(usize),
    #[error("corrupt index: {0}")]
    Corrupt(String),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl From<Infallible> for KdError {
    fn from(e: Infallible) -> Self {
        match e {}
    }
}
