//! Coordinate vectors stored in the index and the neighbor lists returned by
//! every search path.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use thiserror::Error;

/// Largest supported embedding dimension.
pub const MAX_DIM: usize = 64;
/// Above this dimension k-d tree pruning stops paying off; a warning is logged.
pub const SOFT_MAX_DIM: usize = 20;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EmbeddingError {
    #[error("embedding dimension {0} outside 1..={MAX_DIM}")]
    BadDimension(usize),
    #[error("coordinate {index} is not finite")]
    NonFinite { index: usize },
}

/// A low-dimensional real vector with finite coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingVector(Vec<f32>);

impl EmbeddingVector {
    pub fn new(coords: Vec<f32>) -> Result<Self, EmbeddingError> {
        if coords.is_empty() || coords.len() > MAX_DIM {
            return Err(EmbeddingError::BadDimension(coords.len()));
        }
        if let Some(index) = coords.iter().position(|c| !c.is_finite()) {
            return Err(EmbeddingError::NonFinite { index });
        }
        Ok(EmbeddingVector(coords))
    }

    pub fn from_f64(coords: &[f64]) -> Result<Self, EmbeddingError> {
        EmbeddingVector::new(coords.iter().map(|&c| c as f32).collect())
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f32> {
        self.0
    }
}

impl AsRef<[f32]> for EmbeddingVector {
    fn as_ref(&self) -> &[f32] {
        &self.0
    }
}

/// Squared Euclidean distance accumulated in f64, dimension by dimension.
///
/// The k-d tree and the brute-force scan both call this exact function, so
/// their distances agree bit for bit.
#[inline]
pub fn squared_distance(a: &[f32], b: &[f32]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0.0f64;
    for (&x, &y) in a.iter().zip(b) {
        let d = x as f64 - y as f64;
        acc += d * d;
    }
    acc
}

#[inline]
pub fn distance(a: &[f32], b: &[f32]) -> f64 {
    squared_distance(a, b).sqrt()
}

/// A search result. Lists of neighbors are ordered by `(distance, id)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub id: u64,
    pub distance: f64,
}

impl Eq for Neighbor {}

impl Ord for Neighbor {
    fn cmp(&self, other: &Self) -> Ordering {
        self.distance
            .total_cmp(&other.distance)
            .then(self.id.cmp(&other.id))
    }
}

impl PartialOrd for Neighbor {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Bounded max-heap keeping the `k` smallest neighbors under `(distance, id)`.
#[derive(Debug, Clone)]
pub struct TopK {
    k: usize,
    heap: BinaryHeap<Neighbor>,
}

impl TopK {
    pub fn new(k: usize) -> Self {
        assert!(k >= 1, "k must be at least 1");
        TopK {
            k,
            heap: BinaryHeap::with_capacity(k.min(1 << 16) + 1),
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.heap.len() == self.k
    }

    /// The current k-th best neighbor, once `k` candidates have been seen.
    pub fn worst(&self) -> Option<&Neighbor> {
        if self.is_full() {
            self.heap.peek()
        } else {
            None
        }
    }

    /// Offers a candidate; returns whether it was kept.
    pub fn push(&mut self, candidate: Neighbor) -> bool {
        if self.heap.len() < self.k {
            self.heap.push(candidate);
            return true;
        }
        let mut top = self.heap.peek_mut().expect("non-empty");
        if candidate < *top {
            *top = candidate;
            true
        } else {
            false
        }
    }

    /// Merges another collector's candidates (e.g. from a parallel shard).
    pub fn merge(&mut self, other: TopK) {
        for n in other.heap {
            self.push(n);
        }
    }

    pub fn into_sorted_vec(self) -> Vec<Neighbor> {
        self.heap.into_sorted_vec()
    }
}
