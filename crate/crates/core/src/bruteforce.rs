//! Exact linear-scan nearest neighbors, the reference every index is checked
//! against.

use std::fmt;
use std::io::Read;
use std::str::FromStr;

use thiserror::Error;

use crate::embedding::{squared_distance, Neighbor, TopK};
use crate::fingerprint::{tanimoto_distance, Fingerprint256, FingerprintError, FingerprintKind};
use crate::formats::{EmbeddingReader, FormatError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Metric {
    Euclidean,
    Tanimoto,
}

impl Metric {
    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Euclidean => "euclidean",
            Metric::Tanimoto => "tanimoto",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "euclidean" => Ok(Metric::Euclidean),
            "tanimoto" | "jaccard" => Ok(Metric::Tanimoto),
            other => Err(format!("unknown metric {other:?}")),
        }
    }
}

/// A database record or query: a real vector or a fingerprint.
#[derive(Debug, Clone, PartialEq)]
pub enum Point {
    Vector(Vec<f32>),
    Fingerprint(Fingerprint256),
}

impl Point {
    fn describe(&self) -> &'static str {
        match self {
            Point::Vector(_) => "vector",
            Point::Fingerprint(fp) => match fp.kind() {
                FingerprintKind::Binary => "binary fingerprint",
                FingerprintKind::Counts => "count fingerprint",
            },
        }
    }
}

impl From<Fingerprint256> for Point {
    fn from(fp: Fingerprint256) -> Self {
        Point::Fingerprint(fp)
    }
}

impl From<crate::embedding::EmbeddingVector> for Point {
    fn from(v: crate::embedding::EmbeddingVector) -> Self {
        Point::Vector(v.into_inner())
    }
}

#[derive(Debug, Error)]
pub enum BruteForceError {
    #[error("vector lengths differ: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("non-finite coordinate at position {0}")]
    NonFinite(usize),
    #[error("metric {metric} cannot compare a {record}")]
    MetricMismatch { metric: Metric, record: &'static str },
    #[error("k must be at least 1")]
    InvalidK,
    #[error("no records to search")]
    Empty,
    #[error(transparent)]
    Fingerprint(#[from] FingerprintError),
    #[error(transparent)]
    Format(#[from] FormatError),
}

impl From<std::convert::Infallible> for BruteForceError {
    fn from(e: std::convert::Infallible) -> Self {
        match e {}
    }
}

/// Euclidean distance between equal-length finite vectors.
pub fn euclidean_distance(a: &[f32], b: &[f32]) -> Result<f64, BruteForceError> {
    if a.len() != b.len() {
        return Err(BruteForceError::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    if let Some(i) = a.iter().chain(b).position(|c| !c.is_finite()) {
        return Err(BruteForceError::NonFinite(i % a.len().max(1)));
    }
    Ok(squared_distance(a, b).sqrt())
}

fn counts_distance(a: &Fingerprint256, b: &Fingerprint256) -> f64 {
    (0..crate::fingerprint::FINGERPRINT_BITS)
        .map(|i| {
            let d = a.get(i) as f64 - b.get(i) as f64;
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

/// Distance between two points under `metric`.
///
/// Euclidean accepts vectors or fingerprints of the same kind (count
/// fingerprints are compared as 256-dimensional count vectors); Tanimoto
/// accepts binary fingerprints only.
pub fn point_distance(metric: Metric, a: &Point, b: &Point) -> Result<f64, BruteForceError> {
    let mismatch = |p: &Point| BruteForceError::MetricMismatch {
        metric,
        record: p.describe(),
    };
    match (metric, a, b) {
        (Metric::Euclidean, Point::Vector(x), Point::Vector(y)) => euclidean_distance(x, y),
        (Metric::Euclidean, Point::Fingerprint(x), Point::Fingerprint(y)) => {
            if x.kind() != y.kind() {
                return Err(mismatch(b));
            }
            Ok(counts_distance(x, y))
        }
        (Metric::Tanimoto, Point::Fingerprint(x), Point::Fingerprint(y))
            if x.kind() == FingerprintKind::Binary && y.kind() == FingerprintKind::Binary =>
        {
            Ok(tanimoto_distance(x, y)?)
        }
        (Metric::Tanimoto, Point::Fingerprint(x), _) if x.kind() == FingerprintKind::Binary => Err(mismatch(b)),
        _ => Err(mismatch(a)),
    }
}

/// Exact top-`k` of a record stream under `(distance, id)` in one pass with
/// O(k) memory.
pub fn bf_knn<I, E>(
    records: I,
    query: &Point,
    k: usize,
    metric: Metric,
) -> Result<Vec<Neighbor>, BruteForceError>
where
    I: IntoIterator<Item = Result<(u64, Point), E>>,
    BruteForceError: From<E>,
{
    if k == 0 {
        return Err(BruteForceError::InvalidK);
    }
    let mut top = TopK::new(k);
    for record in records {
        let (id, point) = record?;
        let distance = point_distance(metric, query, &point)?;
        top.push(Neighbor { id, distance });
    }
    if top.is_empty() {
        return Err(BruteForceError::Empty);
    }
    Ok(top.into_sorted_vec())
}

/// Euclidean top-`k` over in-memory vectors.
pub fn bf_knn_vectors<'a, I>(records: I, query: &[f32], k: usize) -> Result<Vec<Neighbor>, BruteForceError>
where
    I: IntoIterator<Item = (u64, &'a [f32])>,
{
    if k == 0 {
        return Err(BruteForceError::InvalidK);
    }
    if let Some(i) = query.iter().position(|c| !c.is_finite()) {
        return Err(BruteForceError::NonFinite(i));
    }
    let mut top = TopK::new(k);
    for (id, coords) in records {
        if coords.len() != query.len() {
            return Err(BruteForceError::LengthMismatch {
                left: query.len(),
                right: coords.len(),
            });
        }
        let distance = squared_distance(query, coords).sqrt();
        top.push(Neighbor { id, distance });
    }
    if top.is_empty() {
        return Err(BruteForceError::Empty);
    }
    Ok(top.into_sorted_vec())
}

/// Euclidean top-`k` for several queries in a single pass over an
/// embedding file. Returns one sorted list per query.
pub fn bf_knn_file<R: Read>(
    reader: &mut EmbeddingReader<R>,
    queries: &[Vec<f32>],
    k: usize,
) -> Result<Vec<Vec<Neighbor>>, BruteForceError> {
    if k == 0 {
        return Err(BruteForceError::InvalidK);
    }
    for q in queries {
        if q.len() != reader.dim() {
            return Err(BruteForceError::LengthMismatch {
                left: q.len(),
                right: reader.dim(),
            });
        }
        if let Some(i) = q.iter().position(|c| !c.is_finite()) {
            return Err(BruteForceError::NonFinite(i));
        }
    }
    let mut tops: Vec<TopK> = queries.iter().map(|_| TopK::new(k)).collect();
    let mut coords = vec![0f32; reader.dim()];
    let mut seen = false;
    while let Some(id) = reader.read_into(&mut coords)? {
        seen = true;
        for (q, top) in queries.iter().zip(tops.iter_mut()) {
            let distance = squared_distance(q, &coords).sqrt();
            top.push(Neighbor { id, distance });
        }
    }
    if !seen {
        return Err(BruteForceError::Empty);
    }
    Ok(tops.into_iter().map(TopK::into_sorted_vec).collect())
}
