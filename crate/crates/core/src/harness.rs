//! Evaluation machinery: hit-quality GED curves, virtual-screening AUROC and
//! query timing.

use std::collections::HashMap;
use std::fmt;
use std::io::{self, BufRead, Write};
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::bruteforce::{bf_knn_file, BruteForceError};
use crate::embedding::{squared_distance, EmbeddingVector};
use crate::formats::{EmbeddingReader, FormatError};
use crate::ged::approx_ged;
use crate::kdtree::{KdError, KdIndex};
use crate::molgraph::MolecularGraph;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },
    #[error("the database has no {0} records")]
    EmptyClass(Label),
    #[error("no queries given")]
    NoQueries,
    #[error("query {query} has {len} hits, fewer than k_max = {k_max}")]
    RaggedHits { query: usize, len: usize, k_max: usize },
    #[error("queries and hit lists differ in number ({queries} vs {hits})")]
    HitCount { queries: usize, hits: usize },
    #[error("k must be at least 1")]
    InvalidK,
    #[error("repeats must be at least 1")]
    InvalidRepeats,
    #[error("fraction {0} outside (0, 1)")]
    InvalidFraction(f64),
    #[error("record {0} has no label")]
    MissingLabel(u64),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Kd(#[from] KdError),
    #[error(transparent)]
    BruteForce(#[from] BruteForceError),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Mean approximate GED between each query and its top-k hits, for
/// k = 1..=k_max. Entry `k - 1` averages over queries the per-query mean of
/// `approx_ged(query, hits[0..k])`.
pub fn ged_curve(
    queries: &[MolecularGraph],
    hits: &[Vec<MolecularGraph>],
    k_max: usize,
) -> Result<Vec<f64>, HarnessError> {
    if k_max == 0 {
        return Err(HarnessError::InvalidK);
    }
    if queries.is_empty() {
        return Err(HarnessError::NoQueries);
    }
    if queries.len() != hits.len() {
        return Err(HarnessError::HitCount {
            queries: queries.len(),
            hits: hits.len(),
        });
    }
    if let Some((query, list)) = hits.iter().enumerate().find(|(_, h)| h.len() < k_max) {
        return Err(HarnessError::RaggedHits {
            query,
            len: list.len(),
            k_max,
        });
    }
    let mut sums = vec![0.0f64; k_max];
    for (query, list) in queries.iter().zip(hits) {
        let mut running = 0.0;
        for (k, hit) in list[..k_max].iter().enumerate() {
            running += approx_ged(query, hit);
            sums[k] += running / (k + 1) as f64;
        }
    }
    let n = queries.len() as f64;
    Ok(sums.into_iter().map(|s| s / n).collect())
}

/// Trailing running mean over at most `window` values, for plotting.
pub fn running_average(series: &[f64], window: usize) -> Vec<f64> {
    let window = window.max(1);
    let mut out = Vec::with_capacity(series.len());
    let mut sum = 0.0;
    for (i, &x) in series.iter().enumerate() {
        sum += x;
        if i >= window {
            sum -= series[i - window];
        }
        out.push(sum / (i + 1).min(window) as f64);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Active,
    Decoy,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Active => "active",
            Label::Decoy => "decoy",
        }
    }

    pub fn swapped(self) -> Label {
        match self {
            Label::Active => Label::Decoy,
            Label::Decoy => Label::Active,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "active" | "1" => Ok(Label::Active),
            "decoy" | "inactive" | "0" => Ok(Label::Decoy),
            other => Err(format!("unknown label {other:?}")),
        }
    }
}

/// Reads `id<TAB>label` lines. Blank lines, `#` comments and a leading
/// header line are skipped.
pub fn read_labels<R: BufRead>(input: R) -> Result<HashMap<u64, Label>, HarnessError> {
    let mut labels = HashMap::new();
    for (index, line) in input.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut fields = trimmed.split('\t');
        let (id, label) = match (fields.next(), fields.next()) {
            (Some(id), Some(label)) => (id.trim(), label),
            _ => {
                return Err(HarnessError::Parse {
                    line: index + 1,
                    message: "expected id<TAB>label".into(),
                })
            }
        };
        let id = match id.parse::<u64>() {
            Ok(id) => id,
            Err(_) if labels.is_empty() && index == 0 => continue,
            Err(e) => {
                return Err(HarnessError::Parse {
                    line: index + 1,
                    message: format!("bad id {id:?}: {e}"),
                })
            }
        };
        let label = label.parse().map_err(|message| HarnessError::Parse {
            line: index + 1,
            message,
        })?;
        labels.insert(id, label);
    }
    Ok(labels)
}

/// Database records tagged active or decoy.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledEmbeddings {
    dim: usize,
    records: Vec<(u64, EmbeddingVector, Label)>,
}

impl LabeledEmbeddings {
    pub fn new(records: Vec<(u64, EmbeddingVector, Label)>) -> Result<Self, HarnessError> {
        let dim = records.first().map_or(0, |r| r.1.dim());
        if let Some(r) = records.iter().find(|r| r.1.dim() != dim) {
            return Err(HarnessError::Dimension {
                expected: dim,
                found: r.1.dim(),
            });
        }
        Ok(LabeledEmbeddings { dim, records })
    }

    /// Joins an embedding stream with a label table; every record needs a label.
    pub fn from_reader<R: io::Read>(
        reader: EmbeddingReader<R>,
        labels: &HashMap<u64, Label>,
    ) -> Result<Self, HarnessError> {
        let mut records = Vec::new();
        for item in reader {
            let (id, v) = item?;
            let label = *labels.get(&id).ok_or(HarnessError::MissingLabel(id))?;
            records.push((id, v, label));
        }
        LabeledEmbeddings::new(records)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[(u64, EmbeddingVector, Label)] {
        &self.records
    }

    pub fn count(&self, label: Label) -> usize {
        self.records.iter().filter(|r| r.2 == label).count()
    }

    pub fn with_swapped_labels(&self) -> Self {
        LabeledEmbeddings {
            dim: self.dim,
            records: self
                .records
                .iter()
                .map(|(id, v, l)| (*id, v.clone(), l.swapped()))
                .collect(),
        }
    }

    /// Moves a random `fraction` of the actives out of the database to serve
    /// as queries. At least one active stays and at least one is moved.
    pub fn split_queries(&self, fraction: f64, seed: u64) -> Result<(Self, Vec<EmbeddingVector>), HarnessError> {
        if !(fraction > 0.0 && fraction < 1.0) {
            return Err(HarnessError::InvalidFraction(fraction));
        }
        let actives: Vec<usize> = (0..self.records.len())
            .filter(|&i| self.records[i].2 == Label::Active)
            .collect();
        if actives.len() < 2 {
            return Err(HarnessError::EmptyClass(Label::Active));
        }
        let take = ((actives.len() as f64 * fraction).round() as usize).clamp(1, actives.len() - 1);
        let mut order = actives;
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let mut chosen = order[..take].to_vec();
        chosen.sort_unstable();
        let queries = chosen.iter().map(|&i| self.records[i].1.clone()).collect();
        let mut keep = Vec::with_capacity(self.records.len() - take);
        let mut next = chosen.iter().peekable();
        for (i, r) in self.records.iter().enumerate() {
            if next.peek() == Some(&&i) {
                next.next();
            } else {
                keep.push(r.clone());
            }
        }
        Ok((
            LabeledEmbeddings {
                dim: self.dim,
                records: keep,
            },
            queries,
        ))
    }
}

/// Mann–Whitney pair counts in half units: a concordant pair adds 2, a tie 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AurocCounts {
    pub half_units: u128,
    pub pairs: u128,
}

impl AurocCounts {
    pub fn value(&self) -> f64 {
        self.half_units as f64 / (2 * self.pairs) as f64
    }
}

/// Counts (active, decoy) pairs where the active scores higher, ties half.
pub fn auroc_counts(active_scores: &[f64], decoy_scores: &[f64]) -> AurocCounts {
    let mut decoys = decoy_scores.to_vec();
    decoys.sort_unstable_by(f64::total_cmp);
    let mut half_units = 0u128;
    for &a in active_scores {
        let below = decoys.partition_point(|d| d.total_cmp(&a).is_lt());
        let not_above = decoys.partition_point(|d| d.total_cmp(&a).is_le());
        half_units += 2 * below as u128 + (not_above - below) as u128;
    }
    AurocCounts {
        half_units,
        pairs: active_scores.len() as u128 * decoy_scores.len() as u128,
    }
}

pub fn auroc(active_scores: &[f64], decoy_scores: &[f64]) -> f64 {
    auroc_counts(active_scores, decoy_scores).value()
}

/// Scores each record by minus its distance to the nearest query active.
pub fn screening_scores(
    database: &LabeledEmbeddings,
    query_actives: &[EmbeddingVector],
) -> Result<Vec<f64>, HarnessError> {
    if query_actives.is_empty() {
        return Err(HarnessError::NoQueries);
    }
    if let Some(q) = query_actives.iter().find(|q| q.dim() != database.dim()) {
        return Err(HarnessError::Dimension {
            expected: database.dim(),
            found: q.dim(),
        });
    }
    Ok(database
        .records()
        .iter()
        .map(|(_, v, _)| {
            let nearest = query_actives
                .iter()
                .map(|q| squared_distance(q.as_slice(), v.as_slice()))
                .fold(f64::INFINITY, f64::min);
            -nearest.sqrt()
        })
        .collect())
}

pub fn vs_auroc_counts(
    database: &LabeledEmbeddings,
    query_actives: &[EmbeddingVector],
) -> Result<AurocCounts, HarnessError> {
    for label in [Label::Active, Label::Decoy] {
        if database.count(label) == 0 {
            return Err(HarnessError::EmptyClass(label));
        }
    }
    let scores = screening_scores(database, query_actives)?;
    let (mut actives, mut decoys) = (Vec::new(), Vec::new());
    for (score, record) in scores.into_iter().zip(database.records()) {
        match record.2 {
            Label::Active => actives.push(score),
            Label::Decoy => decoys.push(score),
        }
    }
    Ok(auroc_counts(&actives, &decoys))
}

/// Nearest-active virtual-screening AUROC of `database`.
pub fn vs_auroc(database: &LabeledEmbeddings, query_actives: &[EmbeddingVector]) -> Result<f64, HarnessError> {
    Ok(vs_auroc_counts(database, query_actives)?.value())
}

fn gaussian_vector(rng: &mut ChaCha8Rng, dim: usize, center: &[f64], scale: f64) -> EmbeddingVector {
    let coords: Vec<f64> = (0..dim)
        .map(|d| {
            let z: f64 = StandardNormal.sample(rng);
            center[d] + scale * z
        })
        .collect();
    EmbeddingVector::from_f64(&coords).expect("finite")
}

/// Actives and query actives inside the unit ball at the origin; decoys on
/// or beyond radius 10. Every active is strictly closer to every query than
/// any decoy is.
pub fn separable_screen(
    n_actives: usize,
    n_decoys: usize,
    n_queries: usize,
    dim: usize,
    seed: u64,
) -> (LabeledEmbeddings, Vec<EmbeddingVector>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let in_ball = |rng: &mut ChaCha8Rng| {
        let v = gaussian_vector(rng, dim, &vec![0.0; dim], 1.0);
        let norm = squared_distance(v.as_slice(), &vec![0.0; dim]).sqrt().max(1e-12);
        let radius: f64 = rng.random_range(0.0..0.5);
        let coords: Vec<f64> = v.as_slice().iter().map(|&c| c as f64 / norm * radius).collect();
        EmbeddingVector::from_f64(&coords).expect("finite")
    };
    let mut records = Vec::with_capacity(n_actives + n_decoys);
    for i in 0..n_actives {
        records.push((i as u64, in_ball(&mut rng), Label::Active));
    }
    for i in 0..n_decoys {
        let v = gaussian_vector(&mut rng, dim, &vec![0.0; dim], 1.0);
        let norm = squared_distance(v.as_slice(), &vec![0.0; dim]).sqrt().max(1e-12);
        let radius: f64 = rng.random_range(10.0..20.0);
        let coords: Vec<f64> = v.as_slice().iter().map(|&c| c as f64 / norm * radius).collect();
        records.push((
            (n_actives + i) as u64,
            EmbeddingVector::from_f64(&coords).expect("finite"),
            Label::Decoy,
        ));
    }
    let queries = (0..n_queries).map(|_| in_ball(&mut rng)).collect();
    (LabeledEmbeddings::new(records).expect("uniform dimension"), queries)
}

/// Standard-normal records with labels assigned independently of position:
/// each record is active with probability `active_fraction` (at least one of
/// each class is forced). Queries come from the same distribution.
pub fn shuffled_screen(
    n: usize,
    n_queries: usize,
    dim: usize,
    active_fraction: f64,
    seed: u64,
) -> (LabeledEmbeddings, Vec<EmbeddingVector>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let zero = vec![0.0; dim];
    let mut records: Vec<(u64, EmbeddingVector, Label)> = (0..n)
        .map(|i| {
            let v = gaussian_vector(&mut rng, dim, &zero, 1.0);
            let label = if rng.random::<f64>() < active_fraction {
                Label::Active
            } else {
                Label::Decoy
            };
            (i as u64, v, label)
        })
        .collect();
    if n >= 2 {
        if records.iter().all(|r| r.2 == Label::Decoy) {
            records[0].2 = Label::Active;
        }
        if records.iter().all(|r| r.2 == Label::Active) {
            records[n - 1].2 = Label::Decoy;
        }
    }
    let queries = (0..n_queries).map(|_| gaussian_vector(&mut rng, dim, &zero, 1.0)).collect();
    (LabeledEmbeddings::new(records).expect("uniform dimension"), queries)
}

/// What a timing run searches.
#[derive(Debug, Clone, Copy)]
pub enum SearchTarget<'a> {
    KdTree(&'a KdIndex),
    /// Linear scan over an embedding file, read afresh for every query.
    BruteForce(&'a Path),
}

impl SearchTarget<'_> {
    pub fn tag(&self) -> &'static str {
        match self {
            SearchTarget::KdTree(_) => "kdtree",
            SearchTarget::BruteForce(_) => "bruteforce",
        }
    }
}

pub const TIMING_TSV_HEADER: &str = "method\tn\td\tk\tmean_s\tstd_s";

#[derive(Debug, Clone, PartialEq)]
pub struct TimingReport {
    pub method: String,
    pub n: u64,
    pub d: usize,
    pub k: usize,
    /// Wall time per query in seconds, warm-up excluded.
    pub samples: Vec<f64>,
    pub mean: f64,
    /// Sample standard deviation (n − 1 denominator); 0 for one sample.
    pub std: f64,
    /// Mean fraction of database points whose distance was computed.
    pub distance_fraction: f64,
}

impl TimingReport {
    pub fn from_samples(method: &str, n: u64, d: usize, k: usize, samples: Vec<f64>, distance_fraction: f64) -> Self {
        let count = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / count;
        let std = if samples.len() > 1 {
            (samples.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / (count - 1.0)).sqrt()
        } else {
            0.0
        };
        TimingReport {
            method: method.to_string(),
            n,
            d,
            k,
            samples,
            mean,
            std,
            distance_fraction,
        }
    }

    pub fn write_tsv_row<W: Write>(&self, out: &mut W) -> io::Result<()> {
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{:.9}\t{:.9}",
            self.method, self.n, self.d, self.k, self.mean, self.std
        )
    }
}

/// Times each query `repeats` times after one untimed warm-up pass, on the
/// calling thread only.
pub fn timing_run(
    target: SearchTarget<'_>,
    queries: &[Vec<f32>],
    k: usize,
    repeats: usize,
) -> Result<TimingReport, HarnessError> {
    if k == 0 {
        return Err(HarnessError::InvalidK);
    }
    if repeats == 0 {
        return Err(HarnessError::InvalidRepeats);
    }
    if queries.is_empty() {
        return Err(HarnessError::NoQueries);
    }
    let (n, d) = match target {
        SearchTarget::KdTree(index) => (index.len(), index.dim()),
        SearchTarget::BruteForce(path) => {
            let reader = EmbeddingReader::open(path)?;
            (reader.len(), reader.dim())
        }
    };
    if let Some(q) = queries.iter().find(|q| q.len() != d) {
        return Err(HarnessError::Dimension {
            expected: d,
            found: q.len(),
        });
    }
    let run = |q: &[f32]| -> Result<u64, HarnessError> {
        match target {
            SearchTarget::KdTree(index) => Ok(index.knn_with_stats(q, k)?.1.distance_computations),
            SearchTarget::BruteForce(path) => {
                let mut reader = EmbeddingReader::open(path)?;
                let hits = bf_knn_file(&mut reader, &[q.to_vec()], k)?;
                std::hint::black_box(hits);
                Ok(n)
            }
        }
    };
    for q in queries {
        run(q)?;
    }
    let mut samples = Vec::with_capacity(queries.len() * repeats);
    let mut distances = 0u128;
    for _ in 0..repeats {
        for q in queries {
            let start = Instant::now();
            distances += run(q)? as u128;
            samples.push(start.elapsed().as_secs_f64());
        }
    }
    let fraction = distances as f64 / (samples.len() as f64 * n.max(1) as f64);
    Ok(TimingReport::from_samples(target.tag(), n, d, k, samples, fraction))
}
