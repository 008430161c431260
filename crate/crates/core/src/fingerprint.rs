//! Circular-substructure fingerprints folded to 256 positions.
//!
//! Atom identifiers start from a hash of (atomic number, degree, formal
//! charge, aromatic flag) and are refined once per radius by hashing the
//! previous identifier together with the sorted (bond code, neighbor
//! identifier) pairs. Every identifier an atom emits is folded modulo 256:
//! the binary form records presence, the count form multiplicity. An atom
//! stops emitting at the first radius whose environment covers no atom
//! beyond the previous radius.
//!
//! Hashing is 64-bit FNV-1a over little-endian field encodings, so results
//! are identical on every platform.

use std::collections::VecDeque;

use thiserror::Error;

use crate::molgraph::MolecularGraph;

pub const FINGERPRINT_BITS: usize = 256;
pub const DEFAULT_RADIUS: u32 = 2;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

struct Fnv1a(u64);

impl Fnv1a {
    fn new() -> Self {
        Fnv1a(FNV_OFFSET)
    }

    fn bytes(&mut self, data: &[u8]) {
        for &b in data {
            self.0 ^= b as u64;
            self.0 = self.0.wrapping_mul(FNV_PRIME);
        }
    }

    fn u32(&mut self, v: u32) {
        self.bytes(&v.to_le_bytes());
    }

    fn u64(&mut self, v: u64) {
        self.bytes(&v.to_le_bytes());
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FingerprintKind {
    Binary,
    Counts,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FingerprintError {
    #[error("expected a {expected:?} fingerprint, found {found:?}")]
    KindMismatch {
        expected: FingerprintKind,
        found: FingerprintKind,
    },
    #[error("Tanimoto distance is undefined for two empty fingerprints")]
    BothEmpty,
}

/// A 256-position fingerprint, either presence bits or occurrence counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Fingerprint256 {
    Binary([u64; 4]),
    Counts([u16; FINGERPRINT_BITS]),
}

impl Fingerprint256 {
    pub fn empty(kind: FingerprintKind) -> Self {
        match kind {
            FingerprintKind::Binary => Fingerprint256::Binary([0; 4]),
            FingerprintKind::Counts => Fingerprint256::Counts([0; FINGERPRINT_BITS]),
        }
    }

    pub fn kind(&self) -> FingerprintKind {
        match self {
            Fingerprint256::Binary(_) => FingerprintKind::Binary,
            Fingerprint256::Counts(_) => FingerprintKind::Counts,
        }
    }

    /// Value at `position`: 0/1 for binary, the count otherwise.
    pub fn get(&self, position: usize) -> u16 {
        match self {
            Fingerprint256::Binary(words) => ((words[position / 64] >> (position % 64)) & 1) as u16,
            Fingerprint256::Counts(counts) => counts[position],
        }
    }

    /// Number of non-zero positions.
    pub fn popcount(&self) -> u32 {
        match self {
            Fingerprint256::Binary(words) => words.iter().map(|w| w.count_ones()).sum(),
            Fingerprint256::Counts(counts) => counts.iter().filter(|&&c| c > 0).count() as u32,
        }
    }

    /// Sum of all positions (equals popcount for binary).
    pub fn total(&self) -> u64 {
        (0..FINGERPRINT_BITS).map(|i| self.get(i) as u64).sum()
    }

    /// Presence bits of either kind.
    pub fn to_bits(&self) -> [u64; 4] {
        match self {
            Fingerprint256::Binary(words) => *words,
            Fingerprint256::Counts(counts) => {
                let mut words = [0u64; 4];
                for (i, &c) in counts.iter().enumerate() {
                    if c > 0 {
                        words[i / 64] |= 1 << (i % 64);
                    }
                }
                words
            }
        }
    }

    /// Dense real vector (0/1 for binary, raw counts otherwise).
    pub fn to_f64(&self) -> Vec<f64> {
        (0..FINGERPRINT_BITS).map(|i| self.get(i) as f64).collect()
    }

    fn record(&mut self, identifier: u64) {
        let position = (identifier % FINGERPRINT_BITS as u64) as usize;
        match self {
            Fingerprint256::Binary(words) => words[position / 64] |= 1 << (position % 64),
            Fingerprint256::Counts(counts) => {
                counts[position] = counts[position].saturating_add(1)
            }
        }
    }
}

/// Every identifier emitted for `graph`, atom by atom and radius by radius.
pub fn emitted_identifiers(graph: &MolecularGraph, radius: u32) -> Vec<u64> {
    let n = graph.atom_count();
    let mut ids: Vec<u64> = (0..n)
        .map(|i| {
            let atom = &graph.atoms()[i];
            let mut h = Fnv1a::new();
            h.u32(atom.element.atomic_number() as u32);
            h.u32(graph.degree(i) as u32);
            h.u32(atom.charge as i32 as u32);
            h.bytes(&[atom.aromatic as u8]);
            h.0
        })
        .collect();
    let mut emitted = ids.clone();
    if radius == 0 {
        return emitted;
    }

    // covered[a][r] = number of atoms within r bonds of a, for r <= radius.
    let covered: Vec<Vec<usize>> = (0..n).map(|a| coverage(graph, a, radius)).collect();
    let mut active = vec![true; n];
    let mut pairs: Vec<(u32, u64)> = Vec::new();
    for r in 1..=radius as usize {
        let next: Vec<u64> = (0..n)
            .map(|a| {
                pairs.clear();
                pairs.extend(
                    graph
                        .neighbors(a)
                        .iter()
                        .map(|&(b, order)| (order.code() as u32, ids[b])),
                );
                pairs.sort_unstable();
                let mut h = Fnv1a::new();
                h.u64(ids[a]);
                for &(code, id) in &pairs {
                    h.u32(code);
                    h.u64(id);
                }
                h.0
            })
            .collect();
        for a in 0..n {
            if active[a] && covered[a][r] == covered[a][r - 1] {
                active[a] = false;
            }
            if active[a] {
                emitted.push(next[a]);
            }
        }
        ids = next;
    }
    emitted
}

fn coverage(graph: &MolecularGraph, start: usize, radius: u32) -> Vec<usize> {
    let mut depth = vec![u32::MAX; graph.atom_count()];
    let mut per_level = vec![0usize; radius as usize + 1];
    let mut queue = VecDeque::from([start]);
    depth[start] = 0;
    while let Some(u) = queue.pop_front() {
        per_level[depth[u] as usize] += 1;
        if depth[u] == radius {
            continue;
        }
        for &(v, _) in graph.neighbors(u) {
            if depth[v] == u32::MAX {
                depth[v] = depth[u] + 1;
                queue.push_back(v);
            }
        }
    }
    let mut running = 0;
    per_level
        .into_iter()
        .map(|c| {
            running += c;
            running
        })
        .collect()
}

pub fn fingerprint(graph: &MolecularGraph, kind: FingerprintKind, radius: u32) -> Fingerprint256 {
    let mut fp = Fingerprint256::empty(kind);
    for id in emitted_identifiers(graph, radius) {
        fp.record(id);
    }
    fp
}

/// Binary circular fingerprint, radius 2.
pub fn ecfp(graph: &MolecularGraph) -> Fingerprint256 {
    fingerprint(graph, FingerprintKind::Binary, DEFAULT_RADIUS)
}

/// Count circular fingerprint, radius 2.
pub fn ecfc(graph: &MolecularGraph) -> Fingerprint256 {
    fingerprint(graph, FingerprintKind::Counts, DEFAULT_RADIUS)
}

/// `1 - |a ∧ b| / |a ∨ b|` over binary fingerprints.
pub fn tanimoto_distance(a: &Fingerprint256, b: &Fingerprint256) -> Result<f64, FingerprintError> {
    let (Fingerprint256::Binary(x), Fingerprint256::Binary(y)) = (a, b) else {
        let found = if a.kind() != FingerprintKind::Binary {
            a.kind()
        } else {
            b.kind()
        };
        return Err(FingerprintError::KindMismatch {
            expected: FingerprintKind::Binary,
            found,
        });
    };
    let mut inter = 0u32;
    let mut union = 0u32;
    for (p, q) in x.iter().zip(y) {
        inter += (p & q).count_ones();
        union += (p | q).count_ones();
    }
    if union == 0 {
        return Err(FingerprintError::BothEmpty);
    }
    Ok(1.0 - inter as f64 / union as f64)
}
