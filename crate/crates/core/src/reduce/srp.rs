use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::ReduceError;
use crate::embedding::{EmbeddingVector, MAX_DIM};
use crate::formats::{check_magic, check_version, read_u16, read_u64, FORMAT_VERSION};

/// Sparse random projection with density parameter `s = √d_in`.
///
/// Entry `(r, c)` is `+√(s/d_out)` with probability `1/(2s)`, `−√(s/d_out)`
/// with probability `1/(2s)` and zero otherwise, drawn row-major from a
/// ChaCha8 stream seeded with `seed`. Only `(d_in, d_out, seed)` is
/// persisted; the matrix is regenerated bit-identically on load.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseProjection {
    d_in: usize,
    d_out: usize,
    seed: u64,
    rows: Vec<Vec<(u32, f64)>>,
}

impl SparseProjection {
    pub fn new(d_in: usize, d_out: usize, seed: u64) -> Result<Self, ReduceError> {
        if d_in == 0 || d_in > u16::MAX as usize {
            return Err(ReduceError::Dimension {
                expected: 256,
                found: d_in,
            });
        }
        if d_out == 0 || d_out > MAX_DIM {
            return Err(ReduceError::OutputDimension { d_out, max: MAX_DIM });
        }
        let s = (d_in as f64).sqrt();
        let p = 1.0 / (2.0 * s);
        let scale = (s / d_out as f64).sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows = (0..d_out)
            .map(|_| {
                (0..d_in as u32)
                    .filter_map(|c| {
                        let u: f64 = rng.random();
                        if u < p {
                            Some((c, scale))
                        } else if u < 2.0 * p {
                            Some((c, -scale))
                        } else {
                            None
                        }
                    })
                    .collect()
            })
            .collect();
        Ok(SparseProjection {
            d_in,
            d_out,
            seed,
            rows,
        })
    }

    pub fn d_in(&self) -> usize {
        self.d_in
    }

    pub fn d_out(&self) -> usize {
        self.d_out
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Non-zero entries of output row `r` as (column, value).
    pub fn row(&self, r: usize) -> &[(u32, f64)] {
        &self.rows[r]
    }

    pub fn project(&self, x: &[f64]) -> Result<Vec<f64>, ReduceError> {
        if x.len() != self.d_in {
            return Err(ReduceError::Dimension {
                expected: self.d_in,
                found: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(ReduceError::NonFinite);
        }
        Ok(self
            .rows
            .iter()
            .map(|row| row.iter().map(|&(c, v)| v * x[c as usize]).sum())
            .collect())
    }

    pub fn apply(&self, x: &[f64]) -> Result<EmbeddingVector, ReduceError> {
        Ok(EmbeddingVector::from_f64(&self.project(x)?)?)
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        w.write_all(b"SRP1")?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        w.write_all(&(self.d_in as u16).to_le_bytes())?;
        w.write_all(&(self.d_out as u16).to_le_bytes())?;
        w.write_all(&self.seed.to_le_bytes())
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self, ReduceError> {
        check_magic(r, "SRP1")?;
        check_version(r, "SRP1")?;
        let d_in = read_u16(r)? as usize;
        let d_out = read_u16(r)? as usize;
        let seed = read_u64(r)?;
        SparseProjection::new(d_in, d_out, seed)
    }
}
