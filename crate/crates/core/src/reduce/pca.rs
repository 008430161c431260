use std::io::{Read, Write};

use log::warn;
use nalgebra::DMatrix;

use super::ReduceError;
use crate::embedding::{EmbeddingVector, MAX_DIM, SOFT_MAX_DIM};
use crate::formats::{check_magic, check_version, read_f64, read_u16, FORMAT_VERSION};

/// Single-pass accumulator for the sample mean and covariance.
///
/// Sums are taken relative to the first sample, which keeps the final
/// `S2 - s1 s1ᵀ / n` subtraction well conditioned when the data sit far from
/// the origin. Only the upper triangle is accumulated.
#[derive(Debug, Clone)]
pub struct PcaAccumulator {
    dim: usize,
    n: u64,
    shift: Vec<f64>,
    sum: Vec<f64>,
    outer: Vec<f64>,
    centered: Vec<f64>,
}

impl PcaAccumulator {
    pub fn new(dim: usize) -> Self {
        PcaAccumulator {
            dim,
            n: 0,
            shift: Vec::new(),
            sum: vec![0.0; dim],
            outer: vec![0.0; dim * dim],
            centered: vec![0.0; dim],
        }
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn push(&mut self, x: &[f64]) -> Result<(), ReduceError> {
        if x.len() != self.dim {
            return Err(ReduceError::Dimension {
                expected: self.dim,
                found: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(ReduceError::NonFinite);
        }
        if self.n == 0 {
            self.shift = x.to_vec();
        }
        let d = self.dim;
        for i in 0..d {
            self.centered[i] = x[i] - self.shift[i];
            self.sum[i] += self.centered[i];
        }
        for i in 0..d {
            let yi = self.centered[i];
            if yi == 0.0 {
                continue;
            }
            let row = &mut self.outer[i * d..(i + 1) * d];
            for j in i..d {
                row[j] += yi * self.centered[j];
            }
        }
        self.n += 1;
        Ok(())
    }

    pub fn mean(&self) -> Vec<f64> {
        let n = self.n as f64;
        self.shift
            .iter()
            .zip(&self.sum)
            .map(|(s, t)| s + t / n)
            .collect()
    }

    /// Sample covariance with the 1/(n-1) normalization.
    pub fn covariance(&self) -> Result<DMatrix<f64>, ReduceError> {
        if self.n < 2 {
            return Err(ReduceError::TooFewSamples(self.n));
        }
        let d = self.dim;
        let n = self.n as f64;
        let mut cov = DMatrix::zeros(d, d);
        for i in 0..d {
            for j in i..d {
                let c = (self.outer[i * d + j] - self.sum[i] * self.sum[j] / n) / (n - 1.0);
                cov[(i, j)] = c;
                cov[(j, i)] = c;
            }
        }
        Ok(cov)
    }

    pub fn finish(&self, d_out: usize) -> Result<PcaModel, ReduceError> {
        if self.n < 2 {
            return Err(ReduceError::TooFewSamples(self.n));
        }
        let max = self.dim.min(MAX_DIM).min(self.n as usize);
        if d_out == 0 || d_out > max {
            return Err(ReduceError::OutputDimension { d_out, max });
        }
        if d_out > SOFT_MAX_DIM {
            warn!("PCA output dimension {d_out} exceeds {SOFT_MAX_DIM}; k-d tree pruning degrades");
        }
        // Positive semidefinite: the SVD is the eigendecomposition.
        let svd = self.covariance()?.svd(true, false);
        let u = svd.u.as_ref().expect("left singular vectors requested");
        let values = &svd.singular_values;
        let mut order: Vec<usize> = (0..values.len()).collect();
        order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));

        let mut components = Vec::with_capacity(d_out * self.dim);
        let mut eigenvalues = Vec::with_capacity(d_out);
        for &col in order.iter().take(d_out) {
            let v = u.column(col);
            // Sign convention: the largest-magnitude entry is positive
            // (first such entry on ties).
            let mut pivot = 0;
            for i in 1..self.dim {
                if v[i].abs() > v[pivot].abs() {
                    pivot = i;
                }
            }
            let sign = if v[pivot] < 0.0 { -1.0 } else { 1.0 };
            components.extend(v.iter().map(|c| c * sign));
            eigenvalues.push(values[col]);
        }
        Ok(PcaModel {
            d_in: self.dim,
            d_out,
            mean: self.mean(),
            components,
            eigenvalues,
        })
    }
}

/// Fits a PCA model to the rows of `samples`.
pub fn pca_fit<S: AsRef<[f64]>>(samples: &[S], d_out: usize) -> Result<PcaModel, ReduceError> {
    let dim = samples
        .first()
        .map(|s| s.as_ref().len())
        .ok_or(ReduceError::TooFewSamples(0))?;
    let mut acc = PcaAccumulator::new(dim);
    for s in samples {
        acc.push(s.as_ref())?;
    }
    acc.finish(d_out)
}

/// Principal axes of a fitted sample: `project(x) = components · (x − mean)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    d_in: usize,
    d_out: usize,
    mean: Vec<f64>,
    components: Vec<f64>,
    eigenvalues: Vec<f64>,
}

impl PcaModel {
    pub fn d_in(&self) -> usize {
        self.d_in
    }

    pub fn d_out(&self) -> usize {
        self.d_out
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    /// Row `i` of the component matrix (unit length).
    pub fn component(&self, i: usize) -> &[f64] {
        &self.components[i * self.d_in..(i + 1) * self.d_in]
    }

    /// Variances along each component, non-increasing.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
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
        Ok((0..self.d_out)
            .map(|i| {
                self.component(i)
                    .iter()
                    .zip(x.iter().zip(&self.mean))
                    .map(|(c, (v, m))| c * (v - m))
                    .sum()
            })
            .collect())
    }

    pub fn apply(&self, x: &[f64]) -> Result<EmbeddingVector, ReduceError> {
        Ok(EmbeddingVector::from_f64(&self.project(x)?)?)
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        w.write_all(b"PCA1")?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        w.write_all(&(self.d_in as u16).to_le_bytes())?;
        w.write_all(&(self.d_out as u16).to_le_bytes())?;
        for v in self.mean.iter().chain(&self.components).chain(&self.eigenvalues) {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self, ReduceError> {
        check_magic(r, "PCA1")?;
        check_version(r, "PCA1")?;
        let d_in = read_u16(r)? as usize;
        let d_out = read_u16(r)? as usize;
        if d_out == 0 || d_out > d_in.min(MAX_DIM) {
            return Err(ReduceError::OutputDimension {
                d_out,
                max: d_in.min(MAX_DIM),
            });
        }
        let mut read = |n: usize| -> Result<Vec<f64>, ReduceError> {
            (0..n).map(|_| Ok(read_f64(r)?)).collect()
        };
        let mean = read(d_in)?;
        let components = read(d_in * d_out)?;
        let eigenvalues = read(d_out)?;
        Ok(PcaModel {
            d_in,
            d_out,
            mean,
            components,
            eigenvalues,
        })
    }
}
