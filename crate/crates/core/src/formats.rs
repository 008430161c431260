//! Tagged little-endian bulk formats and the neighbor TSV.
//!
//! | format | header                                             | record                         |
//! |--------|----------------------------------------------------|--------------------------------|
//! | FPB1   | magic, u16 version, u64 count                      | u64 id, 32 bytes of bits       |
//! | FPC1   | magic, u16 version, u64 count                      | u64 id, 256 × u16 counts       |
//! | EMB1   | magic, u16 version, u16 dim, u64 count             | u64 id, dim × f32              |
//!
//! Bit `i` of a binary fingerprint lives in byte `i / 8` at bit `i % 8`.
//! Writers emit a zero count and patch it in [`finish`](EmbeddingWriter::finish),
//! so they need a seekable sink.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Seek, SeekFrom, Write};
use std::path::Path;

use thiserror::Error;

use crate::embedding::{EmbeddingVector, Neighbor, MAX_DIM};
use crate::fingerprint::{Fingerprint256, FingerprintKind, FINGERPRINT_BITS};

pub const FORMAT_VERSION: u16 = 1;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("bad magic: expected {expected}, found {found:?}")]
    BadMagic {
        expected: &'static str,
        found: [u8; 4],
    },
    #[error("unsupported {format} version {version}")]
    UnsupportedVersion { format: &'static str, version: u16 },
    #[error("file truncated: header promises {expected} records, found {found}")]
    Truncated { expected: u64, found: u64 },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },
    #[error("record {id} has a non-finite coordinate")]
    NonFinite { id: u64 },
    #[error("expected a {expected:?} fingerprint, found {found:?}")]
    KindMismatch {
        expected: FingerprintKind,
        found: FingerprintKind,
    },
}

pub(crate) fn read_array<const N: usize, R: Read>(r: &mut R) -> io::Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf)?;
    Ok(buf)
}

pub(crate) fn read_u16<R: Read>(r: &mut R) -> io::Result<u16> {
    Ok(u16::from_le_bytes(read_array(r)?))
}

pub(crate) fn read_u32<R: Read>(r: &mut R) -> io::Result<u32> {
    Ok(u32::from_le_bytes(read_array(r)?))
}

pub(crate) fn read_u64<R: Read>(r: &mut R) -> io::Result<u64> {
    Ok(u64::from_le_bytes(read_array(r)?))
}

pub(crate) fn read_f64<R: Read>(r: &mut R) -> io::Result<f64> {
    Ok(f64::from_le_bytes(read_array(r)?))
}

pub(crate) fn check_magic<R: Read>(r: &mut R, expected: &'static str) -> Result<(), FormatError> {
    let found: [u8; 4] = read_array(r)?;
    if found != expected.as_bytes() {
        return Err(FormatError::BadMagic { expected, found });
    }
    Ok(())
}

pub(crate) fn check_version<R: Read>(r: &mut R, format: &'static str) -> Result<(), FormatError> {
    let version = read_u16(r)?;
    if version != FORMAT_VERSION {
        return Err(FormatError::UnsupportedVersion { format, version });
    }
    Ok(())
}

fn truncated(err: io::Error, expected: u64, found: u64) -> FormatError {
    if err.kind() == io::ErrorKind::UnexpectedEof {
        FormatError::Truncated { expected, found }
    } else {
        FormatError::Io(err)
    }
}

fn magic_for(kind: FingerprintKind) -> &'static str {
    match kind {
        FingerprintKind::Binary => "FPB1",
        FingerprintKind::Counts => "FPC1",
    }
}

fn record_len(kind: FingerprintKind) -> usize {
    match kind {
        FingerprintKind::Binary => FINGERPRINT_BITS / 8,
        FingerprintKind::Counts => FINGERPRINT_BITS * 2,
    }
}

pub struct FingerprintWriter<W: Write + Seek> {
    inner: W,
    kind: FingerprintKind,
    count: u64,
    header_at: u64,
}

impl<W: Write + Seek> FingerprintWriter<W> {
    pub fn new(mut inner: W, kind: FingerprintKind) -> io::Result<Self> {
        let header_at = inner.stream_position()?;
        inner.write_all(magic_for(kind).as_bytes())?;
        inner.write_all(&FORMAT_VERSION.to_le_bytes())?;
        inner.write_all(&0u64.to_le_bytes())?;
        Ok(FingerprintWriter {
            inner,
            kind,
            count: 0,
            header_at,
        })
    }

    pub fn write(&mut self, id: u64, fp: &Fingerprint256) -> Result<(), FormatError> {
        if fp.kind() != self.kind {
            return Err(FormatError::KindMismatch {
                expected: self.kind,
                found: fp.kind(),
            });
        }
        self.inner.write_all(&id.to_le_bytes())?;
        match fp {
            Fingerprint256::Binary(words) => {
                for w in words {
                    self.inner.write_all(&w.to_le_bytes())?;
                }
            }
            Fingerprint256::Counts(counts) => {
                let mut buf = [0u8; FINGERPRINT_BITS * 2];
                for (chunk, c) in buf.chunks_exact_mut(2).zip(counts) {
                    chunk.copy_from_slice(&c.to_le_bytes());
                }
                self.inner.write_all(&buf)?;
            }
        }
        self.count += 1;
        Ok(())
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    /// Patches the record count into the header and returns the sink.
    pub fn finish(mut self) -> io::Result<W> {
        let end = self.inner.stream_position()?;
        self.inner.seek(SeekFrom::Start(self.header_at + 6))?;
        self.inner.write_all(&self.count.to_le_bytes())?;
        self.inner.seek(SeekFrom::Start(end))?;
        self.inner.flush()?;
        Ok(self.inner)
    }
}

pub struct FingerprintReader<R: Read> {
    inner: R,
    kind: FingerprintKind,
    count: u64,
    read: u64,
}

impl FingerprintReader<BufReader<File>> {
    pub fn open(path: impl AsRef<Path>) -> Result<Self, FormatError> {
        FingerprintReader::new(BufReader::with_capacity(1 << 16, File::open(path)?))
    }
}

impl<R: Read> FingerprintReader<R> {
    pub fn new(mut inner: R) -> Result<Self, FormatError> {
        let found: [u8; 4] = read_array(&mut inner)?;
        let kind = match &found {
            b"FPB1" => FingerprintKind::Binary,
            b"FPC1" => FingerprintKind::Counts,
            _ => {
                return Err(FormatError::BadMagic {
                    expected: "FPB1 or FPC1",
                    found,
                })
            }
        };
        check_version(&mut inner, magic_for(kind))?;
        let count = read_u64(&mut inner)?;
        Ok(FingerprintReader {
            inner,
            kind,
            count,
            read: 0,
        })
    }

    pub fn kind(&self) -> FingerprintKind {
        self.kind
    }

    /// Records declared in the header.
    pub fn len(&self) -> u64 {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    fn next_record(&mut self) -> Result<(u64, Fingerprint256), FormatError> {
        let (count, read) = (self.count, self.read);
        let id = read_u64(&mut self.inner).map_err(|e| truncated(e, count, read))?;
        let mut buf = [0u8; FINGERPRINT_BITS * 2];
        let body = &mut buf[..record_len(self.kind)];
        self.inner
            .read_exact(body)
            .map_err(|e| truncated(e, count, read))?;
        let fp = match self.kind {
            FingerprintKind::Binary => {
                let mut words = [0u64; 4];
                for (w, chunk) in words.iter_mut().zip(body.chunks_exact(8)) {
                    *w = u64::from_le_bytes(chunk.try_into().expect("8 bytes"));
                }
                Fingerprint256::Binary(words)
            }
            FingerprintKind::Counts => {
                let mut counts = [0u16; FINGERPRINT_BITS];
                for (c, chunk) in counts.iter_mut().zip(body.chunks_exact(2)) {
                    *c = u16::from_le_bytes([chunk[0], chunk[1]]);
                }
                Fingerprint256::Counts(counts)
            }
        };
        self.read += 1;
        Ok((id, fp))
    }
}

impl<R: Read> Iterator for FingerprintReader<R> {
    type Item = Result<(u64, Fingerprint256), FormatError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.read >= self.count {
            return None;
        }
        let item = self.next_record();
        if item.is_err() {
            // Stop after the first error.
            self.read = self.count;
        }
        Some(item)
    }
}

pub struct EmbeddingWriter<W: Write + Seek> {
    inner: W,
    dim: usize,
    count: u64,
    header_at: u64,
}

impl EmbeddingWriter<BufWriter<File>> {
    pub fn create(path: impl AsRef<Path>, dim: usize) -> Result<Self, FormatError> {
        EmbeddingWriter::new(BufWriter::with_capacity(1 << 16, File::create(path)?), dim)
    }
}

impl<W: Write + Seek> EmbeddingWriter<W> {
    pub fn new(mut inner: W, dim: usize) -> Result<Self, FormatError> {
        if dim == 0 || dim > MAX_DIM {
            return Err(FormatError::Dimension {
                expected: MAX_DIM,
                found: dim,
            });
        }
        let header_at = inner.stream_position()?;
        inner.write_all(b"EMB1")?;
        inner.write_all(&FORMAT_VERSION.to_le_bytes())?;
        inner.write_all(&(dim as u16).to_le_bytes())?;
        inner.write_all(&0u64.to_le_bytes())?;
        Ok(EmbeddingWriter {
            inner,
            dim,
            count: 0,
            header_at,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn write(&mut self, id: u64, coords: &[f32]) -> Result<(), FormatError> {
        if coords.len() != self.dim {
            return Err(FormatError::Dimension {
                expected: self.dim,
                found: coords.len(),
            });
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(FormatError::NonFinite { id });
        }
        let mut buf = [0u8; 8 + 4 * MAX_DIM];
        buf[..8].copy_from_slice(&id.to_le_bytes());
        for (chunk, c) in buf[8..].chunks_exact_mut(4).zip(coords) {
            chunk.copy_from_slice(&c.to_le_bytes());
        }
        self.inner.write_all(&buf[..8 + 4 * self.dim])?;
        self.count += 1;
        Ok(())
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn finish(mut self) -> io::Result<W> {
        let end = self.inner.stream_position()?;
        self.inner.seek(SeekFrom::Start(self.header_at + 8))?;
        self.inner.write_all(&self.count.to_le_bytes())?;
        self.inner.seek(SeekFrom::Start(end))?;
        self.inner.flush()?;
        Ok(self.inner)
    }
}

/// Streaming EMB1 reader.
pub struct EmbeddingReader<R: Read> {
    inner: R,
    dim: usize,
    count: u64,
    read: u64,
    buf: Vec<u8>,
}

impl EmbeddingReader<BufReader<File>> {
    pub fn open(path: impl AsRef<Path>) -> Result<Self, FormatError> {
        EmbeddingReader::new(BufReader::with_capacity(1 << 16, File::open(path)?))
    }
}

impl<R: Read> EmbeddingReader<R> {
    pub fn new(mut inner: R) -> Result<Self, FormatError> {
        check_magic(&mut inner, "EMB1")?;
        check_version(&mut inner, "EMB1")?;
        let dim = read_u16(&mut inner)? as usize;
        if dim == 0 || dim > MAX_DIM {
            return Err(FormatError::Dimension {
                expected: MAX_DIM,
                found: dim,
            });
        }
        let count = read_u64(&mut inner)?;
        Ok(EmbeddingReader {
            inner,
            dim,
            count,
            read: 0,
            buf: vec![0; 8 + 4 * dim],
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Records declared in the header.
    pub fn len(&self) -> u64 {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    /// Reads the next record into `coords` without allocating.
    pub fn read_into(&mut self, coords: &mut [f32]) -> Result<Option<u64>, FormatError> {
        if self.read >= self.count {
            return Ok(None);
        }
        if coords.len() != self.dim {
            return Err(FormatError::Dimension {
                expected: self.dim,
                found: coords.len(),
            });
        }
        let (count, read) = (self.count, self.read);
        self.inner
            .read_exact(&mut self.buf)
            .map_err(|e| truncated(e, count, read))?;
        let id = u64::from_le_bytes(self.buf[..8].try_into().expect("8 bytes"));
        for (c, chunk) in coords.iter_mut().zip(self.buf[8..].chunks_exact(4)) {
            *c = f32::from_le_bytes(chunk.try_into().expect("4 bytes"));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(FormatError::NonFinite { id });
        }
        self.read += 1;
        Ok(Some(id))
    }
}

impl<R: Read> Iterator for EmbeddingReader<R> {
    type Item = Result<(u64, EmbeddingVector), FormatError>;

    fn next(&mut self) -> Option<Self::Item> {
        let mut coords = vec![0f32; self.dim];
        match self.read_into(&mut coords) {
            Ok(Some(id)) => Some(Ok((
                id,
                EmbeddingVector::new(coords).expect("validated by read_into"),
            ))),
            Ok(None) => None,
            Err(e) => {
                self.read = self.count;
                Some(Err(e))
            }
        }
    }
}

pub const NEIGHBOR_TSV_HEADER: &str = "query_id\trank\tneighbor_id\tdistance";

/// Writes one query's neighbors as `query_id, rank, neighbor_id, distance`
/// rows; ranks start at 1 and distances carry six decimals.
pub fn write_neighbor_rows<W: Write>(
    out: &mut W,
    query_id: u64,
    neighbors: &[Neighbor],
) -> io::Result<()> {
    for (rank, n) in neighbors.iter().enumerate() {
        writeln!(out, "{query_id}\t{}\t{}\t{:.6}", rank + 1, n.id, n.distance)?;
    }
    Ok(())
}
