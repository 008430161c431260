use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Read, Stdout, Write};
use std::path::{Path, PathBuf};

use simsearch_core::fingerprint::Fingerprint256;
use simsearch_core::formats::{EmbeddingReader, FingerprintReader};
use tempfile::NamedTempFile;

use crate::error::CliError;

const BUFFER: usize = 1 << 16;

fn parent_dir(path: &Path) -> &Path {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    }
}

/// A writer to a temporary file beside `path`; nothing appears at `path`
/// until [`commit`] succeeds.
pub fn staged(path: &Path) -> Result<BufWriter<NamedTempFile>, CliError> {
    let tmp = tempfile::Builder::new()
        .prefix(".simsearch-")
        .tempfile_in(parent_dir(path))
        .map_err(|e| CliError::from(e).context(path.display()))?;
    Ok(BufWriter::with_capacity(BUFFER, tmp))
}

pub fn commit(writer: BufWriter<NamedTempFile>, path: &Path) -> Result<(), CliError> {
    let tmp = writer.into_inner().map_err(|e| CliError::from(e.into_error()))?;
    tmp.persist(path)?;
    Ok(())
}

/// Text output to a staged file, or to stdout when no path (or `-`) is given.
pub enum TextSink {
    File {
        writer: BufWriter<NamedTempFile>,
        path: PathBuf,
    },
    Stdout(BufWriter<Stdout>),
}

impl TextSink {
    pub fn open(path: Option<&Path>) -> Result<Self, CliError> {
        match path {
            Some(p) if p != Path::new("-") => Ok(TextSink::File {
                writer: staged(p)?,
                path: p.to_path_buf(),
            }),
            _ => Ok(TextSink::Stdout(BufWriter::new(io::stdout()))),
        }
    }

    pub fn finish(self) -> Result<(), CliError> {
        match self {
            TextSink::File { writer, path } => commit(writer, &path),
            TextSink::Stdout(mut w) => Ok(w.flush()?),
        }
    }
}

impl Write for TextSink {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        match self {
            TextSink::File { writer, .. } => writer.write(buf),
            TextSink::Stdout(w) => w.write(buf),
        }
    }

    fn flush(&mut self) -> io::Result<()> {
        match self {
            TextSink::File { writer, .. } => writer.flush(),
            TextSink::Stdout(w) => w.flush(),
        }
    }
}

pub fn open_file(path: &Path) -> Result<File, CliError> {
    File::open(path).map_err(|e| CliError::from(e).context(path.display()))
}

pub fn read_magic(path: &Path) -> Result<[u8; 4], CliError> {
    let mut magic = [0u8; 4];
    open_file(path)?
        .read_exact(&mut magic)
        .map_err(|_| CliError::data(format!("{}: file too short to hold a header", path.display())))?;
    Ok(magic)
}

/// Records of a fingerprint or embedding file, presented as real vectors.
pub enum VectorInput {
    Fingerprints(FingerprintReader<BufReader<File>>),
    Embeddings(EmbeddingReader<BufReader<File>>),
}

impl VectorInput {
    pub fn open(path: &Path) -> Result<Self, CliError> {
        let ctx = |e: CliError| e.context(path.display());
        match &read_magic(path)? {
            b"FPB1" | b"FPC1" => Ok(VectorInput::Fingerprints(FingerprintReader::open(path).map_err(|e| ctx(e.into()))?)),
            b"EMB1" => Ok(VectorInput::Embeddings(EmbeddingReader::open(path).map_err(|e| ctx(e.into()))?)),
            other => Err(CliError::data(format!(
                "{}: expected a fingerprint or embedding file, found magic {:?}",
                path.display(),
                String::from_utf8_lossy(other)
            ))),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            VectorInput::Fingerprints(_) => simsearch_core::fingerprint::FINGERPRINT_BITS,
            VectorInput::Embeddings(r) => r.dim(),
        }
    }

    pub fn len(&self) -> u64 {
        match self {
            VectorInput::Fingerprints(r) => r.len(),
            VectorInput::Embeddings(r) => r.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Reads the next record into `out`, replacing its contents.
    pub fn next_into(&mut self, out: &mut Vec<f64>) -> Result<Option<u64>, CliError> {
        match self {
            VectorInput::Fingerprints(r) => match r.next() {
                None => Ok(None),
                Some(item) => {
                    let (id, fp): (u64, Fingerprint256) = item?;
                    *out = fp.to_f64();
                    Ok(Some(id))
                }
            },
            VectorInput::Embeddings(r) => {
                let mut coords = vec![0f32; r.dim()];
                match r.read_into(&mut coords)? {
                    None => Ok(None),
                    Some(id) => {
                        out.clear();
                        out.extend(coords.iter().map(|&c| c as f64));
                        Ok(Some(id))
                    }
                }
            }
        }
    }
}

/// One non-blank line of a SMILES file.
#[derive(Debug, Clone)]
pub struct SmilesLine {
    /// 1-based line number.
    pub line: usize,
    pub smiles: String,
    pub name: Option<String>,
    /// The name if it is an unsigned integer, otherwise the line number.
    pub id: u64,
}

pub fn smiles_lines(path: &Path) -> Result<impl Iterator<Item = Result<SmilesLine, CliError>>, CliError> {
    let reader = BufReader::with_capacity(BUFFER, open_file(path)?);
    Ok(reader.lines().enumerate().filter_map(|(i, line)| {
        let line = match line {
            Ok(l) => l,
            Err(e) => return Some(Err(CliError::from(e))),
        };
        let trimmed = line.trim_end_matches(['\r', '\n']);
        if trimmed.trim().is_empty() || trimmed.starts_with('#') {
            return None;
        }
        let mut fields = trimmed.split('\t');
        let smiles = fields.next().unwrap_or("").trim().to_string();
        let name = fields.next().map(|s| s.trim().to_string()).filter(|s| !s.is_empty());
        let id = name
            .as_deref()
            .and_then(|n| n.parse::<u64>().ok())
            .unwrap_or((i + 1) as u64);
        Some(Ok(SmilesLine {
            line: i + 1,
            smiles,
            name,
            id,
        }))
    }))
}

/// Lines that failed to process, written only if there are any.
pub struct Rejects {
    path: PathBuf,
    writer: Option<BufWriter<NamedTempFile>>,
    count: u64,
}

pub const REJECTS_HEADER: &str = "line\tid\terror\tinput";

impl Rejects {
    pub fn new(path: PathBuf) -> Self {
        Rejects {
            path,
            writer: None,
            count: 0,
        }
    }

    /// `<output>.rejects.tsv` unless overridden.
    pub fn beside(output: &Path, explicit: Option<&Path>) -> Self {
        let path = explicit.map(Path::to_path_buf).unwrap_or_else(|| {
            let mut p = output.as_os_str().to_owned();
            p.push(".rejects.tsv");
            PathBuf::from(p)
        });
        Rejects::new(path)
    }

    pub fn add(&mut self, line: &SmilesLine, error: &dyn std::fmt::Display) -> Result<(), CliError> {
        if self.writer.is_none() {
            let mut w = staged(&self.path)?;
            writeln!(w, "{REJECTS_HEADER}")?;
            self.writer = Some(w);
        }
        let w = self.writer.as_mut().expect("created above");
        let name = line.name.as_deref().unwrap_or("");
        let message = error.to_string().replace(['\t', '\n'], " ");
        writeln!(w, "{}\t{}\t{}\t{}", line.line, name, message, line.smiles)?;
        self.count += 1;
        Ok(())
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn finish(self) -> Result<u64, CliError> {
        if let Some(w) = self.writer {
            commit(w, &self.path)?;
        }
        Ok(self.count)
    }
}

/// Parses sizes such as `4096`, `512K`, `64M`, `2G` (binary multiples).
pub fn parse_bytes(text: &str) -> Result<u64, String> {
    let t = text.trim();
    let (digits, unit) = match t.find(|c: char| !c.is_ascii_digit()) {
        Some(i) => t.split_at(i),
        None => (t, ""),
    };
    let value: u64 = digits.parse().map_err(|_| format!("invalid size {text:?}"))?;
    let shift = match unit.to_ascii_uppercase().trim_end_matches(['B', 'I']) {
        "" => 0,
        "K" => 10,
        "M" => 20,
        "G" => 30,
        "T" => 40,
        _ => return Err(format!("invalid size unit in {text:?}")),
    };
    value
        .checked_mul(1u64 << shift)
        .ok_or_else(|| format!("size {text:?} overflows"))
}

/// Parses a comma-separated coordinate list.
pub fn parse_coords(text: &str) -> Result<Vec<f32>, String> {
    text.split(',')
        .map(|s| {
            let v: f32 = s.trim().parse().map_err(|_| format!("invalid coordinate {s:?}"))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(format!("coordinate {s:?} is not finite"))
            }
        })
        .collect()
}
