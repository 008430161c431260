use std::fmt;
use std::io;

use simsearch_core::bruteforce::BruteForceError;
use simsearch_core::formats::FormatError;
use simsearch_core::harness::HarnessError;
use simsearch_core::kdtree::KdError;
use simsearch_core::molgraph::SmilesError;
use simsearch_core::reduce::ReduceError;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_IO: i32 = 3;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    Io(String),
}

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Data(_) => EXIT_DATA,
            CliError::Io(_) => EXIT_IO,
        }
    }

    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    pub fn data(msg: impl Into<String>) -> Self {
        CliError::Data(msg.into())
    }

    /// Prefixes the message with context such as a file name.
    pub fn context(self, what: impl fmt::Display) -> Self {
        match self {
            CliError::Usage(m) => CliError::Usage(format!("{what}: {m}")),
            CliError::Data(m) => CliError::Data(format!("{what}: {m}")),
            CliError::Io(m) => CliError::Io(format!("{what}: {m}")),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Data(m) => write!(f, "data error: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        match e.kind() {
            io::ErrorKind::InvalidData | io::ErrorKind::UnexpectedEof => CliError::Data(e.to_string()),
            _ => CliError::Io(e.to_string()),
        }
    }
}

impl From<tempfile::PersistError> for CliError {
    fn from(e: tempfile::PersistError) -> Self {
        CliError::Io(e.error.to_string())
    }
}

impl From<FormatError> for CliError {
    fn from(e: FormatError) -> Self {
        match e {
            FormatError::Io(io) if io.kind() != io::ErrorKind::UnexpectedEof => CliError::Io(io.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<KdError> for CliError {
    fn from(e: KdError) -> Self {
        match e {
            KdError::Io(io) => io.into(),
            KdError::Format(f) => f.into(),
            KdError::LeafCapacity | KdError::MemoryBudget { .. } | KdError::InvalidK => CliError::Usage(e.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<ReduceError> for CliError {
    fn from(e: ReduceError) -> Self {
        match e {
            ReduceError::Format(f) => f.into(),
            ReduceError::OutputDimension { .. } => CliError::Usage(e.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<BruteForceError> for CliError {
    fn from(e: BruteForceError) -> Self {
        match e {
            BruteForceError::Format(f) => f.into(),
            BruteForceError::InvalidK => CliError::Usage(e.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<HarnessError> for CliError {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::Io(io) => io.into(),
            HarnessError::Format(f) => f.into(),
            HarnessError::Kd(k) => k.into(),
            HarnessError::BruteForce(b) => b.into(),
            HarnessError::InvalidK | HarnessError::InvalidRepeats | HarnessError::InvalidFraction(_) => {
                CliError::Usage(e.to_string())
            }
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<SmilesError> for CliError {
    fn from(e: SmilesError) -> Self {
        CliError::Data(e.to_string())
    }
}
