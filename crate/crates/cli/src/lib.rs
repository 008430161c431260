//! The `simsearch` command line: fingerprint → reduce → index → query → bench.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 I/O error.

mod commands;
pub mod error;
pub mod io;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::LevelFilter;

pub use error::{CliError, EXIT_DATA, EXIT_IO, EXIT_OK, EXIT_USAGE};

#[derive(Debug, Parser)]
#[command(name = "simsearch", version, about = "Exact chemical similarity search over low-dimensional embeddings")]
pub struct Cli {
    /// Log progress to stderr; repeat for more detail.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Hash SMILES into 256-position circular fingerprints (FPB1/FPC1).
    Fingerprint(FingerprintArgs),
    /// Fit or apply dimensionality reductions.
    #[command(subcommand)]
    Reduce(ReduceCommand),
    /// Build and query a disk-backed k-d tree.
    #[command(subcommand)]
    Index(IndexCommand),
    /// Evaluation: GED curves, screening AUROC, timing and brute-force search.
    #[command(subcommand)]
    Bench(BenchCommand),
    /// Write one-edit mutants of anchor molecules.
    Mutate(MutateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    /// Presence bits (ECFP).
    Binary,
    /// Occurrence counts (ECFC).
    Counts,
}

#[derive(Debug, Args)]
pub struct FingerprintArgs {
    /// SMILES file: one molecule per line, optionally followed by TAB and an id.
    #[arg(short, long)]
    pub input: PathBuf,
    /// Output fingerprint file.
    #[arg(short, long)]
    pub output: PathBuf,
    #[arg(long, value_enum, default_value = "binary")]
    pub kind: KindArg,
    /// Neighborhood radius in bonds.
    #[arg(long, default_value_t = 2)]
    pub radius: u32,
    /// Where to list unparseable lines [default: <output>.rejects.tsv].
    #[arg(long)]
    pub rejects: Option<PathBuf>,
    /// Also write a TSV of numeric id and original name.
    #[arg(long)]
    pub id_map: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum ReduceCommand {
    /// Fit a PCA model on a fingerprint or embedding file.
    FitPca(FitPcaArgs),
    /// Create a sparse random projection model.
    MakeSrp(MakeSrpArgs),
    /// Project a fingerprint or embedding file through a model (EMB1 output).
    Apply(ApplyArgs),
}

#[derive(Debug, Args)]
pub struct FitPcaArgs {
    #[arg(short, long)]
    pub input: PathBuf,
    /// Output model file (PCA1).
    #[arg(short, long)]
    pub output: PathBuf,
    /// Number of principal components.
    #[arg(short, long)]
    pub dims: usize,
    /// Fit on a uniform random sample of this many records instead of all.
    #[arg(long)]
    pub sample: Option<u64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct MakeSrpArgs {
    /// Output model file (SRP1).
    #[arg(short, long)]
    pub output: PathBuf,
    /// Output dimension.
    #[arg(short, long)]
    pub dims: usize,
    /// Input dimension.
    #[arg(long, default_value_t = 256)]
    pub d_in: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct ApplyArgs {
    /// Model file (PCA1 or SRP1).
    #[arg(short, long)]
    pub model: PathBuf,
    #[arg(short, long)]
    pub input: PathBuf,
    /// Output embedding file (EMB1).
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum IndexCommand {
    /// Bulk-build an index from an embedding file.
    Build(BuildArgs),
    /// k nearest neighbors for every record of a query embedding file.
    Query(QueryArgs),
    /// Ids inside a closed box.
    Range(RangeArgs),
    /// Counts and sizes, confirmed by a walk over every leaf.
    Stats(StatsArgs),
}

#[derive(Debug, Args)]
pub struct BuildArgs {
    /// Embedding file (EMB1).
    #[arg(short, long)]
    pub input: PathBuf,
    /// Output index file (KDT1).
    #[arg(short, long)]
    pub output: PathBuf,
    #[arg(long, default_value_t = simsearch_core::kdtree::DEFAULT_LEAF_CAPACITY)]
    pub leaf_capacity: usize,
    /// Bytes of point data held in memory during the build (suffixes K, M, G).
    #[arg(long, default_value = "1G", value_parser = io::parse_bytes)]
    pub memory_budget: u64,
    /// Directory for temporary partition files [default: beside the output].
    #[arg(long)]
    pub temp_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct QueryArgs {
    #[arg(long)]
    pub index: PathBuf,
    /// Query embedding file (EMB1); record ids become query ids.
    #[arg(short, long)]
    pub queries: PathBuf,
    #[arg(short, long, default_value_t = 100)]
    pub k: usize,
    /// Neighbor TSV [default: stdout].
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    /// Worker threads; output order does not depend on this.
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
}

#[derive(Debug, Args)]
pub struct RangeArgs {
    #[arg(long)]
    pub index: PathBuf,
    /// Lower corner, comma separated.
    #[arg(long, allow_hyphen_values = true)]
    pub lo: String,
    /// Upper corner, comma separated.
    #[arg(long, allow_hyphen_values = true)]
    pub hi: String,
    /// One id per line [default: stdout].
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[arg(long)]
    pub index: PathBuf,
    /// Also report leaf sizes, depths and split-plane violations.
    #[arg(long)]
    pub audit: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MetricArg {
    Euclidean,
    Tanimoto,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Kdtree,
    Bruteforce,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SynthArg {
    /// Actives clustered around the queries, decoys far away.
    Separable,
    /// Labels independent of position.
    Shuffled,
}

#[derive(Debug, Subcommand)]
pub enum BenchCommand {
    /// Mean approximate GED between queries and their top-k hits.
    Ged(GedArgs),
    /// Nearest-active virtual-screening AUROC.
    Vs(VsArgs),
    /// AUROC on a synthetic labeled set.
    VsSynth(VsSynthArgs),
    /// Per-query wall time of the index and of a linear scan.
    Timing(TimingArgs),
    /// Exact k nearest neighbors by linear scan (same TSV as `index query`).
    BruteForce(BruteForceArgs),
}

#[derive(Debug, Args)]
pub struct GedArgs {
    /// Query SMILES file.
    #[arg(short, long)]
    pub queries: PathBuf,
    /// Database SMILES file the neighbor ids refer to.
    #[arg(short, long)]
    pub database: PathBuf,
    /// Neighbor TSV from `index query` or `bench brute-force`.
    #[arg(short, long)]
    pub neighbors: PathBuf,
    #[arg(long, default_value_t = 100)]
    pub k_max: usize,
    /// Add a trailing running mean over this many points as a third column.
    #[arg(long)]
    pub smooth: Option<usize>,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VsArgs {
    /// Database embedding file (EMB1).
    #[arg(short, long)]
    pub database: PathBuf,
    /// TSV of id and label (active/decoy).
    #[arg(short, long)]
    pub labels: PathBuf,
    /// Query actives; when absent a fraction of database actives is held out.
    #[arg(short, long)]
    pub queries: Option<PathBuf>,
    #[arg(long, default_value_t = 0.5)]
    pub query_fraction: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VsSynthArgs {
    #[arg(long, value_enum, default_value = "shuffled")]
    pub kind: SynthArg,
    /// Database records.
    #[arg(short, long, default_value_t = 10_000)]
    pub n: usize,
    #[arg(long, default_value_t = 100)]
    pub queries: usize,
    #[arg(short, long, default_value_t = 8)]
    pub dims: usize,
    /// Share of actives among the database records.
    #[arg(long, default_value_t = 0.1)]
    pub active_fraction: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TimingArgs {
    #[arg(long)]
    pub index: Option<PathBuf>,
    /// Embedding file for the linear scan.
    #[arg(short, long)]
    pub database: Option<PathBuf>,
    #[arg(short, long)]
    pub queries: PathBuf,
    #[arg(short, long, default_value_t = 100)]
    pub k: usize,
    #[arg(long, default_value_t = 1)]
    pub repeats: usize,
    #[arg(long, value_enum, default_value = "both")]
    pub method: MethodArg,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BruteForceArgs {
    /// Embedding or fingerprint file to scan.
    #[arg(short, long)]
    pub database: PathBuf,
    /// Query file of the same kind.
    #[arg(short, long)]
    pub queries: PathBuf,
    #[arg(short, long, default_value_t = 100)]
    pub k: usize,
    #[arg(long, value_enum, default_value = "euclidean")]
    pub metric: MetricArg,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MutateArgs {
    /// Anchor SMILES file.
    #[arg(short, long)]
    pub input: PathBuf,
    /// Output: mutant SMILES, mutant id, anchor id and edit kind per line.
    #[arg(short, long)]
    pub output: PathBuf,
    /// Mutants per anchor.
    #[arg(long, default_value_t = 1)]
    pub per_anchor: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub rejects: Option<PathBuf>,
}

/// Parses `argv` (including the program name), runs the command and returns
/// the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let level = match cli.verbose {
        0 => LevelFilter::Warn,
        1 => LevelFilter::Info,
        _ => LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .try_init();
    match commands::dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("simsearch: {e}");
            e.code()
        }
    }
}
