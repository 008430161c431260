use std::io::Write;

use log::info;
use simsearch_core::embedding::Neighbor;
use simsearch_core::formats::{write_neighbor_rows, EmbeddingReader, NEIGHBOR_TSV_HEADER};
use simsearch_core::kdtree::{self, BuildOptions, KdError, KdIndex};

use crate::error::{CliError, EXIT_OK};
use crate::io::{parse_coords, TextSink};
use crate::{BuildArgs, QueryArgs, RangeArgs, StatsArgs};

const QUERY_BATCH: usize = 1024;

fn open_index(path: &std::path::Path) -> Result<KdIndex, CliError> {
    KdIndex::open(path).map_err(|e| CliError::from(e).context(path.display()))
}

pub fn build(args: &BuildArgs) -> Result<i32, CliError> {
    let reader = EmbeddingReader::open(&args.input).map_err(|e| CliError::from(e).context(args.input.display()))?;
    let dim = reader.dim();
    let options = BuildOptions {
        leaf_capacity: args.leaf_capacity,
        memory_budget: args.memory_budget,
        temp_dir: args.temp_dir.clone(),
    };
    let summary = kdtree::build(reader, dim, &options, &args.output)?;
    info!(
        "indexed {} points: {} internal nodes, {} leaves, height {}, {} external partitions",
        summary.count, summary.internal_nodes, summary.leaves, summary.height, summary.external_partitions
    );
    Ok(EXIT_OK)
}

fn knn_batch(index: &KdIndex, queries: &[(u64, Vec<f32>)], k: usize, threads: usize) -> Vec<Result<Vec<Neighbor>, KdError>> {
    if threads <= 1 || queries.len() <= 1 {
        return queries.iter().map(|(_, q)| index.knn(q, k)).collect();
    }
    let chunk = queries.len().div_ceil(threads);
    let mut results: Vec<Option<Result<Vec<Neighbor>, KdError>>> = (0..queries.len()).map(|_| None).collect();
    std::thread::scope(|s| {
        for (qs, out) in queries.chunks(chunk).zip(results.chunks_mut(chunk)) {
            s.spawn(move || {
                for ((_, q), slot) in qs.iter().zip(out.iter_mut()) {
                    *slot = Some(index.knn(q, k));
                }
            });
        }
    });
    results.into_iter().map(|r| r.expect("every slot is filled")).collect()
}

pub fn query(args: &QueryArgs) -> Result<i32, CliError> {
    if args.k == 0 {
        return Err(CliError::usage("--k must be at least 1"));
    }
    if args.threads == 0 {
        return Err(CliError::usage("--threads must be at least 1"));
    }
    let index = open_index(&args.index)?;
    let mut reader =
        EmbeddingReader::open(&args.queries).map_err(|e| CliError::from(e).context(args.queries.display()))?;
    if reader.dim() != index.dim() {
        return Err(CliError::data(format!(
            "queries are {}-dimensional but the index is {}-dimensional",
            reader.dim(),
            index.dim()
        )));
    }
    let mut out = TextSink::open(args.output.as_deref())?;
    writeln!(out, "{NEIGHBOR_TSV_HEADER}")?;
    let mut batch: Vec<(u64, Vec<f32>)> = Vec::with_capacity(QUERY_BATCH);
    loop {
        batch.clear();
        let mut coords = vec![0f32; reader.dim()];
        while batch.len() < QUERY_BATCH {
            match reader.read_into(&mut coords)? {
                Some(id) => batch.push((id, coords.clone())),
                None => break,
            }
        }
        if batch.is_empty() {
            break;
        }
        for ((id, _), hits) in batch.iter().zip(knn_batch(&index, &batch, args.k, args.threads)) {
            write_neighbor_rows(&mut out, *id, &hits?)?;
        }
    }
    out.finish()?;
    Ok(EXIT_OK)
}

pub fn range(args: &RangeArgs) -> Result<i32, CliError> {
    let lo = parse_coords(&args.lo).map_err(|e| CliError::usage(format!("--lo: {e}")))?;
    let hi = parse_coords(&args.hi).map_err(|e| CliError::usage(format!("--hi: {e}")))?;
    let index = open_index(&args.index)?;
    for (name, corner) in [("--lo", &lo), ("--hi", &hi)] {
        if corner.len() != index.dim() {
            return Err(CliError::usage(format!(
                "{name} has {} coordinates but the index is {}-dimensional",
                corner.len(),
                index.dim()
            )));
        }
    }
    let ids = index.range(&lo, &hi).map_err(|e| match e {
        KdError::InvertedBounds(_) => CliError::usage(e.to_string()),
        other => other.into(),
    })?;
    let mut out = TextSink::open(args.output.as_deref())?;
    for id in ids {
        writeln!(out, "{id}")?;
    }
    out.finish()?;
    Ok(EXIT_OK)
}

pub fn stats(args: &StatsArgs) -> Result<i32, CliError> {
    let index = open_index(&args.index)?;
    let stats = index.stats().map_err(|e| CliError::from(e).context(args.index.display()))?;
    let mut out = TextSink::open(None)?;
    writeln!(out, "count\t{}", stats.count)?;
    writeln!(out, "dim\t{}", stats.dim)?;
    writeln!(out, "leaf_capacity\t{}", index.header().leaf_capacity)?;
    writeln!(out, "internal_nodes\t{}", stats.internal_nodes)?;
    writeln!(out, "leaves\t{}", stats.leaves)?;
    writeln!(out, "height\t{}", stats.height)?;
    writeln!(out, "bytes\t{}", stats.bytes)?;
    if args.audit {
        let audit = index.audit()?;
        writeln!(out, "min_leaf_size\t{}", audit.min_leaf_size)?;
        writeln!(out, "max_leaf_size\t{}", audit.max_leaf_size)?;
        writeln!(out, "min_leaf_depth\t{}", audit.min_leaf_depth)?;
        writeln!(out, "max_leaf_depth\t{}", audit.max_leaf_depth)?;
        writeln!(out, "split_violations\t{}", audit.split_violations)?;
        writeln!(out, "checksum\t{:016x}", audit.checksum)?;
        out.finish()?;
        if !audit.is_clean() {
            return Err(CliError::data(format!("{} points violate split planes", audit.split_violations)));
        }
        return Ok(EXIT_OK);
    }
    out.finish()?;
    Ok(EXIT_OK)
}
