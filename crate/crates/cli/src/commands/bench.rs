use std::collections::{HashMap, HashSet};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use simsearch_core::bruteforce::{bf_knn_file, point_distance, Metric, Point};
use simsearch_core::embedding::{EmbeddingVector, Neighbor, TopK};
use simsearch_core::formats::{write_neighbor_rows, EmbeddingReader, FingerprintReader, NEIGHBOR_TSV_HEADER};
use simsearch_core::harness::{
    ged_curve, read_labels, running_average, separable_screen, shuffled_screen, timing_run, vs_auroc_counts,
    LabeledEmbeddings, SearchTarget, TimingReport, TIMING_TSV_HEADER,
};
use simsearch_core::kdtree::KdIndex;
use simsearch_core::molgraph::{parse_smiles, MolecularGraph};

use crate::error::{CliError, EXIT_OK};
use crate::io::{open_file, read_magic, smiles_lines, TextSink};
use crate::{BruteForceArgs, GedArgs, MethodArg, MetricArg, SynthArg, TimingArgs, VsArgs, VsSynthArgs};

const SCAN_BATCH: usize = 256;

type Rows = Vec<(u64, Vec<f32>)>;

fn read_embeddings(path: &Path) -> Result<(usize, Rows), CliError> {
    let reader = EmbeddingReader::open(path).map_err(|e| CliError::from(e).context(path.display()))?;
    let dim = reader.dim();
    let mut rows = Vec::new();
    for item in reader {
        let (id, v) = item.map_err(|e| CliError::from(e).context(path.display()))?;
        rows.push((id, v.into_inner()));
    }
    Ok((dim, rows))
}

/// Neighbor ids per query, in rank order, from a neighbor TSV.
fn read_neighbors(path: &Path) -> Result<HashMap<u64, Vec<u64>>, CliError> {
    let mut ranked: HashMap<u64, Vec<(u64, u64)>> = HashMap::new();
    for (i, line) in BufReader::new(open_file(path)?).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() || (i == 0 && line.starts_with("query_id")) {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let bad = || CliError::data(format!("{}: line {}: expected query_id, rank, neighbor_id, distance", path.display(), i + 1));
        if fields.len() < 3 {
            return Err(bad());
        }
        let q: u64 = fields[0].trim().parse().map_err(|_| bad())?;
        let rank: u64 = fields[1].trim().parse().map_err(|_| bad())?;
        let n: u64 = fields[2].trim().parse().map_err(|_| bad())?;
        ranked.entry(q).or_default().push((rank, n));
    }
    Ok(ranked
        .into_iter()
        .map(|(q, mut v)| {
            v.sort_unstable();
            (q, v.into_iter().map(|(_, n)| n).collect())
        })
        .collect())
}

fn parse_line(path: &Path, line: &crate::io::SmilesLine) -> Result<MolecularGraph, CliError> {
    parse_smiles(&line.smiles)
        .map_err(|e| CliError::data(format!("{}: line {}: {e}", path.display(), line.line)))
}

pub fn ged(args: &GedArgs) -> Result<i32, CliError> {
    if args.k_max == 0 {
        return Err(CliError::usage("--k-max must be at least 1"));
    }
    let neighbors = read_neighbors(&args.neighbors)?;
    let mut queries = Vec::new();
    let mut query_ids = Vec::new();
    for line in smiles_lines(&args.queries)? {
        let line = line?;
        queries.push(parse_line(&args.queries, &line)?);
        query_ids.push(line.id);
    }
    let needed: HashSet<u64> = query_ids
        .iter()
        .filter_map(|q| neighbors.get(q))
        .flat_map(|hits| hits.iter().take(args.k_max).copied())
        .collect();
    let mut graphs: HashMap<u64, MolecularGraph> = HashMap::new();
    for line in smiles_lines(&args.database)? {
        let line = line?;
        if needed.contains(&line.id) && !graphs.contains_key(&line.id) {
            graphs.insert(line.id, parse_line(&args.database, &line)?);
        }
    }
    let mut hits = Vec::with_capacity(queries.len());
    for q in &query_ids {
        let ids = neighbors
            .get(q)
            .ok_or_else(|| CliError::data(format!("query {q} has no neighbors in {}", args.neighbors.display())))?;
        let list = ids
            .iter()
            .take(args.k_max)
            .map(|id| {
                graphs
                    .get(id)
                    .cloned()
                    .ok_or_else(|| CliError::data(format!("neighbor {id} is not in {}", args.database.display())))
            })
            .collect::<Result<Vec<_>, _>>()?;
        hits.push(list);
    }
    let curve = ged_curve(&queries, &hits, args.k_max)?;
    let smoothed = args.smooth.map(|w| running_average(&curve, w));
    let mut out = TextSink::open(args.output.as_deref())?;
    match &smoothed {
        Some(_) => writeln!(out, "k\tmean_ged\tsmoothed")?,
        None => writeln!(out, "k\tmean_ged")?,
    }
    for (k, value) in curve.iter().enumerate() {
        match &smoothed {
            Some(s) => writeln!(out, "{}\t{value:.6}\t{:.6}", k + 1, s[k])?,
            None => writeln!(out, "{}\t{value:.6}", k + 1)?,
        }
    }
    out.finish()?;
    Ok(EXIT_OK)
}

fn write_auroc(output: Option<&Path>, database: &LabeledEmbeddings, queries: &[EmbeddingVector]) -> Result<(), CliError> {
    let counts = vs_auroc_counts(database, queries)?;
    let mut out = TextSink::open(output)?;
    writeln!(
        out,
        "auroc\t{:.6}\tactives\t{}\tdecoys\t{}\tqueries\t{}",
        counts.value(),
        database.count(simsearch_core::harness::Label::Active),
        database.count(simsearch_core::harness::Label::Decoy),
        queries.len()
    )?;
    out.finish()
}

pub fn vs(args: &VsArgs) -> Result<i32, CliError> {
    let labels = read_labels(BufReader::new(open_file(&args.labels)?)).map_err(|e| CliError::from(e).context(args.labels.display()))?;
    let reader = EmbeddingReader::open(&args.database).map_err(|e| CliError::from(e).context(args.database.display()))?;
    let database = LabeledEmbeddings::from_reader(reader, &labels)?;
    let (database, queries) = match &args.queries {
        Some(path) => {
            let (_, rows) = read_embeddings(path)?;
            let queries = rows
                .into_iter()
                .map(|(_, v)| EmbeddingVector::new(v).map_err(|e| CliError::data(e.to_string())))
                .collect::<Result<Vec<_>, _>>()?;
            (database, queries)
        }
        None => database.split_queries(args.query_fraction, args.seed)?,
    };
    write_auroc(args.output.as_deref(), &database, &queries)?;
    Ok(EXIT_OK)
}

pub fn vs_synth(args: &VsSynthArgs) -> Result<i32, CliError> {
    if args.n < 2 || args.queries == 0 || args.dims == 0 || args.dims > simsearch_core::embedding::MAX_DIM {
        return Err(CliError::usage("need --n ≥ 2, --queries ≥ 1 and 1 ≤ --dims ≤ 64"));
    }
    if !(args.active_fraction > 0.0 && args.active_fraction < 1.0) {
        return Err(CliError::usage("--active-fraction must lie strictly between 0 and 1"));
    }
    let (database, queries) = match args.kind {
        SynthArg::Separable => {
            let actives = ((args.n as f64 * args.active_fraction).round() as usize).clamp(1, args.n - 1);
            separable_screen(actives, args.n - actives, args.queries, args.dims, args.seed)
        }
        SynthArg::Shuffled => shuffled_screen(args.n, args.queries, args.dims, args.active_fraction, args.seed),
    };
    write_auroc(args.output.as_deref(), &database, &queries)?;
    Ok(EXIT_OK)
}

pub fn timing(args: &TimingArgs) -> Result<i32, CliError> {
    let (_, rows) = read_embeddings(&args.queries)?;
    let queries: Vec<Vec<f32>> = rows.into_iter().map(|(_, v)| v).collect();
    let want_tree = matches!(args.method, MethodArg::Kdtree | MethodArg::Both);
    let want_scan = matches!(args.method, MethodArg::Bruteforce | MethodArg::Both);
    let mut reports: Vec<TimingReport> = Vec::new();
    if want_tree {
        let path = args.index.as_ref().ok_or_else(|| CliError::usage("--index is required to time the k-d tree"))?;
        let index = KdIndex::open(path).map_err(|e| CliError::from(e).context(path.display()))?;
        reports.push(timing_run(SearchTarget::KdTree(&index), &queries, args.k, args.repeats)?);
    }
    if want_scan {
        let path = args
            .database
            .as_ref()
            .ok_or_else(|| CliError::usage("--database is required to time the linear scan"))?;
        reports.push(timing_run(SearchTarget::BruteForce(path), &queries, args.k, args.repeats)?);
    }
    let mut out = TextSink::open(args.output.as_deref())?;
    writeln!(out, "{TIMING_TSV_HEADER}")?;
    for r in &reports {
        r.write_tsv_row(&mut out)?;
    }
    out.finish()?;
    Ok(EXIT_OK)
}

fn read_fingerprints(path: &Path) -> Result<Vec<(u64, Point)>, CliError> {
    let reader = FingerprintReader::open(path).map_err(|e| CliError::from(e).context(path.display()))?;
    reader
        .map(|item| {
            item.map(|(id, fp)| (id, Point::Fingerprint(fp)))
                .map_err(|e| CliError::from(e).context(path.display()))
        })
        .collect()
}

pub fn brute_force(args: &BruteForceArgs) -> Result<i32, CliError> {
    if args.k == 0 {
        return Err(CliError::usage("--k must be at least 1"));
    }
    let metric = match args.metric {
        MetricArg::Euclidean => Metric::Euclidean,
        MetricArg::Tanimoto => Metric::Tanimoto,
    };
    let db_magic = read_magic(&args.database)?;
    let mut out = TextSink::open(args.output.as_deref())?;
    writeln!(out, "{NEIGHBOR_TSV_HEADER}")?;
    if &db_magic == b"EMB1" {
        if metric != Metric::Euclidean {
            return Err(CliError::usage("embeddings support only the euclidean metric"));
        }
        let (dim, queries) = read_embeddings(&args.queries)?;
        for batch in queries.chunks(SCAN_BATCH) {
            let mut reader = EmbeddingReader::open(&args.database)?;
            if reader.dim() != dim {
                return Err(CliError::data(format!(
                    "queries are {dim}-dimensional but the database is {}-dimensional",
                    reader.dim()
                )));
            }
            let coords: Vec<Vec<f32>> = batch.iter().map(|(_, v)| v.clone()).collect();
            let results = bf_knn_file(&mut reader, &coords, args.k)?;
            for ((id, _), hits) in batch.iter().zip(&results) {
                write_neighbor_rows(&mut out, *id, hits)?;
            }
        }
    } else {
        let queries = read_fingerprints(&args.queries)?;
        for batch in queries.chunks(SCAN_BATCH) {
            let mut tops: Vec<TopK> = batch.iter().map(|_| TopK::new(args.k)).collect();
            let reader = FingerprintReader::open(&args.database)
                .map_err(|e| CliError::from(e).context(args.database.display()))?;
            for item in reader {
                let (id, fp) = item?;
                let record = Point::Fingerprint(fp);
                for ((_, q), top) in batch.iter().zip(tops.iter_mut()) {
                    let distance = point_distance(metric, q, &record)?;
                    top.push(Neighbor { id, distance });
                }
            }
            for ((id, _), top) in batch.iter().zip(tops) {
                write_neighbor_rows(&mut out, *id, &top.into_sorted_vec())?;
            }
        }
    }
    out.finish()?;
    Ok(EXIT_OK)
}
