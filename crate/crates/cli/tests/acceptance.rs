//! Acceptance checks AC1–AC7. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails. Criterion ids given as arguments
//! (`cargo test --test acceptance -- AC5 AC7`) restrict the run.

use std::alloc::{GlobalAlloc, Layout, System};
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use simsearch_core::bruteforce::{bf_knn_file, bf_knn_vectors};
use simsearch_core::embedding::{EmbeddingVector, Neighbor};
use simsearch_core::fingerprint::ecfc;
use simsearch_core::formats::{write_neighbor_rows, EmbeddingReader, EmbeddingWriter};
use simsearch_core::ged::{approx_ged, exact_ged_tiny, DEFAULT_MAX_ATOMS};
use simsearch_core::harness::{
    separable_screen, shuffled_screen, timing_run, vs_auroc, vs_auroc_counts, SearchTarget,
};
use simsearch_core::kdtree::{build, BuildOptions, KdIndex};
use simsearch_core::molgraph::{
    parse_smiles, random_mutant, write_smiles, Atom, Bond, BondOrder, Element, MolecularGraph, MutationKind,
};
use simsearch_core::reduce::{pca_fit, PcaModel, SparseProjection};

struct Counting;

static CURRENT: AtomicUsize = AtomicUsize::new(0);
static PEAK: AtomicUsize = AtomicUsize::new(0);

unsafe impl GlobalAlloc for Counting {
    unsafe fn alloc(&self, layout: Layout) -> *mut u8 {
        let p = unsafe { System.alloc(layout) };
        if !p.is_null() {
            let now = CURRENT.fetch_add(layout.size(), Ordering::Relaxed) + layout.size();
            PEAK.fetch_max(now, Ordering::Relaxed);
        }
        p
    }

    unsafe fn dealloc(&self, ptr: *mut u8, layout: Layout) {
        unsafe { System.dealloc(ptr, layout) };
        CURRENT.fetch_sub(layout.size(), Ordering::Relaxed);
    }

    unsafe fn realloc(&self, ptr: *mut u8, layout: Layout, new_size: usize) -> *mut u8 {
        let p = unsafe { System.realloc(ptr, layout, new_size) };
        if !p.is_null() {
            if new_size >= layout.size() {
                let now = CURRENT.fetch_add(new_size - layout.size(), Ordering::Relaxed) + new_size - layout.size();
                PEAK.fetch_max(now, Ordering::Relaxed);
            } else {
                CURRENT.fetch_sub(layout.size() - new_size, Ordering::Relaxed);
            }
        }
        p
    }
}

#[global_allocator]
static ALLOCATOR: Counting = Counting;

/// Resets the high-water mark to the current heap size and returns it.
fn reset_peak() -> usize {
    let now = CURRENT.load(Ordering::Relaxed);
    PEAK.store(now, Ordering::Relaxed);
    now
}

fn peak() -> usize {
    PEAK.load(Ordering::Relaxed)
}

type Outcome = Result<String, String>;

fn check(cond: bool, failure: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(failure())
    }
}

fn e<T: std::fmt::Display>(err: T) -> String {
    err.to_string()
}

fn mib(bytes: usize) -> f64 {
    bytes as f64 / (1 << 20) as f64
}

#[derive(Clone, Copy)]
enum Shape {
    Uniform,
    Gaussian,
}

fn random_point(rng: &mut ChaCha8Rng, shape: Shape, out: &mut [f32]) {
    for x in out.iter_mut() {
        *x = match shape {
            Shape::Uniform => rng.random::<f32>(),
            Shape::Gaussian => rng.sample::<f32, _>(StandardNormal),
        };
    }
}

/// Streams `n` points with ids `0..n` into an EMB1 file.
fn write_dataset(path: &Path, n: usize, dim: usize, shape: Shape, seed: u64) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut w = EmbeddingWriter::new(BufWriter::new(fs::File::create(path).map_err(e)?), dim).map_err(e)?;
    let mut v = vec![0f32; dim];
    for id in 0..n as u64 {
        random_point(&mut rng, shape, &mut v);
        w.write(id, &v).map_err(e)?;
    }
    w.finish().map_err(e)?.flush().map_err(e)?;
    Ok(())
}

fn load_dataset(path: &Path) -> Result<(Vec<u64>, Vec<f32>), String> {
    let reader = EmbeddingReader::open(path).map_err(e)?;
    let mut ids = Vec::new();
    let mut coords = Vec::new();
    for item in reader {
        let (id, v) = item.map_err(e)?;
        ids.push(id);
        coords.extend_from_slice(v.as_slice());
    }
    Ok((ids, coords))
}

fn random_queries(n: usize, dim: usize, shape: Shape, seed: u64) -> Vec<Vec<f32>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let mut v = vec![0f32; dim];
            random_point(&mut rng, shape, &mut v);
            v
        })
        .collect()
}

fn index_from(path: &Path, out: &Path, options: &BuildOptions) -> Result<KdIndex, String> {
    let reader = EmbeddingReader::open(path).map_err(e)?;
    let dim = reader.dim();
    build(reader, dim, options, out).map_err(e)?;
    KdIndex::open(out).map_err(e)
}

fn tsv(results: &[Vec<Neighbor>]) -> Vec<u8> {
    let mut out = Vec::new();
    for (q, hits) in results.iter().enumerate() {
        write_neighbor_rows(&mut out, q as u64, hits).expect("writing to memory");
    }
    out
}

fn ac1(dir: &Path) -> Outcome {
    let start = Instant::now();
    let n = 100_000;
    let k = 100;
    let datasets = [(8, Shape::Uniform, "uniform-8"), (16, Shape::Uniform, "uniform-16"), (16, Shape::Gaussian, "gaussian-16")];
    let mut rows = 0usize;
    for (i, &(dim, shape, name)) in datasets.iter().enumerate() {
        let data = dir.join(format!("ac1-{name}.emb"));
        write_dataset(&data, n, dim, shape, 100 + i as u64)?;
        let index = index_from(&data, &dir.join(format!("ac1-{name}.kdt")), &BuildOptions::default())?;
        let queries = random_queries(1000, dim, shape, 200 + i as u64);
        let (ids, coords) = load_dataset(&data)?;
        let mut tree = Vec::with_capacity(queries.len());
        let mut scan = Vec::with_capacity(queries.len());
        for q in &queries {
            tree.push(index.knn(q, k).map_err(e)?);
            let records = ids.iter().copied().zip(coords.chunks_exact(dim));
            scan.push(bf_knn_vectors(records, q, k).map_err(e)?);
        }
        let (a, b) = (tsv(&tree), tsv(&scan));
        let mismatched = tree
            .iter()
            .zip(&scan)
            .filter(|(t, s)| {
                t.len() != s.len()
                    || t.iter().zip(s.iter()).any(|(x, y)| x.id != y.id || x.distance.to_bits() != y.distance.to_bits())
            })
            .count();
        check(a == b && mismatched == 0, || format!("{name}: {mismatched} of 1000 queries differ"))?;
        rows += a.iter().filter(|&&c| c == b'\n').count();
        fs::remove_file(&data).map_err(e)?;
    }
    let elapsed = start.elapsed();
    check(elapsed < Duration::from_secs(300), || format!("took {elapsed:.1?}, limit 5 min"))?;
    Ok(format!("3 datasets x 1000 queries, {rows} TSV rows identical, 0 mismatches, {elapsed:.1?}"))
}

fn ac2(dir: &Path) -> Outcome {
    let start = Instant::now();
    let k = 100;
    let queries = random_queries(100, 8, Shape::Uniform, 301);
    let mut fractions = Vec::new();
    let mut detail = Vec::new();
    for (i, n) in [10_000usize, 100_000, 1_000_000].into_iter().enumerate() {
        let data = dir.join(format!("ac2-{n}.emb"));
        write_dataset(&data, n, 8, Shape::Uniform, 310 + i as u64)?;
        let index = index_from(&data, &dir.join(format!("ac2-{n}.kdt")), &BuildOptions::default())?;
        let tree = timing_run(SearchTarget::KdTree(&index), &queries, k, 1).map_err(e)?;
        fractions.push(tree.distance_fraction);
        detail.push(format!("n={n}: {:.4}%", 100.0 * tree.distance_fraction));
        if n == 1_000_000 {
            let scan = timing_run(SearchTarget::BruteForce(&data), &queries[..20], k, 1).map_err(e)?;
            let speedup = scan.mean / tree.mean;
            detail.push(format!(
                "kd {:.3} ms vs scan {:.1} ms ({speedup:.0}x)",
                tree.mean * 1e3,
                scan.mean * 1e3
            ));
            check(tree.distance_fraction < 0.05, || {
                format!("distance fraction {:.4} at n=1e6 is not below 5%", tree.distance_fraction)
            })?;
            check(speedup >= 10.0, || format!("speedup {speedup:.1}x is below 10x"))?;
        }
        fs::remove_file(&data).map_err(e)?;
    }
    check(fractions.windows(2).all(|w| w[1] < w[0]), || {
        format!("distance fraction does not decrease with n: {}", detail.join(", "))
    })?;
    let elapsed = start.elapsed();
    check(elapsed < Duration::from_secs(1800), || format!("took {elapsed:.1?}, limit 30 min"))?;
    Ok(format!("{}, {elapsed:.1?}", detail.join(", ")))
}

fn ac3(dir: &Path) -> Outcome {
    let start = Instant::now();
    let n = 10_000_000;
    let dim = 8;
    let budget: u64 = 2 << 30;
    let data = dir.join("ac3.emb");
    let out = dir.join("ac3.kdt");
    write_dataset(&data, n, dim, Shape::Uniform, 401)?;

    let options = BuildOptions {
        memory_budget: budget,
        temp_dir: Some(dir.to_path_buf()),
        ..BuildOptions::default()
    };
    let before = reset_peak();
    let reader = EmbeddingReader::open(&data).map_err(e)?;
    let summary = build(reader, dim, &options, &out).map_err(e)?;
    let build_peak = peak() - before;
    let build_time = start.elapsed();
    check(build_peak < budget as usize, || {
        format!("build heap peak {:.0} MiB exceeds the 2 GiB budget", mib(build_peak))
    })?;
    check(summary.count == n as u64, || format!("index holds {} points", summary.count))?;

    let queries = random_queries(20, dim, Shape::Uniform, 402);
    let k = 100;
    let before = reset_peak();
    let index = KdIndex::open(&out).map_err(e)?;
    let mut answers = Vec::with_capacity(queries.len());
    for q in &queries {
        answers.push(index.knn(q, k).map_err(e)?);
    }
    let results_bytes = answers.len() * k * std::mem::size_of::<Neighbor>() + answers.capacity() * 24;
    let query_peak = peak() - before - results_bytes.min(peak() - before);
    let nodes_bytes = std::mem::size_of_val(index.nodes());
    let page = index.header().page_len() as usize;
    let allowance = nodes_bytes + 4 * page + 2 * k * std::mem::size_of::<Neighbor>() + (64 << 10);
    check(query_peak <= allowance, || {
        format!(
            "query heap peak {} B exceeds internal nodes {} B + 4 pages of {} B + O(k) + 64 KiB",
            query_peak, nodes_bytes, page
        )
    })?;

    let mut reader = EmbeddingReader::open(&data).map_err(e)?;
    let scan = bf_knn_file(&mut reader, &queries, k).map_err(e)?;
    check(tsv(&answers) == tsv(&scan), || "k-d tree answers differ from the linear scan at n=1e7".into())?;
    let index_bytes = fs::metadata(&out).map_err(e)?.len();
    drop(index);
    fs::remove_file(&data).map_err(e)?;
    fs::remove_file(&out).map_err(e)?;
    Ok(format!(
        "build heap peak {:.0} MiB (budget 2048 MiB, {:.1?}); query heap peak {:.1} KiB with {:.1} KiB of internal nodes, page {} B; index {:.0} MiB; 20 queries exact",
        mib(build_peak),
        build_time,
        query_peak as f64 / 1024.0,
        nodes_bytes as f64 / 1024.0,
        page,
        mib(index_bytes as usize)
    ))
}

/// Random connected graph: a random tree plus a few extra bonds.
fn random_graph(rng: &mut ChaCha8Rng, max_atoms: usize) -> MolecularGraph {
    const ELEMENTS: [Element; 4] = [Element::C, Element::N, Element::O, Element::S];
    const ORDERS: [BondOrder; 3] = [BondOrder::Single, BondOrder::Single, BondOrder::Double];
    let n = rng.random_range(1..=max_atoms);
    let atoms: Vec<Atom> = (0..n).map(|_| Atom::new(ELEMENTS[rng.random_range(0..ELEMENTS.len())])).collect();
    let mut bonds = Vec::new();
    for b in 1..n {
        let a = rng.random_range(0..b);
        bonds.push(Bond { a, b, order: ORDERS[rng.random_range(0..ORDERS.len())] });
    }
    for _ in 0..rng.random_range(0..=2) {
        if n < 3 {
            break;
        }
        let a = rng.random_range(0..n);
        let b = rng.random_range(0..n);
        if a != b && !bonds.iter().any(|x| (x.a == a && x.b == b) || (x.a == b && x.b == a)) {
            bonds.push(Bond { a, b, order: BondOrder::Single });
        }
    }
    MolecularGraph::new(atoms, bonds).expect("random tree is connected")
}

fn ac4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(501);
    let (mut below, mut nonzero_self, mut asymmetric) = (0, 0, 0);
    let mut slack = 0.0;
    for _ in 0..500 {
        let g1 = random_graph(&mut rng, 6);
        let g2 = random_graph(&mut rng, 6);
        let exact = exact_ged_tiny(&g1, &g2, DEFAULT_MAX_ATOMS).map_err(e)? as f64;
        let forward = approx_ged(&g1, &g2);
        if forward < exact {
            below += 1;
        }
        slack += forward - exact;
        if approx_ged(&g1, &g1) != 0.0 || approx_ged(&g2, &g2) != 0.0 {
            nonzero_self += 1;
        }
        if forward.to_bits() != approx_ged(&g2, &g1).to_bits() {
            asymmetric += 1;
        }
    }
    check(below == 0 && nonzero_self == 0 && asymmetric == 0, || {
        format!("{below} pairs below exact, {nonzero_self} nonzero self distances, {asymmetric} asymmetric pairs")
    })?;

    let mut wrong = 0;
    let mut kinds = [0usize; 3];
    for i in 0..500u64 {
        let anchor = random_graph(&mut rng, 6);
        let (mutant, kind) = random_mutant(&anchor, 10_000 + i);
        let expected = if kind == MutationKind::Substitution { 1 } else { 2 };
        kinds[kind as usize] += 1;
        if exact_ged_tiny(&anchor, &mutant, DEFAULT_MAX_ATOMS).map_err(e)? != expected {
            wrong += 1;
        }
    }
    check(wrong == 0, || format!("{wrong} of 500 mutants have an unexpected exact GED"))?;
    Ok(format!(
        "500 pairs: approx >= exact, self 0, symmetric (mean slack {:.3}); 500 mutants ({} additions, {} substitutions, {} deletions) exact",
        slack / 500.0,
        kinds[0],
        kinds[1],
        kinds[2]
    ))
}

fn ac5() -> Outcome {
    let (db, queries) = separable_screen(200, 2000, 20, 8, 601);
    let separable = vs_auroc(&db, &queries).map_err(e)?;
    check(separable == 1.0, || format!("separable AUROC {separable}"))?;

    let mut values = Vec::new();
    let mut antisymmetric = true;
    for seed in 0..10 {
        let (db, queries) = shuffled_screen(10_000, 100, 8, 0.1, 610 + seed);
        let counts = vs_auroc_counts(&db, &queries).map_err(e)?;
        let swapped = vs_auroc_counts(&db.with_swapped_labels(), &queries).map_err(e)?;
        antisymmetric &= counts.pairs == swapped.pairs && counts.half_units + swapped.half_units == 2 * counts.pairs;
        values.push(counts.value());
    }
    let worst = values.iter().map(|v| (v - 0.5).abs()).fold(0.0, f64::max);
    check(worst <= 0.05, || format!("shuffled AUROC values {values:?}"))?;
    check(antisymmetric, || "label swap is not exactly antisymmetric".into())?;
    let (lo, hi) = values.iter().fold((1.0f64, 0.0f64), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    Ok(format!("separable 1.0; shuffled over 10 seeds in [{lo:.4}, {hi:.4}]; swap antisymmetric"))
}

fn ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut r = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let mid = (i + j) as f64 / 2.0 + 1.0;
        for &o in &order[i..=j] {
            r[o] = mid;
        }
        i = j + 1;
    }
    r
}

fn spearman(x: &[f64], y: &[f64]) -> f64 {
    let (rx, ry) = (ranks(x), ranks(y));
    let n = rx.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    sxy / (sxx * syy).sqrt()
}

fn dist64(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn dist32(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| (x as f64 - y as f64).powi(2)).sum::<f64>().sqrt()
}

fn ac6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(701);
    let basis: Vec<Vec<f64>> = (0..8).map(|_| (0..256).map(|_| rng.sample(StandardNormal)).collect()).collect();
    let offset: Vec<f64> = (0..256).map(|_| rng.random_range(-3.0..3.0)).collect();
    let samples: Vec<Vec<f64>> = (0..500)
        .map(|_| {
            let z: Vec<f64> = (0..8).map(|_| rng.sample(StandardNormal)).collect();
            (0..256).map(|j| offset[j] + (0..8).map(|i| z[i] * basis[i][j]).sum::<f64>()).collect()
        })
        .collect();
    let model = pca_fit(&samples, 8).map_err(e)?;
    let projected: Vec<EmbeddingVector> = samples.iter().map(|s| model.apply(s)).collect::<Result<_, _>>().map_err(e)?;
    let mut worst = 0.0f64;
    for i in 0..samples.len() {
        for j in i + 1..samples.len() {
            let orig = dist64(&samples[i], &samples[j]);
            let proj = dist32(projected[i].as_slice(), projected[j].as_slice());
            worst = worst.max((proj - orig).abs() / orig);
        }
    }
    check(worst <= 1e-4, || format!("PCA-8 relative distance error {worst:e}"))?;

    let gaussian: Vec<Vec<f64>> = (0..1000).map(|_| (0..256).map(|_| rng.sample(StandardNormal)).collect()).collect();
    let srp = SparseProjection::new(256, 16, 702).map_err(e)?;
    let reduced: Vec<Vec<f64>> = gaussian.iter().map(|g| srp.project(g)).collect::<Result<_, _>>().map_err(e)?;
    let mut original = Vec::new();
    let mut after = Vec::new();
    for i in 0..gaussian.len() {
        for j in i + 1..gaussian.len() {
            original.push(dist64(&gaussian[i], &gaussian[j]));
            after.push(dist64(&reduced[i], &reduced[j]));
        }
    }
    let rho = spearman(&original, &after);
    check(rho > 0.5, || {
        format!("PCA-8 max relative error {worst:.2e} (ok); SRP-16 Spearman {rho:.4} is not above 0.5")
    })?;
    Ok(format!("PCA-8 max relative error {worst:.2e}; SRP-16 Spearman {rho:.4} over {} pairs", original.len()))
}

fn simsearch(args: &[&str]) -> Result<Vec<u8>, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_simsearch")).args(args).output().map_err(e)?;
    if !out.status.success() {
        return Err(format!("simsearch {} failed: {}", args.join(" "), String::from_utf8_lossy(&out.stderr)));
    }
    Ok(out.stdout)
}

fn s(p: &Path) -> &str {
    p.to_str().expect("utf-8 temp path")
}

/// Anchors plus random mutant chains, as SMILES lines with numeric ids.
fn corpus(n: usize) -> Vec<MolecularGraph> {
    let seeds = ["CCO", "c1ccccc1", "CC(=O)Nc1ccc(O)cc1", "C1CCNCC1", "OC(=O)CCN", "CCOC(=O)C", "c1ccncc1"];
    let mut graphs: Vec<MolecularGraph> = seeds.iter().map(|t| parse_smiles(t).expect("seed parses")).collect();
    let mut i = 0u64;
    while graphs.len() < n {
        let base = &graphs[(i as usize * 7919) % graphs.len()];
        let (m, _) = random_mutant(base, 800 + i);
        if m.atom_count() <= 24 {
            graphs.push(m);
        }
        i += 1;
    }
    graphs
}

fn run_pipeline(dir: &Path, smiles: &Path, labels: &Path) -> Result<Vec<(String, Vec<u8>)>, String> {
    let p = |name: &str| dir.join(name);
    let mut outputs = Vec::new();
    simsearch(&["fingerprint", "-i", s(smiles), "-o", s(&p("fp.bin"))])?;
    simsearch(&["fingerprint", "-i", s(smiles), "-o", s(&p("fp.cnt")), "--kind", "counts"])?;
    simsearch(&["reduce", "fit-pca", "-i", s(&p("fp.cnt")), "-o", s(&p("pca")), "-d", "8"])?;
    simsearch(&["reduce", "fit-pca", "-i", s(&p("fp.cnt")), "-o", s(&p("pca.sampled")), "-d", "8", "--sample", "100", "--seed", "4"])?;
    simsearch(&["reduce", "make-srp", "-o", s(&p("srp")), "-d", "16", "--seed", "4"])?;
    simsearch(&["reduce", "apply", "-m", s(&p("pca")), "-i", s(&p("fp.cnt")), "-o", s(&p("emb"))])?;
    simsearch(&["reduce", "apply", "-m", s(&p("srp")), "-i", s(&p("fp.bin")), "-o", s(&p("emb.srp"))])?;
    simsearch(&["index", "build", "-i", s(&p("emb")), "-o", s(&p("kdt")), "--leaf-capacity", "8"])?;
    simsearch(&["index", "build", "-i", s(&p("emb")), "-o", s(&p("kdt.ooc")), "--leaf-capacity", "8", "--memory-budget", "4K"])?;
    simsearch(&["index", "query", "--index", s(&p("kdt")), "-q", s(&p("emb")), "-k", "10", "-o", s(&p("hits"))])?;
    simsearch(&["index", "query", "--index", s(&p("kdt.ooc")), "-q", s(&p("emb")), "-k", "10", "-o", s(&p("hits.ooc")), "--threads", "3"])?;
    simsearch(&["bench", "brute-force", "-d", s(&p("emb")), "-q", s(&p("emb")), "-k", "10", "-o", s(&p("hits.bf"))])?;
    simsearch(&["bench", "brute-force", "-d", s(&p("fp.bin")), "-q", s(&p("fp.bin")), "-k", "10", "--metric", "tanimoto", "-o", s(&p("hits.tan"))])?;
    let lo = vec!["-1000"; 8].join(",");
    let hi = vec!["1000"; 8].join(",");
    simsearch(&["index", "range", "--index", s(&p("kdt")), "--lo", &lo, "--hi", &hi, "-o", s(&p("range"))])?;
    outputs.push(("index stats".to_string(), simsearch(&["index", "stats", "--index", s(&p("kdt")), "--audit"])?));
    simsearch(&["mutate", "-i", s(smiles), "-o", s(&p("mutants")), "--per-anchor", "2", "--seed", "9"])?;
    simsearch(&["bench", "ged", "-q", s(smiles), "-d", s(smiles), "-n", s(&p("hits")), "--k-max", "10", "--smooth", "3", "-o", s(&p("ged"))])?;
    simsearch(&["bench", "vs", "-d", s(&p("emb")), "-l", s(labels), "--seed", "5", "-o", s(&p("vs"))])?;
    simsearch(&["bench", "vs-synth", "--kind", "separable", "-n", "2000", "--seed", "5", "-o", s(&p("vs.sep"))])?;
    simsearch(&["bench", "vs-synth", "-n", "2000", "--seed", "5", "-o", s(&p("vs.shuf"))])?;
    let timing = simsearch(&["bench", "timing", "--index", s(&p("kdt")), "-d", s(&p("emb")), "-q", s(&p("emb")), "-k", "10"])?;
    let stable: Vec<u8> = String::from_utf8_lossy(&timing)
        .lines()
        .map(|l| l.split('\t').take(4).collect::<Vec<_>>().join("\t") + "\n")
        .collect::<String>()
        .into_bytes();
    outputs.push(("bench timing (method, n, d, k)".to_string(), stable));
    for name in [
        "fp.bin", "fp.cnt", "pca", "pca.sampled", "srp", "emb", "emb.srp", "kdt", "kdt.ooc", "hits", "hits.ooc", "hits.bf",
        "hits.tan", "range", "mutants", "ged", "vs", "vs.sep", "vs.shuf",
    ] {
        outputs.push((name.to_string(), fs::read(p(name)).map_err(e)?));
    }
    Ok(outputs)
}

fn ac7(dir: &Path) -> Outcome {
    let graphs = corpus(400);
    let mut text = String::new();
    let mut labels = String::new();
    let mut small = 0;
    for (i, g) in graphs.iter().enumerate() {
        let written = write_smiles(g);
        let reparsed = parse_smiles(&written).map_err(|err| format!("{written}: {err}"))?;
        let same_shape = reparsed.atom_count() == g.atom_count()
            && reparsed.bond_count() == g.bond_count()
            && ecfc(&reparsed) == ecfc(g);
        check(same_shape, || format!("SMILES round trip changed {written}"))?;
        if g.atom_count() <= DEFAULT_MAX_ATOMS {
            let ged = exact_ged_tiny(g, &reparsed, DEFAULT_MAX_ATOMS).map_err(e)?;
            check(ged == 0, || format!("{written} re-parses at exact GED {ged}"))?;
            small += 1;
        }
        text.push_str(&format!("{written}\t{}\n", 1000 + i));
        labels.push_str(&format!("{}\t{}\n", 1000 + i, if i % 5 == 0 { "active" } else { "decoy" }));
    }
    let smiles = dir.join("corpus.smi");
    let label_path = dir.join("labels.tsv");
    fs::write(&smiles, text).map_err(e)?;
    fs::write(&label_path, labels).map_err(e)?;

    let runs: Vec<PathBuf> = ["run-a", "run-b"].iter().map(|r| dir.join(r)).collect();
    let mut results = Vec::new();
    for run in &runs {
        fs::create_dir_all(run).map_err(e)?;
        results.push(run_pipeline(run, &smiles, &label_path)?);
    }
    let differing: Vec<&str> = results[0]
        .iter()
        .zip(&results[1])
        .filter(|(a, b)| a.1 != b.1)
        .map(|(a, _)| a.0.as_str())
        .collect();
    check(differing.is_empty(), || format!("outputs differ between runs: {differing:?}"))?;
    let out = &results[0];
    let get = |name: &str| &out.iter().find(|(n, _)| n == name).expect("recorded output").1;
    check(get("hits") == get("hits.ooc") && get("hits") == get("hits.bf"), || {
        "in-memory, out-of-core and linear-scan neighbors differ".into()
    })?;
    check(get("kdt") == get("kdt.ooc"), || "out-of-core build is not byte-identical to the in-memory build".into())?;

    let index = KdIndex::open(runs[0].join("kdt")).map_err(e)?;
    let again = KdIndex::open(runs[1].join("kdt")).map_err(e)?;
    let (_, coords) = load_dataset(&runs[0].join("emb"))?;
    for q in coords.chunks_exact(8) {
        let (a, b) = (index.knn(q, 10).map_err(e)?, again.knn(q, 10).map_err(e)?);
        check(tsv(&[a]) == tsv(&[b]), || "reopened index answers differ".into())?;
    }

    let model_bytes = fs::read(runs[0].join("pca")).map_err(e)?;
    let model = PcaModel::read_from(&mut model_bytes.as_slice()).map_err(e)?;
    let mut rewritten = Vec::new();
    model.write_to(&mut rewritten).map_err(e)?;
    check(rewritten == model_bytes, || "PCA model does not round-trip".into())?;
    let srp_bytes = fs::read(runs[0].join("srp")).map_err(e)?;
    let srp = SparseProjection::read_from(&mut srp_bytes.as_slice()).map_err(e)?;
    let mut rewritten = Vec::new();
    srp.write_to(&mut rewritten).map_err(e)?;
    check(rewritten == srp_bytes, || "SRP model does not round-trip".into())?;

    Ok(format!(
        "{} outputs byte-identical across two runs; {} SMILES round trips ({small} checked by exact GED); reopened indexes agree; models round-trip",
        out.len(),
        graphs.len()
    ))
}

fn main() {
    let dir = tempfile::Builder::new().prefix("simsearch-acceptance-").tempdir().expect("temp dir");
    let criteria: [(&str, &str, Box<dyn Fn() -> Outcome>); 7] = [
        ("AC1", "exactness", Box::new(|| ac1(dir.path()))),
        ("AC2", "sublinearity", Box::new(|| ac2(dir.path()))),
        ("AC3", "memory contract", Box::new(|| ac3(dir.path()))),
        ("AC4", "GED validity", Box::new(ac4)),
        ("AC5", "AUROC machinery", Box::new(ac5)),
        ("AC6", "PCA/SRP fidelity", Box::new(ac6)),
        ("AC7", "determinism and round trips", Box::new(|| ac7(dir.path()))),
    ];
    let selected: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (id, name, run) in &criteria {
        if !selected.is_empty() && !selected.iter().any(|s| s == id) {
            continue;
        }
        let start = Instant::now();
        match run() {
            Ok(detail) => println!("{id} PASS {name}: {detail} [{:.1?}]", start.elapsed()),
            Err(why) => {
                failed += 1;
                println!("{id} FAIL {name}: {why} [{:.1?}]", start.elapsed());
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
