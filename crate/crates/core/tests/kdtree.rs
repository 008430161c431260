use std::convert::Infallible;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use simsearch_core::bruteforce::bf_knn_vectors;
use simsearch_core::embedding::EmbeddingVector;
use simsearch_core::kdtree::{build, BuildOptions, KdError, KdIndex};
use tempfile::TempDir;

fn uniform(n: usize, dim: usize, seed: u64) -> Vec<(u64, Vec<f32>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| (i as u64, (0..dim).map(|_| rng.random::<f32>()).collect()))
        .collect()
}

fn gaussian(n: usize, dim: usize, seed: u64) -> Vec<(u64, Vec<f32>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let v: Vec<f32> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
            (i as u64, v)
        })
        .collect()
}

fn stream(points: &[(u64, Vec<f32>)]) -> impl Iterator<Item = Result<(u64, EmbeddingVector), Infallible>> + '_ {
    points
        .iter()
        .map(|(id, v)| Ok((*id, EmbeddingVector::new(v.clone()).unwrap())))
}

fn build_index(points: &[(u64, Vec<f32>)], options: &BuildOptions) -> (TempDir, KdIndex) {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("index.kdt");
    build(stream(points), points[0].1.len(), options, &path).unwrap();
    let index = KdIndex::open(&path).unwrap();
    (dir, index)
}

fn opts(leaf_capacity: usize) -> BuildOptions {
    BuildOptions {
        leaf_capacity,
        ..BuildOptions::default()
    }
}

fn brute(points: &[(u64, Vec<f32>)], q: &[f32], k: usize) -> Vec<simsearch_core::embedding::Neighbor> {
    bf_knn_vectors(points.iter().map(|(i, v)| (*i, v.as_slice())), q, k).unwrap()
}

#[test]
fn single_point() {
    let pts = vec![(42u64, vec![1.0f32, 2.0])];
    let (_dir, index) = build_index(&pts, &opts(256));
    let stats = index.stats().unwrap();
    assert_eq!((stats.count, stats.leaves, stats.internal_nodes, stats.height), (1, 1, 0, 0));
    let hits = index.knn(&[1.0, 2.0], 5).unwrap();
    assert_eq!(hits.len(), 1);
    assert_eq!((hits[0].id, hits[0].distance), (42, 0.0));
}

#[test]
fn leaf_capacity_points_make_one_leaf() {
    let pts = uniform(64, 3, 1);
    let (_dir, index) = build_index(&pts, &opts(64));
    let stats = index.stats().unwrap();
    assert_eq!((stats.leaves, stats.internal_nodes, stats.height), (1, 0, 0));

    let pts = uniform(128, 3, 1);
    let (_dir, index) = build_index(&pts, &opts(64));
    assert!(index.stats().unwrap().height >= 1);
}

#[test]
fn audit_on_100k_points() {
    let pts = uniform(100_000, 8, 7);
    let (_dir, index) = build_index(&pts, &BuildOptions::default());
    let audit = index.audit().unwrap();
    assert!(audit.is_clean(), "{audit:?}");
    assert_eq!(audit.points, 100_000);
    assert!(audit.max_leaf_size <= 256);
    // Exact medians keep the tree balanced to within one level.
    assert!(audit.max_leaf_depth - audit.min_leaf_depth <= 1, "{audit:?}");
    let stats = index.stats().unwrap();
    assert_eq!(stats.leaves, stats.internal_nodes + 1);
}

#[test]
fn knn_matches_brute_force() {
    for (dim, data) in [(8, uniform(20_000, 8, 11)), (3, gaussian(20_000, 3, 12)), (16, gaussian(5_000, 16, 13))] {
        let (_dir, index) = build_index(&data, &opts(32));
        let queries = uniform(200, dim, 99);
        for (_, q) in &queries {
            for k in [1, 10, 100] {
                assert_eq!(index.knn(q, k).unwrap(), brute(&data, q, k));
            }
        }
    }
}

#[test]
fn query_equal_to_data_point_and_k_beyond_n() {
    let pts = uniform(1000, 4, 5);
    let (_dir, index) = build_index(&pts, &opts(16));
    let hits = index.knn(&pts[321].1, 3).unwrap();
    assert_eq!((hits[0].id, hits[0].distance), (321, 0.0));
    let all = index.knn(&[0.5; 4], 5000).unwrap();
    assert_eq!(all.len(), 1000);
    assert_eq!(all, brute(&pts, &[0.5; 4], 1000));
}

#[test]
fn duplicates_and_ties() {
    // Heavy duplication on a coarse lattice exercises the median tie rule.
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let pts: Vec<(u64, Vec<f32>)> = (0..5000)
        .map(|_| {
            (
                rng.random_range(0..2000u64),
                (0..3).map(|_| rng.random_range(0..4) as f32).collect(),
            )
        })
        .collect();
    let (_dir, index) = build_index(&pts, &opts(8));
    assert!(index.audit().unwrap().is_clean());
    for q in [[0.0, 0.0, 0.0], [1.5, 2.0, 0.5], [3.0, 3.0, 3.0]] {
        for k in [1, 7, 50, 400] {
            assert_eq!(index.knn(&q, k).unwrap(), brute(&pts, &q, k));
        }
    }
    let all_same: Vec<(u64, Vec<f32>)> = (0..1000).map(|i| (999 - i, vec![1.0, 1.0])).collect();
    let (_dir, index) = build_index(&all_same, &opts(4));
    let hits = index.knn(&[0.0, 0.0], 5).unwrap();
    assert_eq!(hits.iter().map(|n| n.id).collect::<Vec<_>>(), [0, 1, 2, 3, 4]);
}

#[test]
fn range_matches_linear_scan() {
    let pts = uniform(10_000, 3, 21);
    let (_dir, index) = build_index(&pts, &opts(32));
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..100 {
        let a: Vec<f32> = (0..3).map(|_| rng.random()).collect();
        let b: Vec<f32> = (0..3).map(|_| rng.random()).collect();
        let lo: Vec<f32> = a.iter().zip(&b).map(|(x, y)| x.min(*y)).collect();
        let hi: Vec<f32> = a.iter().zip(&b).map(|(x, y)| x.max(*y)).collect();
        let mut expected: Vec<u64> = pts
            .iter()
            .filter(|(_, v)| (0..3).all(|d| lo[d] <= v[d] && v[d] <= hi[d]))
            .map(|(i, _)| *i)
            .collect();
        expected.sort_unstable();
        assert_eq!(index.range(&lo, &hi).unwrap(), expected);
    }
    assert_eq!(index.range(&[0.0; 3], &[1.0; 3]).unwrap().len(), 10_000);
    assert!(index.range(&[2.0; 3], &[3.0; 3]).unwrap().is_empty());
    assert!(matches!(index.range(&[1.0, 0.0, 0.0], &[0.0; 3]), Err(KdError::InvertedBounds(0))));
}

#[test]
fn out_of_core_build_matches_in_memory_build() {
    let pts = uniform(60_000, 4, 31);
    let small = BuildOptions {
        leaf_capacity: 32,
        memory_budget: 200_000,
        temp_dir: None,
    };
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("ooc.kdt");
    let summary = build(stream(&pts), 4, &small, &path).unwrap();
    assert!(summary.external_partitions > 0, "{summary:?}");
    let ooc = KdIndex::open(&path).unwrap();
    let audit = ooc.audit().unwrap();
    assert!(audit.is_clean());
    assert_eq!(audit.points, 60_000);

    let (_d2, mem) = build_index(&pts, &opts(32));
    assert_eq!(mem.audit().unwrap().checksum, audit.checksum);
    assert_eq!(mem.nodes().len(), ooc.nodes().len());
    let queries = uniform(50, 4, 77);
    for (_, q) in &queries {
        assert_eq!(ooc.knn(q, 25).unwrap(), brute(&pts, q, 25));
        assert_eq!(ooc.knn(q, 25).unwrap(), mem.knn(q, 25).unwrap());
    }
    // Only the finished index remains in the output directory.
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
}

#[test]
fn out_of_core_with_duplicate_keys() {
    let mut pts: Vec<(u64, Vec<f32>)> = (0..20_000).map(|i| (i % 7, vec![(i % 3) as f32, 0.0])).collect();
    pts.extend(uniform(5000, 2, 8));
    let small = BuildOptions {
        leaf_capacity: 16,
        memory_budget: 40_000,
        temp_dir: None,
    };
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("dup.kdt");
    let summary = build(stream(&pts), 2, &small, &path).unwrap();
    assert!(summary.external_partitions > 0);
    let index = KdIndex::open(&path).unwrap();
    assert!(index.audit().unwrap().is_clean());
    for q in [[0.0, 0.0], [1.0, 0.1], [0.5, 0.5]] {
        assert_eq!(index.knn(&q, 30).unwrap(), brute(&pts, &q, 30));
    }
}

#[test]
fn rebuild_is_byte_identical_and_reopen_is_stable() {
    let pts = gaussian(5000, 5, 3);
    let dir = TempDir::new().unwrap();
    let a = dir.path().join("a.kdt");
    let b = dir.path().join("b.kdt");
    build(stream(&pts), 5, &opts(20), &a).unwrap();
    build(stream(&pts), 5, &opts(20), &b).unwrap();
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let first = KdIndex::open(&a).unwrap();
    let second = KdIndex::open(&a).unwrap();
    assert_eq!(first.nodes(), second.nodes());
    assert_eq!(first.knn(&[0.0; 5], 10).unwrap(), second.knn(&[0.0; 5], 10).unwrap());
}

#[test]
fn build_errors() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("x.kdt");
    let empty: Vec<(u64, Vec<f32>)> = Vec::new();
    assert!(matches!(build(stream(&empty), 2, &opts(4), &path), Err(KdError::Empty)));
    let ragged = vec![(0u64, vec![0.0f32, 1.0]), (1, vec![0.0])];
    assert!(matches!(
        build(stream(&ragged), 2, &opts(4), &path),
        Err(KdError::Dimension { expected: 2, found: 1 })
    ));
    let tiny = BuildOptions {
        leaf_capacity: 256,
        memory_budget: 100,
        temp_dir: None,
    };
    assert!(matches!(
        build(stream(&ragged[..1]), 2, &tiny, &path),
        Err(KdError::MemoryBudget { .. })
    ));
    assert!(matches!(build(stream(&ragged[..1]), 2, &opts(0), &path), Err(KdError::LeafCapacity)));
    assert!(!path.exists());
}

#[test]
fn query_errors() {
    let pts = uniform(100, 3, 1);
    let (_dir, index) = build_index(&pts, &opts(8));
    assert!(matches!(index.knn(&[0.0; 2], 1), Err(KdError::Dimension { .. })));
    assert!(matches!(index.knn(&[0.0, f32::NAN, 0.0], 1), Err(KdError::NonFiniteQuery(1))));
    assert!(matches!(index.knn(&[0.0; 3], 0), Err(KdError::InvalidK)));
}

#[test]
fn corrupt_files_are_rejected() {
    let pts = uniform(2000, 3, 1);
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("c.kdt");
    build(stream(&pts), 3, &opts(16), &path).unwrap();
    let bytes = std::fs::read(&path).unwrap();

    let bad = dir.path().join("bad.kdt");
    let mut magic = bytes.clone();
    magic[0] = b'X';
    std::fs::write(&bad, &magic).unwrap();
    assert!(KdIndex::open(&bad).is_err());

    let mut version = bytes.clone();
    version[4] = 9;
    std::fs::write(&bad, &version).unwrap();
    assert!(KdIndex::open(&bad).is_err());

    std::fs::write(&bad, &bytes[..bytes.len() - 10]).unwrap();
    let truncated = KdIndex::open(&bad).and_then(|i| i.stats());
    assert!(matches!(truncated, Err(KdError::Corrupt(_))), "{truncated:?}");

    std::fs::write(&bad, &bytes[..20]).unwrap();
    assert!(KdIndex::open(&bad).is_err());
}

#[test]
fn concurrent_readers() {
    let pts = uniform(20_000, 6, 17);
    let (_dir, index) = build_index(&pts, &opts(64));
    let queries = uniform(40, 6, 18);
    let expected: Vec<_> = queries.iter().map(|(_, q)| index.knn(q, 20).unwrap()).collect();
    std::thread::scope(|s| {
        for chunk in 0..4 {
            let (index, queries, expected) = (&index, &queries, &expected);
            s.spawn(move || {
                for i in (chunk..queries.len()).step_by(4) {
                    assert_eq!(index.knn(&queries[i].1, 20).unwrap(), expected[i]);
                }
            });
        }
    });
}

#[test]
fn fewer_distances_than_brute_force() {
    let pts = uniform(50_000, 8, 41);
    let (_dir, index) = build_index(&pts, &BuildOptions::default());
    let queries = uniform(50, 8, 42);
    let total: u64 = queries
        .iter()
        .map(|(_, q)| index.knn_with_stats(q, 100).unwrap().1.distance_computations)
        .sum();
    let fraction = total as f64 / (50.0 * 50_000.0);
    assert!(fraction < 0.5, "{fraction}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn knn_and_range_are_exact(
        raw in prop::collection::vec(prop::collection::vec(-4i8..4, 2), 1..300),
        leaf in 1usize..10,
        q in prop::collection::vec(-5i8..5, 2),
        k in 1usize..40,
    ) {
        let pts: Vec<(u64, Vec<f32>)> = raw
            .iter()
            .enumerate()
            .map(|(i, v)| ((i % 37) as u64, v.iter().map(|&c| c as f32 * 0.5).collect()))
            .collect();
        let (_dir, index) = build_index(&pts, &opts(leaf));
        prop_assert!(index.audit().unwrap().is_clean());
        let q: Vec<f32> = q.iter().map(|&c| c as f32 * 0.5).collect();
        prop_assert_eq!(index.knn(&q, k).unwrap(), brute(&pts, &q, k));
        let lo = [q[0].min(0.0), q[1].min(0.0)];
        let hi = [q[0].max(0.0), q[1].max(0.0)];
        let mut expected: Vec<u64> = pts
            .iter()
            .filter(|(_, v)| (0..2).all(|d| lo[d] <= v[d] && v[d] <= hi[d]))
            .map(|(i, _)| *i)
            .collect();
        expected.sort_unstable();
        prop_assert_eq!(index.range(&lo, &hi).unwrap(), expected);
    }
}
