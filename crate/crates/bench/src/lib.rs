//! Shared fixtures for the criterion benches.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use simsearch_core::formats::EmbeddingWriter;
use simsearch_core::kdtree::{build, BuildOptions, KdIndex};
use simsearch_core::molgraph::{parse_smiles, random_mutant, MolecularGraph};
use tempfile::TempDir;

/// `n` uniform points in the unit cube, row-major.
pub fn uniform_points(n: usize, dim: usize, seed: u64) -> Vec<f32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n * dim).map(|_| rng.random::<f32>()).collect()
}

/// An embedding file and its index, removed on drop.
pub struct IndexedSet {
    dir: TempDir,
    pub dim: usize,
    pub coords: Vec<f32>,
    pub index: KdIndex,
}

impl IndexedSet {
    pub fn uniform(n: usize, dim: usize, seed: u64) -> Self {
        let dir = tempfile::tempdir().expect("temp dir");
        let coords = uniform_points(n, dim, seed);
        let data = dir.path().join("points.emb");
        let mut w = EmbeddingWriter::create(&data, dim).expect("create embedding file");
        for (id, p) in coords.chunks_exact(dim).enumerate() {
            w.write(id as u64, p).expect("write point");
        }
        w.finish().expect("finish embedding file");
        let out = dir.path().join("points.kdt");
        let records = coords
            .chunks_exact(dim)
            .enumerate()
            .map(|(id, p)| simsearch_core::EmbeddingVector::new(p.to_vec()).map(|v| (id as u64, v)));
        build(records, dim, &BuildOptions::default(), &out).expect("build index");
        let index = KdIndex::open(&out).expect("open index");
        IndexedSet { dir, dim, coords, index }
    }

    pub fn data_path(&self) -> PathBuf {
        self.dir.path().join("points.emb")
    }

    pub fn dir(&self) -> &Path {
        self.dir.path()
    }
}

/// Drug-like seeds followed by a deterministic chain of one-edit mutants.
pub fn molecules(n: usize) -> Vec<MolecularGraph> {
    let seeds = [
        "CC(=O)Oc1ccccc1C(=O)O",
        "CN1CCCC1c1cccnc1",
        "CC(C)Cc1ccc(cc1)C(C)C(=O)O",
        "O=C(O)c1ccccc1O",
        "CN1C=NC2=C1C(=O)N(C(=O)N2C)C",
    ];
    let mut graphs: Vec<MolecularGraph> = seeds.iter().map(|s| parse_smiles(s).expect("seed parses")).collect();
    let mut i = 0u64;
    while graphs.len() < n {
        let (m, _) = random_mutant(&graphs[i as usize % graphs.len()], i);
        graphs.push(m);
        i += 1;
    }
    graphs.truncate(n);
    graphs
}
