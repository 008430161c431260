//! Exact similarity search over chemical structures.
//!
//! The pipeline runs SMILES text through [`molgraph`] into molecular graphs,
//! hashes them into 256-position circular fingerprints ([`fingerprint`]),
//! reduces those to a handful of dimensions ([`reduce`]) and indexes the
//! result in a disk-backed k-d tree ([`kdtree`]) that answers exact k-NN and
//! box queries. [`bruteforce`] is the linear-scan reference, [`ged`] scores
//! hit quality by graph edit distance and [`harness`] holds the evaluation
//! routines.

pub mod bruteforce;
pub mod embedding;
pub mod fingerprint;
pub mod formats;
pub mod ged;
pub mod harness;
pub mod kdtree;
pub mod molgraph;
pub mod reduce;

pub use bruteforce::{bf_knn, euclidean_distance, Metric, Point};
pub use embedding::{EmbeddingVector, Neighbor, TopK};
pub use fingerprint::{ecfc, ecfp, tanimoto_distance, Fingerprint256, FingerprintKind};
pub use ged::{approx_ged, exact_ged_tiny};
pub use harness::{ged_curve, timing_run, vs_auroc, Label, LabeledEmbeddings, TimingReport};
pub use kdtree::{build, BuildOptions, KdIndex};
pub use molgraph::{parse_smiles, write_smiles, Atom, Bond, BondOrder, Element, MolecularGraph};
pub use reduce::{pca_fit, PcaModel, SparseProjection};
