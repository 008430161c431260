//! Molecular graphs over heavy atoms, SMILES text conversion, and the three
//! atom-level edits (addition, substitution, deletion) used to build 1-GED
//! mutant corpora.

mod element;
mod mutate;
mod smiles;
mod writer;

pub use element::Element;
pub use mutate::{
    mutate_addition, mutate_deletion, mutate_substitution, random_mutant, MutationError,
    MutationKind,
};
pub use smiles::{parse_smiles, SmilesError};
pub use writer::write_smiles;

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BondOrder {
    Single,
    Double,
    Triple,
    Aromatic,
}

impl BondOrder {
    /// Stable numeric code: single=1, double=2, triple=3, aromatic=4.
    pub fn code(self) -> u8 {
        match self {
            BondOrder::Single => 1,
            BondOrder::Double => 2,
            BondOrder::Triple => 3,
            BondOrder::Aromatic => 4,
        }
    }

    pub fn symbol(self) -> char {
        match self {
            BondOrder::Single => '-',
            BondOrder::Double => '=',
            BondOrder::Triple => '#',
            BondOrder::Aromatic => ':',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Atom {
    pub element: Element,
    pub charge: i8,
    pub aromatic: bool,
}

impl Atom {
    pub fn new(element: Element) -> Self {
        Atom {
            element,
            charge: 0,
            aromatic: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Bond {
    pub a: usize,
    pub b: usize,
    pub order: BondOrder,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("graph has no atoms")]
    Empty,
    #[error("bond {bond} references atom {atom}, but the graph has {atoms} atoms")]
    BadEndpoint { bond: usize, atom: usize, atoms: usize },
    #[error("bond {bond} joins atom {atom} to itself")]
    SelfLoop { bond: usize, atom: usize },
    #[error("atoms {a} and {b} are bonded more than once")]
    DuplicateBond { a: usize, b: usize },
    #[error("graph is disconnected")]
    Disconnected,
}

/// Connected, labeled, undirected graph of heavy atoms.
///
/// Adjacency lists are kept sorted by neighbor index so that traversal order
/// depends only on atom numbering.
#[derive(Debug, Clone)]
pub struct MolecularGraph {
    atoms: Vec<Atom>,
    bonds: Vec<Bond>,
    adjacency: Vec<Vec<(usize, BondOrder)>>,
    source: Option<String>,
}

impl PartialEq for MolecularGraph {
    fn eq(&self, other: &Self) -> bool {
        self.atoms == other.atoms && self.adjacency == other.adjacency
    }
}

impl Eq for MolecularGraph {}

impl MolecularGraph {
    /// Builds a connected graph, validating endpoints and rejecting self
    /// loops, duplicate bonds and disconnected fragments.
    pub fn new(atoms: Vec<Atom>, bonds: Vec<Bond>) -> Result<Self, GraphError> {
        let graph = MolecularGraph::new_possibly_disconnected(atoms, bonds)?;
        if !graph.is_connected() {
            return Err(GraphError::Disconnected);
        }
        Ok(graph)
    }

    /// Like [`MolecularGraph::new`] but accepts several fragments. Parsing
    /// never produces such graphs; edit-distance code and tests may.
    pub fn new_possibly_disconnected(atoms: Vec<Atom>, bonds: Vec<Bond>) -> Result<Self, GraphError> {
        if atoms.is_empty() {
            return Err(GraphError::Empty);
        }
        let n = atoms.len();
        let mut adjacency: Vec<Vec<(usize, BondOrder)>> = vec![Vec::new(); n];
        for (idx, bond) in bonds.iter().enumerate() {
            for atom in [bond.a, bond.b] {
                if atom >= n {
                    return Err(GraphError::BadEndpoint {
                        bond: idx,
                        atom,
                        atoms: n,
                    });
                }
            }
            if bond.a == bond.b {
                return Err(GraphError::SelfLoop {
                    bond: idx,
                    atom: bond.a,
                });
            }
            if adjacency[bond.a].iter().any(|&(j, _)| j == bond.b) {
                return Err(GraphError::DuplicateBond {
                    a: bond.a.min(bond.b),
                    b: bond.a.max(bond.b),
                });
            }
            adjacency[bond.a].push((bond.b, bond.order));
            adjacency[bond.b].push((bond.a, bond.order));
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }

        Ok(MolecularGraph {
            atoms,
            bonds,
            adjacency,
            source: None,
        })
    }

    pub fn is_connected(&self) -> bool {
        self.component_count() == 1
    }

    pub fn with_source(mut self, source: impl Into<String>) -> Self {
        self.source = Some(source.into());
        self
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn bonds(&self) -> &[Bond] {
        &self.bonds
    }

    pub fn atom_count(&self) -> usize {
        self.atoms.len()
    }

    pub fn bond_count(&self) -> usize {
        self.bonds.len()
    }

    /// Neighbors of `atom` with the connecting bond order, sorted by index.
    pub fn neighbors(&self, atom: usize) -> &[(usize, BondOrder)] {
        &self.adjacency[atom]
    }

    pub fn degree(&self, atom: usize) -> usize {
        self.adjacency[atom].len()
    }

    pub fn bond_between(&self, a: usize, b: usize) -> Option<BondOrder> {
        self.adjacency[a]
            .binary_search_by_key(&b, |&(j, _)| j)
            .ok()
            .map(|pos| self.adjacency[a][pos].1)
    }

    /// Original SMILES text, when the graph was parsed from one.
    pub fn source(&self) -> Option<&str> {
        self.source.as_deref()
    }

    /// Number of independent cycles (bonds − atoms + 1 for a connected graph).
    pub fn cycle_rank(&self) -> usize {
        self.bonds.len() + self.component_count() - self.atoms.len()
    }

    pub fn component_count(&self) -> usize {
        let n = self.atoms.len();
        let mut seen = vec![false; n];
        let mut components = 0;
        for start in 0..n {
            if seen[start] {
                continue;
            }
            components += 1;
            seen[start] = true;
            let mut stack = vec![start];
            while let Some(u) = stack.pop() {
                for &(v, _) in &self.adjacency[u] {
                    if !seen[v] {
                        seen[v] = true;
                        stack.push(v);
                    }
                }
            }
        }
        components
    }
}
