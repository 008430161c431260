use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use super::{Atom, Bond, BondOrder, Element, MolecularGraph};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MutationKind {
    Addition,
    Substitution,
    Deletion,
}

impl MutationKind {
    pub fn as_str(self) -> &'static str {
        match self {
            MutationKind::Addition => "addition",
            MutationKind::Substitution => "substitution",
            MutationKind::Deletion => "deletion",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MutationError {
    #[error("atom index {index} out of range for a graph of {atoms} atoms")]
    IndexOutOfRange { index: usize, atoms: usize },
    #[error("atom {index} is already {element}")]
    NoOpSubstitution { index: usize, element: Element },
    #[error("{0} is outside the organic subset")]
    UnsupportedElement(Element),
    #[error("bond order {0:?} cannot attach a new atom")]
    InvalidBondOrder(BondOrder),
    #[error("atom {index} has degree {degree}; only singly-attached atoms can be deleted")]
    NotSinglyAttached { index: usize, degree: usize },
    #[error("cannot delete the only atom of a graph")]
    LastAtom,
}

fn check_index(graph: &MolecularGraph, index: usize) -> Result<(), MutationError> {
    if index >= graph.atom_count() {
        return Err(MutationError::IndexOutOfRange {
            index,
            atoms: graph.atom_count(),
        });
    }
    Ok(())
}

fn rebuild(atoms: Vec<Atom>, bonds: Vec<Bond>) -> MolecularGraph {
    MolecularGraph::new(atoms, bonds).expect("mutations preserve graph invariants")
}

/// Changes the element of one atom; topology is untouched.
pub fn mutate_substitution(
    graph: &MolecularGraph,
    atom_index: usize,
    new_element: Element,
) -> Result<MolecularGraph, MutationError> {
    check_index(graph, atom_index)?;
    if !new_element.is_organic_subset() {
        return Err(MutationError::UnsupportedElement(new_element));
    }
    let old = graph.atoms()[atom_index];
    if old.element == new_element {
        return Err(MutationError::NoOpSubstitution {
            index: atom_index,
            element: new_element,
        });
    }
    let mut atoms = graph.atoms().to_vec();
    atoms[atom_index] = Atom {
        element: new_element,
        charge: old.charge,
        aromatic: old.aromatic && new_element.can_be_aromatic(),
    };
    Ok(rebuild(atoms, graph.bonds().to_vec()))
}

/// Appends a new atom bonded to `attach_index`.
pub fn mutate_addition(
    graph: &MolecularGraph,
    attach_index: usize,
    new_element: Element,
    bond_order: BondOrder,
) -> Result<MolecularGraph, MutationError> {
    check_index(graph, attach_index)?;
    if bond_order == BondOrder::Aromatic {
        return Err(MutationError::InvalidBondOrder(bond_order));
    }
    let mut atoms = graph.atoms().to_vec();
    let mut bonds = graph.bonds().to_vec();
    atoms.push(Atom::new(new_element));
    bonds.push(Bond {
        a: attach_index,
        b: atoms.len() - 1,
        order: bond_order,
    });
    Ok(rebuild(atoms, bonds))
}

/// Removes a singly-attached atom and its bond. Remaining atoms keep their
/// relative order.
pub fn mutate_deletion(
    graph: &MolecularGraph,
    atom_index: usize,
) -> Result<MolecularGraph, MutationError> {
    check_index(graph, atom_index)?;
    if graph.atom_count() == 1 {
        return Err(MutationError::LastAtom);
    }
    let degree = graph.degree(atom_index);
    if degree != 1 {
        return Err(MutationError::NotSinglyAttached {
            index: atom_index,
            degree,
        });
    }
    let shift = |i: usize| if i > atom_index { i - 1 } else { i };
    let atoms = graph
        .atoms()
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != atom_index)
        .map(|(_, a)| *a)
        .collect();
    let bonds = graph
        .bonds()
        .iter()
        .filter(|b| b.a != atom_index && b.b != atom_index)
        .map(|b| Bond {
            a: shift(b.a),
            b: shift(b.b),
            order: b.order,
        })
        .collect();
    Ok(rebuild(atoms, bonds))
}

/// Applies one uniformly chosen feasible edit, driven by a ChaCha8 stream
/// seeded with `seed`.
///
/// Kinds are drawn uniformly among the feasible ones (deletion needs a
/// singly-attached atom). Additions attach a uniformly drawn organic-subset
/// element with a single bond; substitutions draw uniformly from the organic
/// subset minus the current element.
pub fn random_mutant(graph: &MolecularGraph, seed: u64) -> (MolecularGraph, MutationKind) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let leaves: Vec<usize> = if graph.atom_count() >= 2 {
        (0..graph.atom_count())
            .filter(|&i| graph.degree(i) == 1)
            .collect()
    } else {
        Vec::new()
    };
    let mut kinds = vec![MutationKind::Addition, MutationKind::Substitution];
    if !leaves.is_empty() {
        kinds.push(MutationKind::Deletion);
    }
    let kind = kinds[rng.random_range(0..kinds.len())];
    let n = graph.atom_count();
    let mutant = match kind {
        MutationKind::Addition => {
            let attach = rng.random_range(0..n);
            let element = Element::ORGANIC_SUBSET[rng.random_range(0..Element::ORGANIC_SUBSET.len())];
            mutate_addition(graph, attach, element, BondOrder::Single)
        }
        MutationKind::Substitution => {
            let index = rng.random_range(0..n);
            let current = graph.atoms()[index].element;
            let choices: Vec<Element> = Element::ORGANIC_SUBSET
                .iter()
                .copied()
                .filter(|&e| e != current)
                .collect();
            let element = choices[rng.random_range(0..choices.len())];
            mutate_substitution(graph, index, element)
        }
        MutationKind::Deletion => {
            let index = leaves[rng.random_range(0..leaves.len())];
            mutate_deletion(graph, index)
        }
    };
    (mutant.expect("feasible mutation"), kind)
}
