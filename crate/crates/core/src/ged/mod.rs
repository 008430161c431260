//! Graph edit distance between molecular graphs under unit costs.
//!
//! Every node insertion, deletion and relabeling costs 1, as does every edge
//! insertion, deletion and bond-order change. Node labels are element
//! symbols only.

mod assignment;
mod exact;

use thiserror::Error;

pub use assignment::{assignment_solve, Assignment, CostMatrix};
pub use exact::{exact_ged_tiny, DEFAULT_MAX_ATOMS};

use crate::molgraph::MolecularGraph;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GedError {
    #[error("cost matrix is not square ({rows} rows, a row of {columns} columns)")]
    NotSquare { rows: usize, columns: usize },
    #[error("cost at ({row}, {col}) is negative or NaN")]
    InvalidCost { row: usize, col: usize },
    #[error("no finite perfect assignment exists")]
    Infeasible,
    #[error("graph of {atoms} atoms exceeds the exact-search limit of {max}")]
    TooLarge { atoms: usize, max: usize },
}

fn incident_orders(g: &MolecularGraph, atom: usize) -> Vec<u8> {
    let mut orders: Vec<u8> = g
        .neighbors(atom)
        .iter()
        .map(|&(_, order)| order.code())
        .collect();
    orders.sort_unstable();
    orders
}

/// Size of the intersection of two sorted multisets.
fn common(a: &[u8], b: &[u8]) -> usize {
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}

/// The Riesen–Bunke (n₁+n₂)² matrix for editing `g1` into `g2`.
pub fn cost_matrix(g1: &MolecularGraph, g2: &MolecularGraph) -> CostMatrix {
    let (n1, n2) = (g1.atom_count(), g2.atom_count());
    let mut m = CostMatrix::new(n1 + n2, f64::INFINITY);
    let orders1: Vec<Vec<u8>> = (0..n1).map(|i| incident_orders(g1, i)).collect();
    let orders2: Vec<Vec<u8>> = (0..n2).map(|j| incident_orders(g2, j)).collect();
    for i in 0..n1 {
        for j in 0..n2 {
            let label = (g1.atoms()[i].element != g2.atoms()[j].element) as usize;
            let (a, b) = (&orders1[i], &orders2[j]);
            let edges = a.len().max(b.len()) - common(a, b);
            m.set(i, j, (label + edges) as f64);
        }
        m.set(i, n2 + i, (1 + g1.degree(i)) as f64);
    }
    for j in 0..n2 {
        m.set(n1 + j, j, (1 + g2.degree(j)) as f64);
        for i in 0..n1 {
            m.set(n1 + j, n2 + i, 0.0);
        }
    }
    m
}

/// Cost of the complete edit path that maps node `i` of `g1` to
/// `mapping[i]` in `g2` (or deletes it when `None`).
pub fn edit_path_cost(g1: &MolecularGraph, g2: &MolecularGraph, mapping: &[Option<usize>]) -> u32 {
    let n2 = g2.atom_count();
    let mut image_used = vec![false; n2];
    let mut cost = 0u32;
    for (i, target) in mapping.iter().enumerate() {
        match *target {
            Some(j) => {
                image_used[j] = true;
                cost += (g1.atoms()[i].element != g2.atoms()[j].element) as u32;
            }
            None => cost += 1,
        }
    }
    cost += image_used.iter().filter(|u| !**u).count() as u32;

    let mut matched_g2_edges = 0u32;
    for bond in g1.bonds() {
        match (mapping[bond.a], mapping[bond.b]) {
            (Some(x), Some(y)) => match g2.bond_between(x, y) {
                Some(order) => {
                    matched_g2_edges += 1;
                    cost += (order != bond.order) as u32;
                }
                None => cost += 1,
            },
            _ => cost += 1,
        }
    }
    cost + g2.bond_count() as u32 - matched_g2_edges
}

fn directed(g1: &MolecularGraph, g2: &MolecularGraph) -> u32 {
    let n2 = g2.atom_count();
    let assignment = assignment_solve(&cost_matrix(g1, g2)).expect("diagonal blocks are always feasible");
    let mapping: Vec<Option<usize>> = assignment.columns[..g1.atom_count()]
        .iter()
        .map(|&c| (c < n2).then_some(c))
        .collect();
    edit_path_cost(g1, g2, &mapping)
}

/// Approximate graph edit distance by bipartite assignment.
///
/// Returns the cost of the edit path induced by the optimal node
/// assignment, so the value is an upper bound on the exact distance. Both
/// directions are evaluated and the smaller taken, which makes the result
/// symmetric.
pub fn approx_ged(g1: &MolecularGraph, g2: &MolecularGraph) -> f64 {
    if g1 == g2 {
        return 0.0;
    }
    directed(g1, g2).min(directed(g2, g1)) as f64
}
