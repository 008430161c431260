use std::cmp::Reverse;
use std::collections::BinaryHeap;

use super::GedError;
use crate::molgraph::{Element, MolecularGraph};

pub const DEFAULT_MAX_ATOMS: usize = 8;
const HARD_LIMIT: usize = 16;
const DELETED: u8 = u8::MAX;

struct Node {
    /// Targets in `g2` of the first `mapping.len()` atoms of `g1`.
    mapping: Vec<u8>,
    used: u16,
    cost: u32,
    complete: bool,
}

/// Exact graph edit distance by A* over partial node mappings.
///
/// Atoms of `g1` are mapped in index order to an unused atom of `g2` or
/// deleted; the remaining `g2` atoms are inserted at the end. The heuristic
/// (label-multiset and remaining-edge-count bounds) never overestimates, so
/// the first complete mapping popped is optimal.
pub fn exact_ged_tiny(g1: &MolecularGraph, g2: &MolecularGraph, max_atoms: usize) -> Result<u32, GedError> {
    let max = max_atoms.min(HARD_LIMIT);
    for g in [g1, g2] {
        if g.atom_count() > max {
            return Err(GedError::TooLarge {
                atoms: g.atom_count(),
                max,
            });
        }
    }
    if g1 == g2 {
        return Ok(0);
    }
    let n1 = g1.atom_count();
    let n2 = g2.atom_count();

    let mut arena: Vec<Node> = vec![Node {
        mapping: Vec::new(),
        used: 0,
        cost: 0,
        complete: false,
    }];
    let mut open = BinaryHeap::new();
    open.push((Reverse(heuristic(g1, g2, 0, 0)), 0usize, Reverse(0usize)));
    while let Some((_, depth, Reverse(id))) = open.pop() {
        if arena[id].complete {
            return Ok(arena[id].cost);
        }
        debug_assert_eq!(depth, arena[id].mapping.len());
        let (mapping, used, cost) = (arena[id].mapping.clone(), arena[id].used, arena[id].cost);
        let i = mapping.len();
        if i == n1 {
            let mut extra = 0;
            for j in 0..n2 {
                if used & (1 << j) == 0 {
                    extra += 1;
                }
            }
            extra += g2
                .bonds()
                .iter()
                .filter(|b| used & (1 << b.a) == 0 || used & (1 << b.b) == 0)
                .count() as u32;
            let node = Node {
                mapping,
                used,
                cost: cost + extra,
                complete: true,
            };
            open.push((Reverse(node.cost), n1 + 1, Reverse(arena.len())));
            arena.push(node);
            continue;
        }
        let targets = (0..n2).filter(|&j| used & (1 << j) == 0).map(|j| j as u8).chain([DELETED]);
        for t in targets {
            let mut step = if t == DELETED {
                1
            } else {
                (g1.atoms()[i].element != g2.atoms()[t as usize].element) as u32
            };
            for (p, &tp) in mapping.iter().enumerate() {
                let e1 = g1.bond_between(i, p);
                let e2 = if t != DELETED && tp != DELETED {
                    g2.bond_between(t as usize, tp as usize)
                } else {
                    None
                };
                step += match (e1, e2) {
                    (Some(a), Some(b)) => (a != b) as u32,
                    (None, None) => 0,
                    _ => 1,
                };
            }
            let mut next = mapping.clone();
            next.push(t);
            let next_used = if t == DELETED { used } else { used | (1 << t) };
            let g = cost + step;
            let f = g + heuristic(g1, g2, i + 1, next_used);
            open.push((Reverse(f), i + 1, Reverse(arena.len())));
            arena.push(Node {
                mapping: next,
                used: next_used,
                cost: g,
                complete: false,
            });
        }
    }
    unreachable!("the search always reaches a complete mapping")
}

/// Lower bound on the cost of finishing a mapping whose first `k` atoms of
/// `g1` are placed and whose used `g2` atoms are `used`.
fn heuristic(g1: &MolecularGraph, g2: &MolecularGraph, k: usize, used: u16) -> u32 {
    let mut left: Vec<Element> = g1.atoms()[k..].iter().map(|a| a.element).collect();
    let mut right: Vec<Element> = (0..g2.atom_count())
        .filter(|&j| used & (1 << j) == 0)
        .map(|j| g2.atoms()[j].element)
        .collect();
    left.sort_unstable_by_key(|e| e.atomic_number());
    right.sort_unstable_by_key(|e| e.atomic_number());
    let (mut i, mut j, mut shared) = (0, 0, 0);
    while i < left.len() && j < right.len() {
        match left[i].atomic_number().cmp(&right[j].atomic_number()) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                shared += 1;
                i += 1;
                j += 1;
            }
        }
    }
    let nodes = left.len().max(right.len()) - shared;
    let e1 = g1.bonds().iter().filter(|b| b.a >= k || b.b >= k).count();
    let e2 = g2
        .bonds()
        .iter()
        .filter(|b| used & (1 << b.a) == 0 || used & (1 << b.b) == 0)
        .count();
    (nodes + e1.abs_diff(e2)) as u32
}
