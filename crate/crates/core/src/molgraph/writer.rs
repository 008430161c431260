use std::fmt::Write as _;

use super::{Atom, BondOrder, MolecularGraph};

fn implied_order(a: &Atom, b: &Atom) -> BondOrder {
    if a.aromatic && b.aromatic {
        BondOrder::Aromatic
    } else {
        BondOrder::Single
    }
}

fn push_atom(out: &mut String, atom: &Atom) {
    let symbol = atom.element.symbol();
    let lowercase_ok = atom.aromatic && atom.element.can_be_aromatic();
    let plain = atom.charge == 0
        && atom.element.is_organic_subset()
        && (!atom.aromatic || matches!(symbol, "B" | "C" | "N" | "O" | "P" | "S"));
    if plain {
        if atom.aromatic {
            out.push_str(&symbol.to_ascii_lowercase());
        } else {
            out.push_str(symbol);
        }
        return;
    }
    out.push('[');
    if lowercase_ok {
        out.push_str(&symbol.to_ascii_lowercase());
    } else {
        out.push_str(symbol);
    }
    match atom.charge {
        0 => {}
        1 => out.push('+'),
        -1 => out.push('-'),
        c if c > 0 => {
            let _ = write!(out, "+{c}");
        }
        c => {
            let _ = write!(out, "-{}", -(c as i16));
        }
    }
    out.push(']');
}

fn push_bond(out: &mut String, graph: &MolecularGraph, a: usize, b: usize, order: BondOrder) {
    if order != implied_order(&graph.atoms()[a], &graph.atoms()[b]) {
        out.push(order.symbol());
    }
}

fn push_ring_label(out: &mut String, label: u32) {
    if label < 10 {
        out.push(char::from(b'0' + label as u8));
    } else {
        let _ = write!(out, "%{label:02}");
    }
}

/// Writes a SMILES string in the subset accepted by
/// [`parse_smiles`](super::parse_smiles).
///
/// The traversal starts at atom 0 and visits neighbors in index order, so the
/// output is a deterministic function of the graph. It is not canonical:
/// isomorphic graphs with different atom numbering may yield different text.
/// Aromatic atoms without a lowercase spelling are written in brackets with
/// their uppercase symbol, which drops the aromatic atom flag on re-parse.
pub fn write_smiles(graph: &MolecularGraph) -> String {
    let n = graph.atom_count();

    // Pass 1: DFS spanning tree in the same order the writer emits atoms.
    let mut visited = vec![false; n];
    let mut parent = vec![usize::MAX; n];
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); n];
    // Ring bonds, stored on both endpoints as (partner, order).
    let mut ring_bonds: Vec<Vec<(usize, BondOrder)>> = vec![Vec::new(); n];
    let mut preorder = vec![0usize; n];
    let mut counter = 0;

    let mut stack: Vec<(usize, usize)> = vec![(0, 0)];
    visited[0] = true;
    preorder[0] = counter;
    counter += 1;
    while let Some(frame) = stack.last_mut() {
        let (u, next) = *frame;
        let neighbors = graph.neighbors(u);
        if next == neighbors.len() {
            stack.pop();
            continue;
        }
        frame.1 += 1;
        let (v, order) = neighbors[next];
        if v == parent[u] {
            continue;
        }
        if visited[v] {
            // Back edge: record once, from the descendant side.
            if preorder[v] < preorder[u] {
                ring_bonds[v].push((u, order));
                ring_bonds[u].push((v, order));
            }
            continue;
        }
        visited[v] = true;
        parent[v] = u;
        preorder[v] = counter;
        counter += 1;
        children[u].push(v);
        stack.push((v, 0));
    }

    // Pass 2: emit text, allocating ring labels in write order.
    enum Item {
        Atom(usize),
        Text(&'static str),
    }
    let mut out = String::new();
    let mut open_labels: Vec<Option<(usize, usize)>> = Vec::new(); // label -> (opener, partner)
    let mut work = vec![Item::Atom(0)];
    while let Some(item) = work.pop() {
        let u = match item {
            Item::Text(t) => {
                out.push_str(t);
                continue;
            }
            Item::Atom(u) => u,
        };
        if parent[u] != usize::MAX {
            let p = parent[u];
            let order = graph.bond_between(p, u).expect("tree edge");
            push_bond(&mut out, graph, p, u, order);
        }
        push_atom(&mut out, &graph.atoms()[u]);

        let mut rings = ring_bonds[u].clone();
        rings.sort_by_key(|&(v, _)| preorder[v]);
        let mut freed = Vec::new();
        for &(v, order) in &rings {
            if preorder[v] < preorder[u] {
                // Close a ring opened earlier at v.
                let label = open_labels
                    .iter()
                    .position(|slot| *slot == Some((v, u)))
                    .expect("ring was opened");
                push_ring_label(&mut out, label as u32);
                freed.push(label);
            } else {
                if open_labels.is_empty() {
                    open_labels.push(None); // label 0 is never used
                }
                let label = match open_labels.iter().skip(1).position(Option::is_none) {
                    Some(free) => free + 1,
                    None => {
                        open_labels.push(None);
                        open_labels.len() - 1
                    }
                };
                open_labels[label] = Some((u, v));
                push_bond(&mut out, graph, u, v, order);
                push_ring_label(&mut out, label as u32);
            }
        }
        for label in freed {
            open_labels[label] = None;
        }

        let kids = &children[u];
        if let Some((&last, rest)) = kids.split_last() {
            work.push(Item::Atom(last));
            for &child in rest.iter().rev() {
                work.push(Item::Text(")"));
                work.push(Item::Atom(child));
                work.push(Item::Text("("));
            }
        }
    }
    out
}
