use std::collections::BTreeMap;

use thiserror::Error;

use super::{Atom, Bond, BondOrder, Element, GraphError, MolecularGraph};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SmilesError {
    #[error("empty SMILES string")]
    Empty,
    #[error("unbalanced parenthesis at offset {pos}")]
    UnbalancedParenthesis { pos: usize },
    #[error("empty branch at offset {pos}")]
    EmptyBranch { pos: usize },
    #[error("ring closure {label} is never closed")]
    UnmatchedRingClosure { label: u32 },
    #[error("unknown element '{symbol}' at offset {pos}")]
    UnknownElement { pos: usize, symbol: String },
    #[error("unsupported feature at offset {pos}: {feature}")]
    Unsupported { pos: usize, feature: &'static str },
    #[error("disconnected structures ('.') are not supported")]
    Disconnected,
    #[error("unexpected character {found:?} at offset {pos}")]
    UnexpectedChar { pos: usize, found: char },
    #[error("unexpected end of input inside {context}")]
    UnexpectedEnd { context: &'static str },
    #[error("bond symbol at offset {pos} is not followed by an atom or ring closure")]
    DanglingBond { pos: usize },
    #[error("ring closure {label} specifies conflicting bond orders")]
    RingBondConflict { label: u32 },
    #[error("formal charge out of range at offset {pos}")]
    ChargeOutOfRange { pos: usize },
    #[error("invalid graph: {0}")]
    Graph(#[from] GraphError),
}

struct Parser<'a> {
    text: &'a [u8],
    pos: usize,
    atoms: Vec<Atom>,
    bonds: Vec<Bond>,
    prev: Option<usize>,
    // (atom to return to, atom count when the branch opened)
    branches: Vec<(usize, usize)>,
    pending: Option<(BondOrder, usize)>,
    rings: BTreeMap<u32, (usize, Option<BondOrder>)>,
}

fn default_order(a: &Atom, b: &Atom) -> BondOrder {
    if a.aromatic && b.aromatic {
        BondOrder::Aromatic
    } else {
        BondOrder::Single
    }
}

/// Parses the supported SMILES subset into a heavy-atom graph.
///
/// Accepted: organic-subset and lowercase aromatic atoms, bracket atoms with
/// element, hydrogen count and charge, branches, ring closures (`1`..`9`,
/// `%nn`), and the bond symbols `-`, `=`, `#`, `:`. Stereochemistry,
/// isotopes, atom classes and wildcards are rejected with
/// [`SmilesError::Unsupported`]; `.` is rejected with
/// [`SmilesError::Disconnected`]. Hydrogen counts are discarded.
pub fn parse_smiles(text: &str) -> Result<MolecularGraph, SmilesError> {
    if text.is_empty() {
        return Err(SmilesError::Empty);
    }
    let mut parser = Parser {
        text: text.as_bytes(),
        pos: 0,
        atoms: Vec::new(),
        bonds: Vec::new(),
        prev: None,
        branches: Vec::new(),
        pending: None,
        rings: BTreeMap::new(),
    };
    parser.run()?;
    let graph = MolecularGraph::new(parser.atoms, parser.bonds)?;
    Ok(graph.with_source(text))
}

impl Parser<'_> {
    fn peek(&self) -> Option<u8> {
        self.text.get(self.pos).copied()
    }

    fn unexpected(&self, pos: usize) -> SmilesError {
        // Report the full (possibly multi-byte) character at `pos`.
        let found = std::str::from_utf8(&self.text[pos..])
            .ok()
            .and_then(|s| s.chars().next())
            .unwrap_or(self.text[pos] as char);
        SmilesError::UnexpectedChar { pos, found }
    }

    fn run(&mut self) -> Result<(), SmilesError> {
        while let Some(c) = self.peek() {
            let start = self.pos;
            match c {
                b'(' => {
                    let Some(prev) = self.prev else {
                        return Err(self.unexpected(start));
                    };
                    if self.pending.is_some() {
                        return Err(self.unexpected(start));
                    }
                    self.branches.push((prev, self.atoms.len()));
                    self.pos += 1;
                }
                b')' => {
                    let Some((anchor, opened_at)) = self.branches.pop() else {
                        return Err(SmilesError::UnbalancedParenthesis { pos: start });
                    };
                    if let Some((_, pos)) = self.pending {
                        return Err(SmilesError::DanglingBond { pos });
                    }
                    if self.atoms.len() == opened_at {
                        return Err(SmilesError::EmptyBranch { pos: start });
                    }
                    self.prev = Some(anchor);
                    self.pos += 1;
                }
                b'-' | b'=' | b'#' | b':' => {
                    if self.prev.is_none() || self.pending.is_some() {
                        return Err(self.unexpected(start));
                    }
                    let order = match c {
                        b'-' => BondOrder::Single,
                        b'=' => BondOrder::Double,
                        b'#' => BondOrder::Triple,
                        _ => BondOrder::Aromatic,
                    };
                    self.pending = Some((order, start));
                    self.pos += 1;
                }
                b'$' => {
                    return Err(SmilesError::Unsupported {
                        pos: start,
                        feature: "quadruple bond",
                    })
                }
                b'/' | b'\\' => {
                    return Err(SmilesError::Unsupported {
                        pos: start,
                        feature: "directional bond (stereochemistry)",
                    })
                }
                b'@' => {
                    return Err(SmilesError::Unsupported {
                        pos: start,
                        feature: "chirality",
                    })
                }
                b'*' => {
                    return Err(SmilesError::Unsupported {
                        pos: start,
                        feature: "wildcard atom",
                    })
                }
                b'.' => return Err(SmilesError::Disconnected),
                b'0'..=b'9' | b'%' => self.ring_closure()?,
                b'[' => {
                    let atom = self.bracket_atom()?;
                    self.add_atom(atom)?;
                }
                _ => {
                    let atom = self.organic_atom()?;
                    self.add_atom(atom)?;
                }
            }
        }
        if let Some((_, pos)) = self.pending {
            return Err(SmilesError::DanglingBond { pos });
        }
        if !self.branches.is_empty() {
            return Err(SmilesError::UnbalancedParenthesis {
                pos: self.text.len(),
            });
        }
        if let Some((&label, _)) = self.rings.iter().next() {
            return Err(SmilesError::UnmatchedRingClosure { label });
        }
        Ok(())
    }

    fn add_atom(&mut self, atom: Atom) -> Result<(), SmilesError> {
        let idx = self.atoms.len();
        self.atoms.push(atom);
        if let Some(prev) = self.prev {
            let order = match self.pending.take() {
                Some((order, _)) => order,
                None => default_order(&self.atoms[prev], &atom),
            };
            self.bonds.push(Bond {
                a: prev,
                b: idx,
                order,
            });
        }
        self.prev = Some(idx);
        Ok(())
    }

    fn ring_closure(&mut self) -> Result<(), SmilesError> {
        let start = self.pos;
        let Some(current) = self.prev else {
            return Err(self.unexpected(start));
        };
        let label = if self.text[start] == b'%' {
            let digits = self.text.get(start + 1..start + 3);
            match digits {
                Some(d) if d.iter().all(u8::is_ascii_digit) => {
                    self.pos += 3;
                    ((d[0] - b'0') * 10 + (d[1] - b'0')) as u32
                }
                _ => {
                    return Err(match self.text.get(start + 1) {
                        None => SmilesError::UnexpectedEnd {
                            context: "ring closure",
                        },
                        Some(_) => self.unexpected(start),
                    })
                }
            }
        } else {
            self.pos += 1;
            (self.text[start] - b'0') as u32
        };
        let bond = self.pending.take().map(|(order, _)| order);
        match self.rings.remove(&label) {
            Some((partner, opened_with)) => {
                let order = match (opened_with, bond) {
                    (Some(a), Some(b)) if a != b => {
                        return Err(SmilesError::RingBondConflict { label })
                    }
                    (Some(a), _) | (None, Some(a)) => a,
                    (None, None) => default_order(&self.atoms[partner], &self.atoms[current]),
                };
                self.bonds.push(Bond {
                    a: partner,
                    b: current,
                    order,
                });
            }
            None => {
                self.rings.insert(label, (current, bond));
            }
        }
        Ok(())
    }

    fn organic_atom(&mut self) -> Result<Atom, SmilesError> {
        let start = self.pos;
        let c = self.text[start];
        let next = self.text.get(start + 1).copied();
        let (symbol, aromatic, len) = match (c, next) {
            (b'C', Some(b'l')) => ("Cl", false, 2),
            (b'B', Some(b'r')) => ("Br", false, 2),
            (b'B', _) => ("B", false, 1),
            (b'C', _) => ("C", false, 1),
            (b'N', _) => ("N", false, 1),
            (b'O', _) => ("O", false, 1),
            (b'P', _) => ("P", false, 1),
            (b'S', _) => ("S", false, 1),
            (b'F', _) => ("F", false, 1),
            (b'I', _) => ("I", false, 1),
            (b'b', _) => ("B", true, 1),
            (b'c', _) => ("C", true, 1),
            (b'n', _) => ("N", true, 1),
            (b'o', _) => ("O", true, 1),
            (b'p', _) => ("P", true, 1),
            (b's', _) => ("S", true, 1),
            (c, _) if c.is_ascii_alphabetic() => {
                return Err(SmilesError::UnknownElement {
                    pos: start,
                    symbol: (c as char).to_string(),
                })
            }
            _ => return Err(self.unexpected(start)),
        };
        self.pos += len;
        Ok(Atom {
            element: Element::from_symbol(symbol).expect("organic subset symbol"),
            charge: 0,
            aromatic,
        })
    }

    fn bracket_atom(&mut self) -> Result<Atom, SmilesError> {
        self.pos += 1;
        let end = || SmilesError::UnexpectedEnd {
            context: "bracket atom",
        };

        if self.peek().is_some_and(|c| c.is_ascii_digit()) {
            return Err(SmilesError::Unsupported {
                pos: self.pos,
                feature: "isotope",
            });
        }

        let sym_start = self.pos;
        let first = self.peek().ok_or_else(end)?;
        let (element, aromatic) = if first == b'*' {
            return Err(SmilesError::Unsupported {
                pos: sym_start,
                feature: "wildcard atom",
            });
        } else if first.is_ascii_lowercase() {
            // Aromatic bracket symbols: two-letter forms first.
            let two = self.text.get(sym_start..sym_start + 2);
            let (symbol, len) = match two {
                Some(b"se") => ("Se", 2),
                Some(b"as") => ("As", 2),
                Some(b"te") => ("Te", 2),
                _ => match first {
                    b'b' => ("B", 1),
                    b'c' => ("C", 1),
                    b'n' => ("N", 1),
                    b'o' => ("O", 1),
                    b'p' => ("P", 1),
                    b's' => ("S", 1),
                    _ => {
                        return Err(SmilesError::UnknownElement {
                            pos: sym_start,
                            symbol: (first as char).to_string(),
                        })
                    }
                },
            };
            self.pos += len;
            (Element::from_symbol(symbol).expect("aromatic symbol"), true)
        } else if first.is_ascii_uppercase() {
            let second = self.text.get(sym_start + 1).copied();
            let two = second
                .filter(u8::is_ascii_lowercase)
                .and_then(|s| Element::from_symbol(std::str::from_utf8(&[first, s]).ok()?));
            match two {
                Some(e) => {
                    self.pos += 2;
                    (e, false)
                }
                None => {
                    let symbol = (first as char).to_string();
                    match Element::from_symbol(&symbol) {
                        Some(e) => {
                            self.pos += 1;
                            (e, false)
                        }
                        None => {
                            let mut symbol = symbol;
                            if let Some(s) = second.filter(u8::is_ascii_lowercase) {
                                symbol.push(s as char);
                            }
                            return Err(SmilesError::UnknownElement {
                                pos: sym_start,
                                symbol,
                            });
                        }
                    }
                }
            }
        } else if first == b']' {
            return Err(SmilesError::UnexpectedChar {
                pos: sym_start,
                found: ']',
            });
        } else {
            return Err(self.unexpected(sym_start));
        };

        if self.peek() == Some(b'@') {
            return Err(SmilesError::Unsupported {
                pos: self.pos,
                feature: "chirality",
            });
        }

        if self.peek() == Some(b'H') {
            self.pos += 1;
            while self.peek().is_some_and(|c| c.is_ascii_digit()) {
                self.pos += 1;
            }
        }

        let mut charge: i32 = 0;
        if let Some(sign @ (b'+' | b'-')) = self.peek() {
            let charge_pos = self.pos;
            let unit = if sign == b'+' { 1 } else { -1 };
            self.pos += 1;
            if self.peek().is_some_and(|c| c.is_ascii_digit()) {
                let mut magnitude: i32 = 0;
                while let Some(d) = self.peek().filter(u8::is_ascii_digit) {
                    magnitude = magnitude.saturating_mul(10).saturating_add((d - b'0') as i32);
                    self.pos += 1;
                }
                charge = unit * magnitude;
            } else {
                charge = unit;
                while self.peek() == Some(sign) {
                    charge += unit;
                    self.pos += 1;
                }
            }
            if !(-15..=15).contains(&charge) {
                return Err(SmilesError::ChargeOutOfRange { pos: charge_pos });
            }
        }

        match self.peek() {
            Some(b']') => self.pos += 1,
            Some(b':') => {
                return Err(SmilesError::Unsupported {
                    pos: self.pos,
                    feature: "atom class",
                })
            }
            Some(b'@') => {
                return Err(SmilesError::Unsupported {
                    pos: self.pos,
                    feature: "chirality",
                })
            }
            Some(_) => return Err(self.unexpected(self.pos)),
            None => return Err(end()),
        }

        Ok(Atom {
            element,
            charge: charge as i8,
            aromatic,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bonds(g: &MolecularGraph) -> Vec<(usize, usize, BondOrder)> {
        let mut out: Vec<_> = g
            .bonds()
            .iter()
            .map(|b| (b.a.min(b.b), b.a.max(b.b), b.order))
            .collect();
        out.sort();
        out
    }

    fn symbols(g: &MolecularGraph) -> Vec<&'static str> {
        g.atoms().iter().map(|a| a.element.symbol()).collect()
    }

    #[test]
    fn ethanol() {
        let g = parse_smiles("CCO").unwrap();
        assert_eq!(symbols(&g), ["C", "C", "O"]);
        assert_eq!(
            bonds(&g),
            [(0, 1, BondOrder::Single), (1, 2, BondOrder::Single)]
        );
        assert_eq!(g.source(), Some("CCO"));
    }

    #[test]
    fn cyclopropane() {
        let g = parse_smiles("C1CC1").unwrap();
        assert_eq!(g.atom_count(), 3);
        assert_eq!(
            bonds(&g),
            [
                (0, 1, BondOrder::Single),
                (0, 2, BondOrder::Single),
                (1, 2, BondOrder::Single)
            ]
        );
    }

    #[test]
    fn aromatic_ring_and_explicit_orders() {
        let g = parse_smiles("c1ccccc1-C#N").unwrap();
        assert_eq!(g.atom_count(), 8);
        let b = bonds(&g);
        assert_eq!(
            b.iter().filter(|x| x.2 == BondOrder::Aromatic).count(),
            6
        );
        assert!(b.contains(&(0, 6, BondOrder::Single)) || b.contains(&(5, 6, BondOrder::Single)));
        assert!(b.contains(&(6, 7, BondOrder::Triple)));
        assert!(g.atoms()[0].aromatic && !g.atoms()[6].aromatic);
    }

    #[test]
    fn branches_brackets_and_percent_rings() {
        let g = parse_smiles("CC(=O)[O-]").unwrap();
        assert_eq!(symbols(&g), ["C", "C", "O", "O"]);
        assert_eq!(g.atoms()[3].charge, -1);
        assert_eq!(g.bond_between(1, 2), Some(BondOrder::Double));
        assert_eq!(g.bond_between(1, 3), Some(BondOrder::Single));

        let g = parse_smiles("C%12CC%12").unwrap();
        assert_eq!(g.bond_count(), 3);

        let g = parse_smiles("[NH4+]").unwrap();
        assert_eq!(g.atoms()[0].charge, 1);
        let g = parse_smiles("[Fe++]").unwrap();
        assert_eq!(g.atoms()[0].charge, 2);
        let g = parse_smiles("c1cc[nH]c1").unwrap();
        assert!(g.atoms().iter().all(|a| a.aromatic));
        let g = parse_smiles("ClCBr").unwrap();
        assert_eq!(symbols(&g), ["Cl", "C", "Br"]);
        let g = parse_smiles("C1CC=1").unwrap();
        assert_eq!(g.bond_between(0, 2), Some(BondOrder::Double));
    }

    #[test]
    fn malformed_inputs() {
        assert_eq!(
            parse_smiles("C("),
            Err(SmilesError::UnbalancedParenthesis { pos: 2 })
        );
        assert_eq!(
            parse_smiles("C)C"),
            Err(SmilesError::UnbalancedParenthesis { pos: 1 })
        );
        assert_eq!(parse_smiles(""), Err(SmilesError::Empty));
        assert_eq!(
            parse_smiles("C1CC"),
            Err(SmilesError::UnmatchedRingClosure { label: 1 })
        );
        assert!(matches!(
            parse_smiles("CXC"),
            Err(SmilesError::UnknownElement { pos: 1, .. })
        ));
        assert!(matches!(
            parse_smiles("[Xx]"),
            Err(SmilesError::UnknownElement { .. })
        ));
        assert_eq!(parse_smiles("CC.O"), Err(SmilesError::Disconnected));
        assert!(matches!(parse_smiles("C()C"), Err(SmilesError::EmptyBranch { .. })));
        assert!(matches!(parse_smiles("CC="), Err(SmilesError::DanglingBond { .. })));
        assert!(matches!(parse_smiles("C=1CC-1"), Err(SmilesError::RingBondConflict { label: 1 })));
        assert!(matches!(parse_smiles("C11"), Err(SmilesError::Graph(GraphError::SelfLoop { .. }))));
        assert!(matches!(parse_smiles("C1C1"), Err(SmilesError::Graph(GraphError::DuplicateBond { .. }))));
        assert!(matches!(parse_smiles("[C"), Err(SmilesError::UnexpectedEnd { .. })));
    }

    #[test]
    fn unsupported_features_are_distinct() {
        for s in ["F/C=C/F", "F\\C=C\\F", "N[C@@H](C)C(=O)O", "[13CH4]", "[CH3:1]C", "*C"] {
            assert!(
                matches!(parse_smiles(s), Err(SmilesError::Unsupported { .. })),
                "{s}"
            );
        }
    }
}
