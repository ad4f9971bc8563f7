//! SMILES reader for the organic subset plus bracket atoms.
//!
//! Stereo marks (`/`, `\`, `@`) are read and dropped. Atom classes are
//! ignored. `.` is rejected since only single compounds are handled.

use std::collections::BTreeMap;

use super::element::implicit_hydrogens;
use super::{Atom, Bond, BondOrder, Element, MolError, Molecule, ValenceTable};

/// A substructure query atom.
#[derive(Debug, Clone, PartialEq)]
pub struct PatternAtom {
    pub element: Element,
    /// `None` matches either form (`[#n]` queries).
    pub aromatic: Option<bool>,
    /// Lower bound on attached hydrogens (bracketed queries only).
    pub min_h: u8,
    pub charge: Option<i8>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Pattern {
    pub atoms: Vec<PatternAtom>,
    pub bonds: Vec<Bond>,
}

impl Pattern {
    pub fn neighbors(&self, atom: usize) -> impl Iterator<Item = (usize, BondOrder)> + '_ {
        self.bonds.iter().filter_map(move |b| {
            if b.a == atom {
                Some((b.b, b.order))
            } else if b.b == atom {
                Some((b.a, b.order))
            } else {
                None
            }
        })
    }
}

#[derive(Debug, Clone)]
struct ParsedAtom {
    atom: Atom,
    bracket: bool,
    any_aromatic: bool,
}

#[derive(Debug, Clone, Copy)]
struct RawBond {
    a: usize,
    b: usize,
    order: Option<BondOrder>,
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    pattern: bool,
}

/// Parses and validates a SMILES string with the shipped valence table.
pub fn parse(smiles: &str) -> Result<Molecule, MolError> {
    parse_with(smiles, ValenceTable::shipped())
}

pub fn parse_with(smiles: &str, valences: &ValenceTable) -> Result<Molecule, MolError> {
    let (parsed, raw_bonds) = read(smiles, false)?;
    let (atoms, bonds) = resolve(parsed, raw_bonds)?;
    Molecule::new_with(atoms, bonds, valences)
}

/// Parses a substructure query written in SMILES with two extensions:
/// `[#n]` matches element `n` in either aromatic form, and a bracketed H
/// count is a lower bound.
pub fn parse_pattern(text: &str) -> Result<Pattern, MolError> {
    let (parsed, raw_bonds) = read(text, true)?;
    let atoms = parsed
        .iter()
        .map(|p| PatternAtom {
            element: p.atom.element,
            aromatic: if p.any_aromatic {
                None
            } else {
                Some(p.atom.aromatic)
            },
            min_h: if p.bracket { p.atom.explicit_h } else { 0 },
            charge: if p.bracket {
                Some(p.atom.formal_charge)
            } else {
                None
            },
        })
        .collect();
    let bonds = raw_bonds
        .iter()
        .map(|rb| Bond {
            a: rb.a,
            b: rb.b,
            order: rb.order.unwrap_or_else(|| {
                if parsed[rb.a].atom.aromatic && parsed[rb.b].atom.aromatic {
                    BondOrder::Aromatic
                } else {
                    BondOrder::Single
                }
            }),
        })
        .collect();
    Ok(Pattern { atoms, bonds })
}

/// One SMILES per line; blank lines and `#` comments are skipped, and
/// anything after the first whitespace is ignored.
pub fn read_corpus(text: &str) -> Vec<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .filter_map(|l| l.split_whitespace().next())
        .map(str::to_string)
        .collect()
}

fn read(text: &str, pattern: bool) -> Result<(Vec<ParsedAtom>, Vec<RawBond>), MolError> {
    let mut r = Reader {
        bytes: text.as_bytes(),
        pos: 0,
        pattern,
    };
    let mut atoms: Vec<ParsedAtom> = Vec::new();
    let mut bonds: Vec<RawBond> = Vec::new();
    let mut prev: Option<usize> = None;
    let mut branches: Vec<usize> = Vec::new();
    let mut pending: Option<BondOrder> = None;
    let mut rings: BTreeMap<u32, (usize, Option<BondOrder>)> = BTreeMap::new();

    if r.bytes.is_empty() {
        return Err(r.err("empty input"));
    }

    while let Some(c) = r.peek() {
        match c {
            b'(' => {
                let p = prev.ok_or_else(|| r.err("branch before any atom"))?;
                if pending.is_some() {
                    return Err(r.err("bond before branch"));
                }
                branches.push(p);
                r.pos += 1;
            }
            b')' => {
                if pending.is_some() {
                    return Err(r.err("dangling bond at branch close"));
                }
                prev = Some(branches.pop().ok_or_else(|| r.err("unbalanced ')'"))?);
                r.pos += 1;
            }
            b'-' | b'=' | b'#' | b':' | b'/' | b'\\' => {
                if pending.is_some() {
                    return Err(r.err("consecutive bond symbols"));
                }
                if prev.is_none() {
                    return Err(r.err("bond before any atom"));
                }
                pending = Some(match c {
                    b'=' => BondOrder::Double,
                    b'#' => BondOrder::Triple,
                    b':' => BondOrder::Aromatic,
                    _ => BondOrder::Single,
                });
                r.pos += 1;
            }
            b'0'..=b'9' | b'%' => {
                let at = r.pos;
                let digit = r.ring_number()?;
                let p = prev.ok_or_else(|| r.err_at(at, "ring closure before any atom"))?;
                match rings.remove(&digit) {
                    Some((open, open_order)) => {
                        if open == p {
                            return Err(r.err_at(at, "ring closure to the same atom"));
                        }
                        let order = match (open_order, pending) {
                            (Some(x), Some(y)) if x != y => {
                                return Err(r.err_at(at, "conflicting ring-closure bond orders"))
                            }
                            (x, y) => x.or(y),
                        };
                        if bonds
                            .iter()
                            .any(|b| (b.a == open && b.b == p) || (b.a == p && b.b == open))
                        {
                            return Err(r.err_at(at, "ring closure duplicates an existing bond"));
                        }
                        bonds.push(RawBond {
                            a: open,
                            b: p,
                            order,
                        });
                    }
                    None => {
                        rings.insert(digit, (p, pending));
                    }
                }
                pending = None;
            }
            b'.' => return Err(MolError::MultiFragment),
            _ => {
                let atom = r.atom()?;
                let idx = atoms.len();
                atoms.push(atom);
                if let Some(p) = prev {
                    bonds.push(RawBond {
                        a: p,
                        b: idx,
                        order: pending.take(),
                    });
                }
                prev = Some(idx);
            }
        }
    }
    if let Some((&digit, _)) = rings.iter().next() {
        return Err(MolError::UnmatchedRing(digit));
    }
    if !branches.is_empty() {
        return Err(r.err("unclosed branch"));
    }
    if pending.is_some() {
        return Err(r.err("trailing bond symbol"));
    }
    Ok((atoms, bonds))
}

/// Assigns implicit bond orders and hydrogen counts. Implicit bonds between
/// aromatic atoms are aromatic only when they close a ring.
fn resolve(parsed: Vec<ParsedAtom>, raw: Vec<RawBond>) -> Result<(Vec<Atom>, Vec<Bond>), MolError> {
    let provisional: Vec<Bond> = raw
        .iter()
        .map(|rb| Bond {
            a: rb.a,
            b: rb.b,
            order: rb.order.unwrap_or(
                if parsed[rb.a].atom.aromatic && parsed[rb.b].atom.aromatic {
                    BondOrder::Aromatic
                } else {
                    BondOrder::Single
                },
            ),
        })
        .collect();
    let atoms_only: Vec<Atom> = parsed.iter().map(|p| p.atom.clone()).collect();
    let graph = Molecule::raw(atoms_only, provisional)?;
    let mut bonds = graph.bonds().to_vec();
    for (i, bond) in bonds.iter_mut().enumerate() {
        if raw[i].order.is_none() && bond.order == BondOrder::Aromatic && !graph.bond_in_ring(i) {
            bond.order = BondOrder::Single;
        }
    }
    let mut atoms: Vec<Atom> = parsed.iter().map(|p| p.atom.clone()).collect();
    for (i, p) in parsed.iter().enumerate() {
        if !p.bracket {
            atoms[i].explicit_h =
                implicit_hydrogens(p.atom.element, p.atom.aromatic, graph.bond_order_sum(i));
        }
    }
    Ok((atoms, bonds))
}

impl Reader<'_> {
    fn peek(&self) -> Option<u8> {
        self.bytes.get(self.pos).copied()
    }

    fn err(&self, msg: &str) -> MolError {
        self.err_at(self.pos, msg)
    }

    fn err_at(&self, pos: usize, msg: &str) -> MolError {
        MolError::Syntax {
            pos,
            msg: msg.to_string(),
        }
    }

    fn ring_number(&mut self) -> Result<u32, MolError> {
        let c = self.bytes[self.pos];
        if c == b'%' {
            let digits = self.bytes.get(self.pos + 1..self.pos + 3);
            match digits {
                Some(d) if d.iter().all(u8::is_ascii_digit) => {
                    self.pos += 3;
                    Ok(((d[0] - b'0') * 10 + (d[1] - b'0')) as u32)
                }
                _ => Err(self.err("'%' must be followed by two digits")),
            }
        } else {
            self.pos += 1;
            Ok((c - b'0') as u32)
        }
    }

    fn atom(&mut self) -> Result<ParsedAtom, MolError> {
        let c = self.bytes[self.pos];
        if c == b'[' {
            return self.bracket_atom();
        }
        let next = self.bytes.get(self.pos + 1).copied();
        let (element, aromatic, len) = match (c, next) {
            (b'C', Some(b'l')) => (Element::Cl, false, 2),
            (b'B', Some(b'r')) => (Element::Br, false, 2),
            (b'B', _) => (Element::B, false, 1),
            (b'C', _) => (Element::C, false, 1),
            (b'N', _) => (Element::N, false, 1),
            (b'O', _) => (Element::O, false, 1),
            (b'P', _) => (Element::P, false, 1),
            (b'S', _) => (Element::S, false, 1),
            (b'F', _) => (Element::F, false, 1),
            (b'I', _) => (Element::I, false, 1),
            (b'b', _) => (Element::B, true, 1),
            (b'c', _) => (Element::C, true, 1),
            (b'n', _) => (Element::N, true, 1),
            (b'o', _) => (Element::O, true, 1),
            (b'p', _) => (Element::P, true, 1),
            (b's', _) => (Element::S, true, 1),
            _ if c.is_ascii_alphabetic() || c == b'*' => {
                return Err(MolError::UnsupportedAtom((c as char).to_string()))
            }
            _ => return Err(self.err(&format!("unexpected character {:?}", c as char))),
        };
        self.pos += len;
        Ok(ParsedAtom {
            atom: Atom {
                aromatic,
                ..Atom::new(element)
            },
            bracket: false,
            any_aromatic: false,
        })
    }

    fn number(&mut self) -> Option<u32> {
        let start = self.pos;
        while self.peek().is_some_and(|c| c.is_ascii_digit()) {
            self.pos += 1;
        }
        if self.pos == start {
            None
        } else {
            std::str::from_utf8(&self.bytes[start..self.pos])
                .ok()?
                .parse()
                .ok()
        }
    }

    fn bracket_atom(&mut self) -> Result<ParsedAtom, MolError> {
        let open = self.pos;
        self.pos += 1;
        let isotope = match self.number() {
            Some(0) => return Err(self.err("isotope must be positive")),
            Some(n) => Some(u16::try_from(n).map_err(|_| self.err("isotope too large"))?),
            None => None,
        };
        let mut any_aromatic = false;
        let (element, aromatic) = if self.pattern && self.peek() == Some(b'#') {
            self.pos += 1;
            let z = self.number().ok_or_else(|| self.err("expected atomic number"))?;
            any_aromatic = true;
            let e = Element::from_atomic_number(z as u8)
                .ok_or_else(|| MolError::UnsupportedAtom(format!("#{z}")))?;
            (e, false)
        } else {
            self.bracket_symbol()?
        };
        // chirality marks are dropped
        while self.peek() == Some(b'@') {
            self.pos += 1;
            while self
                .peek()
                .is_some_and(|c| c.is_ascii_uppercase() && c != b'H' || c.is_ascii_digit())
            {
                self.pos += 1;
            }
        }
        let mut explicit_h = 0u8;
        if self.peek() == Some(b'H') {
            self.pos += 1;
            explicit_h = match self.number() {
                Some(n) => u8::try_from(n).map_err(|_| self.err("hydrogen count too large"))?,
                None => 1,
            };
        }
        let mut formal_charge = 0i32;
        if let Some(sign @ (b'+' | b'-')) = self.peek() {
            let unit = if sign == b'+' { 1 } else { -1 };
            self.pos += 1;
            if let Some(n) = self.number() {
                formal_charge = unit * n as i32;
            } else {
                formal_charge = unit;
                while self.peek() == Some(sign) {
                    self.pos += 1;
                    formal_charge += unit;
                }
            }
        }
        if self.peek() == Some(b':') {
            self.pos += 1;
            self.number().ok_or_else(|| self.err("expected atom class"))?;
        }
        if self.peek() != Some(b']') {
            return Err(self.err_at(open, "unterminated bracket atom"));
        }
        self.pos += 1;
        Ok(ParsedAtom {
            atom: Atom {
                element,
                aromatic,
                formal_charge: i8::try_from(formal_charge).map_err(|_| self.err("charge out of range"))?,
                explicit_h,
                isotope,
            },
            bracket: true,
            any_aromatic,
        })
    }

    fn bracket_symbol(&mut self) -> Result<(Element, bool), MolError> {
        let c = self.peek().ok_or_else(|| self.err("unterminated bracket atom"))?;
        let next = self.bytes.get(self.pos + 1).copied();
        if c.is_ascii_uppercase() {
            if let Some(n) = next.filter(u8::is_ascii_lowercase) {
                let sym = format!("{}{}", c as char, n as char);
                self.pos += 2;
                return Element::from_symbol(&sym)
                    .map(|e| (e, false))
                    .ok_or(MolError::UnsupportedAtom(sym));
            }
            self.pos += 1;
            let sym = (c as char).to_string();
            return Element::from_symbol(&sym)
                .map(|e| (e, false))
                .ok_or(MolError::UnsupportedAtom(sym));
        }
        if c.is_ascii_lowercase() {
            if let Some(n) = next.filter(u8::is_ascii_lowercase) {
                return Err(MolError::UnsupportedAtom(format!("{}{}", c as char, n as char)));
            }
            self.pos += 1;
            let sym = (c as char).to_ascii_uppercase().to_string();
            return match Element::from_symbol(&sym) {
                Some(e) if e.can_be_aromatic() => Ok((e, true)),
                _ => Err(MolError::UnsupportedAtom((c as char).to_string())),
            };
        }
        if c == b'*' {
            return Err(MolError::UnsupportedAtom("*".into()));
        }
        Err(self.err("expected element symbol"))
    }
}
