//! Molecular graphs: SMILES parsing, canonical strings, scaffolds and local edits.

mod canon;
mod element;
mod mutate;
mod scaffold;
mod smiles;
mod valence;

use std::sync::OnceLock;

pub use canon::{canonical_ranks, write_smiles_with_ranks};
pub use element::{implicit_hydrogens, Element};
pub use mutate::{mutate, neighbors, EditOp};
pub use scaffold::{scaffold_atoms, scaffold_of, Scaffold};
pub use smiles::{parse, parse_pattern, parse_with, read_corpus, Pattern, PatternAtom};
pub use valence::ValenceTable;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MolError {
    #[error("syntax error at {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("unmatched ring closure {0}")]
    UnmatchedRing(u32),
    #[error("valence exceeded on atom {atom} ({element}): {used} > {max}")]
    Valence {
        atom: usize,
        element: Element,
        used: u32,
        max: u32,
    },
    #[error("multi-fragment input is not supported")]
    MultiFragment,
    #[error("unsupported atom {0:?}")]
    UnsupportedAtom(String),
    #[error("aromatic atom {0} is not in a ring")]
    Aromaticity(usize),
    #[error("no site where the edit applies")]
    NoApplicableSite,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BondOrder {
    Single,
    Double,
    Triple,
    Aromatic,
}

impl BondOrder {
    /// Contribution to an atom's valence; aromatic bonds count as 1.
    pub fn valence(self) -> u32 {
        match self {
            BondOrder::Single | BondOrder::Aromatic => 1,
            BondOrder::Double => 2,
            BondOrder::Triple => 3,
        }
    }

    pub(crate) fn code(self) -> u8 {
        match self {
            BondOrder::Single => 1,
            BondOrder::Double => 2,
            BondOrder::Triple => 3,
            BondOrder::Aromatic => 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Atom {
    pub element: Element,
    pub aromatic: bool,
    pub formal_charge: i8,
    /// Number of attached hydrogens (implicit or bracketed).
    pub explicit_h: u8,
    pub isotope: Option<u16>,
}

impl Atom {
    pub fn new(element: Element) -> Self {
        Atom {
            element,
            aromatic: false,
            formal_charge: 0,
            explicit_h: 0,
            isotope: None,
        }
    }

    /// True when the atom's hydrogen count is recomputed from the default
    /// valence model after an edit.
    pub(crate) fn follows_default_valence(&self) -> bool {
        self.formal_charge == 0 && self.isotope.is_none()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Bond {
    pub a: usize,
    pub b: usize,
    pub order: BondOrder,
}

impl Bond {
    pub fn other(&self, atom: usize) -> usize {
        if self.a == atom {
            self.b
        } else {
            self.a
        }
    }
}

/// A connected molecular graph with a lazily computed canonical SMILES.
///
/// Graphs built with [`Molecule::new`] are validated; [`Molecule::raw`]
/// skips validation and is used for substructure patterns and fragments.
#[derive(Debug, Clone)]
pub struct Molecule {
    atoms: Vec<Atom>,
    bonds: Vec<Bond>,
    adjacency: Vec<Vec<(usize, usize)>>,
    ring_bond: Vec<bool>,
    canonical: OnceLock<String>,
}

impl PartialEq for Molecule {
    fn eq(&self, other: &Self) -> bool {
        self.canonical() == other.canonical()
    }
}

impl Eq for Molecule {}

impl Molecule {
    /// Builds and validates a molecule against the shipped valence table.
    pub fn new(atoms: Vec<Atom>, bonds: Vec<Bond>) -> Result<Molecule, MolError> {
        Molecule::new_with(atoms, bonds, ValenceTable::shipped())
    }

    pub fn new_with(
        atoms: Vec<Atom>,
        bonds: Vec<Bond>,
        valences: &ValenceTable,
    ) -> Result<Molecule, MolError> {
        let mol = Molecule::raw(atoms, bonds)?;
        mol.validate(valences)?;
        Ok(mol)
    }

    /// Builds the graph without chemistry checks. Bond endpoints must still be
    /// in range, distinct, and unique per pair.
    pub fn raw(atoms: Vec<Atom>, bonds: Vec<Bond>) -> Result<Molecule, MolError> {
        let mut adjacency = vec![Vec::new(); atoms.len()];
        for (i, bond) in bonds.iter().enumerate() {
            if bond.a == bond.b || bond.a >= atoms.len() || bond.b >= atoms.len() {
                return Err(MolError::Syntax {
                    pos: 0,
                    msg: format!("bad bond endpoints {}-{}", bond.a, bond.b),
                });
            }
            if adjacency[bond.a].iter().any(|&(n, _)| n == bond.b) {
                return Err(MolError::Syntax {
                    pos: 0,
                    msg: format!("duplicate bond {}-{}", bond.a, bond.b),
                });
            }
            adjacency[bond.a].push((bond.b, i));
            adjacency[bond.b].push((bond.a, i));
        }
        let ring_bond = ring_bonds(atoms.len(), &bonds, &adjacency);
        Ok(Molecule {
            atoms,
            bonds,
            adjacency,
            ring_bond,
            canonical: OnceLock::new(),
        })
    }

    /// The empty graph (acyclic molecules have an empty scaffold).
    pub fn empty() -> Molecule {
        Molecule::raw(Vec::new(), Vec::new()).expect("empty graph")
    }

    fn validate(&self, valences: &ValenceTable) -> Result<(), MolError> {
        if self.atoms.is_empty() {
            return Err(MolError::Syntax {
                pos: 0,
                msg: "empty molecule".into(),
            });
        }
        if self.fragment_count() > 1 {
            return Err(MolError::MultiFragment);
        }
        for (i, atom) in self.atoms.iter().enumerate() {
            let used = self.bond_order_sum(i) + atom.explicit_h as u32;
            let max = valences.max_valence(atom.element) + atom.formal_charge.unsigned_abs() as u32;
            if used > max {
                return Err(MolError::Valence {
                    atom: i,
                    element: atom.element,
                    used,
                    max,
                });
            }
            if atom.aromatic && !self.atom_in_ring(i) {
                return Err(MolError::Aromaticity(i));
            }
        }
        Ok(())
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

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// `(neighbor, bond index)` pairs.
    pub fn neighbors(&self, atom: usize) -> &[(usize, usize)] {
        &self.adjacency[atom]
    }

    pub fn degree(&self, atom: usize) -> usize {
        self.adjacency[atom].len()
    }

    pub fn bond_between(&self, a: usize, b: usize) -> Option<&Bond> {
        self.adjacency[a]
            .iter()
            .find(|&&(n, _)| n == b)
            .map(|&(_, bi)| &self.bonds[bi])
    }

    pub fn bond_order_sum(&self, atom: usize) -> u32 {
        self.adjacency[atom]
            .iter()
            .map(|&(_, bi)| self.bonds[bi].order.valence())
            .sum()
    }

    pub fn bond_in_ring(&self, bond: usize) -> bool {
        self.ring_bond[bond]
    }

    pub fn atom_in_ring(&self, atom: usize) -> bool {
        self.adjacency[atom].iter().any(|&(_, bi)| self.ring_bond[bi])
    }

    /// Cyclomatic number |bonds| - |atoms| + components.
    pub fn ring_count(&self) -> usize {
        if self.atoms.is_empty() {
            return 0;
        }
        self.bonds.len() + self.fragment_count() - self.atoms.len()
    }

    pub fn heavy_atom_count(&self) -> usize {
        self.atoms.len()
    }

    pub fn fragment_count(&self) -> usize {
        self.components().len()
    }

    /// Connected components as sorted atom-index lists.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let mut seen = vec![false; self.atoms.len()];
        let mut out = Vec::new();
        for start in 0..self.atoms.len() {
            if seen[start] {
                continue;
            }
            let mut stack = vec![start];
            seen[start] = true;
            let mut comp = Vec::new();
            while let Some(v) = stack.pop() {
                comp.push(v);
                for &(n, _) in &self.adjacency[v] {
                    if !seen[n] {
                        seen[n] = true;
                        stack.push(n);
                    }
                }
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }

    /// Canonical SMILES; cached after the first call. Disconnected raw graphs
    /// yield sorted component strings joined by `.`.
    pub fn canonical(&self) -> &str {
        self.canonical.get_or_init(|| canon::canonical_smiles(self))
    }

    /// Induced subgraph on `keep` (in the given order). Hydrogen counts of
    /// kept atoms grow by the order of every dropped bond so that fragments
    /// read as capped groups.
    pub fn induced_subgraph(&self, keep: &[usize]) -> Molecule {
        let mut index = vec![usize::MAX; self.atoms.len()];
        for (new, &old) in keep.iter().enumerate() {
            index[old] = new;
        }
        let mut atoms: Vec<Atom> = keep.iter().map(|&i| self.atoms[i].clone()).collect();
        let mut bonds = Vec::new();
        for bond in &self.bonds {
            let (ia, ib) = (index[bond.a], index[bond.b]);
            match (ia != usize::MAX, ib != usize::MAX) {
                (true, true) => bonds.push(Bond {
                    a: ia,
                    b: ib,
                    order: bond.order,
                }),
                (true, false) => atoms[ia].explicit_h += bond.order.valence() as u8,
                (false, true) => atoms[ib].explicit_h += bond.order.valence() as u8,
                (false, false) => {}
            }
        }
        Molecule::raw(atoms, bonds).expect("subgraph of a valid graph")
    }

    /// Relabels atoms: atom `i` of the result is atom `perm[i]` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Molecule {
        assert_eq!(perm.len(), self.atoms.len());
        let mut inverse = vec![0; perm.len()];
        for (new, &old) in perm.iter().enumerate() {
            inverse[old] = new;
        }
        let atoms = perm.iter().map(|&old| self.atoms[old].clone()).collect();
        let bonds = self
            .bonds
            .iter()
            .rev()
            .map(|b| Bond {
                a: inverse[b.b],
                b: inverse[b.a],
                order: b.order,
            })
            .collect();
        Molecule::raw(atoms, bonds).expect("permutation of a valid graph")
    }

    /// Label-preserving isomorphism check through canonical strings.
    pub fn is_isomorphic(&self, other: &Molecule) -> bool {
        self.atoms.len() == other.atoms.len()
            && self.bonds.len() == other.bonds.len()
            && self.canonical() == other.canonical()
    }
}

impl std::fmt::Display for Molecule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.canonical())
    }
}

/// Marks bonds lying on a cycle (every non-bridge bond).
fn ring_bonds(n: usize, bonds: &[Bond], adjacency: &[Vec<(usize, usize)>]) -> Vec<bool> {
    let mut disc = vec![usize::MAX; n];
    let mut low = vec![0usize; n];
    let mut is_bridge = vec![false; bonds.len()];
    let mut timer = 0;
    for root in 0..n {
        if disc[root] != usize::MAX {
            continue;
        }
        // (vertex, parent edge, next neighbor position)
        let mut stack: Vec<(usize, usize, usize)> = vec![(root, usize::MAX, 0)];
        disc[root] = timer;
        low[root] = timer;
        timer += 1;
        while let Some(&mut (v, parent_edge, ref mut pos)) = stack.last_mut() {
            if *pos < adjacency[v].len() {
                let (w, e) = adjacency[v][*pos];
                *pos += 1;
                if e == parent_edge {
                    continue;
                }
                if disc[w] == usize::MAX {
                    disc[w] = timer;
                    low[w] = timer;
                    timer += 1;
                    stack.push((w, e, 0));
                } else {
                    low[v] = low[v].min(disc[w]);
                }
            } else {
                stack.pop();
                if let Some(&(p, _, _)) = stack.last() {
                    low[p] = low[p].min(low[v]);
                    if low[v] > disc[p] {
                        is_bridge[parent_edge] = true;
                    }
                }
            }
        }
    }
    is_bridge.into_iter().map(|b| !b).collect()
}
