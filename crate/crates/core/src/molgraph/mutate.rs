use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::element::implicit_hydrogens;
use super::{canonical_ranks, Atom, Bond, BondOrder, Element, MolError, Molecule};

/// Single local edit operators. `None` element choices are drawn from
/// [`EditOp::PALETTE`] by the seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum EditOp {
    SubstituteAtom(Option<Element>),
    AppendTerminalAtom(Option<Element>),
    DeleteTerminalAtom,
    ChangeBondOrder,
}

impl EditOp {
    pub const PALETTE: [Element; 7] = [
        Element::C,
        Element::N,
        Element::O,
        Element::F,
        Element::Cl,
        Element::Br,
        Element::S,
    ];

    pub const KINDS: [EditOp; 4] = [
        EditOp::SubstituteAtom(None),
        EditOp::AppendTerminalAtom(None),
        EditOp::DeleteTerminalAtom,
        EditOp::ChangeBondOrder,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            EditOp::SubstituteAtom(_) => "substitute_atom",
            EditOp::AppendTerminalAtom(_) => "append_terminal_atom",
            EditOp::DeleteTerminalAtom => "delete_terminal_atom",
            EditOp::ChangeBondOrder => "change_bond_order",
        }
    }

    pub fn from_name(name: &str) -> Option<EditOp> {
        EditOp::KINDS.iter().copied().find(|k| k.name() == name)
    }
}

#[derive(Debug, Clone, Copy)]
enum Edit {
    Substitute { atom: usize, element: Element },
    Append { atom: usize, element: Element },
    Delete { atom: usize },
    Rebond { bond: usize, order: BondOrder },
}

/// Applies one local edit chosen by `seed` among all sites where `op`
/// applies. Sites are enumerated in canonical atom order, so the result
/// depends only on the molecule, not on how it was written.
pub fn mutate(m: &Molecule, op: EditOp, seed: u64) -> Result<Molecule, MolError> {
    let canon = canonical_order(m);
    let edits = applicable(&canon, op);
    if edits.is_empty() {
        return Err(MolError::NoApplicableSite);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pick = edits[rng.random_range(0..edits.len())];
    apply(&canon, pick)
}

/// Every distinct molecule one edit away from `m` (excluding `m`), sorted by
/// canonical string.
pub fn neighbors(m: &Molecule) -> Vec<Molecule> {
    let canon = canonical_order(m);
    let mut out: BTreeMap<String, Molecule> = BTreeMap::new();
    for kind in EditOp::KINDS {
        for edit in applicable(&canon, kind) {
            if let Ok(next) = apply(&canon, edit) {
                if next.canonical() != m.canonical() {
                    out.entry(next.canonical().to_string()).or_insert(next);
                }
            }
        }
    }
    out.into_values().collect()
}

fn canonical_order(m: &Molecule) -> Molecule {
    let ranks = canonical_ranks(m);
    let mut perm: Vec<usize> = (0..m.atom_count()).collect();
    perm.sort_by_key(|&i| ranks[i]);
    m.permuted(&perm)
}

fn palette(choice: Option<Element>) -> Vec<Element> {
    match choice {
        Some(e) => vec![e],
        None => EditOp::PALETTE.to_vec(),
    }
}

fn max_default_valence(e: Element) -> u32 {
    *e.default_valences().last().expect("non-empty") as u32
}

fn applicable(m: &Molecule, op: EditOp) -> Vec<Edit> {
    let mut out = Vec::new();
    match op {
        EditOp::SubstituteAtom(choice) => {
            for (i, atom) in m.atoms().iter().enumerate() {
                if !atom.follows_default_valence() {
                    continue;
                }
                let bond_sum = m.bond_order_sum(i);
                for element in palette(choice) {
                    if element == atom.element {
                        continue;
                    }
                    let ok = if atom.aromatic {
                        m.degree(i) == 2
                            && matches!(atom.element, Element::C | Element::N)
                            && matches!(element, Element::C | Element::N)
                    } else {
                        max_default_valence(element) >= bond_sum
                    };
                    if ok {
                        out.push(Edit::Substitute { atom: i, element });
                    }
                }
            }
        }
        EditOp::AppendTerminalAtom(choice) => {
            for (i, atom) in m.atoms().iter().enumerate() {
                if atom.explicit_h == 0 {
                    continue;
                }
                for element in palette(choice) {
                    out.push(Edit::Append { atom: i, element });
                }
            }
        }
        EditOp::DeleteTerminalAtom => {
            if m.atom_count() > 1 {
                for i in 0..m.atom_count() {
                    if m.degree(i) == 1 {
                        out.push(Edit::Delete { atom: i });
                    }
                }
            }
        }
        EditOp::ChangeBondOrder => {
            for (bi, bond) in m.bonds().iter().enumerate() {
                let (a, b) = (&m.atoms()[bond.a], &m.atoms()[bond.b]);
                let can_raise = a.explicit_h >= 1 && b.explicit_h >= 1;
                match bond.order {
                    BondOrder::Aromatic => {}
                    BondOrder::Single if can_raise && !a.aromatic && !b.aromatic => {
                        out.push(Edit::Rebond {
                            bond: bi,
                            order: BondOrder::Double,
                        })
                    }
                    BondOrder::Single => {}
                    BondOrder::Double => {
                        out.push(Edit::Rebond {
                            bond: bi,
                            order: BondOrder::Single,
                        });
                        if can_raise {
                            out.push(Edit::Rebond {
                                bond: bi,
                                order: BondOrder::Triple,
                            });
                        }
                    }
                    BondOrder::Triple => out.push(Edit::Rebond {
                        bond: bi,
                        order: BondOrder::Double,
                    }),
                }
            }
        }
    }
    out
}

/// Hydrogen count after the atom's bond-order sum changes from `old_sum`.
fn rehydrogenate(atom: &Atom, old_sum: u32, new_sum: u32) -> u8 {
    if atom.follows_default_valence() {
        implicit_hydrogens(atom.element, atom.aromatic, new_sum)
    } else {
        (atom.explicit_h as i64 + old_sum as i64 - new_sum as i64).max(0) as u8
    }
}

fn apply(m: &Molecule, edit: Edit) -> Result<Molecule, MolError> {
    let mut atoms = m.atoms().to_vec();
    let mut bonds = m.bonds().to_vec();
    match edit {
        Edit::Substitute { atom, element } => {
            let sum = m.bond_order_sum(atom);
            atoms[atom].element = element;
            atoms[atom].explicit_h = implicit_hydrogens(element, atoms[atom].aromatic, sum);
        }
        Edit::Append { atom, element } => {
            atoms[atom].explicit_h -= 1;
            let idx = atoms.len();
            atoms.push(Atom {
                explicit_h: implicit_hydrogens(element, false, 1),
                ..Atom::new(element)
            });
            bonds.push(Bond {
                a: atom,
                b: idx,
                order: BondOrder::Single,
            });
        }
        Edit::Delete { atom } => {
            let (nbr, bi) = m.neighbors(atom)[0];
            let old_sum = m.bond_order_sum(nbr);
            let new_sum = old_sum - m.bonds()[bi].order.valence();
            atoms[nbr].explicit_h = rehydrogenate(&atoms[nbr], old_sum, new_sum);
            atoms.remove(atom);
            bonds.remove(bi);
            for b in &mut bonds {
                if b.a > atom {
                    b.a -= 1;
                }
                if b.b > atom {
                    b.b -= 1;
                }
            }
        }
        Edit::Rebond { bond, order } => {
            let old = bonds[bond].order.valence();
            let new = order.valence();
            for end in [bonds[bond].a, bonds[bond].b] {
                let old_sum = m.bond_order_sum(end);
                let new_sum = old_sum + new - old;
                atoms[end].explicit_h = rehydrogenate(&atoms[end], old_sum, new_sum);
            }
            bonds[bond].order = order;
        }
    }
    Molecule::new(atoms, bonds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::molgraph::parse;

    #[test]
    fn delete_terminal_from_ethanol() {
        let m = parse("CCO").unwrap();
        let outcomes: std::collections::BTreeSet<String> = (0..32)
            .map(|seed| mutate(&m, EditOp::DeleteTerminalAtom, seed).unwrap().canonical().to_string())
            .collect();
        assert!(outcomes.contains("CC"));
        assert!(outcomes.contains("CO"));
        assert_eq!(outcomes.len(), 2);
    }

    #[test]
    fn append_fluorine_to_methane() {
        let m = parse("C").unwrap();
        let out = mutate(&m, EditOp::AppendTerminalAtom(Some(Element::F)), 0).unwrap();
        assert_eq!(out.canonical(), "CF");
    }

    #[test]
    fn raise_bond_order() {
        let m = parse("CC").unwrap();
        let out = mutate(&m, EditOp::ChangeBondOrder, 0).unwrap();
        assert_eq!(out.canonical(), "C=C");
    }

    #[test]
    fn no_applicable_site() {
        let m = parse("C").unwrap();
        assert_eq!(mutate(&m, EditOp::DeleteTerminalAtom, 1), Err(MolError::NoApplicableSite));
        assert_eq!(mutate(&m, EditOp::ChangeBondOrder, 1), Err(MolError::NoApplicableSite));
        let f = parse("FF").unwrap();
        assert_eq!(
            mutate(&f, EditOp::AppendTerminalAtom(None), 1),
            Err(MolError::NoApplicableSite)
        );
    }

    #[test]
    fn seeded_and_order_independent() {
        let a = parse("CC(=O)Nc1ccc(O)cc1").unwrap();
        let b = parse("Oc1ccc(NC(C)=O)cc1").unwrap();
        for seed in 0..20 {
            for op in EditOp::KINDS {
                let x = mutate(&a, op, seed).map(|m| m.canonical().to_string());
                let y = mutate(&b, op, seed).map(|m| m.canonical().to_string());
                assert_eq!(x, y);
            }
        }
    }

    #[test]
    fn aromatic_substitution_keeps_ring() {
        let m = parse("c1ccccc1").unwrap();
        let out = mutate(&m, EditOp::SubstituteAtom(Some(Element::N)), 3).unwrap();
        assert_eq!(out.canonical(), parse("c1ccncc1").unwrap().canonical());
    }

    #[test]
    fn neighbor_enumeration() {
        let m = parse("CO").unwrap();
        let n: Vec<String> = neighbors(&m).iter().map(|x| x.canonical().to_string()).collect();
        assert!(n.contains(&"C".to_string()));
        assert!(n.contains(&"C=O".to_string()));
        assert!(n.contains(&"CCO".to_string()));
        assert!(!n.contains(&"CO".to_string()));
    }
}
