//! Canonical atom ranking and SMILES writing.
//!
//! Ranks start from atom invariants (element, isotope, charge, aromaticity,
//! degree, hydrogen count, ring membership) and are refined by neighbor
//! ranks until stable. Remaining ties are broken by individualizing each
//! member of the first tied class in turn; the lexicographically smallest
//! string over all branches is the canonical form.

use super::element::implicit_hydrogens;
use super::{BondOrder, Molecule};

pub(crate) fn canonical_smiles(mol: &Molecule) -> String {
    if mol.is_empty() {
        return String::new();
    }
    let components = mol.components();
    if components.len() == 1 {
        return canonical_connected(mol);
    }
    let mut parts: Vec<String> = components
        .iter()
        .map(|c| canonical_connected(&mol.induced_subgraph(c)))
        .collect();
    parts.sort();
    parts.join(".")
}

fn canonical_connected(mol: &Molecule) -> String {
    let mut ranks = initial_ranks(mol);
    refine(mol, &mut ranks);
    let mut best: Option<String> = None;
    search(mol, ranks, &mut best);
    best.expect("at least one leaf")
}

/// Canonical ranks (a permutation of `0..n`) for a connected graph.
pub fn canonical_ranks(mol: &Molecule) -> Vec<u32> {
    let mut ranks = initial_ranks(mol);
    refine(mol, &mut ranks);
    let mut best: Option<(String, Vec<u32>)> = None;
    search_ranks(mol, ranks, &mut best);
    best.map(|(_, r)| r).unwrap_or_default()
}

type Invariant = (u8, u16, i8, bool, usize, u8, bool);

fn invariant(mol: &Molecule, i: usize) -> Invariant {
    let a = &mol.atoms()[i];
    (
        a.element.atomic_number(),
        a.isotope.unwrap_or(0),
        a.formal_charge,
        a.aromatic,
        mol.degree(i),
        a.explicit_h,
        mol.atom_in_ring(i),
    )
}

fn initial_ranks(mol: &Molecule) -> Vec<u32> {
    let inv: Vec<Invariant> = (0..mol.atom_count()).map(|i| invariant(mol, i)).collect();
    dense_ranks(&inv)
}

fn dense_ranks<K: Ord + Clone>(keys: &[K]) -> Vec<u32> {
    let mut sorted: Vec<K> = keys.to_vec();
    sorted.sort();
    sorted.dedup();
    keys.iter()
        .map(|k| sorted.binary_search(k).expect("key present") as u32)
        .collect()
}

fn class_count(ranks: &[u32]) -> usize {
    let mut r = ranks.to_vec();
    r.sort_unstable();
    r.dedup();
    r.len()
}

fn refine(mol: &Molecule, ranks: &mut Vec<u32>) {
    let mut classes = class_count(ranks);
    loop {
        let keys: Vec<(u32, Vec<(u8, u32)>)> = (0..mol.atom_count())
            .map(|i| {
                let mut nb: Vec<(u8, u32)> = mol
                    .neighbors(i)
                    .iter()
                    .map(|&(n, bi)| (mol.bonds()[bi].order.code(), ranks[n]))
                    .collect();
                nb.sort_unstable();
                (ranks[i], nb)
            })
            .collect();
        let next = dense_ranks(&keys);
        let next_classes = class_count(&next);
        *ranks = next;
        if next_classes == classes {
            break;
        }
        classes = next_classes;
    }
}

/// First (lowest-ranked) class with more than one member.
fn first_tied_class(ranks: &[u32]) -> Option<u32> {
    let mut counts = vec![0usize; ranks.len()];
    for &r in ranks {
        counts[r as usize] += 1;
    }
    counts.iter().position(|&c| c > 1).map(|r| r as u32)
}

/// Terminal atoms hanging off the same neighbor by the same bond are
/// interchangeable, so only one of them needs to be individualized.
fn twin_of(mol: &Molecule, u: usize, v: usize) -> bool {
    if mol.degree(u) != 1 || mol.degree(v) != 1 {
        return false;
    }
    let (nu, bu) = mol.neighbors(u)[0];
    let (nv, bv) = mol.neighbors(v)[0];
    nu == nv && mol.bonds()[bu].order == mol.bonds()[bv].order
}

fn individualize(ranks: &[u32], class: u32, chosen: usize) -> Vec<u32> {
    ranks
        .iter()
        .enumerate()
        .map(|(i, &r)| {
            if r > class || (r == class && i != chosen) {
                r + 1
            } else {
                r
            }
        })
        .collect()
}

fn branch_members(mol: &Molecule, ranks: &[u32], class: u32) -> Vec<usize> {
    let mut tried: Vec<usize> = Vec::new();
    for v in (0..ranks.len()).filter(|&i| ranks[i] == class) {
        if tried.iter().any(|&u| twin_of(mol, u, v)) {
            continue;
        }
        tried.push(v);
    }
    tried
}

fn search(mol: &Molecule, ranks: Vec<u32>, best: &mut Option<String>) {
    match first_tied_class(&ranks) {
        None => {
            let s = write_smiles_with_ranks(mol, &ranks);
            if best.as_ref().is_none_or(|b| s < *b) {
                *best = Some(s);
            }
        }
        Some(class) => {
            for v in branch_members(mol, &ranks, class) {
                let mut next = individualize(&ranks, class, v);
                refine(mol, &mut next);
                search(mol, next, best);
            }
        }
    }
}

fn search_ranks(mol: &Molecule, ranks: Vec<u32>, best: &mut Option<(String, Vec<u32>)>) {
    match first_tied_class(&ranks) {
        None => {
            let s = write_smiles_with_ranks(mol, &ranks);
            if best.as_ref().is_none_or(|(b, _)| s < *b) {
                *best = Some((s, ranks));
            }
        }
        Some(class) => {
            for v in branch_members(mol, &ranks, class) {
                let mut next = individualize(&ranks, class, v);
                refine(mol, &mut next);
                search_ranks(mol, next, best);
            }
        }
    }
}

/// Writes a SMILES string for a connected graph, starting from the
/// lowest-ranked atom and visiting neighbors in rank order (ties by index).
/// Any ranking gives a valid string; canonical ranks give the canonical one.
pub fn write_smiles_with_ranks(mol: &Molecule, ranks: &[u32]) -> String {
    let n = mol.atom_count();
    if n == 0 {
        return String::new();
    }
    let key = |i: usize| (ranks[i], i);
    let start = (0..n).min_by_key(|&i| key(i)).expect("non-empty");

    let sorted_neighbors: Vec<Vec<(usize, usize)>> = (0..n)
        .map(|v| {
            let mut nb = mol.neighbors(v).to_vec();
            nb.sort_by_key(|&(w, _)| key(w));
            nb
        })
        .collect();

    // Pass 1: DFS tree, preorder and ring-closure bonds.
    let mut visited = vec![false; n];
    let mut edge_used = vec![false; mol.bonds().len()];
    let mut children: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    // openings[a] = (bond, partner) closed later at partner
    let mut openings: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    let mut closings: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    let mut stack: Vec<(usize, usize)> = vec![(start, 0)];
    visited[start] = true;
    while let Some(&mut (v, ref mut pos)) = stack.last_mut() {
        if *pos >= sorted_neighbors[v].len() {
            stack.pop();
            continue;
        }
        let (w, bi) = sorted_neighbors[v][*pos];
        *pos += 1;
        if edge_used[bi] {
            continue;
        }
        edge_used[bi] = true;
        if visited[w] {
            openings[w].push((bi, v));
            closings[v].push((bi, w));
        } else {
            visited[w] = true;
            children[v].push((w, bi));
            stack.push((w, 0));
        }
    }

    // Pass 2: emit.
    let mut out = String::with_capacity(n * 2);
    let mut digit_of_bond: Vec<Option<u32>> = vec![None; mol.bonds().len()];
    let mut in_use: Vec<bool> = Vec::new();
    enum Task {
        Atom(usize, Option<usize>),
        Text(&'static str),
    }
    let mut tasks = vec![Task::Atom(start, None)];
    while let Some(task) = tasks.pop() {
        let (v, via) = match task {
            Task::Text(t) => {
                out.push_str(t);
                continue;
            }
            Task::Atom(v, via) => (v, via),
        };
        if let Some(bi) = via {
            out.push_str(bond_symbol(mol, bi));
        }
        write_atom(mol, v, &mut out);
        let mut freed = Vec::new();
        for &(bi, _) in &closings[v] {
            let d = digit_of_bond[bi].expect("opened earlier");
            push_ring_digit(&mut out, d);
            freed.push(d);
        }
        for &(bi, _) in &openings[v] {
            let d = (1..)
                .find(|&d| !in_use.get(d as usize).copied().unwrap_or(false))
                .expect("free digit");
            if in_use.len() <= d as usize {
                in_use.resize(d as usize + 1, false);
            }
            in_use[d as usize] = true;
            digit_of_bond[bi] = Some(d);
            out.push_str(bond_symbol(mol, bi));
            push_ring_digit(&mut out, d);
        }
        for d in freed {
            in_use[d as usize] = false;
        }
        let kids = &children[v];
        if let Some((&(last, last_bond), rest)) = kids.split_last() {
            tasks.push(Task::Atom(last, Some(last_bond)));
            for &(c, bi) in rest.iter().rev() {
                tasks.push(Task::Text(")"));
                tasks.push(Task::Atom(c, Some(bi)));
                tasks.push(Task::Text("("));
            }
        }
    }
    out
}

fn push_ring_digit(out: &mut String, d: u32) {
    if d < 10 {
        out.push(char::from(b'0' + d as u8));
    } else {
        out.push_str(&format!("%{d:02}"));
    }
}

fn bond_symbol(mol: &Molecule, bi: usize) -> &'static str {
    let bond = &mol.bonds()[bi];
    let both_aromatic = mol.atoms()[bond.a].aromatic && mol.atoms()[bond.b].aromatic;
    match bond.order {
        BondOrder::Single if both_aromatic => "-",
        BondOrder::Single => "",
        BondOrder::Double => "=",
        BondOrder::Triple => "#",
        BondOrder::Aromatic if both_aromatic && mol.bond_in_ring(bi) => "",
        BondOrder::Aromatic => ":",
    }
}

fn write_atom(mol: &Molecule, i: usize, out: &mut String) {
    let atom = &mol.atoms()[i];
    let symbol = if atom.aromatic {
        atom.element.symbol().to_ascii_lowercase()
    } else {
        atom.element.symbol().to_string()
    };
    let implicit = implicit_hydrogens(atom.element, atom.aromatic, mol.bond_order_sum(i));
    if atom.formal_charge == 0 && atom.isotope.is_none() && atom.explicit_h == implicit {
        out.push_str(&symbol);
        return;
    }
    out.push('[');
    if let Some(iso) = atom.isotope {
        out.push_str(&iso.to_string());
    }
    out.push_str(&symbol);
    match atom.explicit_h {
        0 => {}
        1 => out.push('H'),
        h => {
            out.push('H');
            out.push_str(&h.to_string());
        }
    }
    match atom.formal_charge {
        0 => {}
        1 => out.push('+'),
        -1 => out.push('-'),
        c if c > 0 => out.push_str(&format!("+{c}")),
        c => out.push_str(&format!("-{}", -c)),
    }
    out.push(']');
}
