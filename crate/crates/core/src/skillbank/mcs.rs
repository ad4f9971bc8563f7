//! Maximum common connected induced subgraph between two molecules, with
//! exact element, aromaticity and bond-order labels.

use std::collections::HashMap;
use std::time::{Duration, Instant};

use crate::molgraph::Molecule;

/// Pairs above this heavy-atom count go straight to the greedy mapping.
pub const EXACT_ATOM_LIMIT: usize = 40;
pub const DEFAULT_TIME_CAP: Duration = Duration::from_millis(200);
const MAX_DISTINCT: usize = 512;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct McsResult {
    /// (before atom, after atom) pairs.
    pub mapping: Vec<(usize, usize)>,
    pub removed_atoms: Vec<usize>,
    pub added_atoms: Vec<usize>,
    pub removed_fragment: String,
    pub added_fragment: String,
    /// Set when the time cap or size limit forced a non-exhaustive answer.
    pub approximate: bool,
}

fn label(m: &Molecule, i: usize) -> (u8, bool) {
    let a = &m.atoms()[i];
    (a.element.atomic_number(), a.aromatic)
}

struct Search<'a> {
    g1: &'a Molecule,
    g2: &'a Molecule,
    m1: Vec<usize>,
    m2: Vec<usize>,
    excluded: Vec<bool>,
    order: Vec<(usize, usize)>,
    best: usize,
    found: HashMap<(Vec<usize>, Vec<usize>), Vec<(usize, usize)>>,
    deadline: Instant,
    nodes: u64,
    timed_out: bool,
}

const NONE: usize = usize::MAX;

impl Search<'_> {
    fn record(&mut self) {
        let size = self.order.len();
        if size < self.best {
            return;
        }
        if size > self.best {
            self.best = size;
            self.found.clear();
        }
        if self.found.len() >= MAX_DISTINCT {
            return;
        }
        let mut s1: Vec<usize> = self.order.iter().map(|p| p.0).collect();
        let mut s2: Vec<usize> = self.order.iter().map(|p| p.1).collect();
        s1.sort_unstable();
        s2.sort_unstable();
        self.found.entry((s1, s2)).or_insert_with(|| self.order.clone());
    }

    fn bound(&self, seed: usize) -> usize {
        let mut counts: HashMap<(u8, bool), (usize, usize)> = HashMap::new();
        for u in seed + 1..self.g1.atom_count() {
            if self.m1[u] == NONE && !self.excluded[u] {
                counts.entry(label(self.g1, u)).or_default().0 += 1;
            }
        }
        for v in 0..self.g2.atom_count() {
            if self.m2[v] == NONE {
                if let Some(c) = counts.get_mut(&label(self.g2, v)) {
                    c.1 += 1;
                }
            }
        }
        counts.values().map(|&(a, b)| a.min(b)).sum()
    }

    /// Whether mapping u -> v keeps the mapped subgraphs induced-isomorphic.
    fn consistent(&self, u: usize, v: usize) -> bool {
        if label(self.g1, u) != label(self.g2, v) {
            return false;
        }
        for &(w, x) in &self.order {
            let b1 = self.g1.bond_between(u, w).map(|b| b.order);
            let b2 = self.g2.bond_between(v, x).map(|b| b.order);
            if b1 != b2 {
                return false;
            }
        }
        true
    }

    fn extend(&mut self, seed: usize) {
        self.nodes += 1;
        if self.nodes.is_multiple_of(256) && Instant::now() > self.deadline {
            self.timed_out = true;
        }
        if self.timed_out {
            return;
        }
        self.record();
        if self.order.len() + self.bound(seed) < self.best {
            return;
        }
        let frontier = (seed + 1..self.g1.atom_count()).find(|&u| {
            self.m1[u] == NONE
                && !self.excluded[u]
                && self.g1.neighbors(u).iter().any(|&(w, _)| self.m1[w] != NONE)
        });
        let Some(u) = frontier else { return };
        let anchor = self
            .g1
            .neighbors(u)
            .iter()
            .find(|&&(w, _)| self.m1[w] != NONE)
            .map(|&(w, _)| self.m1[w])
            .expect("frontier atom has a mapped neighbor");
        let candidates: Vec<usize> = self
            .g2
            .neighbors(anchor)
            .iter()
            .map(|&(v, _)| v)
            .filter(|&v| self.m2[v] == NONE)
            .collect();
        for v in candidates {
            if self.consistent(u, v) {
                self.push(u, v);
                self.extend(seed);
                self.pop();
                if self.timed_out {
                    return;
                }
            }
        }
        self.excluded[u] = true;
        self.extend(seed);
        self.excluded[u] = false;
    }

    fn push(&mut self, u: usize, v: usize) {
        self.m1[u] = v;
        self.m2[v] = u;
        self.order.push((u, v));
    }

    fn pop(&mut self) {
        let (u, v) = self.order.pop().expect("non-empty");
        self.m1[u] = NONE;
        self.m2[v] = NONE;
    }
}

fn exact_mappings(
    g1: &Molecule,
    g2: &Molecule,
    deadline: Instant,
) -> (Vec<Vec<(usize, usize)>>, bool) {
    let mut s = Search {
        g1,
        g2,
        m1: vec![NONE; g1.atom_count()],
        m2: vec![NONE; g2.atom_count()],
        excluded: vec![false; g1.atom_count()],
        order: Vec::new(),
        best: 0,
        found: HashMap::new(),
        deadline,
        nodes: 0,
        timed_out: false,
    };
    'seeds: for u in 0..g1.atom_count() {
        for v in 0..g2.atom_count() {
            if label(g1, u) == label(g2, v) {
                s.push(u, v);
                s.extend(u);
                s.pop();
                if s.timed_out {
                    break 'seeds;
                }
            }
        }
    }
    let mut maps: Vec<_> = s.found.into_values().collect();
    maps.sort();
    (maps, s.timed_out)
}

/// Anchor-grown mapping: from every seed pair, add the first consistent
/// frontier pair until none remains; keep the largest.
pub fn greedy_mapping(g1: &Molecule, g2: &Molecule) -> Vec<(usize, usize)> {
    let mut best: Vec<(usize, usize)> = Vec::new();
    for u0 in 0..g1.atom_count() {
        for v0 in 0..g2.atom_count() {
            if label(g1, u0) != label(g2, v0) {
                continue;
            }
            let mut s = Search {
                g1,
                g2,
                m1: vec![NONE; g1.atom_count()],
                m2: vec![NONE; g2.atom_count()],
                excluded: vec![false; g1.atom_count()],
                order: Vec::new(),
                best: 0,
                found: HashMap::new(),
                deadline: Instant::now(),
                nodes: 0,
                timed_out: false,
            };
            s.push(u0, v0);
            loop {
                let mut grown = false;
                'grow: for i in 0..s.order.len() {
                    let (w, x) = s.order[i];
                    for &(u, _) in g1.neighbors(w) {
                        if s.m1[u] != NONE {
                            continue;
                        }
                        for &(v, _) in g2.neighbors(x) {
                            if s.m2[v] == NONE && s.consistent(u, v) {
                                s.push(u, v);
                                grown = true;
                                break 'grow;
                            }
                        }
                    }
                }
                if !grown {
                    break;
                }
            }
            if s.order.len() > best.len() {
                best = s.order;
            }
        }
    }
    best
}

fn fragment(m: &Molecule, atoms: &[usize]) -> String {
    if atoms.is_empty() {
        String::new()
    } else {
        m.induced_subgraph(atoms).canonical().to_string()
    }
}

fn complement(n: usize, mapped: impl Iterator<Item = usize>) -> Vec<usize> {
    let mut keep = vec![true; n];
    for i in mapped {
        keep[i] = false;
    }
    (0..n).filter(|&i| keep[i]).collect()
}

fn result_for(before: &Molecule, after: &Molecule, mapping: Vec<(usize, usize)>, approximate: bool) -> McsResult {
    let removed_atoms = complement(before.atom_count(), mapping.iter().map(|p| p.0));
    let added_atoms = complement(after.atom_count(), mapping.iter().map(|p| p.1));
    McsResult {
        removed_fragment: fragment(before, &removed_atoms),
        added_fragment: fragment(after, &added_atoms),
        mapping,
        removed_atoms,
        added_atoms,
        approximate,
    }
}

/// Decomposes `before -> after` into a common core plus removed and added
/// fragments. Among several maximum mappings the one with the smallest
/// unordered fragment pair is chosen, so swapping the inputs swaps the
/// fragments.
pub fn mcs_decompose(before: &Molecule, after: &Molecule, time_cap: Duration) -> McsResult {
    if before.canonical() == after.canonical() {
        let (r1, r2) = (
            crate::molgraph::canonical_ranks(before),
            crate::molgraph::canonical_ranks(after),
        );
        let mut by_rank = vec![0; r2.len()];
        for (i, &r) in r2.iter().enumerate() {
            by_rank[r as usize] = i;
        }
        let mapping = (0..before.atom_count()).map(|i| (i, by_rank[r1[i] as usize])).collect();
        return result_for(before, after, mapping, false);
    }
    if before.heavy_atom_count() > EXACT_ATOM_LIMIT || after.heavy_atom_count() > EXACT_ATOM_LIMIT {
        return result_for(before, after, greedy_mapping(before, after), true);
    }
    let (maps, timed_out) = exact_mappings(before, after, Instant::now() + time_cap);
    if maps.is_empty() {
        let greedy = greedy_mapping(before, after);
        return result_for(before, after, greedy, timed_out);
    }
    maps.into_iter()
        .map(|m| result_for(before, after, m, timed_out))
        .min_by(|a, b| {
            let key = |r: &McsResult| {
                let (x, y) = (r.removed_fragment.clone(), r.added_fragment.clone());
                if x <= y {
                    (x, y)
                } else {
                    (y, x)
                }
            };
            key(a)
                .cmp(&key(b))
                .then_with(|| a.removed_fragment.cmp(&b.removed_fragment))
                .then_with(|| a.mapping.cmp(&b.mapping))
        })
        .expect("non-empty")
}
