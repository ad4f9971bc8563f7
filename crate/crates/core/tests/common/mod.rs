#![allow(dead_code)]

use std::path::PathBuf;

use molforge::chemfeat::{detect_functional_groups, ecfp4, Fingerprint, FunctionalGroupSet};
use molforge::exembank::ExemplarBank;
use molforge::molgraph::{parse, Molecule};
use molforge::skillbank::{SkillCard, SkillQuery};

pub fn fixture(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(rel)
}

pub fn read_fixture(rel: &str) -> String {
    std::fs::read_to_string(fixture(rel)).unwrap()
}

pub fn corpus() -> Vec<Molecule> {
    read_fixture("corpus.smi")
        .lines()
        .filter(|l| !l.trim().is_empty() && !l.starts_with('#'))
        .map(|l| parse(l).unwrap())
        .collect()
}

/// Tanimoto from raw words: |a ∧ b| / |a ∨ b|, 1.0 for two empty sets.
pub fn popcount_tanimoto(a: &Fingerprint, b: &Fingerprint) -> f64 {
    let (mut and, mut or) = (0u32, 0u32);
    for (x, y) in a.words().iter().zip(b.words()) {
        and += (x & y).count_ones();
        or += (x | y).count_ones();
    }
    if or == 0 {
        1.0
    } else {
        and as f64 / or as f64
    }
}

pub fn mol_tanimoto(a: &Molecule, b: &Molecule) -> f64 {
    popcount_tanimoto(&ecfp4(a), &ecfp4(b))
}

fn fg_jaccard(a: &FunctionalGroupSet, b: &FunctionalGroupSet) -> f64 {
    let inter = a.0.intersection(&b.0).count();
    let union = a.0.union(&b.0).count();
    if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    }
}

/// Labeled graph isomorphism by backtracking over atom assignments.
pub fn isomorphic(a: &Molecule, b: &Molecule) -> bool {
    let n = a.atom_count();
    if n != b.atom_count() || a.bonds().len() != b.bonds().len() {
        return false;
    }
    let label = |m: &Molecule, i: usize| {
        let at = &m.atoms()[i];
        (at.element, at.aromatic, at.formal_charge, at.explicit_h, at.isotope, m.degree(i))
    };
    let mut map = vec![usize::MAX; n];
    let mut used = vec![false; n];
    fn go(
        a: &Molecule,
        b: &Molecule,
        i: usize,
        map: &mut [usize],
        used: &mut [bool],
        label: &dyn Fn(&Molecule, usize) -> (molforge::molgraph::Element, bool, i8, u8, Option<u16>, usize),
    ) -> bool {
        if i == map.len() {
            return true;
        }
        for j in 0..map.len() {
            if used[j] || label(a, i) != label(b, j) {
                continue;
            }
            let consistent = a.neighbors(i).iter().all(|&(k, bond)| {
                k >= i || {
                    let mapped = map[k];
                    match b.bond_between(j, mapped) {
                        Some(bb) => bb.order == a.bonds()[bond].order,
                        None => false,
                    }
                }
            });
            if !consistent {
                continue;
            }
            map[i] = j;
            used[j] = true;
            if go(a, b, i + 1, map, used, label) {
                return true;
            }
            used[j] = false;
            map[i] = usize::MAX;
        }
        false
    }
    go(a, b, 0, &mut map, &mut used, &label)
}

/// Direct forward sum `Σ_k (γλ)^k δ_{t+k}`.
pub fn forward_gae(r: &[f64], v: &[f64], gamma: f64, lambda: f64) -> Vec<f64> {
    let delta: Vec<f64> = (0..r.len()).map(|t| r[t] + gamma * v[t + 1] - v[t]).collect();
    (0..r.len())
        .map(|t| {
            let mut sum = 0.0;
            let mut w = 1.0;
            for d in &delta[t..] {
                sum += w * d;
                w *= gamma * lambda;
            }
            sum
        })
        .collect()
}

/// Full scan: pool by similarity to `current` (ties by canonical), keep
/// records at least `gamma` similar to `lead` having the property, rank by
/// property value then lead similarity then canonical, take `k`.
pub fn brute_force_exemplars(
    bank: &ExemplarBank,
    current: &Molecule,
    lead: &Molecule,
    prop: &str,
    gamma: f64,
    pool: usize,
    k: usize,
) -> Vec<String> {
    let q = ecfp4(current);
    let l = ecfp4(lead);
    let mut all: Vec<(f64, &str, usize)> = bank
        .records()
        .iter()
        .enumerate()
        .map(|(i, r)| (popcount_tanimoto(&q, &r.fp), r.canonical.as_str(), i))
        .collect();
    all.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(b.1)));
    all.truncate(pool);
    let mut kept: Vec<(f64, f64, String)> = all
        .into_iter()
        .filter_map(|(_, c, i)| {
            let r = &bank.records()[i];
            let s = popcount_tanimoto(&r.fp, &l);
            let v = *r.props.get(prop)?;
            (s >= gamma).then(|| (v, s, c.to_string()))
        })
        .collect();
    kept.sort_by(|a, b| {
        b.0.partial_cmp(&a.0)
            .unwrap()
            .then(b.1.partial_cmp(&a.1).unwrap())
            .then(a.2.cmp(&b.2))
    });
    kept.into_iter().take(k).map(|x| x.2).collect()
}

/// Two channels, each: threshold, rank by Δr then similarity then id, top k;
/// union with fingerprint hits first.
pub fn brute_force_skills(cards: &[SkillCard], current: &Molecule, q: &SkillQuery) -> Vec<u64> {
    let fp = ecfp4(current);
    let fg = detect_functional_groups(current);
    let channel = |k: usize, gamma: f64, sim: &dyn Fn(&SkillCard) -> f64| {
        let mut v: Vec<(f64, f64, u64)> = cards
            .iter()
            .map(|c| (c.delta, sim(c), c.id))
            .filter(|x| x.1 >= gamma)
            .collect();
        v.sort_by(|a, b| {
            b.0.partial_cmp(&a.0)
                .unwrap()
                .then(b.1.partial_cmp(&a.1).unwrap())
                .then(a.2.cmp(&b.2))
        });
        v.into_iter().take(k).map(|x| x.2).collect::<Vec<u64>>()
    };
    let a = channel(q.k_fp, q.gamma_fp, &|c| popcount_tanimoto(&fp, &c.fp_key));
    let b = channel(q.k_fg, q.gamma_fg, &|c| fg_jaccard(&fg, &c.fg_tags));
    let mut out = a;
    for id in b {
        if !out.contains(&id) {
            out.push(id);
        }
    }
    out
}
