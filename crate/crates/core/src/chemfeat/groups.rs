//! Functional-group tags from a shipped pattern catalog.

use std::collections::{BTreeSet, HashSet};
use std::path::Path;
use std::sync::OnceLock;

use crate::data::{self, TableError};
use crate::molgraph::{parse_pattern, Molecule, Pattern};

#[derive(Debug, Clone)]
pub struct CatalogEntry {
    pub tag: String,
    pub pattern_text: String,
    pub pattern: Pattern,
    pub suppresses: Vec<String>,
}

/// Pattern catalog, one `tag<TAB>pattern<TAB>suppresses:a,b` line per entry.
/// A tag may appear on several lines.
#[derive(Debug, Clone)]
pub struct FunctionalGroupCatalog {
    entries: Vec<CatalogEntry>,
    tags: Vec<String>,
}

/// A set of catalog tags.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
#[serde(transparent)]
pub struct FunctionalGroupSet(pub BTreeSet<String>);

impl FunctionalGroupSet {
    pub fn from_tags<I, S>(tags: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        FunctionalGroupSet(tags.into_iter().map(Into::into).collect())
    }

    pub fn contains(&self, tag: &str) -> bool {
        self.0.contains(tag)
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(String::as_str)
    }

    pub fn difference(&self, other: &FunctionalGroupSet) -> FunctionalGroupSet {
        FunctionalGroupSet(self.0.difference(&other.0).cloned().collect())
    }
}

/// |a ∩ b| / |a ∪ b|; 1.0 when both are empty.
pub fn jaccard(a: &FunctionalGroupSet, b: &FunctionalGroupSet) -> f64 {
    let union = a.0.union(&b.0).count();
    if union == 0 {
        return 1.0;
    }
    a.0.intersection(&b.0).count() as f64 / union as f64
}

impl FunctionalGroupCatalog {
    pub fn shipped() -> &'static FunctionalGroupCatalog {
        static CATALOG: OnceLock<FunctionalGroupCatalog> = OnceLock::new();
        CATALOG.get_or_init(|| {
            FunctionalGroupCatalog::parse(data::FG_CATALOG_TSV).expect("shipped catalog")
        })
    }

    pub fn from_path(path: &Path) -> Result<Self, TableError> {
        Self::parse(&data::read_text(path)?)
    }

    pub fn parse(text: &str) -> Result<Self, TableError> {
        let mut entries = Vec::new();
        let mut tags: Vec<String> = Vec::new();
        for (line, cols) in data::tsv_rows(text) {
            if cols.len() < 2 {
                return Err(TableError::Malformed {
                    line,
                    msg: "expected tag<TAB>pattern[<TAB>suppresses:...]".into(),
                });
            }
            let tag = cols[0].trim().to_string();
            let pattern_text = cols[1].trim().to_string();
            let pattern = parse_pattern(&pattern_text).map_err(|e| TableError::Malformed {
                line,
                msg: format!("pattern {pattern_text:?}: {e}"),
            })?;
            let suppresses = match cols.get(2) {
                Some(field) => {
                    let list = field.trim().strip_prefix("suppresses:").ok_or_else(|| {
                        TableError::Malformed {
                            line,
                            msg: "third column must start with suppresses:".into(),
                        }
                    })?;
                    list.split(',')
                        .map(str::trim)
                        .filter(|s| !s.is_empty())
                        .map(str::to_string)
                        .collect()
                }
                None => Vec::new(),
            };
            if !tags.contains(&tag) {
                tags.push(tag.clone());
            }
            entries.push(CatalogEntry {
                tag,
                pattern_text,
                pattern,
                suppresses,
            });
        }
        for entry in &entries {
            for s in &entry.suppresses {
                if !tags.contains(s) {
                    return Err(TableError::Malformed {
                        line: 0,
                        msg: format!("{} suppresses unknown tag {s}", entry.tag),
                    });
                }
            }
        }
        Ok(FunctionalGroupCatalog { entries, tags })
    }

    /// Tags in catalog order.
    pub fn tags(&self) -> &[String] {
        &self.tags
    }

    pub fn entries(&self) -> &[CatalogEntry] {
        &self.entries
    }

    pub fn detect(&self, m: &Molecule) -> FunctionalGroupSet {
        let matches: Vec<(usize, Vec<Vec<usize>>)> = self
            .entries
            .iter()
            .enumerate()
            .map(|(i, e)| (i, substructure_matches(&e.pattern, m)))
            .collect();
        let mut out = BTreeSet::new();
        for tag in &self.tags {
            let suppressors: Vec<&Vec<Vec<usize>>> = matches
                .iter()
                .filter(|(i, _)| self.entries[*i].suppresses.iter().any(|s| s == tag))
                .map(|(_, m)| m)
                .collect();
            let survives = matches
                .iter()
                .filter(|(i, _)| &self.entries[*i].tag == tag)
                .flat_map(|(_, ms)| ms.iter())
                .any(|atoms| {
                    !suppressors
                        .iter()
                        .flat_map(|s| s.iter())
                        .any(|other| other.iter().any(|a| atoms.contains(a)))
                });
            if survives {
                out.insert(tag.clone());
            }
        }
        FunctionalGroupSet(out)
    }
}

pub fn detect_functional_groups(m: &Molecule) -> FunctionalGroupSet {
    FunctionalGroupCatalog::shipped().detect(m)
}

/// All distinct atom sets (sorted) onto which the pattern embeds. Patterns
/// are matched as subgraphs: pattern bonds must exist with equal order,
/// extra target bonds are allowed.
pub fn substructure_matches(pattern: &Pattern, m: &Molecule) -> Vec<Vec<usize>> {
    let k = pattern.atoms.len();
    if k == 0 || k > m.atom_count() {
        return Vec::new();
    }
    let order = search_order(pattern);
    let pattern_degree: Vec<usize> = (0..k).map(|p| pattern.neighbors(p).count()).collect();
    let mut assignment = vec![usize::MAX; k];
    let mut used = vec![false; m.atom_count()];
    let mut found: HashSet<Vec<usize>> = HashSet::new();
    extend(
        pattern,
        m,
        &order,
        &pattern_degree,
        0,
        &mut assignment,
        &mut used,
        &mut found,
    );
    let mut out: Vec<Vec<usize>> = found.into_iter().collect();
    out.sort();
    out
}

/// BFS order so every pattern atom after the first of its component has an
/// earlier neighbor, paired with that anchor.
fn search_order(pattern: &Pattern) -> Vec<(usize, Option<usize>)> {
    let k = pattern.atoms.len();
    let mut seen = vec![false; k];
    let mut order = Vec::with_capacity(k);
    for root in 0..k {
        if seen[root] {
            continue;
        }
        seen[root] = true;
        order.push((root, None));
        let mut head = order.len() - 1;
        while head < order.len() {
            let (v, _) = order[head];
            head += 1;
            for (w, _) in pattern.neighbors(v) {
                if !seen[w] {
                    seen[w] = true;
                    order.push((w, Some(v)));
                }
            }
        }
    }
    order
}

fn atom_matches(pattern: &Pattern, p: usize, m: &Molecule, t: usize, degree: usize) -> bool {
    let q = &pattern.atoms[p];
    let a = &m.atoms()[t];
    q.element == a.element
        && q.aromatic.is_none_or(|arom| arom == a.aromatic)
        && a.explicit_h >= q.min_h
        && q.charge.is_none_or(|c| c == a.formal_charge)
        && m.degree(t) >= degree
}

#[allow(clippy::too_many_arguments)]
fn extend(
    pattern: &Pattern,
    m: &Molecule,
    order: &[(usize, Option<usize>)],
    pattern_degree: &[usize],
    depth: usize,
    assignment: &mut Vec<usize>,
    used: &mut Vec<bool>,
    found: &mut HashSet<Vec<usize>>,
) {
    if depth == order.len() {
        let mut atoms = assignment.clone();
        atoms.sort_unstable();
        found.insert(atoms);
        return;
    }
    let (p, anchor) = order[depth];
    let candidates: Vec<usize> = match anchor {
        Some(a) => m.neighbors(assignment[a]).iter().map(|&(n, _)| n).collect(),
        None => (0..m.atom_count()).collect(),
    };
    for t in candidates {
        if used[t] || !atom_matches(pattern, p, m, t, pattern_degree[p]) {
            continue;
        }
        let bonds_ok = pattern.neighbors(p).all(|(q, order)| {
            let tq = assignment[q];
            tq == usize::MAX || m.bond_between(t, tq).is_some_and(|b| b.order == order)
        });
        if !bonds_ok {
            continue;
        }
        assignment[p] = t;
        used[t] = true;
        extend(pattern, m, order, pattern_degree, depth + 1, assignment, used, found);
        used[t] = false;
        assignment[p] = usize::MAX;
    }
}
