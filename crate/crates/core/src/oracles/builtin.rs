use std::collections::BTreeMap;
use std::sync::OnceLock;

use crate::chemfeat::{descriptors, DescriptorVector};
use crate::data::{self, TableError};
use crate::molgraph::{Element, Molecule};

use super::Direction;

/// Descriptor and lightweight property oracles computed in-process.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Builtin {
    Mw,
    RingCount,
    Hbd,
    Hba,
    LogpLite,
    QedLite,
    SaLite,
}

impl Builtin {
    pub const ALL: [Builtin; 7] = [
        Builtin::Mw,
        Builtin::RingCount,
        Builtin::Hbd,
        Builtin::Hba,
        Builtin::LogpLite,
        Builtin::QedLite,
        Builtin::SaLite,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Builtin::Mw => "mw",
            Builtin::RingCount => "ring_count",
            Builtin::Hbd => "hbd",
            Builtin::Hba => "hba",
            Builtin::LogpLite => "logp_lite",
            Builtin::QedLite => "qed_lite",
            Builtin::SaLite => "sa_lite",
        }
    }

    pub fn from_name(name: &str) -> Option<Builtin> {
        match name {
            "ring" => Some(Builtin::RingCount),
            _ => Builtin::ALL.into_iter().find(|b| b.name() == name),
        }
    }

    /// sa_lite is the only minimized builtin.
    pub fn default_direction(self) -> Direction {
        match self {
            Builtin::SaLite => Direction::Minimize,
            _ => Direction::Maximize,
        }
    }

    pub fn evaluate(self, m: &Molecule) -> f64 {
        match self {
            Builtin::Mw => descriptors(m).mw,
            Builtin::RingCount => m.ring_count() as f64,
            Builtin::Hbd => descriptors(m).hbd as f64,
            Builtin::Hba => descriptors(m).hba as f64,
            Builtin::LogpLite => logp_lite(m),
            Builtin::QedLite => qed_lite(m),
            Builtin::SaLite => sa_lite(m),
        }
    }
}

pub fn builtin_mw(m: &Molecule) -> f64 {
    Builtin::Mw.evaluate(m)
}

pub fn builtin_ring(m: &Molecule) -> f64 {
    Builtin::RingCount.evaluate(m)
}

pub fn builtin_hbd(m: &Molecule) -> f64 {
    Builtin::Hbd.evaluate(m)
}

pub fn builtin_hba(m: &Molecule) -> f64 {
    Builtin::Hba.evaluate(m)
}

/// Per-atom-class lipophilicity contributions.
#[derive(Debug, Clone)]
pub struct LogpTable(pub BTreeMap<String, f64>);

impl LogpTable {
    pub const CLASSES: [&'static str; 16] = [
        "aliphatic_C_with_H",
        "aliphatic_C_no_H",
        "aromatic_C_with_H",
        "aromatic_C_no_H",
        "aliphatic_N",
        "aromatic_N",
        "aliphatic_O",
        "aromatic_O",
        "S",
        "P",
        "B",
        "F",
        "Cl",
        "Br",
        "I",
        "polar_H",
    ];

    pub fn shipped() -> &'static LogpTable {
        static T: OnceLock<LogpTable> = OnceLock::new();
        T.get_or_init(|| LogpTable::parse(data::LOGP_TSV).expect("shipped logp table"))
    }

    pub fn parse(text: &str) -> Result<LogpTable, TableError> {
        let map = data::parse_real_table(text)?;
        if let Some(missing) = Self::CLASSES.iter().find(|c| !map.contains_key(**c)) {
            return Err(TableError::Malformed {
                line: 0,
                msg: format!("logp table lacks {missing}"),
            });
        }
        Ok(LogpTable(map))
    }

    pub fn get(&self, class: &str) -> f64 {
        self.0[class]
    }
}

/// Contribution class of a heavy atom.
pub fn logp_class(m: &Molecule, i: usize) -> &'static str {
    let a = &m.atoms()[i];
    match (a.element, a.aromatic) {
        (Element::C, false) if a.explicit_h > 0 => "aliphatic_C_with_H",
        (Element::C, false) => "aliphatic_C_no_H",
        (Element::C, true) if a.explicit_h > 0 => "aromatic_C_with_H",
        (Element::C, true) => "aromatic_C_no_H",
        (Element::N, false) => "aliphatic_N",
        (Element::N, true) => "aromatic_N",
        (Element::O, false) => "aliphatic_O",
        (Element::O, true) => "aromatic_O",
        (Element::S, _) => "S",
        (Element::P, _) => "P",
        (Element::B, _) => "B",
        (Element::F, _) => "F",
        (Element::Cl, _) => "Cl",
        (Element::Br, _) => "Br",
        (Element::I, _) => "I",
    }
}

/// Sum of atom-class contributions plus one `polar_H` per hydrogen on N or O.
pub fn logp_lite(m: &Molecule) -> f64 {
    logp_lite_with(m, LogpTable::shipped())
}

pub fn logp_lite_with(m: &Molecule, t: &LogpTable) -> f64 {
    let mut total = 0.0;
    for (i, a) in m.atoms().iter().enumerate() {
        total += t.get(logp_class(m, i));
        if matches!(a.element, Element::N | Element::O) {
            total += a.explicit_h as f64 * t.get("polar_H");
        }
    }
    total
}

/// Logistic desirability parameters for one descriptor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Desirability {
    pub center: f64,
    pub scale: f64,
    pub weight: f64,
}

impl Desirability {
    /// `2 / (1 + exp(|x - center| / scale))`, equal to 1 at the center.
    pub fn at(&self, x: f64) -> f64 {
        2.0 / (1.0 + ((x - self.center).abs() / self.scale).exp())
    }
}

#[derive(Debug, Clone)]
pub struct QedParams(pub BTreeMap<String, Desirability>);

impl QedParams {
    pub const DESCRIPTORS: [&'static str; 6] =
        ["mw", "ring_count", "hbd", "hba", "psa_lite", "rotatable_bonds"];

    pub fn shipped() -> &'static QedParams {
        static T: OnceLock<QedParams> = OnceLock::new();
        T.get_or_init(|| QedParams::parse(data::QED_PARAMS_TSV).expect("shipped qed params"))
    }

    pub fn parse(text: &str) -> Result<QedParams, TableError> {
        let mut map = BTreeMap::new();
        for (line, cols) in data::tsv_rows(text) {
            let bad = |msg: String| TableError::Malformed { line, msg };
            if cols.len() != 4 {
                return Err(bad("expected descriptor<TAB>center<TAB>scale<TAB>weight".into()));
            }
            let num = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| bad(format!("bad number {s:?}")))
            };
            let d = Desirability {
                center: num(cols[1])?,
                scale: num(cols[2])?,
                weight: num(cols[3])?,
            };
            if !(d.scale > 0.0) || !(d.weight >= 0.0) {
                return Err(bad("scale must be positive and weight non-negative".into()));
            }
            let name = cols[0].trim();
            if !Self::DESCRIPTORS.contains(&name) {
                return Err(bad(format!("unknown descriptor {name}")));
            }
            map.insert(name.to_string(), d);
        }
        if map.is_empty() || map.values().all(|d| d.weight == 0.0) {
            return Err(TableError::Malformed {
                line: 0,
                msg: "no weighted descriptors".into(),
            });
        }
        Ok(QedParams(map))
    }
}

fn descriptor_field(d: &DescriptorVector, name: &str) -> f64 {
    match name {
        "mw" => d.mw,
        "ring_count" => d.ring_count as f64,
        "hbd" => d.hbd as f64,
        "hba" => d.hba as f64,
        "psa_lite" => d.psa_lite,
        "rotatable_bonds" => d.rotatable_bonds as f64,
        _ => unreachable!("validated at parse"),
    }
}

/// Weighted geometric mean of per-descriptor desirabilities.
pub fn qed_lite(m: &Molecule) -> f64 {
    qed_lite_from(&descriptors(m), QedParams::shipped())
}

pub fn qed_lite_from(d: &DescriptorVector, params: &QedParams) -> f64 {
    let total_weight: f64 = params.0.values().map(|p| p.weight).sum();
    let log_sum: f64 = params
        .0
        .iter()
        .map(|(name, p)| p.weight * p.at(descriptor_field(d, name)).ln())
        .sum();
    (log_sum / total_weight).exp()
}

/// Atoms in ring systems whose cyclomatic number is at least 2.
pub fn fused_ring_atoms(m: &Molecule) -> Vec<usize> {
    let n = m.atom_count();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    let ring_bonds: Vec<usize> = (0..m.bonds().len()).filter(|&b| m.bond_in_ring(b)).collect();
    for &bi in &ring_bonds {
        let b = &m.bonds()[bi];
        let (ra, rb) = (find(&mut parent, b.a), find(&mut parent, b.b));
        if ra != rb {
            parent[ra] = rb;
        }
    }
    let mut atoms_in = vec![0usize; n];
    let mut bonds_in = vec![0usize; n];
    for i in 0..n {
        if m.atom_in_ring(i) {
            let r = find(&mut parent, i);
            atoms_in[r] += 1;
        }
    }
    for &bi in &ring_bonds {
        let r = find(&mut parent, m.bonds()[bi].a);
        bonds_in[r] += 1;
    }
    (0..n)
        .filter(|&i| {
            m.atom_in_ring(i) && {
                let r = find(&mut parent, i);
                bonds_in[r] + 1 >= atoms_in[r] + 2
            }
        })
        .collect()
}

/// `-(0.3 * rings + 0.1 * heavy atoms + fraction of atoms in fused systems)`.
pub fn sa_lite(m: &Molecule) -> f64 {
    let heavy = m.heavy_atom_count();
    let fused = if heavy == 0 {
        0.0
    } else {
        fused_ring_atoms(m).len() as f64 / heavy as f64
    };
    -(0.3 * m.ring_count() as f64 + 0.1 * heavy as f64 + fused)
}
