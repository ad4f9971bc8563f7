use std::collections::BTreeMap;
use std::sync::OnceLock;

use crate::data::{self, TableError};
use crate::molgraph::{BondOrder, Element, Molecule};

/// Cheap whole-molecule descriptors.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DescriptorVector {
    pub mw: f64,
    pub ring_count: u32,
    pub hbd: u32,
    pub hba: u32,
    pub psa_lite: f64,
    pub rotatable_bonds: u32,
}

/// `after - before` for two descriptor vectors.
#[derive(Debug, Clone, Copy, Default, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DescriptorDelta {
    pub mw: f64,
    pub ring_count: i64,
    pub hbd: i64,
    pub hba: i64,
    pub psa_lite: f64,
    pub rotatable_bonds: i64,
}

impl DescriptorVector {
    pub fn delta_to(&self, after: &DescriptorVector) -> DescriptorDelta {
        DescriptorDelta {
            mw: after.mw - self.mw,
            ring_count: after.ring_count as i64 - self.ring_count as i64,
            hbd: after.hbd as i64 - self.hbd as i64,
            hba: after.hba as i64 - self.hba as i64,
            psa_lite: after.psa_lite - self.psa_lite,
            rotatable_bonds: after.rotatable_bonds as i64 - self.rotatable_bonds as i64,
        }
    }
}

/// Atomic masses and polar-surface contributions.
#[derive(Debug, Clone)]
pub struct DescriptorTables {
    pub masses: BTreeMap<String, f64>,
    pub psa: BTreeMap<String, f64>,
}

impl DescriptorTables {
    pub fn shipped() -> &'static DescriptorTables {
        static TABLES: OnceLock<DescriptorTables> = OnceLock::new();
        TABLES.get_or_init(|| {
            DescriptorTables::parse(data::MASSES_TSV, data::PSA_TSV).expect("shipped tables")
        })
    }

    pub fn parse(masses: &str, psa: &str) -> Result<Self, TableError> {
        let masses = data::parse_real_table(masses)?;
        for key in Element::ALL.iter().map(|e| e.symbol()).chain(["H"]) {
            if !masses.contains_key(key) {
                return Err(TableError::Malformed {
                    line: 0,
                    msg: format!("mass table lacks {key}"),
                });
            }
        }
        Ok(DescriptorTables {
            masses,
            psa: data::parse_real_table(psa)?,
        })
    }

    pub fn mass(&self, symbol: &str) -> f64 {
        self.masses[symbol]
    }
}

/// Environment class of an N or O atom for the polar-surface table:
/// `<element>_<arom|triple|double|single>_H<count>`.
pub fn polar_class(m: &Molecule, atom: usize) -> Option<String> {
    let a = &m.atoms()[atom];
    if !matches!(a.element, Element::N | Element::O) {
        return None;
    }
    let orders: Vec<BondOrder> = m
        .neighbors(atom)
        .iter()
        .map(|&(_, bi)| m.bonds()[bi].order)
        .collect();
    let kind = if a.aromatic {
        "arom"
    } else if orders.contains(&BondOrder::Triple) {
        "triple"
    } else if orders.contains(&BondOrder::Double) {
        "double"
    } else {
        "single"
    };
    Some(format!("{}_{}_H{}", a.element.symbol(), kind, a.explicit_h))
}

pub fn descriptors(m: &Molecule) -> DescriptorVector {
    descriptors_with(m, DescriptorTables::shipped())
}

pub fn descriptors_with(m: &Molecule, tables: &DescriptorTables) -> DescriptorVector {
    let h_mass = tables.mass("H");
    let mut heavy = 0.0;
    let mut hydrogens = 0u32;
    let mut hbd = 0;
    let mut hba = 0;
    let mut psa = 0.0;
    for (i, a) in m.atoms().iter().enumerate() {
        heavy += tables.mass(a.element.symbol());
        hydrogens += a.explicit_h as u32;
        if matches!(a.element, Element::N | Element::O) {
            hba += 1;
            if a.explicit_h > 0 {
                hbd += 1;
            }
            if let Some(class) = polar_class(m, i) {
                psa += tables.psa.get(&class).copied().unwrap_or(0.0);
            }
        }
    }
    let rotatable = m
        .bonds()
        .iter()
        .enumerate()
        .filter(|&(bi, b)| {
            b.order == BondOrder::Single
                && !m.bond_in_ring(bi)
                && m.degree(b.a) >= 2
                && m.degree(b.b) >= 2
        })
        .count();
    DescriptorVector {
        mw: heavy + hydrogens as f64 * h_mass,
        ring_count: m.ring_count() as u32,
        hbd,
        hba,
        psa_lite: psa,
        rotatable_bonds: rotatable as u32,
    }
}
