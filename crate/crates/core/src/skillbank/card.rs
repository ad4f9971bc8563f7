use std::time::Duration;

use crate::chemfeat::{descriptors, detect_functional_groups, DescriptorDelta, FunctionalGroupSet};
use crate::molgraph::{scaffold_atoms, scaffold_of, Molecule};

use super::mcs::{mcs_decompose, McsResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModificationType {
    Addition,
    Removal,
    Replacement,
    ScaffoldHop,
}

impl ModificationType {
    pub fn as_str(self) -> &'static str {
        match self {
            ModificationType::Addition => "addition",
            ModificationType::Removal => "removal",
            ModificationType::Replacement => "replacement",
            ModificationType::ScaffoldHop => "scaffold_hop",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScaffoldType {
    Unchanged,
    RingRemoval,
    RingAddition,
    ScaffoldReplacement,
    ScaffoldHop,
}

impl ScaffoldType {
    pub fn as_str(self) -> &'static str {
        match self {
            ScaffoldType::Unchanged => "unchanged",
            ScaffoldType::RingRemoval => "ring_removal",
            ScaffoldType::RingAddition => "ring_addition",
            ScaffoldType::ScaffoldReplacement => "scaffold_replacement",
            ScaffoldType::ScaffoldHop => "scaffold_hop",
        }
    }
}

/// Structured description of one transition `before -> after`.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EditCard {
    pub before: String,
    pub after: String,
    pub modification_type: ModificationType,
    pub removed_fragment: String,
    pub added_fragment: String,
    pub scaffold_before: String,
    pub scaffold_after: String,
    pub scaffold_type: ScaffoldType,
    pub fg_removed: FunctionalGroupSet,
    pub fg_added: FunctionalGroupSet,
    pub deltas: DescriptorDelta,
    pub score_before: f64,
    pub score_after: f64,
    /// Whether a retained atom bonded to the edited region is aromatic.
    pub on_aromatic_ring: bool,
    /// The common-substructure search hit its time or size cap.
    pub mcs_approximate: bool,
}

impl EditCard {
    pub fn delta(&self) -> f64 {
        self.score_after - self.score_before
    }
}

/// unchanged / ring_removal / ring_addition by scaffold string and ring
/// count; with equal ring counts, scaffold_hop when the mapping misses part
/// of the before-scaffold, scaffold_replacement otherwise.
pub fn classify_scaffold(before: &Molecule, after: &Molecule, mcs: &McsResult) -> ScaffoldType {
    let (sb, sa) = (scaffold_of(before), scaffold_of(after));
    if sb.canonical() == sa.canonical() {
        return ScaffoldType::Unchanged;
    }
    let (rb, ra) = (before.ring_count(), after.ring_count());
    if ra < rb {
        return ScaffoldType::RingRemoval;
    }
    if ra > rb {
        return ScaffoldType::RingAddition;
    }
    let mut mapped = vec![false; before.atom_count()];
    for &(u, _) in &mcs.mapping {
        mapped[u] = true;
    }
    if scaffold_atoms(before).iter().all(|&u| mapped[u]) {
        ScaffoldType::ScaffoldReplacement
    } else {
        ScaffoldType::ScaffoldHop
    }
}

fn touches_aromatic(m: &Molecule, edited: &[usize]) -> bool {
    let mut in_edit = vec![false; m.atom_count()];
    for &i in edited {
        in_edit[i] = true;
    }
    edited.iter().any(|&i| {
        m.neighbors(i)
            .iter()
            .any(|&(n, _)| !in_edit[n] && m.atoms()[n].aromatic)
    })
}

pub fn build_edit_card(
    before: &Molecule,
    after: &Molecule,
    score_before: f64,
    score_after: f64,
    time_cap: Duration,
) -> EditCard {
    let mcs = mcs_decompose(before, after, time_cap);
    let scaffold_type = classify_scaffold(before, after, &mcs);
    let modification_type = if scaffold_type == ScaffoldType::ScaffoldHop {
        ModificationType::ScaffoldHop
    } else {
        match (mcs.removed_fragment.is_empty(), mcs.added_fragment.is_empty()) {
            (true, false) => ModificationType::Addition,
            (false, true) => ModificationType::Removal,
            _ => ModificationType::Replacement,
        }
    };
    let (fb, fa) = (detect_functional_groups(before), detect_functional_groups(after));
    let on_aromatic_ring =
        touches_aromatic(before, &mcs.removed_atoms) || touches_aromatic(after, &mcs.added_atoms);
    EditCard {
        before: before.canonical().to_string(),
        after: after.canonical().to_string(),
        modification_type,
        removed_fragment: mcs.removed_fragment.clone(),
        added_fragment: mcs.added_fragment.clone(),
        scaffold_before: scaffold_of(before).canonical().to_string(),
        scaffold_after: scaffold_of(after).canonical().to_string(),
        scaffold_type,
        fg_removed: fb.difference(&fa),
        fg_added: fa.difference(&fb),
        deltas: descriptors(before).delta_to(&descriptors(after)),
        score_before,
        score_after,
        on_aromatic_ring,
        mcs_approximate: mcs.approximate,
    }
}

/// One evaluated move of a trajectory.
#[derive(Debug, Clone)]
pub struct Transition {
    pub before: Molecule,
    pub after: Molecule,
    pub score_before: f64,
    pub score_after: f64,
}

/// Cards for every transition improving the score by more than `delta`;
/// repeated (before, after) pairs keep the largest improvement.
pub fn harvest(transitions: &[Transition], delta: f64, time_cap: Duration) -> Vec<EditCard> {
    let mut out: Vec<EditCard> = Vec::new();
    for t in transitions {
        let gain = t.score_after - t.score_before;
        if !(gain > delta) {
            continue;
        }
        let (b, a) = (t.before.canonical(), t.after.canonical());
        if let Some(existing) = out.iter_mut().find(|c| c.before == b && c.after == a) {
            if gain > existing.delta() {
                existing.score_before = t.score_before;
                existing.score_after = t.score_after;
            }
            continue;
        }
        out.push(build_edit_card(&t.before, &t.after, t.score_before, t.score_after, time_cap));
    }
    out
}
