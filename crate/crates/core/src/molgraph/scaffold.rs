use super::Molecule;

/// Ring systems plus the linkers joining them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Scaffold {
    pub core: Molecule,
    pub ring_count: usize,
}

impl Scaffold {
    pub fn is_empty(&self) -> bool {
        self.core.is_empty()
    }

    pub fn canonical(&self) -> &str {
        self.core.canonical()
    }
}

/// Atom indices surviving iterative removal of terminal non-ring atoms.
/// Acyclic graphs prune to nothing.
pub fn scaffold_atoms(mol: &Molecule) -> Vec<usize> {
    let n = mol.atom_count();
    if mol.ring_count() == 0 {
        return Vec::new();
    }
    let mut alive = vec![true; n];
    let mut degree: Vec<usize> = (0..n).map(|i| mol.degree(i)).collect();
    let mut queue: Vec<usize> = (0..n)
        .filter(|&i| degree[i] <= 1 && !mol.atom_in_ring(i))
        .collect();
    while let Some(v) = queue.pop() {
        if !alive[v] {
            continue;
        }
        alive[v] = false;
        for &(w, _) in mol.neighbors(v) {
            if alive[w] {
                degree[w] -= 1;
                if degree[w] <= 1 && !mol.atom_in_ring(w) {
                    queue.push(w);
                }
            }
        }
    }
    (0..n).filter(|&i| alive[i]).collect()
}

pub fn scaffold_of(mol: &Molecule) -> Scaffold {
    let keep = scaffold_atoms(mol);
    let core = if keep.is_empty() {
        Molecule::empty()
    } else {
        mol.induced_subgraph(&keep)
    };
    let ring_count = core.ring_count();
    Scaffold { core, ring_count }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::molgraph::parse;

    #[test]
    fn ethylbenzene() {
        let s = scaffold_of(&parse("CCc1ccccc1").unwrap());
        assert_eq!(s.canonical(), "c1ccccc1");
        assert_eq!(s.ring_count, 1);
    }

    #[test]
    fn hexane_is_empty() {
        let s = scaffold_of(&parse("CCCCCC").unwrap());
        assert!(s.is_empty());
        assert_eq!(s.ring_count, 0);
        assert_eq!(s.canonical(), "");
    }

    #[test]
    fn linker_between_rings_is_kept() {
        // Hand pruning: no terminal acyclic atoms exist, so all 14 atoms stay.
        let m = parse("c1ccccc1CCc1ccccc1").unwrap();
        let s = scaffold_of(&m);
        assert_eq!(s.core.atom_count(), 14);
        assert_eq!(s.ring_count, 2);
        assert_eq!(s.canonical(), m.canonical());
        let with_tail = parse("CCCc1ccc(CCc2ccccc2)cc1O").unwrap();
        assert_eq!(scaffold_of(&with_tail).canonical(), m.canonical());
    }

    #[test]
    fn fixed_point() {
        for s in ["CC(=O)Nc1ccc(O)cc1", "CCN(CC)C1CCC(c2ccncc2)CC1", "OCC1CC1"] {
            let sc = scaffold_of(&parse(s).unwrap());
            assert_eq!(scaffold_of(&sc.core), sc);
        }
    }
}
