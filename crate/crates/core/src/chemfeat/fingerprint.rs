use crate::molgraph::Molecule;

use super::FeatError;

pub const DEFAULT_WIDTH: usize = 2048;
pub const DEFAULT_RADIUS: u32 = 2;

/// Fixed-width circular-environment bit vector.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Fingerprint {
    words: Vec<u64>,
    width: usize,
    radius: u32,
    popcount: u32,
}

impl Fingerprint {
    pub fn zeros(width: usize, radius: u32) -> Fingerprint {
        Fingerprint {
            words: vec![0; width.div_ceil(64)],
            width,
            radius,
            popcount: 0,
        }
    }

    pub fn from_indices(width: usize, radius: u32, bits: &[usize]) -> Fingerprint {
        let mut fp = Fingerprint::zeros(width, radius);
        for &b in bits {
            fp.set(b);
        }
        fp
    }

    pub fn from_words(width: usize, radius: u32, words: Vec<u64>) -> Result<Fingerprint, FeatError> {
        if words.len() != width.div_ceil(64) {
            return Err(FeatError::WidthMismatch {
                left: width,
                right: words.len() * 64,
            });
        }
        let popcount = words.iter().map(|w| w.count_ones()).sum();
        Ok(Fingerprint {
            words,
            width,
            radius,
            popcount,
        })
    }

    fn set(&mut self, bit: usize) {
        let bit = bit % self.width;
        let mask = 1u64 << (bit % 64);
        let word = &mut self.words[bit / 64];
        if *word & mask == 0 {
            *word |= mask;
            self.popcount += 1;
        }
    }

    pub fn get(&self, bit: usize) -> bool {
        bit < self.width && self.words[bit / 64] >> (bit % 64) & 1 == 1
    }

    pub fn popcount(&self) -> u32 {
        self.popcount
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn radius(&self) -> u32 {
        self.radius
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.width).filter(|&b| self.get(b))
    }

    pub fn intersection_count(&self, other: &Fingerprint) -> u32 {
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a & b).count_ones())
            .sum()
    }

    fn compatible(&self, other: &Fingerprint) -> Result<(), FeatError> {
        if self.width != other.width {
            return Err(FeatError::WidthMismatch {
                left: self.width,
                right: other.width,
            });
        }
        if self.radius != other.radius {
            return Err(FeatError::RadiusMismatch {
                left: self.radius,
                right: other.radius,
            });
        }
        Ok(())
    }
}

#[derive(serde::Serialize, serde::Deserialize)]
struct FingerprintRepr {
    width: usize,
    radius: u32,
    bits: Vec<usize>,
}

/// Serialized as `{"width", "radius", "bits": [set bit indices]}`.
impl serde::Serialize for Fingerprint {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        FingerprintRepr {
            width: self.width,
            radius: self.radius,
            bits: self.ones().collect(),
        }
        .serialize(s)
    }
}

impl<'de> serde::Deserialize<'de> for Fingerprint {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let r = FingerprintRepr::deserialize(d)?;
        if r.width == 0 || r.bits.iter().any(|&b| b >= r.width) {
            return Err(serde::de::Error::custom("fingerprint bit outside width"));
        }
        Ok(Fingerprint::from_indices(r.width, r.radius, &r.bits))
    }
}

fn mix(mut x: u64) -> u64 {
    // splitmix64 finalizer
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

fn combine(seed: u64, value: u64) -> u64 {
    mix(seed ^ value.wrapping_add(0x2545_F491_4F6C_DD1D).rotate_left(17))
}

fn atom_hash(m: &Molecule, i: usize) -> u64 {
    let a = &m.atoms()[i];
    [
        a.element.atomic_number() as u64,
        m.degree(i) as u64,
        a.explicit_h as u64,
        (a.formal_charge as i64 + 128) as u64,
        a.aromatic as u64,
        m.atom_in_ring(i) as u64,
        a.isotope.unwrap_or(0) as u64,
    ]
    .into_iter()
    .fold(0x5EED, combine)
}

/// Circular fingerprint: every atom's environment hash at iterations
/// `0..=radius` sets bit `hash mod width`. Iteration `k` hashes
/// `(k, own previous hash, sorted (bond order, neighbor hash) multiset)`.
pub fn morgan_fp(m: &Molecule, radius: u32, width: usize) -> Result<Fingerprint, FeatError> {
    if width == 0 || !width.is_power_of_two() {
        return Err(FeatError::BadWidth(width));
    }
    let mut fp = Fingerprint::zeros(width, radius);
    let mut hashes: Vec<u64> = (0..m.atom_count()).map(|i| atom_hash(m, i)).collect();
    for &h in &hashes {
        fp.set((h % width as u64) as usize);
    }
    for iteration in 1..=radius {
        let next: Vec<u64> = (0..m.atom_count())
            .map(|i| {
                let mut env: Vec<u64> = m
                    .neighbors(i)
                    .iter()
                    .map(|&(n, bi)| combine(m.bonds()[bi].order.code() as u64, hashes[n]))
                    .collect();
                env.sort_unstable();
                env.into_iter()
                    .fold(combine(iteration as u64, hashes[i]), combine)
            })
            .collect();
        for &h in &next {
            fp.set((h % width as u64) as usize);
        }
        hashes = next;
    }
    Ok(fp)
}

/// Radius-2, 2048-bit fingerprint.
pub fn ecfp4(m: &Molecule) -> Fingerprint {
    morgan_fp(m, DEFAULT_RADIUS, DEFAULT_WIDTH).expect("default width is a power of two")
}

/// |a ∧ b| / |a ∨ b|; two empty fingerprints score 1.0.
pub fn tanimoto(a: &Fingerprint, b: &Fingerprint) -> Result<f64, FeatError> {
    a.compatible(b)?;
    Ok(tanimoto_unchecked(a, b))
}

pub(crate) fn tanimoto_unchecked(a: &Fingerprint, b: &Fingerprint) -> f64 {
    let inter = a.intersection_count(b);
    let union = a.popcount + b.popcount - inter;
    if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    }
}

/// Tanimoto similarity of two molecules under the default fingerprint.
pub fn similarity(a: &Molecule, b: &Molecule) -> f64 {
    tanimoto_unchecked(&ecfp4(a), &ecfp4(b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::molgraph::parse;

    fn fp(bits: &[usize]) -> Fingerprint {
        Fingerprint::from_indices(64, 2, bits)
    }

    #[test]
    fn tanimoto_examples() {
        let a = ecfp4(&parse("CC(=O)Nc1ccc(O)cc1").unwrap());
        assert_eq!(tanimoto(&a, &a).unwrap(), 1.0);
        assert_eq!(tanimoto(&fp(&[1, 2]), &fp(&[3])).unwrap(), 0.0);
        assert_eq!(tanimoto(&fp(&[1, 2, 3]), &fp(&[2, 3, 4])).unwrap(), 0.5);
        assert_eq!(tanimoto(&fp(&[]), &fp(&[])).unwrap(), 1.0);
    }

    #[test]
    fn mismatched_shapes() {
        let a = Fingerprint::zeros(64, 2);
        let b = Fingerprint::zeros(128, 2);
        let c = Fingerprint::zeros(64, 1);
        assert!(matches!(tanimoto(&a, &b), Err(FeatError::WidthMismatch { .. })));
        assert!(matches!(tanimoto(&a, &c), Err(FeatError::RadiusMismatch { .. })));
        assert!(matches!(
            morgan_fp(&parse("C").unwrap(), 2, 1000),
            Err(FeatError::BadWidth(1000))
        ));
    }

    #[test]
    fn input_order_does_not_matter() {
        let a = ecfp4(&parse("OCC(=O)c1ccncc1").unwrap());
        let b = ecfp4(&parse("c1cc(C(=O)CO)ccn1").unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn radius_zero_is_atom_invariants() {
        let f = morgan_fp(&parse("CO").unwrap(), 0, 2048).unwrap();
        assert!(f.popcount() <= 2 && f.popcount() >= 1);
        let c = morgan_fp(&parse("C").unwrap(), 0, 2048).unwrap();
        assert_eq!(c.popcount(), 1);
    }

    #[test]
    fn ethanol_and_ethylamine_differ() {
        // The terminal heteroatom's invariant differs (element), so at least
        // its iteration-0 bit and every environment containing it differ.
        let a = ecfp4(&parse("CCO").unwrap());
        let b = ecfp4(&parse("CCN").unwrap());
        assert_ne!(a, b);
        assert!(tanimoto(&a, &b).unwrap() < 1.0);
    }

    #[test]
    fn serde_round_trip() {
        let f = fp(&[0, 5, 63]);
        let text = serde_json::to_string(&f).unwrap();
        assert_eq!(text, r#"{"width":64,"radius":2,"bits":[0,5,63]}"#);
        assert_eq!(serde_json::from_str::<Fingerprint>(&text).unwrap(), f);
        assert!(serde_json::from_str::<Fingerprint>(r#"{"width":64,"radius":2,"bits":[64]}"#).is_err());
    }

    #[test]
    fn popcount_is_cached_count() {
        let f = ecfp4(&parse("CC(C)Cc1ccc(C(C)C(=O)O)cc1").unwrap());
        assert_eq!(f.popcount() as usize, f.ones().count());
        let g = Fingerprint::from_words(f.width(), f.radius(), f.words().to_vec()).unwrap();
        assert_eq!(f, g);
    }
}
