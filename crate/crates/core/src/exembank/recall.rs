use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::chemfeat::Fingerprint;

use super::ExemplarBank;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    pub index: usize,
    pub similarity: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum RecallMode {
    /// Popcount-pruned linear scan; returns the true top set.
    #[default]
    Exact,
    /// Scores only records sharing one of the query's `probe_bits` rarest
    /// bits (0 probes every query bit). Needs `build_postings`.
    Approximate { probe_bits: usize },
}

struct Kept<'a> {
    sim: f64,
    canonical: &'a str,
    index: usize,
}

// Greater means worse, so the heap top is the weakest kept hit.
impl Ord for Kept<'_> {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .sim
            .total_cmp(&self.sim)
            .then_with(|| self.canonical.cmp(other.canonical))
    }
}

impl PartialOrd for Kept<'_> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for Kept<'_> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Kept<'_> {}

struct TopK<'a> {
    heap: BinaryHeap<Kept<'a>>,
    k: usize,
}

impl<'a> TopK<'a> {
    fn new(k: usize) -> Self {
        TopK {
            heap: BinaryHeap::with_capacity(k + 1),
            k,
        }
    }

    fn floor(&self) -> Option<f64> {
        (self.heap.len() == self.k).then(|| self.heap.peek().expect("full").sim)
    }

    fn offer(&mut self, item: Kept<'a>) {
        if self.heap.len() < self.k {
            self.heap.push(item);
        } else if item < *self.heap.peek().expect("full") {
            self.heap.pop();
            self.heap.push(item);
        }
    }

    fn into_hits(self) -> Vec<Hit> {
        self.heap
            .into_sorted_vec()
            .into_iter()
            .map(|k| Hit {
                index: k.index,
                similarity: k.sim,
            })
            .collect()
    }
}

fn similarity(q: &Fingerprint, r: &Fingerprint) -> f64 {
    let inter = q.intersection_count(r);
    let union = q.popcount() + r.popcount() - inter;
    if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    }
}

/// Upper bound on Tanimoto similarity given only the two popcounts.
fn bound(q: u32, r: u32) -> f64 {
    let (lo, hi) = if q < r { (q, r) } else { (r, q) };
    if hi == 0 {
        1.0
    } else {
        lo as f64 / hi as f64
    }
}

pub(super) fn exact(bank: &ExemplarBank, q: &Fingerprint, pool: usize) -> Vec<Hit> {
    let order = &bank.by_popcount;
    let pop = |pos: usize| bank.records[order[pos] as usize].fp.popcount();
    let qp = q.popcount();
    let split = order.partition_point(|&i| bank.records[i as usize].fp.popcount() < qp);
    let (mut down, mut up) = (split, split);
    let mut top = TopK::new(pool);
    loop {
        let bd = (down > 0).then(|| bound(qp, pop(down - 1)));
        let bu = (up < order.len()).then(|| bound(qp, pop(up)));
        let (pos, b) = match (bd, bu) {
            (None, None) => break,
            (Some(d), Some(u)) if d >= u => {
                down -= 1;
                (down, d)
            }
            (Some(d), None) => {
                down -= 1;
                (down, d)
            }
            (_, Some(u)) => {
                up += 1;
                (up - 1, u)
            }
        };
        if top.floor().is_some_and(|f| b < f) {
            break;
        }
        let index = order[pos] as usize;
        let r = &bank.records[index];
        top.offer(Kept {
            sim: similarity(q, &r.fp),
            canonical: &r.canonical,
            index,
        });
    }
    top.into_hits()
}

pub(super) fn approximate(bank: &ExemplarBank, q: &Fingerprint, pool: usize, probe_bits: usize) -> Vec<Hit> {
    let Some(postings) = &bank.postings else {
        log::debug!("approximate recall without postings; scanning exactly");
        return exact(bank, q, pool);
    };
    let mut bits: Vec<usize> = q.ones().collect();
    if bits.is_empty() {
        return exact(bank, q, pool);
    }
    bits.sort_by_key(|&b| (postings[b].len(), b));
    if probe_bits > 0 {
        bits.truncate(probe_bits);
    }
    let mut seen = vec![false; bank.records.len()];
    let mut top = TopK::new(pool);
    for b in bits {
        for &i in &postings[b] {
            let i = i as usize;
            if std::mem::replace(&mut seen[i], true) {
                continue;
            }
            let r = &bank.records[i];
            top.offer(Kept {
                sim: similarity(q, &r.fp),
                canonical: &r.canonical,
                index: i,
            });
        }
    }
    top.into_hits()
}

/// Scores every record; reference for the pruned scan.
pub fn brute_force_recall(bank: &ExemplarBank, q: &Fingerprint, pool: usize) -> Vec<Hit> {
    let mut all: Vec<(f64, &str, usize)> = bank
        .records
        .iter()
        .enumerate()
        .map(|(i, r)| (similarity(q, &r.fp), r.canonical.as_str(), i))
        .collect();
    all.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(b.1)));
    all.into_iter()
        .take(pool)
        .map(|(similarity, _, index)| Hit { index, similarity })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exembank::ExemplarRecord;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_bank(n: usize, seed: u64) -> ExemplarBank {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let records = (0..n).map(|i| {
            let bits: Vec<usize> = (0..rng.random_range(0..24)).map(|_| rng.random_range(0..256)).collect();
            ExemplarRecord {
                canonical: format!("R{i:05}"),
                fp: Fingerprint::from_indices(256, 2, &bits),
                props: Default::default(),
            }
        });
        ExemplarBank::from_records(256, 2, records)
    }

    #[test]
    fn pruned_scan_matches_full_scan() {
        let bank = random_bank(1000, 7);
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..50 {
            let bits: Vec<usize> = (0..rng.random_range(0..24)).map(|_| rng.random_range(0..256)).collect();
            let q = Fingerprint::from_indices(256, 2, &bits);
            for pool in [1, 7, 50] {
                assert_eq!(exact(&bank, &q, pool), brute_force_recall(&bank, &q, pool));
            }
        }
    }

    #[test]
    fn full_probe_approximate_equals_exact_on_overlapping_hits() {
        let mut bank = random_bank(500, 3);
        bank.build_postings();
        let q = bank
            .records()
            .iter()
            .find(|r| r.fp.popcount() >= 10)
            .unwrap()
            .fp
            .clone();
        let ex: Vec<Hit> = exact(&bank, &q, 20)
            .into_iter()
            .filter(|h| h.similarity > 0.0)
            .collect();
        let ap = approximate(&bank, &q, 20, 0);
        assert!(ex.len() >= 5);
        assert_eq!(ex, ap);
    }

    #[test]
    fn empty_query_matches_empty_records() {
        let bank = random_bank(300, 11);
        let q = Fingerprint::zeros(256, 2);
        let hits = exact(&bank, &q, 3);
        assert_eq!(hits, brute_force_recall(&bank, &q, 3));
    }
}
