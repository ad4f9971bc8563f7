use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::chemfeat::{detect_functional_groups, ecfp4, jaccard, tanimoto, Fingerprint, FunctionalGroupSet};
use crate::data::write_atomic;
use crate::molgraph::{parse, Molecule, MolError};

use super::card::EditCard;
use super::summarize::Summarizer;

pub const DEFAULT_CAPACITY: usize = 1000;
pub const DEFAULT_HARVEST_DELTA: f64 = 0.05;

/// A strategy sentence together with the edit it was distilled from.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SkillCard {
    pub id: u64,
    pub task: String,
    pub text: String,
    pub delta: f64,
    pub fp_key: Fingerprint,
    pub fg_tags: FunctionalGroupSet,
    /// Insertion sequence number; larger is newer.
    pub seq: u64,
    #[serde(flatten)]
    pub card: EditCard,
}

impl SkillCard {
    /// Keys the card by its before-molecule. `id` and `seq` are assigned on
    /// insertion.
    pub fn new(card: EditCard, text: String, task: &str) -> Result<SkillCard, MolError> {
        let before = parse(&card.before)?;
        Ok(SkillCard {
            id: 0,
            task: task.to_string(),
            text,
            delta: card.delta(),
            fp_key: ecfp4(&before),
            fg_tags: detect_functional_groups(&before),
            seq: 0,
            card,
        })
    }

    fn pair(&self) -> (&str, &str) {
        (&self.card.before, &self.card.after)
    }
}

#[derive(Debug, Clone, Default, PartialEq, serde::Serialize)]
pub struct InsertReport {
    pub inserted: Vec<u64>,
    /// Ids of existing cards whose improvement was raised by a duplicate.
    pub merged: Vec<u64>,
    /// Duplicates that did not beat the stored improvement.
    pub ignored: usize,
    /// Cards with a non-positive improvement, never stored.
    pub rejected: usize,
    pub evicted: Vec<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SkillQuery {
    pub k_fp: usize,
    pub k_fg: usize,
    pub gamma_fp: f64,
    pub gamma_fg: f64,
}

impl Default for SkillQuery {
    fn default() -> Self {
        SkillQuery {
            k_fp: 3,
            k_fg: 3,
            gamma_fp: 0.4,
            gamma_fg: 0.5,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SkillIoError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}:{line}: {msg}")]
    Record { path: PathBuf, line: usize, msg: String },
}

/// Task-keyed skill cards with a per-task capacity.
///
/// Wrap in a `RwLock` to share: `insert` takes `&mut self` and finishes its
/// merge and eviction before returning, so readers never see a partial batch.
#[derive(Debug, Clone, PartialEq)]
pub struct SkillBank {
    tasks: BTreeMap<String, Vec<SkillCard>>,
    capacity: usize,
    next_id: u64,
    next_seq: u64,
}

impl Default for SkillBank {
    fn default() -> Self {
        SkillBank::new(DEFAULT_CAPACITY)
    }
}

impl SkillBank {
    pub fn new(capacity: usize) -> SkillBank {
        assert!(capacity > 0, "skill bank capacity must be positive");
        SkillBank {
            tasks: BTreeMap::new(),
            capacity,
            next_id: 1,
            next_seq: 1,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn cards(&self, task: &str) -> &[SkillCard] {
        self.tasks.get(task).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn tasks(&self) -> impl Iterator<Item = &str> {
        self.tasks.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.tasks.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Merges `cards` into the task's bank, then evicts down to capacity by
    /// improvement (newer first among equals).
    pub fn insert(&mut self, task: &str, cards: Vec<SkillCard>) -> InsertReport {
        let mut report = InsertReport::default();
        let bank = self.tasks.entry(task.to_string()).or_default();
        for mut c in cards {
            if !(c.delta > 0.0) {
                report.rejected += 1;
                continue;
            }
            if let Some(existing) = bank.iter_mut().find(|e| e.pair() == c.pair()) {
                if c.delta > existing.delta {
                    existing.text = c.text;
                    existing.delta = c.delta;
                    existing.card = c.card;
                    if !report.merged.contains(&existing.id) && !report.inserted.contains(&existing.id) {
                        report.merged.push(existing.id);
                    }
                } else {
                    report.ignored += 1;
                }
                continue;
            }
            c.id = self.next_id;
            c.seq = self.next_seq;
            c.task = task.to_string();
            self.next_id += 1;
            self.next_seq += 1;
            report.inserted.push(c.id);
            bank.push(c);
        }
        if bank.len() > self.capacity {
            let mut keep = vec![false; bank.len()];
            for &i in &retention_order(bank)[..self.capacity] {
                keep[i] = true;
            }
            let mut i = 0;
            bank.retain(|c| {
                let k = keep[i];
                i += 1;
                if !k {
                    report.evicted.push(c.id);
                }
                k
            });
            report.evicted.sort_unstable();
            report.inserted.retain(|id| !report.evicted.contains(id));
            report.merged.retain(|id| !report.evicted.contains(id));
        }
        report
    }

    /// Ids that a bank of `capacity` would evict from `task`, ascending.
    pub fn eviction_plan(&self, task: &str, capacity: usize) -> Vec<u64> {
        let cards = self.cards(task);
        let mut ids: Vec<u64> = retention_order(cards).into_iter().skip(capacity).map(|i| cards[i].id).collect();
        ids.sort_unstable();
        ids
    }

    /// Summarizes each edit card and inserts the results.
    pub fn absorb(&mut self, task: &str, cards: &[EditCard], summarizer: &dyn Summarizer) -> InsertReport {
        let mut skills = Vec::with_capacity(cards.len());
        for c in cards {
            let text = summarizer.summarize(c, task);
            match SkillCard::new(c.clone(), text, task) {
                Ok(s) => skills.push(s),
                Err(e) => log::warn!("skipping card {:?}: {e}", c.before),
            }
        }
        self.insert(task, skills)
    }

    pub fn save(&self, path: &Path) -> Result<(), SkillIoError> {
        let mut text = String::new();
        for c in self.tasks.values().flatten() {
            text.push_str(&serde_json::to_string(c).expect("plain data serializes"));
            text.push('\n');
        }
        write_atomic(path, text.as_bytes()).map_err(|source| SkillIoError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: &Path, capacity: usize) -> Result<SkillBank, SkillIoError> {
        let text = std::fs::read_to_string(path).map_err(|source| SkillIoError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        SkillBank::parse_jsonl(&text, capacity).map_err(|(line, msg)| SkillIoError::Record {
            path: path.to_path_buf(),
            line,
            msg,
        })
    }

    /// Rebuilds a bank from JSONL, keeping stored ids and sequence numbers.
    pub fn parse_jsonl(text: &str, capacity: usize) -> Result<SkillBank, (usize, String)> {
        let mut bank = SkillBank::new(capacity);
        for (i, l) in text.lines().enumerate() {
            if l.trim().is_empty() {
                continue;
            }
            let c: SkillCard = serde_json::from_str(l).map_err(|e| (i + 1, e.to_string()))?;
            if c.text.trim().is_empty() {
                return Err((i + 1, "empty strategy text".into()));
            }
            let cards = bank.tasks.entry(c.task.clone()).or_default();
            if cards.iter().any(|e| e.pair() == c.pair()) {
                return Err((i + 1, format!("duplicate edit {} -> {}", c.card.before, c.card.after)));
            }
            bank.next_id = bank.next_id.max(c.id + 1);
            bank.next_seq = bank.next_seq.max(c.seq + 1);
            cards.push(c);
        }
        Ok(bank)
    }
}

/// Card indices from most to least worth keeping: improvement, then newer.
fn retention_order(cards: &[SkillCard]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..cards.len()).collect();
    order.sort_by(|&a, &b| cards[b].delta.total_cmp(&cards[a].delta).then(cards[b].seq.cmp(&cards[a].seq)));
    order
}

fn channel(
    cards: &[SkillCard],
    k: usize,
    gamma: f64,
    sim: impl Fn(&SkillCard) -> f64,
) -> Vec<(&SkillCard, f64)> {
    let mut passing: Vec<(&SkillCard, f64)> = cards
        .iter()
        .map(|c| (c, sim(c)))
        .filter(|&(_, s)| s >= gamma)
        .collect();
    passing.sort_by(|a, b| {
        b.0.delta
            .total_cmp(&a.0.delta)
            .then(b.1.total_cmp(&a.1))
            .then(a.0.id.cmp(&b.0.id))
    });
    passing.truncate(k);
    passing
}

/// Two-channel recall: fingerprint similarity of the card's source molecule
/// and functional-group overlap. Each channel keeps its threshold passers,
/// ranks them by improvement and takes its top `k`; fingerprint hits come
/// first in the union.
pub fn retrieve_skills<'a>(bank: &'a SkillBank, current: &Molecule, task: &str, q: &SkillQuery) -> Vec<&'a SkillCard> {
    let cards = bank.cards(task);
    let fp = ecfp4(current);
    let fg = detect_functional_groups(current);
    let by_fp = channel(cards, q.k_fp, q.gamma_fp, |c| tanimoto(&fp, &c.fp_key).unwrap_or(0.0));
    let by_fg = channel(cards, q.k_fg, q.gamma_fg, |c| jaccard(&fg, &c.fg_tags));
    let mut out: Vec<&SkillCard> = Vec::with_capacity(by_fp.len() + by_fg.len());
    for (c, _) in by_fp.into_iter().chain(by_fg) {
        if !out.iter().any(|o| o.id == c.id) {
            out.push(c);
        }
    }
    out
}

pub fn render_skill_block(skills: &[&SkillCard], task: &str) -> String {
    let mut s = format!("=== Potential Useful Strategies for {task} ===\n");
    for (i, c) in skills.iter().enumerate() {
        s.push_str(&format!("{}. {}\n", i + 1, c.text));
    }
    s
}
