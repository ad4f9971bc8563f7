//! Static exemplar memory: a deduplicated, fingerprinted bank of molecules
//! with stored properties, queried by recall around the current molecule
//! and filtered by similarity to the lead.

mod io;
mod recall;

use std::collections::HashMap;
use std::sync::Arc;

pub use io::{load_bank, parse_corpus, save_bank, BankIoError, CorpusRow, FP_MAGIC};
pub use recall::{brute_force_recall, Hit, RecallMode};

use crate::chemfeat::{morgan_fp, tanimoto, Fingerprint, DEFAULT_RADIUS, DEFAULT_WIDTH};
use crate::molgraph::{parse, Molecule};
use crate::oracles::{Objective, Oracle, PropertyMap};
use crate::template::round_half_up;

pub const DEFAULT_POOL_SIZE: usize = 200;
pub const DEFAULT_K: usize = 3;
pub const DEFAULT_LEAD_THRESHOLD: f64 = 0.4;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BankError {
    #[error("exemplar bank is empty")]
    EmptyBank,
    #[error("invalid retrieval parameter: {0}")]
    BadParameter(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExemplarRecord {
    pub canonical: String,
    pub fp: Fingerprint,
    pub props: PropertyMap,
}

/// A retrieved record with its objective score and lead similarity.
#[derive(Debug, Clone, PartialEq)]
pub struct Exemplar {
    pub record: ExemplarRecord,
    pub score: f64,
    pub lead_similarity: f64,
}

/// Rows skipped while building a bank.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BuildReport {
    pub accepted: usize,
    pub duplicates: usize,
    pub skipped: Vec<(usize, String)>,
}

#[derive(Debug, Clone)]
pub struct ExemplarBank {
    records: Vec<ExemplarRecord>,
    by_canonical: HashMap<String, usize>,
    width: usize,
    radius: u32,
    /// Record indices sorted by (popcount, canonical).
    by_popcount: Vec<u32>,
    postings: Option<Vec<Vec<u32>>>,
}

impl ExemplarBank {
    pub fn new() -> ExemplarBank {
        Self::with_shape(DEFAULT_WIDTH, DEFAULT_RADIUS)
    }

    pub fn with_shape(width: usize, radius: u32) -> ExemplarBank {
        ExemplarBank {
            records: Vec::new(),
            by_canonical: HashMap::new(),
            width,
            radius,
            by_popcount: Vec::new(),
            postings: None,
        }
    }

    /// Builds from pre-fingerprinted records; later duplicates are dropped.
    pub fn from_records(
        width: usize,
        radius: u32,
        records: impl IntoIterator<Item = ExemplarRecord>,
    ) -> ExemplarBank {
        let mut bank = Self::with_shape(width, radius);
        for r in records {
            bank.push(r);
        }
        bank.reindex();
        bank
    }

    fn push(&mut self, r: ExemplarRecord) -> bool {
        if self.by_canonical.contains_key(&r.canonical) {
            return false;
        }
        self.by_canonical.insert(r.canonical.clone(), self.records.len());
        self.records.push(r);
        true
    }

    fn reindex(&mut self) {
        let mut order: Vec<u32> = (0..self.records.len() as u32).collect();
        order.sort_by(|&a, &b| {
            let (ra, rb) = (&self.records[a as usize], &self.records[b as usize]);
            ra.fp
                .popcount()
                .cmp(&rb.fp.popcount())
                .then_with(|| ra.canonical.cmp(&rb.canonical))
        });
        self.by_popcount = order;
        if self.postings.is_some() {
            self.build_postings();
        }
    }

    /// Enables the inverted bit index used by approximate recall.
    pub fn build_postings(&mut self) {
        let mut postings = vec![Vec::new(); self.width];
        for (i, r) in self.records.iter().enumerate() {
            for b in r.fp.ones() {
                postings[b].push(i as u32);
            }
        }
        self.postings = Some(postings);
    }

    pub fn has_postings(&self) -> bool {
        self.postings.is_some()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn radius(&self) -> u32 {
        self.radius
    }

    pub fn records(&self) -> &[ExemplarRecord] {
        &self.records
    }

    pub fn get(&self, canonical: &str) -> Option<&ExemplarRecord> {
        self.by_canonical.get(canonical).map(|&i| &self.records[i])
    }

    pub fn contains(&self, canonical: &str) -> bool {
        self.by_canonical.contains_key(canonical)
    }

    /// Fingerprint of `m` in this bank's shape.
    pub fn fingerprint(&self, m: &Molecule) -> Fingerprint {
        morgan_fp(m, self.radius, self.width).expect("bank width validated at construction")
    }

    pub fn record_for(&self, m: &Molecule, props: PropertyMap) -> ExemplarRecord {
        ExemplarRecord {
            canonical: m.canonical().to_string(),
            fp: self.fingerprint(m),
            props,
        }
    }
}

impl Default for ExemplarBank {
    fn default() -> Self {
        Self::new()
    }
}

/// Builds a bank from corpus rows, filling properties missing from a row by
/// evaluating `oracles` directly (offline; no optimization budget involved).
pub fn build_bank<I>(rows: I, oracles: &[Arc<Oracle>]) -> (ExemplarBank, BuildReport)
where
    I: IntoIterator<Item = CorpusRow>,
{
    build_bank_with_shape(rows, oracles, DEFAULT_WIDTH, DEFAULT_RADIUS)
}

pub fn build_bank_with_shape<I>(
    rows: I,
    oracles: &[Arc<Oracle>],
    width: usize,
    radius: u32,
) -> (ExemplarBank, BuildReport)
where
    I: IntoIterator<Item = CorpusRow>,
{
    let mut bank = ExemplarBank::with_shape(width, radius);
    let mut report = BuildReport::default();
    'rows: for row in rows {
        let m = match parse(&row.smiles) {
            Ok(m) => m,
            Err(e) => {
                log::warn!("corpus line {}: {}: {e}", row.line, row.smiles);
                report.skipped.push((row.line, format!("{}: {e}", row.smiles)));
                continue;
            }
        };
        if bank.contains(m.canonical()) {
            report.duplicates += 1;
            continue;
        }
        let mut props = row.props;
        for o in oracles {
            if props.contains_key(o.name()) {
                continue;
            }
            match o.evaluate(&m) {
                Ok(v) => {
                    props.insert(o.name().to_string(), v);
                }
                Err(e) => {
                    log::warn!("corpus line {}: {}: {e}", row.line, row.smiles);
                    report.skipped.push((row.line, format!("{}: {e}", row.smiles)));
                    continue 'rows;
                }
            }
        }
        let record = bank.record_for(&m, props);
        bank.push(record);
        report.accepted += 1;
    }
    bank.reindex();
    (bank, report)
}

/// The `pool_size` records most similar to `query`.
pub fn candidate_recall(
    bank: &ExemplarBank,
    query: &Molecule,
    pool_size: usize,
    mode: RecallMode,
) -> Result<Vec<Hit>, BankError> {
    if bank.is_empty() {
        return Err(BankError::EmptyBank);
    }
    if pool_size == 0 {
        return Err(BankError::BadParameter("pool_size must be at least 1".into()));
    }
    let q = bank.fingerprint(query);
    Ok(match mode {
        RecallMode::Exact => recall::exact(bank, &q, pool_size),
        RecallMode::Approximate { probe_bits } => recall::approximate(bank, &q, pool_size, probe_bits),
    })
}

/// Retrieval parameters.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RetrievalConfig {
    pub k: usize,
    pub lead_threshold: f64,
    pub pool_size: usize,
    #[serde(default)]
    pub mode: RecallMode,
}

impl Default for RetrievalConfig {
    fn default() -> Self {
        RetrievalConfig {
            k: DEFAULT_K,
            lead_threshold: DEFAULT_LEAD_THRESHOLD,
            pool_size: DEFAULT_POOL_SIZE,
            mode: RecallMode::Exact,
        }
    }
}

/// Recall around `current`, keep records similar enough to `lead`, rank by
/// the objective score. Records lacking a term's property are not ranked.
pub fn retrieve_exemplars(
    bank: &ExemplarBank,
    current: &Molecule,
    lead: &Molecule,
    obj: &Objective,
    cfg: &RetrievalConfig,
) -> Result<Vec<Exemplar>, BankError> {
    if cfg.k == 0 {
        return Err(BankError::BadParameter("K must be at least 1".into()));
    }
    if !(0.0..=1.0).contains(&cfg.lead_threshold) {
        return Err(BankError::BadParameter(format!(
            "lead threshold {} outside [0, 1]",
            cfg.lead_threshold
        )));
    }
    let pool = candidate_recall(bank, current, cfg.pool_size, cfg.mode)?;
    let lead_fp = bank.fingerprint(lead);
    let mut kept: Vec<Exemplar> = pool
        .into_iter()
        .filter_map(|hit| {
            let record = &bank.records[hit.index];
            let lead_similarity = tanimoto(&record.fp, &lead_fp).expect("same bank shape");
            if lead_similarity < cfg.lead_threshold {
                return None;
            }
            let score = obj.score(&record.props)?;
            Some(Exemplar {
                record: record.clone(),
                score,
                lead_similarity,
            })
        })
        .collect();
    kept.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then_with(|| b.lead_similarity.total_cmp(&a.lead_similarity))
            .then_with(|| a.record.canonical.cmp(&b.record.canonical))
    });
    kept.truncate(cfg.k);
    Ok(kept)
}

pub const BLOCK_HEADER: &str = "=== SIMILAR HIGH-SCORING MOLECULES FOR REFERENCE ===";
pub const BLOCK_FOOTER: &str = "Learn from structural patterns, but do not copy directly.";

/// Reference block appended to the observation.
pub fn render_exemplar_block(exemplars: &[Exemplar]) -> String {
    let mut out = String::new();
    out.push_str(BLOCK_HEADER);
    out.push('\n');
    out.push_str(&format!(
        "Here are {} similar molecules with high target scores (higher is better):\n\n",
        exemplars.len()
    ));
    for (i, e) in exemplars.iter().enumerate() {
        out.push_str(&format!("{}. SMILES: {}\n", i + 1, e.record.canonical));
        out.push_str(&format!("    target score: {}\n", round_half_up(e.score, 3)));
        out.push_str(&format!(
            "    Similarity to original lead: {}\n\n",
            round_half_up(e.lead_similarity, 3)
        ));
    }
    out.push_str(BLOCK_FOOTER);
    out.push('\n');
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracles::preset_criterion;

    fn row(s: &str, props: &[(&str, f64)]) -> CorpusRow {
        CorpusRow {
            line: 0,
            smiles: s.to_string(),
            props: props.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
        }
    }

    fn qed_objective() -> Objective {
        Objective::single(
            Oracle::builtin("qed_lite").unwrap(),
            preset_criterion("qed", false).unwrap(),
            0.4,
        )
        .unwrap()
    }

    #[test]
    fn dedup_and_skip() {
        let rows = vec![row("CCO", &[]), row("OCC", &[]), row("C1CC", &[]), row("c1ccccc1", &[])];
        let qed = Arc::new(Oracle::builtin("qed_lite").unwrap());
        let (bank, report) = build_bank(rows, &[qed]);
        assert_eq!(bank.len(), 2);
        assert_eq!(report.duplicates, 1);
        assert_eq!(report.skipped.len(), 1);
        assert!(bank.records().iter().all(|r| r.props.contains_key("qed_lite")));
    }

    #[test]
    fn provided_props_are_kept() {
        let qed = Arc::new(Oracle::builtin("qed_lite").unwrap());
        let (bank, _) = build_bank(vec![row("CCO", &[("qed_lite", 0.25)])], &[qed]);
        assert_eq!(bank.get("CCO").unwrap().props["qed_lite"], 0.25);
    }

    #[test]
    fn identical_member_ranks_first() {
        let rows = ["CCO", "CCCO", "c1ccccc1O", "CC(=O)O"].map(|s| row(s, &[]));
        let (bank, _) = build_bank(rows, &[]);
        let q = parse("OCC").unwrap();
        let hits = candidate_recall(&bank, &q, 2, RecallMode::Exact).unwrap();
        assert_eq!(bank.records()[hits[0].index].canonical, "CCO");
        assert_eq!(hits[0].similarity, 1.0);
        let all = candidate_recall(&bank, &q, 10, RecallMode::Exact).unwrap();
        assert_eq!(all.len(), 4);
    }

    #[test]
    fn empty_bank() {
        let bank = ExemplarBank::new();
        let q = parse("C").unwrap();
        assert_eq!(
            candidate_recall(&bank, &q, 5, RecallMode::Exact),
            Err(BankError::EmptyBank)
        );
    }

    #[test]
    fn lead_filter_applies() {
        let rows = vec![
            row("CCCCCCCCO", &[("qed_lite", 0.9)]),
            row("c1ccc(CO)cc1", &[("qed_lite", 0.1)]),
            row("c1ccc(CCO)cc1", &[("qed_lite", 0.2)]),
        ];
        let (bank, _) = build_bank(rows, &[]);
        let lead = parse("c1ccc(CCO)cc1").unwrap();
        let cfg = RetrievalConfig {
            lead_threshold: 0.99,
            ..Default::default()
        };
        let got = retrieve_exemplars(&bank, &lead, &lead, &qed_objective(), &cfg).unwrap();
        assert_eq!(got.len(), 1);
        assert_eq!(got[0].record.canonical, lead.canonical());
        let cfg = RetrievalConfig {
            lead_threshold: 0.0,
            ..Default::default()
        };
        let got = retrieve_exemplars(&bank, &lead, &lead, &qed_objective(), &cfg).unwrap();
        let scores: Vec<f64> = got.iter().map(|e| e.score).collect();
        assert_eq!(scores, vec![0.9, 0.2, 0.1]);
    }

    #[test]
    fn block_format() {
        let fp = Fingerprint::zeros(64, 2);
        let ex = |s: &str, score: f64, sim: f64| Exemplar {
            record: ExemplarRecord {
                canonical: s.into(),
                fp: fp.clone(),
                props: PropertyMap::new(),
            },
            score,
            lead_similarity: sim,
        };
        let block = render_exemplar_block(&[ex("CCO", 0.8915, 0.654), ex("CCN", 0.5, 0.41)]);
        let expect = "=== SIMILAR HIGH-SCORING MOLECULES FOR REFERENCE ===\n\
Here are 2 similar molecules with high target scores (higher is better):\n\
\n\
1. SMILES: CCO\n    target score: 0.892\n    Similarity to original lead: 0.654\n\
\n\
2. SMILES: CCN\n    target score: 0.500\n    Similarity to original lead: 0.410\n\
\n\
Learn from structural patterns, but do not copy directly.\n";
        assert_eq!(block, expect);
    }
}
