//! Build an exemplar bank from the bundled corpus and print the reference
//! block a stalled rollout would receive.

use std::path::Path;
use std::sync::Arc;

use molforge::exembank::{build_bank, parse_corpus, render_exemplar_block, retrieve_exemplars, RetrievalConfig};
use molforge::molgraph::parse;
use molforge::oracles::{preset_criterion, Objective, Oracle};

fn main() {
    let corpus = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/corpus.smi");
    let (rows, errors) = parse_corpus(&std::fs::read_to_string(corpus).unwrap());
    assert!(errors.is_empty());
    let qed = Arc::new(Oracle::builtin("qed_lite").unwrap());
    let (bank, report) = build_bank(rows, &[qed]);
    println!("bank: {} records, {} duplicates\n", bank.len(), report.duplicates);

    let obj = Objective::single(Oracle::builtin("qed_lite").unwrap(), preset_criterion("qed", false).unwrap(), 0.4).unwrap();
    let lead = parse("COc1ccc(C(N)=O)cc1").unwrap();
    let hits = retrieve_exemplars(&bank, &lead, &lead, &obj, &RetrievalConfig::default()).unwrap();
    print!("{}", render_exemplar_block(&hits));
}
