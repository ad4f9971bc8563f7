//! Budgeted search on the bundled memory fixture with and without the
//! exemplar bank. The target carries an iodine that random edits never
//! introduce, so only the memory-guided run reaches it.

use std::path::Path;
use std::sync::Arc;

use molforge::env::Memories;
use molforge::exembank::{build_bank, parse_corpus};
use molforge::harness::{run_leads, RetrievalGreedy, SearchConfig};
use molforge::molgraph::parse;
use molforge::oracles::Objective;

fn main() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/memory");
    let (obj, _) = Objective::load(&dir.join("objective.toml")).unwrap();
    let obj = Arc::new(obj);
    let (rows, _) = parse_corpus(&std::fs::read_to_string(dir.join("bank.smi")).unwrap());
    let (bank, _) = build_bank(rows, &[]);
    let bank = Arc::new(bank);
    let leads = vec![parse("CCOc1ccc(C(N)=O)cc1").unwrap()];
    let cfg = SearchConfig {
        seed: 7,
        ..SearchConfig::default()
    };

    for (label, mut memories) in [
        ("memory on ", Memories { exemplars: Some(bank.clone()), skills: None }),
        ("memory off", Memories::none()),
    ] {
        let out = run_leads(&leads, &cfg, &RetrievalGreedy, &mut memories, &obj).unwrap();
        let lead = &out.report.leads[0];
        println!(
            "{label}: SR {:.1}%  best {}  calls {}",
            out.report.sr, lead.best, lead.calls_used
        );
    }
}
