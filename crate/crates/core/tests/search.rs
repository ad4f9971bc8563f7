mod common;

use std::sync::Arc;

use molforge::env::Memories;
use molforge::exembank::{build_bank, parse_corpus};
use molforge::harness::{optimize_lead, run_leads, RandomEdit, RetrievalGreedy, SearchConfig};
use molforge::molgraph::parse;
use molforge::oracles::Objective;

use common::*;

fn qed() -> Arc<Objective> {
    Arc::new(Objective::load(&fixture("objectives/qed.toml")).unwrap().0)
}

#[test]
fn unit_budget_evaluates_only_the_lead() {
    let lead = parse("COc1ccc(cc1)S(N)(=O)=O").unwrap();
    let cfg = SearchConfig {
        budget: 1,
        cache: false,
        generations: 3,
        rollouts: 4,
        ..SearchConfig::default()
    };
    let s = optimize_lead(&lead, &cfg, &RandomEdit, &mut Memories::none(), &qed(), 0).unwrap();
    assert_eq!(s.calls_used, 1);
    assert_eq!(s.incumbent.molecule.canonical(), s.lead.molecule.canonical());
    assert!(s.trajectories.iter().flat_map(|t| &t.steps).all(|st| st.cost == 0));
}

#[test]
fn search_is_seed_deterministic() {
    let leads: Vec<_> = read_fixture("leads.smi").lines().map(|l| parse(l).unwrap()).collect();
    let cfg = SearchConfig {
        generations: 2,
        rollouts: 6,
        seed: 11,
        ..SearchConfig::default()
    };
    let a = run_leads(&leads, &cfg, &RandomEdit, &mut Memories::none(), &qed()).unwrap();
    let b = run_leads(&leads, &cfg, &RandomEdit, &mut Memories::none(), &qed()).unwrap();
    assert_eq!(a.report, b.report);
    let c = run_leads(&leads, &SearchConfig { seed: 12, ..cfg }, &RandomEdit, &mut Memories::none(), &qed()).unwrap();
    let actions = |r: &molforge::harness::RunOutput| {
        r.searches
            .iter()
            .flat_map(|s| &s.trajectories)
            .flat_map(|t| t.steps.iter().map(|s| s.action.clone()))
            .collect::<Vec<_>>()
    };
    assert_ne!(actions(&a), actions(&c));
}

#[test]
fn injected_exemplar_leads_greedy_policy_to_target() {
    let (obj, _) = Objective::load(&fixture("memory/objective.toml")).unwrap();
    let obj = Arc::new(obj);
    let (rows, _) = parse_corpus(&read_fixture("memory/bank.smi"));
    let (bank, _) = build_bank(rows, &[]);
    let lead = parse("CCOc1ccc(C(N)=O)cc1").unwrap();
    let cfg = SearchConfig {
        seed: 7,
        ..SearchConfig::default()
    };
    let mut memories = Memories {
        exemplars: Some(Arc::new(bank)),
        skills: None,
    };
    let s = optimize_lead(&lead, &cfg, &RetrievalGreedy, &mut memories, &obj, 0).unwrap();
    let target = parse("CCOc1ccc(C(N)=O)cc1I").unwrap().canonical().to_string();
    assert_eq!(s.success.as_ref().map(|f| f.molecule.canonical().to_string()), Some(target.clone()));
    let first_hit = s
        .trajectories
        .iter()
        .flat_map(|t| &t.steps)
        .position(|st| st.canonical.as_deref() == Some(target.as_str()))
        .unwrap();
    let injected_before = s
        .trajectories
        .iter()
        .flat_map(|t| &t.steps)
        .take(first_hit)
        .any(|st| st.injected_source.is_some());
    assert!(injected_before, "target reached without any injection");
    assert!(s.calls_used <= cfg.budget);
}
