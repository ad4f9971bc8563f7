//! Acceptance suite: one PASS/FAIL line per criterion; exits nonzero when
//! any criterion fails.

mod common;

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use molforge::chemfeat::{detect_functional_groups, ecfp4, Fingerprint};
use molforge::credit::{gae, ppo_clip_term};
use molforge::env::{compute_reward, Branch, EnvConfig, EnvState, Memories, MemorySource, RewardContext};
use molforge::exembank::{
    build_bank, parse_corpus, render_exemplar_block, retrieve_exemplars, ExemplarBank, ExemplarRecord,
    RetrievalConfig,
};
use molforge::harness::{
    metrics, run_leads, temperature, LeadOutcome, Policy, PolicyInput, RandomEdit, RetrievalGreedy, SearchConfig,
    TermSign,
};
use molforge::molgraph::{mutate, parse, EditOp, Molecule};
use molforge::oracles::{
    BudgetLedger, Comparator, Direction, Objective, Oracle, PropertyMap, SuccessCriterion, TableOracle,
};
use molforge::skillbank::{
    build_edit_card, harvest, render_skill_block, retrieve_skills, SkillBank, SkillCard, SkillQuery,
    TemplateSummarizer, DEFAULT_TIME_CAP,
};

use common::*;

type Outcome = Result<String, String>;

macro_rules! check {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn table_objective(name: &str, rows: &str, default: f64, threshold: f64) -> Objective {
    let t = TableOracle::parse(rows).unwrap().with_default(Some(default));
    let o = Oracle::table(name, t, Direction::Maximize);
    Objective::single(o, SuccessCriterion::absolute(Comparator::Ge, threshold), 0.4).unwrap()
}

fn canon(s: &str) -> String {
    parse(s).unwrap().canonical().to_string()
}

fn reward_table() -> Outcome {
    let start = Instant::now();
    let single = table_objective(
        "p",
        "CCOc1ccccc1\t0.50\nCCOc1ccccc1F\t0.60\nCCOc1ccccc1Cl\t0.40\nCCOc1ccccc1N\t0.95\n\
         CCOc1ccccc1Br\t0.50\nCCOc1ccccc1C\t0.55\nCCOc1ccccc1O\t0.45\n",
        0.3,
        0.9,
    );
    let q = TableOracle::parse("CCOc1ccccc1\t0.5\nCCOc1ccccc1F\t0.75\nCCOc1ccccc1Cl\t0.25\n").unwrap();
    let s = TableOracle::parse("CCOc1ccccc1\t3.0\nCCOc1ccccc1F\t2.5\nCCOc1ccccc1Cl\t3.5\n").unwrap();
    let multi = Objective::new(
        "q+s",
        vec![
            (
                Arc::new(Oracle::table("q", q, Direction::Maximize)),
                1.0,
                SuccessCriterion::delta(Comparator::Ge, 0.1),
            ),
            (
                Arc::new(Oracle::table("s", s, Direction::Minimize)),
                1.0,
                SuccessCriterion::delta(Comparator::Le, -0.5),
            ),
        ],
        0.4,
    )
    .unwrap();

    let lead = parse("CCOc1ccccc1").unwrap();
    let lead_fp = ecfp4(&lead);
    let sim = |p: &str| mol_tanimoto(&lead, &parse(p).unwrap());
    let dissim = |p: &str| -2.0 * (0.4 - sim(p));
    let br = canon("CCOc1ccccc1Br");
    let far = canon("CCCCCCCCCC");
    let lead_c = canon("CCOc1ccccc1");

    // (objective, current, current score, proposal, injected, copy penalty, reward, branch)
    let m = &multi;
    let o = &single;
    #[rustfmt::skip]
    let cases: Vec<(&Objective, &str, f64, &str, Vec<String>, f64, f64, Branch)> = vec![
        (o, "CCOc1ccccc1", 0.5, "C1CC", vec![], -0.3, -0.5, Branch::Invalid),
        (o, "CCOc1ccccc1", 0.5, "", vec![], -0.3, -0.5, Branch::Invalid),
        (o, "CCOc1ccccc1", 0.5, "c1ccccc1(", vec![], -0.3, -0.5, Branch::Invalid),
        (o, "CCOc1ccccc1", 0.5, "Xx", vec![], -0.3, -0.5, Branch::Invalid),
        (o, "CCOc1ccccc1", 0.5, "C1CC", vec![far.clone()], -0.7, -0.5, Branch::Invalid),
        (o, "CCOc1ccccc1", 0.5, "c1ccccc1OCC", vec![], -0.3, -0.3, Branch::NoOp),
        (o, "CCOc1ccccc1", 0.5, "CCOc1ccccc1", vec![lead_c.clone()], -0.7, -0.3, Branch::NoOp),
        (o, "CCOc1ccccc1F", 0.6, "Fc1ccccc1OCC", vec![], -0.3, -0.3, Branch::NoOp),
        (o, "CCOc1ccccc1", 0.5, "Brc1ccccc1OCC", vec![br.clone()], -0.3, -0.3, Branch::Copy),
        (o, "CCOc1ccccc1", 0.5, "Brc1ccccc1OCC", vec![far.clone(), br.clone()], -0.7, -0.7, Branch::Copy),
        (o, "CCOc1ccccc1", 0.5, "CCCCCCCCCC", vec![far.clone()], -0.7, -0.7, Branch::Copy),
        (o, "CCOc1ccccc1", 0.5, "CCCCCCCCCC", vec![], -0.3, dissim("CCCCCCCCCC"), Branch::Dissimilar),
        (o, "CCOc1ccccc1", 0.5, "c1ccncc1", vec![], -0.3, dissim("c1ccncc1"), Branch::Dissimilar),
        (o, "CCOc1ccccc1F", 0.6, "OCCO", vec![], -0.3, dissim("OCCO"), Branch::Dissimilar),
        (o, "CCOc1ccccc1", 0.5, "CCOc1ccccc1F", vec![], -0.3, 5.0 * (0.60 - 0.50), Branch::Improved),
        (o, "CCOc1ccccc1", 0.5, "CCOc1ccccc1Cl", vec![], -0.3, -(0.40f64 - 0.50).abs(), Branch::Degraded),
        (o, "CCOc1ccccc1", 0.5, "CCOc1ccccc1N", vec![], -0.3, 5.0 * (0.95 - 0.50), Branch::Improved),
        (o, "CCOc1ccccc1", 0.5, "CCOc1ccccc1Br", vec![], -0.3, 0.0, Branch::Degraded),
        (o, "CCOc1ccccc1F", 0.6, "CCOc1ccccc1", vec![], -0.3, -(0.50f64 - 0.60).abs(), Branch::Degraded),
        (o, "CCOc1ccccc1Cl", 0.4, "CCOc1ccccc1F", vec![], -0.3, 5.0 * (0.60 - 0.40), Branch::Improved),
        (o, "CCOc1ccccc1", 0.5, "CCOc1ccccc1C", vec![], -0.3, 5.0 * (0.55 - 0.50), Branch::Improved),
        (o, "CCOc1ccccc1", 0.5, "CCOc1ccccc1O", vec![], -0.3, -(0.45f64 - 0.50).abs(), Branch::Degraded),
        (o, "CCOc1ccccc1", 0.5, "CCOc1ccccc1CC", vec![], -0.3, -(0.30f64 - 0.50).abs(), Branch::Degraded),
        (m, "CCOc1ccccc1", -1.25, "CCOc1ccccc1F", vec![], -0.3, 1.875, Branch::Improved),
        (m, "CCOc1ccccc1", -1.25, "CCOc1ccccc1Cl", vec![], -0.3, -0.375, Branch::Degraded),
    ];
    let ledger = BudgetLedger::new(1000);
    for (i, (obj, cur, score, prop, injected, penalty, want, branch)) in cases.iter().enumerate() {
        let current = parse(cur).unwrap();
        let ctx = RewardContext {
            current: &current,
            current_score: *score,
            lead_fp: &lead_fp,
            objective: obj,
            injected,
            copy_penalty: *penalty,
        };
        let before = ledger.consumed();
        let out = compute_reward(&ctx, prop, &ledger);
        check!(out.branch == *branch, "case {i} ({prop:?}): branch {:?}, expected {branch:?}", out.branch);
        check!(out.reward == *want, "case {i} ({prop:?}): reward {}, expected {want}", out.reward);
        let charged = ledger.consumed() - before;
        check!(
            branch.evaluated() || charged == 0,
            "case {i}: pre-oracle branch consumed {charged} calls"
        );
    }
    let elapsed = start.elapsed();
    check!(elapsed < Duration::from_secs(1), "took {elapsed:?}");
    Ok(format!("{} cases, {elapsed:.2?}", cases.len()))
}

fn budget_soundness() -> Outcome {
    let start = Instant::now();
    let pool = corpus();
    let obj = Arc::new(Objective::single(
        Oracle::builtin("qed_lite").unwrap(),
        SuccessCriterion::absolute(Comparator::Ge, 2.0),
        0.4,
    )
    .unwrap());
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let leads: Vec<&Molecule> = pool.iter().step_by(25).take(20).collect();
    let mut rollouts = 0;
    let mut evaluated = 0u64;
    let mut rejected = 0u64;
    for lead in leads {
        let ledger = BudgetLedger::new(500).with_cache(false);
        let mut run_rollout = |rng: &mut ChaCha8Rng| -> Result<bool, String> {
            let before = ledger.consumed();
            let cfg = EnvConfig {
                seed: rng.random(),
                ..EnvConfig::default()
            };
            let Ok(mut st) = EnvState::reset(&cfg, obj.clone(), lead.clone(), Memories::none(), &ledger) else {
                check!(ledger.consumed() == 500, "reset failed before the budget ran out");
                return Ok(false);
            };
            check!(ledger.consumed() == before + 1, "lead evaluation not charged exactly once");
            let mut expected = before + 1;
            while !st.is_done() {
                let roll: f64 = rng.random();
                let action = if roll < 0.08 {
                    "C1CC".to_string()
                } else if roll < 0.16 {
                    pool[rng.random_range(0..pool.len())].canonical().to_string()
                } else if roll < 0.2 {
                    st.current().molecule.canonical().to_string()
                } else {
                    RandomEdit.act(&PolicyInput {
                        observation: "",
                        state: &st,
                        temperature: rng.random_range(0.9..=2.0),
                        seed: rng.random(),
                    })
                };
                let pre = ledger.consumed();
                let r = st.step(&action, &ledger).map_err(|e| e.to_string())?;
                let charged = ledger.consumed() - pre;
                check!(charged == r.budget_consumed, "step reported {} but ledger moved {charged}", r.budget_consumed);
                if r.branch.evaluated() {
                    check!(charged == 1, "branch-5 evaluation charged {charged}");
                    evaluated += 1;
                    expected += 1;
                } else {
                    check!(charged == 0, "{:?} consumed budget", r.branch);
                    rejected += 1;
                }
                check!(ledger.consumed() <= 500, "budget exceeded: {}", ledger.consumed());
            }
            check!(ledger.consumed() == expected, "rollout consumption {} != {expected}", ledger.consumed());
            Ok(true)
        };
        for _ in 0..50 {
            check!(run_rollout(&mut rng)?, "budget ran out within the first 50 rollouts");
            rollouts += 1;
        }
        // Keep going until the ceiling is reached.
        while run_rollout(&mut rng)? {}
        check!(ledger.consumed() <= 500, "budget exceeded: {}", ledger.consumed());
    }
    let elapsed = start.elapsed();
    check!(elapsed < Duration::from_secs(30), "took {elapsed:?}");
    Ok(format!(
        "{rollouts} rollouts, {evaluated} evaluations, {rejected} free rejections, {elapsed:.2?}"
    ))
}

fn molecule_pool(n: usize, seed: u64) -> Vec<Molecule> {
    let base = corpus();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for m in &base {
        if seen.insert(m.canonical().to_string()) {
            out.push(m.clone());
        }
    }
    while out.len() < n {
        let mut m = base[rng.random_range(0..base.len())].clone();
        for _ in 0..rng.random_range(1..=3) {
            let op = EditOp::KINDS[rng.random_range(0..EditOp::KINDS.len())];
            if let Ok(next) = mutate(&m, op, rng.random()) {
                m = next;
            }
        }
        if seen.insert(m.canonical().to_string()) {
            out.push(m);
        }
    }
    out
}

fn retrieval_equivalence() -> Outcome {
    let start = Instant::now();
    let pool = molecule_pool(2600, 3);
    let fps: Vec<Fingerprint> = pool.iter().map(ecfp4).collect();
    let obj = table_objective("p", "", 0.0, 0.9);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut compared = 0;
    for b in 0..50 {
        let size = rng.random_range(50..=2000);
        let mut idx: Vec<usize> = (0..pool.len()).collect();
        idx.shuffle(&mut rng);
        idx.truncate(size);
        let records = idx.iter().map(|&i| {
            let mut props = PropertyMap::new();
            if rng.random::<f64>() > 0.1 {
                props.insert("p".into(), (rng.random::<f64>() * 20.0).round() / 20.0);
            }
            ExemplarRecord {
                canonical: pool[i].canonical().to_string(),
                fp: fps[i].clone(),
                props,
            }
        });
        let bank = ExemplarBank::from_records(2048, 2, records.collect::<Vec<_>>());
        for _ in 0..4 {
            let current = &pool[rng.random_range(0..pool.len())];
            let lead = if rng.random::<bool>() {
                current.clone()
            } else {
                pool[rng.random_range(0..pool.len())].clone()
            };
            let cfg = RetrievalConfig {
                k: rng.random_range(1..=5),
                lead_threshold: [0.2, 0.3, 0.4, 0.5][rng.random_range(0..4)],
                pool_size: rng.random_range(5..=300),
                ..RetrievalConfig::default()
            };
            let got: Vec<String> = retrieve_exemplars(&bank, current, &lead, &obj, &cfg)
                .map_err(|e| e.to_string())?
                .into_iter()
                .map(|e| e.record.canonical)
                .collect();
            let want = brute_force_exemplars(&bank, current, &lead, "p", cfg.lead_threshold, cfg.pool_size, cfg.k);
            check!(got == want, "exemplar bank {b}: {got:?} != {want:?}");
            compared += 1;
        }
    }

    let template = build_edit_card(
        &parse("COc1ccccc1").unwrap(),
        &parse("Fc1ccccc1").unwrap(),
        0.5,
        0.6,
        DEFAULT_TIME_CAP,
    );
    let mut skill_compared = 0;
    for b in 0..50 {
        let mut bank = SkillBank::new(1000);
        let n = rng.random_range(1..=300);
        let cards: Vec<SkillCard> = (0..n)
            .map(|j| {
                let i = rng.random_range(0..pool.len());
                let mut card = template.clone();
                card.before = pool[i].canonical().to_string();
                card.after = format!("{}.{j}", card.before);
                let mut s = SkillCard::new(card, format!("skill {j}."), "t").unwrap();
                s.delta = 0.05 * rng.random_range(1..=8) as f64;
                s
            })
            .collect();
        bank.insert("t", cards);
        for _ in 0..4 {
            let current = &pool[rng.random_range(0..pool.len())];
            let q = SkillQuery {
                k_fp: rng.random_range(1..=5),
                k_fg: rng.random_range(1..=5),
                gamma_fp: [0.1, 0.2, 0.3, 0.4][rng.random_range(0..4)],
                gamma_fg: [0.3, 0.5, 0.7][rng.random_range(0..3)],
            };
            let got: Vec<u64> = retrieve_skills(&bank, current, "t", &q).iter().map(|c| c.id).collect();
            let want = brute_force_skills(bank.cards("t"), current, &q);
            check!(got == want, "skill bank {b}: {got:?} != {want:?}");
            skill_compared += 1;
        }
    }
    let elapsed = start.elapsed();
    check!(elapsed < Duration::from_secs(60), "took {elapsed:?}");
    Ok(format!("{compared} exemplar and {skill_compared} skill queries, {elapsed:.2?}"))
}

fn capacity_control() -> Outcome {
    let template = build_edit_card(
        &parse("COc1ccccc1").unwrap(),
        &parse("Fc1ccccc1").unwrap(),
        0.5,
        0.6,
        DEFAULT_TIME_CAP,
    );
    let base = SkillCard::new(template, "Replace methoxy with fluorine.".into(), "qed").unwrap();
    let mut deltas: Vec<f64> = (1..=1500).map(|i| i as f64 / 1000.0).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    deltas.shuffle(&mut rng);
    let mut bank = SkillBank::new(1000);
    for (b, chunk) in deltas.chunks(100).enumerate() {
        let cards = chunk
            .iter()
            .enumerate()
            .map(|(j, &d)| {
                let mut c = base.clone();
                c.card.after = format!("F{b}_{j}");
                c.delta = d;
                c
            })
            .collect();
        bank.insert("qed", cards);
        check!(bank.cards("qed").len() <= 1000, "capacity exceeded after batch {b}");
    }
    let kept: BTreeSet<u64> = bank.cards("qed").iter().map(|c| (c.delta * 1000.0).round() as u64).collect();
    let want: BTreeSet<u64> = (501..=1500).collect();
    check!(kept == want, "retained set differs from the 1000 largest improvements");
    Ok("1500 inserted in 15 batches, top 1000 retained".into())
}

const PLATEAU_VARIANTS: [&str; 9] = [
    "CCOc1ccccc1F",
    "CCOc1ccccc1Cl",
    "CCOc1ccccc1Br",
    "CCOc1ccccc1C",
    "CCOc1ccccc1N",
    "CCOc1ccccc1O",
    "CCOc1cccc(F)c1",
    "CCOc1ccc(C)cc1",
    "CCOc1ccccc1CC",
];

fn plateau_trigger() -> Outcome {
    use proptest::prelude::*;
    use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};

    let lead = parse("CCOc1ccccc1").unwrap();
    for v in PLATEAU_VARIANTS {
        check!(mol_tanimoto(&lead, &parse(v).unwrap()) >= 0.4, "variant {v} too dissimilar for the fixture");
    }
    let (rows, _) = parse_corpus("CCOc1ccccc1I\tp=0.9\nCCOc1ccc(I)cc1\tp=0.8\n");
    let (bank, _) = build_bank(rows, &[]);
    let bank = Arc::new(bank);
    let mut skills = SkillBank::default();
    let card = build_edit_card(&lead, &parse("CCOc1ccccc1F").unwrap(), 0.1, 0.6, DEFAULT_TIME_CAP);
    skills.insert("p", vec![SkillCard::new(card, "Add fluorine (-F).".into(), "p").unwrap()]);
    let skills = Arc::new(skills);

    // Proposals: variant index, 9 = unparsable, 10 = dissimilar, 11 = current molecule.
    let strategy = (
        proptest::collection::vec(0.0f64..1.0, PLATEAU_VARIANTS.len() + 1),
        proptest::collection::vec(0usize..12, 1..14),
        any::<u64>(),
    );
    let mut runner = TestRunner::new_with_rng(Config {
        cases: 256,
        failure_persistence: None,
        ..Config::default()
    }, TestRng::deterministic_rng(RngAlgorithm::ChaCha));
    let injections = std::cell::Cell::new(0usize);
    let result = runner.run(&strategy, |(scores, actions, seed)| {
        let mut rows = format!("CCOc1ccccc1\t{}\n", scores[0]);
        for (v, s) in PLATEAU_VARIANTS.iter().zip(&scores[1..]) {
            rows.push_str(&format!("{v}\t{s}\n"));
        }
        let obj = Arc::new(table_objective("p", &rows, 0.0, 2.0));
        let score_of = |s: &str| -> f64 {
            let c = canon(s);
            if c == canon("CCOc1ccccc1") {
                return scores[0];
            }
            let i = PLATEAU_VARIANTS.iter().position(|v| canon(v) == c).unwrap();
            scores[i + 1]
        };
        let run = |memories: Memories| -> Result<Vec<Option<MemorySource>>, TestCaseError> {
            let ledger = BudgetLedger::new(10_000);
            let cfg = EnvConfig {
                max_turns: actions.len(),
                seed,
                ..EnvConfig::default()
            };
            let mut st = EnvState::reset(&cfg, obj.clone(), lead.clone(), memories, &ledger).unwrap();
            let mut best = scores[0];
            let mut current = canon("CCOc1ccccc1");
            let mut stagnant = 0usize;
            let mut sources = Vec::new();
            for &a in &actions {
                let expect = stagnant >= 2;
                let got = st.maybe_inject_memory();
                prop_assert_eq!(got.is_some(), expect, "stagnant {} turns", stagnant);
                sources.push(got);
                let proposal = match a {
                    9 => "C1CC".to_string(),
                    10 => "CCCCCCCCCCCC".to_string(),
                    11 => current.clone(),
                    i => PLATEAU_VARIANTS[i].to_string(),
                };
                st.step(&proposal, &ledger).unwrap();
                let evaluated = a < 9 && canon(&proposal) != current;
                let mut improved = false;
                if evaluated {
                    current = canon(&proposal);
                    let s = score_of(&proposal);
                    if s > best {
                        best = s;
                        improved = true;
                    }
                }
                stagnant = if improved { 0 } else { stagnant + 1 };
            }
            Ok(sources)
        };
        let a = run(Memories {
            exemplars: Some(bank.clone()),
            skills: None,
        })?;
        injections.set(injections.get() + a.iter().flatten().count());
        let both = || Memories {
            exemplars: Some(bank.clone()),
            skills: Some(skills.clone()),
        };
        prop_assert_eq!(run(both())?, run(both())?);
        Ok(())
    });
    result.map_err(|e| e.to_string())?;
    Ok(format!("256 sequences, {} injections checked", injections.get()))
}

fn metrics_conventions() -> Outcome {
    let props = |q: f64, s: f64| -> PropertyMap { [("qed".to_string(), q), ("sa".to_string(), s)].into_iter().collect() };
    let terms = vec![
        TermSign {
            name: "qed".into(),
            sign: 1.0,
        },
        TermSign {
            name: "sa".into(),
            sign: -1.0,
        },
    ];
    let outcome = |lead: &str, lp: PropertyMap, best: Option<(&str, PropertyMap)>| LeadOutcome {
        lead: lead.into(),
        lead_props: lp,
        success: best.map(|(s, p)| (s.to_string(), p)),
        calls_used: 10,
    };
    let leads = [
        outcome("CCOc1ccccc1", props(0.5, -3.0), Some(("CCOc1ccccc1F", props(0.6, -4.0)))),
        outcome("CC(=O)Nc1ccccc1", props(0.7, -2.0), None),
        outcome("Cc1ccc(O)cc1", props(0.8, -2.0), Some(("Cc1ccc(O)cc1Cl", props(0.9, -2.5)))),
        outcome("NC(=O)c1ccccc1", props(0.3, -1.0), None),
        outcome("COc1ccncc1", props(0.4, -5.0), Some(("COc1ccncc1C", props(0.3, -6.0)))),
    ];
    let r = metrics("qed+sa", &terms, &leads).map_err(|e| e.to_string())?;
    let sim = |a: &str, b: &str| mol_tanimoto(&parse(a).unwrap(), &parse(b).unwrap());
    let ri = [(0.2 + 1.0 / 3.0) / 2.0, 0.0, (0.125 + 0.25) / 2.0, 0.0, (-0.25 + 0.2) / 2.0];
    let sims = [
        sim("CCOc1ccccc1", "CCOc1ccccc1F"),
        1.0,
        sim("Cc1ccc(O)cc1", "Cc1ccc(O)cc1Cl"),
        1.0,
        sim("COc1ccncc1", "COc1ccncc1C"),
    ];
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-12;
    check!(close(r.sr, 60.0), "SR {}", r.sr);
    check!(close(r.sim, sims.iter().sum::<f64>() / 5.0), "Sim {}", r.sim);
    check!(close(r.ri, ri.iter().sum::<f64>() / 5.0), "RI {}", r.ri);
    for (i, l) in r.leads.iter().enumerate() {
        check!(close(l.ri, ri[i]) && close(l.sim, sims[i]), "lead {i}: sim {} ri {}", l.sim, l.ri);
    }
    let sa_only = [TermSign {
        name: "sa".into(),
        sign: -1.0,
    }];
    let one = metrics("sa", &sa_only, &leads[..1]).map_err(|e| e.to_string())?;
    check!(close(one.ri, 1.0 / 3.0), "SA term {}", one.ri);
    let failed: Vec<LeadOutcome> = leads.iter().cloned().map(|mut l| {
        l.success = None;
        l
    }).collect();
    let f = metrics("qed+sa", &terms, &failed).map_err(|e| e.to_string())?;
    check!(f.sim == 1.0 && f.ri == 0.0 && f.sr == 0.0, "all-failure set: {} {} {}", f.sr, f.sim, f.ri);
    Ok(format!("SR {:.1} Sim {:.6} RI {:.6}", r.sr, r.sim, r.ri))
}

fn gae_numerics() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let r: Vec<f64> = (0..20).map(|_| rng.random_range(-2.0..2.0)).collect();
        let v: Vec<f64> = (0..21).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (g, l) = (rng.random_range(0.0..=1.0), rng.random_range(0.0..=1.0));
        let got = gae(&r, &v, g, l).map_err(|e| e.to_string())?;
        let want = forward_gae(&r, &v, g, l);
        for (a, b) in got.iter().zip(&want) {
            worst = worst.max((a - b).abs());
        }
        let td = gae(&r, &v, g, 0.0).unwrap();
        for t in 0..20 {
            check!(td[t] == r[t] + g * v[t + 1] - v[t], "lambda=0 mismatch at {t}");
        }
        let zeros = vec![0.0; 21];
        let rtg = gae(&r, &zeros, 1.0, 1.0).unwrap();
        let mut acc = 0.0;
        for t in (0..20).rev() {
            acc += r[t];
            check!(rtg[t] == acc, "reward-to-go mismatch at {t}");
        }
    }
    check!(worst <= 1e-12, "max deviation {worst:e}");
    for _ in 0..1000 {
        let ratio = rng.random_range(0.01..3.0);
        let adv = rng.random_range(-3.0..3.0);
        let eps = rng.random_range(0.01..0.5);
        let clipped = if ratio < 1.0 - eps {
            1.0 - eps
        } else if ratio > 1.0 + eps {
            1.0 + eps
        } else {
            ratio
        };
        let a = ratio * adv;
        let b = clipped * adv;
        let want = if a < b { a } else { b };
        let got = ppo_clip_term(ratio, adv, eps);
        check!(got == want, "clip({ratio}, {adv}, {eps}) = {got}, expected {want}");
        check!(got <= ratio * adv, "min property violated");
    }
    check!(ppo_clip_term(1.5, 1.0, 0.2) == 1.2 && ppo_clip_term(0.5, -1.0, 0.2) == -0.8, "worked examples");
    Ok(format!("max deviation {worst:.1e}"))
}

fn canonicalization() -> Outcome {
    let start = Instant::now();
    let mols = corpus();
    check!(mols.len() == 500, "corpus has {} molecules", mols.len());
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut distinct = BTreeSet::new();
    for m in &mols {
        let c = m.canonical().to_string();
        distinct.insert(c.clone());
        let mut perm: Vec<usize> = (0..m.atom_count()).collect();
        for _ in 0..50 {
            perm.shuffle(&mut rng);
            let p = m.permuted(&perm);
            check!(p.canonical() == c, "{c}: permutation gave {}", p.canonical());
        }
        let back = parse(&c).map_err(|e| format!("{c}: {e}"))?;
        check!(isomorphic(&back, m), "{c} does not round-trip");
        check!(back.canonical() == c, "{c} is not a fixed point");
    }
    check!(distinct.len() == 500, "{} distinct canonical strings", distinct.len());
    let elapsed = start.elapsed();
    check!(elapsed < Duration::from_secs(60), "took {elapsed:?}");
    Ok(format!("500 x 50 permutations, {elapsed:.2?}"))
}

fn memory_injection() -> Outcome {
    let (obj, _) = Objective::load(&fixture("memory/objective.toml")).map_err(|e| e.to_string())?;
    let obj = Arc::new(obj);
    let (rows, _) = parse_corpus(&read_fixture("memory/bank.smi"));
    let (bank, _) = build_bank(rows, &[]);
    let bank = Arc::new(bank);
    let leads: Vec<Molecule> = read_fixture("memory/leads.smi").lines().map(|l| parse(l).unwrap()).collect();
    let target = canon("CCOc1ccc(C(N)=O)cc1I");
    let cfg = SearchConfig {
        budget: 500,
        seed: 7,
        ..SearchConfig::default()
    };
    let mut on = Memories {
        exemplars: Some(bank),
        skills: None,
    };
    let with = run_leads(&leads, &cfg, &RetrievalGreedy, &mut on, &obj).map_err(|e| e.to_string())?;
    let without =
        run_leads(&leads, &cfg, &RetrievalGreedy, &mut Memories::none(), &obj).map_err(|e| e.to_string())?;
    check!(with.report.sr == 100.0, "memory on: SR {}", with.report.sr);
    check!(with.report.leads[0].best == target, "memory on reached {}", with.report.leads[0].best);
    check!(without.report.sr == 0.0, "memory off: SR {}", without.report.sr);
    for r in [&with, &without] {
        check!(r.report.leads.iter().all(|l| l.calls_used <= 500), "budget exceeded");
    }
    Ok(format!("SR {} vs {}", with.report.sr, without.report.sr))
}

fn temperature_schedule() -> Outcome {
    let cfg = SearchConfig::default();
    let got: Vec<f64> = [0, 5, 11, 19].iter().map(|&g| temperature(g, &cfg)).collect();
    check!(got == [0.9, 1.4, 2.0, 2.0], "{got:?}");
    Ok(format!("{got:?}"))
}

fn retrieval_latency() -> Outcome {
    let mols = corpus();
    let fps: Vec<Fingerprint> = mols.iter().map(ecfp4).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let records: Vec<ExemplarRecord> = (0..100_000)
        .map(|i| {
            let mut words = fps[i % fps.len()].words().to_vec();
            for _ in 0..8 {
                let bit = rng.random_range(0..2048);
                words[bit / 64] ^= 1 << (bit % 64);
            }
            ExemplarRecord {
                canonical: format!("S{i:06}"),
                fp: Fingerprint::from_words(2048, 2, words).unwrap(),
                props: [("qed_lite".to_string(), rng.random::<f64>())].into_iter().collect(),
            }
        })
        .collect();
    let bank = ExemplarBank::from_records(2048, 2, records);
    let obj = Objective::single(
        Oracle::builtin("qed_lite").unwrap(),
        SuccessCriterion::absolute(Comparator::Ge, 0.9),
        0.4,
    )
    .unwrap();
    let cfg = RetrievalConfig::default();
    let mut times = Vec::new();
    for q in mols.iter().step_by(20).take(21) {
        let t = Instant::now();
        let hits = retrieve_exemplars(&bank, q, q, &obj, &cfg).map_err(|e| e.to_string())?;
        times.push(t.elapsed());
        check!(hits.len() <= cfg.k, "too many hits");
    }
    times.sort();
    let median = times[times.len() / 2];
    check!(median < Duration::from_millis(250), "median {median:?}");
    let note = if median < Duration::from_millis(50) { "" } else { " (above the 50 ms target)" };
    Ok(format!("median {median:.2?} over 21 queries on 100000 records{note}"))
}

fn hint_blocks() -> Outcome {
    const EXEMPLAR_HEADER: &str = "=== SIMILAR HIGH-SCORING MOLECULES FOR REFERENCE ===";
    const SKILL_HEADER: &str = "=== Potential Useful Strategies for qed ===";
    let (obj, _) = Objective::load(&fixture("memory/objective.toml")).map_err(|e| e.to_string())?;
    let (rows, _) = parse_corpus(&read_fixture("memory/bank.smi"));
    let (bank, _) = build_bank(rows, &[]);
    let lead = parse("CCOc1ccc(C(N)=O)cc1").unwrap();
    let hits = retrieve_exemplars(&bank, &lead, &lead, &obj, &RetrievalConfig::default()).map_err(|e| e.to_string())?;
    let block = render_exemplar_block(&hits);
    let golden = read_fixture("golden/exemplar_block.txt");
    check!(block == golden, "exemplar block differs from golden:\n{block}");
    check!(golden.lines().next() == Some(EXEMPLAR_HEADER), "exemplar golden header");

    let bank = SkillBank::load(&fixture("golden/skills.jsonl"), 1000).map_err(|e| e.to_string())?;
    let current = parse("Fc1ccc(cc1)S(N)(=O)=O").unwrap();
    let block = render_skill_block(&retrieve_skills(&bank, &current, "qed", &SkillQuery::default()), "qed");
    let golden = read_fixture("golden/skill_block.txt");
    check!(block == golden, "skill block differs from golden:\n{block}");
    check!(golden.lines().next() == Some(SKILL_HEADER), "skill golden header");

    let trajectories = molforge::env::read_trajectories(&fixture("golden/trajectory.jsonl")).map_err(|e| e.to_string())?;
    let transitions: Vec<_> = trajectories.iter().flat_map(|t| t.transitions()).collect();
    let mut fresh = SkillBank::default();
    fresh.absorb("qed", &harvest(&transitions, 0.05, DEFAULT_TIME_CAP), &TemplateSummarizer);
    let texts = |b: &SkillBank| b.cards("qed").iter().map(|c| c.text.clone()).collect::<Vec<_>>();
    check!(texts(&fresh) == texts(&bank), "re-harvested skills differ from the stored bank");
    let _ = detect_functional_groups(&current);
    Ok("exemplar and skill blocks byte-exact".into())
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 12] = [
        ("reward table exactness", reward_table),
        ("budget soundness", budget_soundness),
        ("retrieval oracle equivalence", retrieval_equivalence),
        ("capacity control", capacity_control),
        ("plateau trigger", plateau_trigger),
        ("metrics conventions", metrics_conventions),
        ("GAE/PPO numerics", gae_numerics),
        ("canonicalization soundness", canonicalization),
        ("memory-injection plumbing", memory_injection),
        ("temperature schedule", temperature_schedule),
        ("retrieval latency", retrieval_latency),
        ("hint-block byte-exactness", hint_blocks),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {why}", i + 1);
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
