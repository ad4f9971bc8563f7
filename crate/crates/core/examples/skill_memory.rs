//! Distil improving edits into skill cards, store them and retrieve the
//! strategies relevant to a new molecule.

use molforge::molgraph::parse;
use molforge::skillbank::{
    harvest, render_skill_block, retrieve_skills, SkillBank, SkillQuery, TemplateSummarizer, Transition,
    DEFAULT_HARVEST_DELTA, DEFAULT_TIME_CAP,
};

fn step(before: &str, after: &str, sb: f64, sa: f64) -> Transition {
    Transition {
        before: parse(before).unwrap(),
        after: parse(after).unwrap(),
        score_before: sb,
        score_after: sa,
    }
}

fn main() {
    let transitions = [
        step("COc1ccc(cc1)S(N)(=O)=O", "Fc1ccc(cc1)S(N)(=O)=O", 0.50, 0.62),
        step("Fc1ccc(cc1)S(N)(=O)=O", "Fc1ccccc1", 0.62, 0.70),
        step("Fc1ccccc1", "Fc1ccncc1", 0.70, 0.80),
        step("Fc1ccncc1", "Clc1ccncc1", 0.80, 0.79),
    ];
    let cards = harvest(&transitions, DEFAULT_HARVEST_DELTA, DEFAULT_TIME_CAP);
    for c in &cards {
        println!(
            "{} -> {}: {:?}, removed {:?}, added {:?}, scaffold {:?}",
            c.before, c.after, c.modification_type, c.removed_fragment, c.added_fragment, c.scaffold_type
        );
    }

    let mut bank = SkillBank::default();
    let report = bank.absorb("qed", &cards, &TemplateSummarizer);
    println!("\ninserted {:?}\n", report.inserted);

    let current = parse("Fc1ccc(cc1)S(N)(=O)=O").unwrap();
    let hits = retrieve_skills(&bank, &current, "qed", &SkillQuery::default());
    print!("{}", render_skill_block(&hits, "qed"));
}
