//! Drive one rollout by hand and watch each reward rule fire.

use std::sync::Arc;

use molforge::env::{EnvConfig, EnvState, Memories};
use molforge::molgraph::parse;
use molforge::oracles::{BudgetLedger, Comparator, Direction, Objective, Oracle, SuccessCriterion, TableOracle};

fn main() {
    let table = TableOracle::parse("CCOc1ccccc1\t0.50\nCCOc1ccccc1F\t0.62\nCCOc1ccccc1N\t0.93\n")
        .unwrap()
        .with_default(Some(0.45));
    let oracle = Oracle::table("score", table, Direction::Maximize);
    let obj = Objective::single(oracle, SuccessCriterion::absolute(Comparator::Ge, 0.9), 0.4).unwrap();
    let ledger = BudgetLedger::new(500);
    let mut env = EnvState::reset(
        &EnvConfig::default(),
        Arc::new(obj),
        parse("CCOc1ccccc1").unwrap(),
        Memories::none(),
        &ledger,
    )
    .unwrap();

    for action in ["C1CC", "CCOc1ccccc1", "CCCCCCCCCCCC", "CCOc1ccccc1F", "CCOc1ccccc1N"] {
        let r = env.step(action, &ledger).unwrap();
        println!(
            "{action:<14} {:<10} reward {:+.3}  calls {}  {}",
            format!("{:?}", r.branch),
            r.reward,
            ledger.consumed(),
            r.feedback
        );
        if r.done {
            println!("done: {:?}", r.done_reason);
            break;
        }
    }
    println!("\n{}", env.observation());
}
