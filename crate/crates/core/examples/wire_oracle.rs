//! A property oracle served by an external process over the line protocol:
//! `EVAL <name> <smiles>` answered by `OK <value>`.

use std::time::Duration;

use molforge::molgraph::parse;
use molforge::oracles::{Direction, Oracle};

fn main() {
    // A shell stub scoring molecules by SMILES length.
    let endpoint = r#"exec:while read cmd name smi; do echo "OK ${#smi}"; done"#;
    let oracle = Oracle::external_oracle("length", endpoint, Duration::from_secs(5), Direction::Maximize).unwrap();
    for s in ["CCO", "c1ccccc1O", "CC(=O)Nc1ccc(O)cc1"] {
        let m = parse(s).unwrap();
        println!("{} -> {}", m.canonical(), oracle.evaluate(&m).unwrap());
    }
}
