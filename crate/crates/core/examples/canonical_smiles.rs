//! Parse SMILES written several ways, print the shared canonical form and
//! the ring scaffold.
//!
//! ```text
//! cargo run --example canonical_smiles
//! ```

use molforge::molgraph::{parse, scaffold_of};

fn main() {
    let spellings = ["CC(=O)Nc1ccc(O)cc1", "Oc1ccc(NC(C)=O)cc1", "c1cc(O)ccc1NC(=O)C"];
    for s in spellings {
        let m = parse(s).expect("valid SMILES");
        println!("{s:<24} -> {}", m.canonical());
    }

    let m = parse("O=C(Nc1ccccc1)c1ccc(OCC)cc1").unwrap();
    let scaffold = scaffold_of(&m);
    println!("scaffold of {}: {} ({} rings)", m.canonical(), scaffold.core.canonical(), scaffold.ring_count);

    for bad in ["C1CC", "Cc", "C(C"] {
        println!("{bad:<8} rejected: {}", parse(bad).unwrap_err());
    }
}
