//! ECFP4 similarity, functional groups and descriptors for a few analogues
//! of a lead.

use molforge::chemfeat::{descriptors, detect_functional_groups, jaccard, similarity};
use molforge::molgraph::parse;

fn main() {
    let lead = parse("COc1ccc(cc1)S(N)(=O)=O").unwrap();
    let lead_fg = detect_functional_groups(&lead);
    println!("lead {}: groups {:?}", lead.canonical(), lead_fg.iter().collect::<Vec<_>>());
    for s in ["Fc1ccc(cc1)S(N)(=O)=O", "COc1ccc(cc1)C(N)=O", "COc1ccccc1", "CCCCCCCC"] {
        let m = parse(s).unwrap();
        let d = descriptors(&m);
        println!(
            "{:<28} tanimoto {:.3}  fg-jaccard {:.3}  mw {:.1}  hbd {} hba {} psa {:.1}",
            m.canonical(),
            similarity(&lead, &m),
            jaccard(&lead_fg, &detect_functional_groups(&m)),
            d.mw,
            d.hbd,
            d.hba,
            d.psa_lite
        );
    }
}
