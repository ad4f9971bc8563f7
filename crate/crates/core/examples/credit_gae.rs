//! Advantages for a five-turn reward sequence and the clipped surrogate at a
//! few policy ratios.

use molforge::credit::{gae, ppo_clip_term};

fn main() {
    let rewards = [-0.5, 0.5, -0.1, 0.0, 1.2];
    let values = [0.1, 0.2, 0.3, 0.2, 0.4, 0.0];
    let adv = gae(&rewards, &values, 0.99, 0.95).unwrap();
    for (t, a) in adv.iter().enumerate() {
        println!("t={t} r={:+.2} A={a:+.4}", rewards[t]);
    }
    for ratio in [0.5, 1.0, 1.5] {
        println!(
            "ratio {ratio}: A=+1 -> {:+.2}, A=-1 -> {:+.2}",
            ppo_clip_term(ratio, 1.0, 0.2),
            ppo_clip_term(ratio, -1.0, 0.2)
        );
    }
}
