//! Labels every window with its scenario factors and prints cell sizes
//! for a one-factor and a two-factor partition.

use encore::dataset::{generate_synthetic_corpus, ScriptSampler, WindowSpec};
use encore::scenario::{label_corpus, Factor, LabelConfig, Partition};

fn main() -> encore::Result<()> {
    let scripts = ScriptSampler::default().sample_many(3, 40, "scene_");
    let corpus = generate_synthetic_corpus(&scripts, &WindowSpec::from_seconds(30.0)?)?;
    let keys = label_corpus(&corpus, &LabelConfig::default())?;
    println!("{} windows", keys.len());

    for factors in [vec![Factor::Speed], vec![Factor::Speed, Factor::State]] {
        let p = Partition::from_keys(&keys, &factors)?;
        let names: Vec<&str> = factors.iter().map(|f| f.name()).collect();
        println!("\nby {}:", names.join(" x "));
        for (cell, n) in p.counts() {
            println!("  {cell:<28} {n:>5}");
        }
    }
    Ok(())
}
