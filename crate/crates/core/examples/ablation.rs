//! Runs the module ablation through the bench harness on a small corpus
//! and prints the resulting table.

use encore::bench::{self, Command, RunConfig};

fn main() -> encore::Result<()> {
    let dir = std::env::temp_dir().join("encore-example-ablation");
    let out = dir.to_string_lossy().into_owned();
    let mut cfg = RunConfig::default();
    for (k, v) in [
        ("out", out.as_str()),
        ("o", "8"),
        ("tau", "12"),
        ("stride", "10"),
        ("scenes", "12"),
        ("duration", "90"),
        ("preset", "tiny"),
        ("epochs", "20"),
    ] {
        cfg.set(k, v)?;
    }
    bench::run(Command::Generate, &cfg)?;
    cfg.set("corpus", &format!("{out}/corpus.jsonl"))?;
    for path in bench::run(Command::Ablate, &cfg)? {
        if path.extension().is_some_and(|e| e == "csv") {
            println!("{}", path.display());
            print!("{}", std::fs::read_to_string(&path).map_err(|e| encore::Error::io(&path, e))?);
        }
    }
    Ok(())
}
