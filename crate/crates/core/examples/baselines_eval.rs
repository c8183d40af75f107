//! Compares the kinematic baselines per ego-speed bin.

use encore::baselines::{predict, BaselineKind};
use encore::dataset::{calibrate_aspect_ratio, generate_synthetic_corpus, ScriptSampler, WindowSpec};
use encore::metrics::{aggregate, evaluate_corpus, AreaMode, PredictionSet};
use encore::scenario::{partition, Factor, LabelConfig};

fn main() -> encore::Result<()> {
    let scripts = ScriptSampler::default().sample_many(21, 60, "scene_");
    let mut corpus = generate_synthetic_corpus(&scripts, &WindowSpec::from_seconds(30.0)?)?;
    calibrate_aspect_ratio(&mut corpus)?;
    let part = partition(&corpus, &[Factor::Speed], &LabelConfig::default())?;
    let area = AreaMode::Adjusted(corpus.adjustment());

    print!("{:<20}", "sB_MSE");
    let cells = part.cell_names();
    for c in &cells {
        print!("{c:>13}");
    }
    println!();
    for kind in BaselineKind::ALL {
        let preds = PredictionSet::single(corpus.samples.iter().map(|s| predict(kind, s)).collect());
        let m = evaluate_corpus(&corpus.samples, &preds, &area, corpus.fps)?;
        print!("{:<20}", kind.name());
        for (name, idx) in cells.iter().zip(part.cells.values()) {
            print!("{:>13.4}", aggregate(name, &m, idx)?.sb_mse);
        }
        println!();
    }
    Ok(())
}
