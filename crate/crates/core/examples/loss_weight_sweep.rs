//! Sweeps the weight of the scaled future loss and reports how the
//! trained tiny model scores on held-out windows.

use encore::dataset::{calibrate_aspect_ratio, generate_synthetic_corpus, ScriptSampler, WindowSpec};
use encore::metrics::{aggregate_all, evaluate_corpus, AreaMode};
use encore::model::{Encore, ModelConfig, TrainConfig};
use rayon::prelude::*;

fn main() -> encore::Result<()> {
    let spec = WindowSpec::new(8, 12, 10)?;
    let sampler = ScriptSampler::default();
    let mut train = generate_synthetic_corpus(&sampler.sample_many(4, 12, "train_"), &spec)?;
    let mut test = generate_synthetic_corpus(&sampler.sample_many(5, 6, "test_"), &spec)?;
    let ratio = calibrate_aspect_ratio(&mut train)?;
    test.set_aspect_ratio(ratio)?;
    let base = ModelConfig {
        obs_len: spec.obs_len,
        pred_len: spec.pred_len,
        aspect_ratio: ratio,
        ..ModelConfig::tiny()
    };
    let cfg = TrainConfig { epochs: 30, batch_size: 16, ..Default::default() };
    let area = AreaMode::Adjusted(test.adjustment());

    let gammas = [0.0, 0.5, 1.0, 2.0];
    let rows: Vec<encore::Result<(f64, f64, f64)>> = gammas
        .par_iter()
        .map(|&gamma| {
            let mut model = Encore::new(ModelConfig { gamma, ..base.clone() }, 0)?;
            model.train(&train.samples, &cfg)?;
            let preds = model.predict(&test.samples, 10, 0)?;
            let all = aggregate_all(&evaluate_corpus(&test.samples, &preds, &area, test.fps)?)?;
            Ok((gamma, all.b_mse, all.sb_mse))
        })
        .collect();
    println!("{:>6} {:>10} {:>10}", "gamma", "B_MSE", "sB_MSE");
    for row in rows {
        let (g, b, sb) = row?;
        println!("{g:>6.1} {b:>10.1} {sb:>10.4}");
    }
    Ok(())
}
