//! Pixel and scale-normalized errors for a constant-velocity forecast,
//! with and without the truncated-box area correction.

use encore::baselines::{predict, BaselineKind};
use encore::dataset::{calibrate_aspect_ratio, generate_synthetic_corpus, ScriptSampler, WindowSpec};
use encore::metrics::{aggregate_all, evaluate_corpus, AreaMode, PredictionSet};

fn main() -> encore::Result<()> {
    let scripts = ScriptSampler::default().sample_many(11, 30, "scene_");
    let mut corpus = generate_synthetic_corpus(&scripts, &WindowSpec::from_seconds(30.0)?)?;
    let ratio = calibrate_aspect_ratio(&mut corpus)?;
    println!("{} windows, visible aspect ratio {ratio:.3}", corpus.len());

    let preds = PredictionSet::single(
        corpus.samples.iter().map(|s| predict(BaselineKind::ConstantVelocity, s)).collect(),
    );
    for (label, mode) in [("adjusted", AreaMode::Adjusted(corpus.adjustment())), ("visible", AreaMode::Visible)] {
        let m = evaluate_corpus(&corpus.samples, &preds, &mode, corpus.fps)?;
        let all = aggregate_all(&m)?;
        println!(
            "{label:>9}: B_MSE {:>9.1}  C_MSE {:>9.1}  CF_MSE {:>9.1}  sB {:.4}  sC {:.4}  sCF {:.4}",
            all.b_mse, all.c_mse, all.cf_mse, all.sb_mse, all.sc_mse, all.scf_mse
        );
    }
    Ok(())
}
