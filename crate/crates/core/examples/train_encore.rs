//! Trains the tiny model on a synthetic corpus, saves a checkpoint, and
//! compares its best-of-k error with constant velocity.
//!
//! cargo run --release --example train_encore -- [epochs]

use encore::baselines::{predict, BaselineKind};
use encore::dataset::{calibrate_aspect_ratio, generate_synthetic_corpus, ScriptSampler, WindowSpec};
use encore::metrics::{aggregate_all, evaluate_corpus, AreaMode, PredictionSet};
use encore::model::{Encore, ModelConfig, TrainConfig};

fn main() -> encore::Result<()> {
    let epochs: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(30);
    let spec = WindowSpec::from_seconds(30.0)?;
    let sampler = ScriptSampler::default();
    let mut train = generate_synthetic_corpus(&sampler.sample_many(1, 100, "train_"), &spec)?;
    let mut test = generate_synthetic_corpus(&sampler.sample_many(2, 15, "test_"), &spec)?;
    let ratio = calibrate_aspect_ratio(&mut train)?;
    test.set_aspect_ratio(ratio)?;

    let config = ModelConfig {
        obs_len: spec.obs_len,
        pred_len: spec.pred_len,
        aspect_ratio: ratio,
        ..ModelConfig::tiny()
    };
    let mut model = Encore::new(config, 0)?;
    let cfg = TrainConfig { epochs, batch_size: 32, ..Default::default() };
    println!("{} training windows, {} test windows", train.len(), test.len());
    let report = model.train(&train.samples, &cfg)?;
    for e in &report.epochs {
        println!(
            "epoch {:>3}  ft {:.4}  sft {:.4}  rot {:.4}  kld {:.4}  total {:.4}",
            e.epoch, e.l_ft, e.l_sft, e.l_rot, e.kld, e.total
        );
    }

    let path = std::env::temp_dir().join("encore-example-model.ckpt");
    model.save(&path)?;
    let model = Encore::load(&path)?;
    println!("checkpoint: {}", path.display());

    let area = AreaMode::Adjusted(test.adjustment());
    let cv = PredictionSet::single(
        test.samples.iter().map(|s| predict(BaselineKind::ConstantVelocity, s)).collect(),
    );
    for (name, preds) in [("constant velocity", cv), ("model best-of-20", model.predict(&test.samples, 20, 0)?)] {
        let all = aggregate_all(&evaluate_corpus(&test.samples, &preds, &area, test.fps)?)?;
        println!("{name:<18} B_MSE {:>9.1}  sB_MSE {:.4}", all.b_mse, all.sb_mse);
    }
    Ok(())
}
