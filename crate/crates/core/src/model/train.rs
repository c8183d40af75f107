//! Training loop, prediction, and model checkpoints.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::bundle::{build_bundle, build_targets, denormalize, Batch, ModalityBundle, Targets};
use super::config::{ModelConfig, TrainConfig};
use super::network::{split_draws, Encore, LatentMode};
use crate::error::{Error, Result};
use crate::metrics::PredictionSet;
use crate::tensor::{checkpoint, AdamState, Tape};
use crate::trajectory::{Adjustment, TrajectorySample};

/// Mean loss components over one epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub l_ft: f64,
    pub l_sft: f64,
    /// Reconstruction loss, or the partial-observation loss in that variant.
    pub l_rot: f64,
    pub kld: f64,
    pub total: f64,
}

#[derive(Debug, Clone, Default)]
pub struct TrainReport {
    pub epochs: Vec<EpochLog>,
    /// Total loss of every optimizer step, in order.
    pub step_losses: Vec<f64>,
}

impl TrainReport {
    pub fn steps(&self) -> usize {
        self.step_losses.len()
    }
}

pub fn prepare(samples: &[TrajectorySample], adjustment: &Adjustment) -> Result<(Vec<ModalityBundle>, Vec<Targets>)> {
    let pairs: Vec<(ModalityBundle, Targets)> = samples
        .par_iter()
        .map(|s| Ok((build_bundle(s), build_targets(s, adjustment)?)))
        .collect::<Result<_>>()?;
    Ok(pairs.into_iter().unzip())
}

impl Encore {
    /// Adam training over shuffled mini-batches.
    pub fn train(&mut self, samples: &[TrajectorySample], cfg: &TrainConfig) -> Result<TrainReport> {
        if samples.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        if cfg.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        let adjustment = Adjustment::with_ratio(self.config.aspect_ratio);
        let (bundles, targets) = prepare(samples, &adjustment)?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut adam = AdamState::new(cfg.lr);
        let mut order: Vec<usize> = (0..samples.len()).collect();
        let mut report = TrainReport::default();
        let k = self.config.k_samples;

        'epochs: for epoch in 0..cfg.epochs {
            order.shuffle(&mut rng);
            let mut sums = [0.0; 5];
            let mut seen = 0usize;
            for chunk in order.chunks(cfg.batch_size) {
                if cfg.max_steps.is_some_and(|m| report.steps() >= m) {
                    break;
                }
                let bs: Vec<&ModalityBundle> = chunk.iter().map(|&i| &bundles[i]).collect();
                let ts: Vec<&Targets> = chunk.iter().map(|&i| &targets[i]).collect();
                let batch = Batch::new(&bs, Some(&ts))?;

                let mut tape = Tape::new();
                let out = self.forward(&mut tape, &batch, LatentMode::PosteriorSample, k, &mut rng)?;
                let loss = self.loss(&mut tape, &out, &batch)?;
                let value = |v: Option<crate::tensor::Var>| v.map_or(0.0, |v| tape.value(v).item());
                let parts = [
                    tape.value(loss.ft).item(),
                    value(loss.sft),
                    value(loss.aux),
                    value(loss.kld),
                    tape.value(loss.total).item(),
                ];
                if !parts[4].is_finite() {
                    return Err(Error::Config(format!(
                        "training diverged at epoch {epoch} (loss {})",
                        parts[4]
                    )));
                }
                self.store.zero_grad();
                tape.backward_into(loss.total, &mut self.store)?;
                adam.step(&mut self.store)?;

                let n = chunk.len() as f64;
                for (s, p) in sums.iter_mut().zip(parts) {
                    *s += p * n;
                }
                seen += chunk.len();
                report.step_losses.push(parts[4]);
            }
            if seen > 0 {
                let m = |i: usize| sums[i] / seen as f64;
                report.epochs.push(EpochLog {
                    epoch,
                    l_ft: m(0),
                    l_sft: m(1),
                    l_rot: m(2),
                    kld: m(3),
                    total: m(4),
                });
            }
            if cfg.max_steps.is_some_and(|m| report.steps() >= m) {
                break 'epochs;
            }
        }
        Ok(report)
    }

    /// Mean training-objective components on `samples` without updating
    /// weights, using posterior means so the result is deterministic.
    pub fn evaluate_loss(&self, samples: &[TrajectorySample]) -> Result<EpochLog> {
        let adjustment = Adjustment::with_ratio(self.config.aspect_ratio);
        let (bundles, targets) = prepare(samples, &adjustment)?;
        let bs: Vec<&ModalityBundle> = bundles.iter().collect();
        let ts: Vec<&Targets> = targets.iter().collect();
        let batch = Batch::new(&bs, Some(&ts))?;
        let mut tape = Tape::new();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let out = self.forward(&mut tape, &batch, LatentMode::PosteriorMean, 1, &mut rng)?;
        let loss = self.loss(&mut tape, &out, &batch)?;
        let v = |x: Option<crate::tensor::Var>| x.map_or(0.0, |x| tape.value(x).item());
        Ok(EpochLog {
            epoch: 0,
            l_ft: tape.value(loss.ft).item(),
            l_sft: v(loss.sft),
            l_rot: v(loss.aux),
            kld: v(loss.kld),
            total: tape.value(loss.total).item(),
        })
    }

    /// `k` pixel-space futures per sample drawn from the prior; a single
    /// prior-mean future in deterministic mode.
    ///
    /// Samples are processed in fixed chunks, each with its own random
    /// stream, so results do not depend on the thread count.
    pub fn predict(&self, samples: &[TrajectorySample], k: usize, seed: u64) -> Result<PredictionSet> {
        const CHUNK: usize = 32;
        if k == 0 {
            return Err(Error::Config("k must be at least 1".into()));
        }
        let (mode, k) = if self.config.deterministic {
            (LatentMode::PriorMean, 1)
        } else {
            (LatentMode::PriorSample, k)
        };
        let chunks: Vec<Vec<Vec<_>>> = samples
            .par_chunks(CHUNK)
            .enumerate()
            .map(|(ci, chunk)| {
                let bundles: Vec<ModalityBundle> = chunk.iter().map(build_bundle).collect();
                let refs: Vec<&ModalityBundle> = bundles.iter().collect();
                let batch = Batch::new(&refs, None)?;
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(ci as u64);
                let mut tape = Tape::new();
                let out = self.forward(&mut tape, &batch, mode, k, &mut rng)?;
                let draws = split_draws(tape.value(out.trajectory), chunk.len(), k);
                Ok(draws
                    .into_iter()
                    .zip(&bundles)
                    .map(|(per_k, b)| per_k.iter().map(|rows| denormalize(rows, b.origin, &b.geometry)).collect())
                    .collect())
            })
            .collect::<Result<_>>()?;
        PredictionSet::new(chunks.into_iter().flatten().collect())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        checkpoint::save(path, &self.store, &self.header())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        checkpoint::to_bytes(&self.store, &self.header())
    }

    fn header(&self) -> serde_json::Value {
        serde_json::json!({ "kind": "encore", "model": self.config })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let (store, meta) = checkpoint::load(path)?;
        let config: ModelConfig = serde_json::from_value(meta["model"].clone())
            .map_err(|e| Error::BadCheckpoint(format!("model header: {e}")))?;
        Encore::from_parts(config, store)
    }
}

pub fn write_train_log(path: &Path, logs: &[EpochLog]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::io(path, std::io::Error::other(e)))?;
    for l in logs {
        w.serialize(l)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
