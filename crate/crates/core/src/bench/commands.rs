use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::Outputs;
use crate::baselines::{self, BaselineKind};
use crate::dataset::synthetic::corpus_from_tracks;
use crate::dataset::{
    calibrate_aspect_ratio, parse_annotations_at, simulate_scripts, write_annotations_file,
    ScriptSampler, WindowSpec,
};
use crate::error::{Error, Result};
use crate::metrics::{aggregate_all, evaluate_corpus, AreaMode, MetricRow, PredictionSet, SampleMetrics};
use crate::model::{write_train_log, AblationRow, Encore, Modality, ModelConfig, TrainConfig};
use crate::report::{conventions, Heatmap, MetricKind, MetricReport, SCHEMA_VERSION};
use crate::scenario::{label_corpus, partition as partition_corpus, Factor, LabelConfig, Partition};
use crate::trajectory::{Adjustment, Corpus, Split, DEFAULT_FPS};

const DEFAULT_TABLES: &str = "scale,speed,state,action,motion,transition";
const DEFAULT_HEATMAPS: &str = "speed:scale,speed:state";

fn out_dir(cfg: &RunConfig) -> PathBuf {
    PathBuf::from(cfg.str_or("out", "out"))
}

fn seed(cfg: &RunConfig) -> Result<u64> {
    cfg.parse_or("seed", 0)
}

fn window_spec(cfg: &RunConfig) -> Result<WindowSpec> {
    WindowSpec::new(
        cfg.parse_or("o", 15)?,
        cfg.parse_or("tau", 45)?,
        cfg.parse_or("stride", 30)?,
    )
}

fn load_corpus(cfg: &RunConfig, key: &str) -> Result<Corpus> {
    let path = cfg.require_path(key)?;
    let fps = cfg.parse_or("fps", DEFAULT_FPS)?;
    let tracks = parse_annotations_at(&path, fps)?;
    let corpus = corpus_from_tracks(&tracks, &window_spec(cfg)?, Split::Train)?;
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    Ok(corpus)
}

/// Explicit `aspect_ratio`, else the one measured on `corpus`.
fn aspect_ratio(cfg: &RunConfig, corpus: &mut Corpus) -> Result<(f64, &'static str)> {
    match cfg.parse::<f64>("aspect_ratio")? {
        Some(r) => {
            corpus.set_aspect_ratio(r)?;
            Ok((r, "config"))
        }
        None => Ok((calibrate_aspect_ratio(corpus)?, "measured")),
    }
}

fn metadata(cfg: &RunConfig, command: &str, ratio: f64, adjusted: bool) -> serde_json::Value {
    serde_json::json!({
        "command": command,
        "config": cfg.resolved(),
        "conventions": conventions(ratio, adjusted),
        "labels": LabelConfig::default(),
    })
}

fn json_text<T: Serialize>(v: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    Ok(s)
}

fn csv_text<T: Serialize>(rows: &[T]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Config(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv writes UTF-8"))
}

pub(super) fn generate(cfg: &RunConfig, out: &mut Outputs) -> Result<()> {
    let spec = window_spec(cfg)?;
    let base = match cfg.str_or("profile", "mixed") {
        "mixed" => ScriptSampler::default(),
        "walking_straight" => ScriptSampler::walking_straight(),
        "static" => ScriptSampler {
            speed_ranges: vec![(0.0, 0.0)],
            accel_prob: 0.0,
            turn_prob: 0.0,
            switch_prob: 0.0,
            walking_prob: 0.0,
            gait_jitter: 0.0,
            ..Default::default()
        },
        other => return Err(Error::Config(format!("unknown profile `{other}`"))),
    };
    let sampler = ScriptSampler {
        fps: cfg.parse_or("fps", base.fps)?,
        duration: cfg.parse_or("duration", base.duration)?,
        peds_per_scene: cfg.parse_or("peds_per_scene", base.peds_per_scene)?,
        ..base
    };
    let need = spec.obs_len + spec.pred_len;
    if sampler.duration < need.max(12) {
        return Err(Error::Config(format!(
            "duration {} shorter than one window ({need} frames)",
            sampler.duration
        )));
    }
    let scenes: usize = cfg.parse_or("scenes", 20)?;
    let scripts = sampler.sample_many(seed(cfg)?, scenes, "scene_");
    let tracks = simulate_scripts(&scripts)?;
    let corpus = corpus_from_tracks(&tracks, &spec, Split::Train)?;

    let path = cfg
        .path("corpus")
        .unwrap_or_else(|| out_dir(cfg).join("corpus.jsonl"));
    let path = out.file(path)?;
    write_annotations_file(&tracks, &path)?;
    let summary = serde_json::json!({
        "schema_version": SCHEMA_VERSION,
        "corpus": path,
        "scenes": scenes,
        "tracks": tracks.len(),
        "samples": corpus.len(),
        "metadata": { "command": "generate", "config": cfg.resolved(), "sampler": sampler },
    });
    out.write(out_dir(cfg).join("generate_summary.json"), &json_text(&summary)?)?;
    Ok(())
}

fn factors(cfg: &RunConfig, default: &str) -> Result<Vec<Factor>> {
    let f = Factor::parse_list(cfg.str_or("factors", default))?;
    if f.len() > 2 {
        return Err(Error::Config(format!(
            "at most two factors per partition, got {}",
            f.len()
        )));
    }
    Ok(f)
}

pub(super) fn partition(cfg: &RunConfig, out: &mut Outputs) -> Result<()> {
    let corpus = load_corpus(cfg, "corpus")?;
    let p = partition_corpus(&corpus, &factors(cfg, "")?, &LabelConfig::default())?;
    let mut json = p.to_json(&corpus);
    json["schema_version"] = SCHEMA_VERSION.into();
    json["metadata"] = serde_json::json!({
        "command": "partition",
        "config": cfg.resolved(),
        "labels": LabelConfig::default(),
    });
    out.write(out_dir(cfg).join("partition.json"), &json_text(&json)?)?;
    Ok(())
}

/// Model hyperparameters from a preset plus per-key overrides. Window
/// lengths always come from `o` and `tau`.
pub fn model_config(cfg: &RunConfig) -> Result<ModelConfig> {
    let base = match cfg.str_or("preset", "small") {
        "tiny" => ModelConfig::tiny(),
        "small" => ModelConfig::small(),
        "default" | "full" => ModelConfig::default(),
        other => return Err(Error::Config(format!("unknown preset `{other}`"))),
    };
    let spec = window_spec(cfg)?;
    let modalities = match cfg.get("modalities") {
        Some(list) => list.split(',').map(Modality::parse).collect::<Result<_>>()?,
        None => base.modalities.clone(),
    };
    let mc = ModelConfig {
        obs_len: spec.obs_len,
        pred_len: spec.pred_len,
        embed_dim: cfg.parse_or("embed_dim", base.embed_dim)?,
        model_dim: cfg.parse_or("model_dim", base.model_dim)?,
        heads: cfg.parse_or("heads", base.heads)?,
        ffn_dim: cfg.parse_or("ffn_dim", base.ffn_dim)?,
        enc_layers: cfg.parse_or("enc_layers", base.enc_layers)?,
        dec_layers: cfg.parse_or("dec_layers", base.dec_layers)?,
        latent_dim: cfg.parse_or("latent_dim", base.latent_dim)?,
        k_samples: cfg.parse_or("k", base.k_samples)?,
        alpha: cfg.parse_or("alpha", base.alpha)?,
        beta: cfg.parse_or("beta", base.beta)?,
        gamma: cfg.parse_or("gamma", base.gamma)?,
        use_hsf: cfg.bool_or("hsf", base.use_hsf)?,
        use_sft: cfg.bool_or("sft", base.use_sft)?,
        use_poft: cfg.bool_or("poft", base.use_poft)?,
        use_rot: cfg.bool_or("rot", base.use_rot && !cfg.bool_or("poft", false)?)?,
        deterministic: cfg.bool_or("deterministic", base.deterministic)?,
        aspect_ratio: cfg.parse_or("aspect_ratio", base.aspect_ratio)?,
        modalities,
        ..base
    };
    mc.validate()?;
    Ok(mc)
}

pub fn train_config(cfg: &RunConfig) -> Result<TrainConfig> {
    let d = TrainConfig::default();
    Ok(TrainConfig {
        epochs: cfg.parse_or("epochs", d.epochs)?,
        batch_size: cfg.parse_or("batch_size", d.batch_size)?,
        lr: cfg.parse_or("lr", d.lr)?,
        seed: seed(cfg)?,
        max_steps: cfg.parse("max_steps")?,
    })
}

pub(super) fn train(cfg: &RunConfig, out: &mut Outputs) -> Result<()> {
    let mut corpus = load_corpus(cfg, "corpus")?;
    let (ratio, _) = aspect_ratio(cfg, &mut corpus)?;
    let mc = ModelConfig {
        aspect_ratio: ratio,
        ..model_config(cfg)?
    };
    let mut model = Encore::new(mc, seed(cfg)?)?;
    let report = model.train(&corpus.samples, &train_config(cfg)?)?;

    let ckpt = cfg
        .path("checkpoint")
        .unwrap_or_else(|| out_dir(cfg).join("model.ckpt"));
    let ckpt = out.file(ckpt)?;
    model.save(&ckpt)?;
    let log = out.file(out_dir(cfg).join("train_log.csv"))?;
    write_train_log(&log, &report.epochs)?;
    Ok(())
}

/// Per-sample metrics written by `eval` and read back by `report`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleMetricsFile {
    pub schema_version: u32,
    pub predictor: String,
    pub ids: Vec<String>,
    pub metrics: Vec<SampleMetrics>,
    pub metadata: serde_json::Value,
}

fn predict(cfg: &RunConfig, corpus: &mut Corpus) -> Result<(String, PredictionSet, f64)> {
    let predictor = cfg.str_or("predictor", "constant_velocity");
    if predictor == "encore" {
        let ckpt = cfg
            .path("checkpoint")
            .unwrap_or_else(|| out_dir(cfg).join("model.ckpt"));
        let model = Encore::load(&ckpt)?;
        let spec = window_spec(cfg)?;
        if (model.config.obs_len, model.config.pred_len) != (spec.obs_len, spec.pred_len) {
            return Err(Error::Config(format!(
                "checkpoint windows o={} tau={} do not match o={} tau={}",
                model.config.obs_len, model.config.pred_len, spec.obs_len, spec.pred_len
            )));
        }
        let ratio = cfg.parse_or("aspect_ratio", model.config.aspect_ratio)?;
        corpus.set_aspect_ratio(ratio)?;
        let k = cfg.parse_or("k", model.config.k_samples)?;
        let preds = model.predict(&corpus.samples, k, seed(cfg)?)?;
        Ok(("encore".into(), preds, ratio))
    } else {
        let kind = BaselineKind::parse(predictor)?;
        let (ratio, _) = aspect_ratio(cfg, corpus)?;
        let preds = corpus
            .samples
            .par_iter()
            .map(|s| baselines::predict(kind, s))
            .collect();
        Ok((kind.name().into(), PredictionSet::single(preds), ratio))
    }
}

fn area_mode(cfg: &RunConfig, ratio: f64) -> Result<AreaMode> {
    Ok(if cfg.bool_or("adjust", true)? {
        AreaMode::Adjusted(Adjustment::with_ratio(ratio))
    } else {
        AreaMode::Visible
    })
}

pub(super) fn eval(cfg: &RunConfig, out: &mut Outputs) -> Result<()> {
    let mut corpus = load_corpus(cfg, "corpus")?;
    let (name, preds, ratio) = predict(cfg, &mut corpus)?;
    let adjusted = cfg.bool_or("adjust", true)?;
    let metrics = evaluate_corpus(&corpus.samples, &preds, &area_mode(cfg, ratio)?, corpus.fps)?;
    let meta = metadata(cfg, "eval", ratio, adjusted);

    let f = factors(cfg, "")?;
    let part = if f.is_empty() {
        None
    } else {
        Some(Partition::from_keys(&label_corpus(&corpus, &LabelConfig::default())?, &f)?)
    };
    let report = MetricReport::build(&name, &metrics, part.as_ref(), meta.clone())?;
    let dir = out_dir(cfg);
    out.write(dir.join("metrics.json"), &report.to_json()?)?;
    out.write(dir.join("metrics.csv"), &report.to_csv()?)?;
    let file = SampleMetricsFile {
        schema_version: SCHEMA_VERSION,
        predictor: name,
        ids: corpus.samples.iter().map(|s| s.id()).collect(),
        metrics,
        metadata: meta,
    };
    out.write(dir.join("samples.json"), &json_text(&file)?)?;
    Ok(())
}

fn read_samples(path: &Path) -> Result<SampleMetricsFile> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let f: SampleMetricsFile = serde_json::from_str(&text)?;
    if f.schema_version != SCHEMA_VERSION {
        return Err(Error::Config(format!(
            "{}: schema version {} (expected {SCHEMA_VERSION})",
            path.display(),
            f.schema_version
        )));
    }
    if f.ids.len() != f.metrics.len() {
        return Err(Error::LengthMismatch {
            expected: f.ids.len(),
            actual: f.metrics.len(),
        });
    }
    Ok(f)
}

pub(super) fn report(cfg: &RunConfig, out: &mut Outputs) -> Result<()> {
    let corpus = load_corpus(cfg, "corpus")?;
    let dir = out_dir(cfg);
    let samples = read_samples(&cfg.path("samples").unwrap_or_else(|| dir.join("samples.json")))?;
    let ids: Vec<String> = corpus.samples.iter().map(|s| s.id()).collect();
    if ids != samples.ids {
        return Err(Error::Config(
            "per-sample metrics do not match the corpus windows".into(),
        ));
    }
    let keys = label_corpus(&corpus, &LabelConfig::default())?;
    let meta = serde_json::json!({
        "command": "report",
        "config": cfg.resolved(),
        "source": samples.metadata,
    });
    let dir = dir.join("report");

    for f in Factor::parse_list(cfg.str_or("tables", DEFAULT_TABLES))? {
        let p = Partition::from_keys(&keys, &[f])?;
        let r = MetricReport::build(&samples.predictor, &samples.metrics, Some(&p), meta.clone())?;
        out.write(dir.join(format!("table_{}.csv", f.name())), &r.to_csv()?)?;
        out.write(dir.join(format!("table_{}.json", f.name())), &r.to_json()?)?;
    }

    let metric = MetricKind::parse(cfg.str_or("heatmap_metric", "sb_mse"))?;
    for pair in cfg.str_or("heatmaps", DEFAULT_HEATMAPS).split(',').filter(|s| !s.trim().is_empty()) {
        let (r, c) = pair
            .split_once(':')
            .ok_or_else(|| Error::Config(format!("heatmap `{pair}` must look like row:col")))?;
        let (rf, cf) = (Factor::parse(r)?, Factor::parse(c)?);
        let stem = format!("{}_{}", rf.name(), cf.name());
        let h = Heatmap::build(&samples.predictor, &keys, &samples.metrics, rf, cf, metric, meta.clone())?;
        out.write(dir.join(format!("heatmap_{stem}.json")), &h.to_json()?)?;
        let p = Partition::from_keys(&keys, &[rf, cf])?;
        let t = MetricReport::build(&samples.predictor, &samples.metrics, Some(&p), meta.clone())?;
        out.write(dir.join(format!("table_{stem}.csv")), &t.to_csv()?)?;
    }
    Ok(())
}

/// One trained-and-evaluated configuration of the ablation or sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationResult {
    pub row: String,
    pub hsf: bool,
    pub sft: bool,
    pub poft: bool,
    pub rot: bool,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub n_samples: usize,
    pub b_mse: f64,
    pub c_mse: f64,
    pub cf_mse: f64,
    pub sb_mse: f64,
    pub sc_mse: f64,
    pub scf_mse: f64,
}

fn train_and_score(
    name: String,
    mc: ModelConfig,
    tc: &TrainConfig,
    train: &Corpus,
    test: &Corpus,
    k: usize,
    area: &AreaMode,
) -> Result<AblationResult> {
    let mut model = Encore::new(mc.clone(), tc.seed)?;
    model.train(&train.samples, tc)?;
    let preds = model.predict(&test.samples, k, tc.seed)?;
    let metrics = evaluate_corpus(&test.samples, &preds, area, test.fps)?;
    let row: MetricRow = aggregate_all(&metrics)?;
    Ok(AblationResult {
        row: name,
        hsf: mc.use_hsf,
        sft: mc.use_sft,
        poft: mc.use_poft,
        rot: mc.use_rot,
        alpha: mc.alpha,
        beta: mc.beta,
        gamma: mc.gamma,
        n_samples: row.n_samples,
        b_mse: row.b_mse,
        c_mse: row.c_mse,
        cf_mse: row.cf_mse,
        sb_mse: row.sb_mse,
        sc_mse: row.sc_mse,
        scf_mse: row.scf_mse,
    })
}

pub(super) fn ablate(cfg: &RunConfig, out: &mut Outputs) -> Result<()> {
    let mut train_corpus = load_corpus(cfg, "corpus")?;
    let (ratio, _) = aspect_ratio(cfg, &mut train_corpus)?;
    let mut test_corpus = if cfg.get("test_corpus").is_some() {
        load_corpus(cfg, "test_corpus")?
    } else {
        train_corpus.clone()
    };
    test_corpus.set_aspect_ratio(ratio)?;
    let base = ModelConfig {
        aspect_ratio: ratio,
        ..model_config(cfg)?
    };
    let tc = train_config(cfg)?;
    let k = base.k_samples;
    let area = area_mode(cfg, ratio)?;

    let mut jobs: Vec<(String, ModelConfig)> = AblationRow::ALL
        .iter()
        .map(|r| (r.name(), r.apply(&base)))
        .collect();
    let rows = jobs.len();
    let full = AblationRow::ALL[4].apply(&base);
    for (param, values) in [
        ("alpha", cfg.f64_list("sweep_alpha")?),
        ("beta", cfg.f64_list("sweep_beta")?),
        ("gamma", cfg.f64_list("sweep_gamma")?),
    ] {
        for v in values {
            let mut mc = full.clone();
            match param {
                "alpha" => mc.alpha = v,
                "beta" => mc.beta = v,
                _ => mc.gamma = v,
            }
            mc.validate()?;
            jobs.push((format!("{param}={v}"), mc));
        }
    }
    let results: Vec<AblationResult> = jobs
        .into_par_iter()
        .map(|(name, mc)| train_and_score(name, mc, &tc, &train_corpus, &test_corpus, k, &area))
        .collect::<Result<_>>()?;
    let (table, sweep) = results.split_at(rows);

    let dir = out_dir(cfg);
    let meta = metadata(cfg, "ablate", ratio, cfg.bool_or("adjust", true)?);
    out.write(dir.join("ablation.csv"), &csv_text(table)?)?;
    out.write(
        dir.join("ablation.json"),
        &json_text(&serde_json::json!({
            "schema_version": SCHEMA_VERSION,
            "rows": table,
            "metadata": meta,
        }))?,
    )?;
    if !sweep.is_empty() {
        out.write(dir.join("sweep.csv"), &csv_text(sweep)?)?;
        out.write(
            dir.join("sweep.json"),
            &json_text(&serde_json::json!({
                "schema_version": SCHEMA_VERSION,
                "rows": sweep,
                "metadata": meta,
            }))?,
        )?;
    }
    Ok(())
}
