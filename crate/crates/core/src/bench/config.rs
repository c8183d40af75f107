//! INI configuration with command-line overrides.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};

/// Every key the harness understands. Anything else is rejected so a typo
/// cannot silently fall back to a default.
pub const KNOWN_KEYS: &[&str] = &[
    "out",
    "seed",
    "corpus",
    "test_corpus",
    "o",
    "tau",
    "stride",
    "fps",
    // generate
    "profile",
    "scenes",
    "peds_per_scene",
    "duration",
    // partition / eval / report
    "factors",
    "predictor",
    "checkpoint",
    "k",
    "adjust",
    "aspect_ratio",
    "samples",
    "tables",
    "heatmaps",
    "heatmap_metric",
    // model and training
    "preset",
    "embed_dim",
    "model_dim",
    "heads",
    "ffn_dim",
    "enc_layers",
    "dec_layers",
    "latent_dim",
    "alpha",
    "beta",
    "gamma",
    "hsf",
    "sft",
    "rot",
    "poft",
    "deterministic",
    "modalities",
    "epochs",
    "batch_size",
    "lr",
    "max_steps",
    // ablate
    "sweep_alpha",
    "sweep_beta",
    "sweep_gamma",
];

/// Flat key/value settings. Section headers in the file are accepted for
/// readability and otherwise ignored.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunConfig {
    values: BTreeMap<String, String>,
}

impl RunConfig {
    pub fn from_ini_str(text: &str) -> Result<Self> {
        let ini = ini::Ini::load_from_str(text).map_err(|e| Error::Config(format!("config file: {e}")))?;
        let mut cfg = RunConfig::default();
        for (_, props) in ini.iter() {
            for (k, v) in props.iter() {
                cfg.set(k, v)?;
            }
        }
        Ok(cfg)
    }

    pub fn from_ini_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_ini_str(&text)
    }

    /// Loads the optional file, then applies `--key value` / `--key=value`
    /// overrides, which win.
    pub fn load(file: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut cfg = match file {
            Some(p) => Self::from_ini_file(p)?,
            None => RunConfig::default(),
        };
        cfg.apply_overrides(overrides)?;
        Ok(cfg)
    }

    pub fn apply_overrides(&mut self, args: &[String]) -> Result<()> {
        let mut it = args.iter();
        while let Some(arg) = it.next() {
            let Some(flag) = arg.strip_prefix("--") else {
                return Err(Error::Config(format!("expected --key, got `{arg}`")));
            };
            let (key, value) = match flag.split_once('=') {
                Some((k, v)) => (k.to_string(), v.to_string()),
                None => {
                    let v = it
                        .next()
                        .ok_or_else(|| Error::Config(format!("--{flag} needs a value")))?;
                    (flag.to_string(), v.clone())
                }
            };
            self.set(&key.replace('-', "_"), &value)?;
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim();
        if !KNOWN_KEYS.contains(&key) {
            return Err(Error::Config(format!("unknown key `{key}`")));
        }
        self.values.insert(key.to_string(), value.trim().to_string());
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn str_or<'a>(&'a self, key: &str, default: &'a str) -> &'a str {
        self.get(key).unwrap_or(default)
    }

    pub fn parse<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| Error::Config(format!("`{key}` has invalid value `{v}`"))),
        }
    }

    pub fn parse_or<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        Ok(self.parse(key)?.unwrap_or(default))
    }

    pub fn bool_or(&self, key: &str, default: bool) -> Result<bool> {
        match self.get(key) {
            None => Ok(default),
            Some("true" | "yes" | "on" | "1") => Ok(true),
            Some("false" | "no" | "off" | "0") => Ok(false),
            Some(v) => Err(Error::Config(format!("`{key}` is not a boolean: `{v}`"))),
        }
    }

    pub fn path(&self, key: &str) -> Option<PathBuf> {
        self.get(key).map(PathBuf::from)
    }

    pub fn require_path(&self, key: &str) -> Result<PathBuf> {
        self.path(key)
            .ok_or_else(|| Error::Config(format!("missing required key `{key}`")))
    }

    /// Comma-separated numbers; empty or missing gives an empty list.
    pub fn f64_list(&self, key: &str) -> Result<Vec<f64>> {
        let Some(v) = self.get(key) else {
            return Ok(Vec::new());
        };
        v.split(',')
            .filter(|s| !s.trim().is_empty())
            .map(|s| {
                s.trim()
                    .parse()
                    .map_err(|_| Error::Config(format!("`{key}` has invalid entry `{s}`")))
            })
            .collect()
    }

    /// Settings as given, for embedding in outputs.
    pub fn resolved(&self) -> serde_json::Value {
        serde_json::to_value(&self.values).expect("string map")
    }
}
