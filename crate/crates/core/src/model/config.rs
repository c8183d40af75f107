//! Model and training hyperparameters.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Input streams, each embedded separately before fusion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Modality {
    Location,
    Velocity,
    State,
    Ego,
}

impl Modality {
    pub const DEFAULT_ORDER: [Modality; 4] = [
        Modality::Location,
        Modality::Velocity,
        Modality::State,
        Modality::Ego,
    ];

    pub fn dim(self) -> usize {
        match self {
            Modality::Location | Modality::Velocity => 4,
            Modality::State => 2,
            Modality::Ego => super::bundle::EGO_FEATURES,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Modality::Location => "location",
            Modality::Velocity => "velocity",
            Modality::State => "state",
            Modality::Ego => "ego",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "location" | "loc" => Ok(Modality::Location),
            "velocity" | "vel" => Ok(Modality::Velocity),
            "state" => Ok(Modality::State),
            "ego" => Ok(Modality::Ego),
            other => Err(Error::Config(format!("unknown modality `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub obs_len: usize,
    pub pred_len: usize,
    pub embed_dim: usize,
    pub model_dim: usize,
    pub heads: usize,
    pub ffn_dim: usize,
    pub enc_layers: usize,
    pub dec_layers: usize,
    pub cvae_hidden: [usize; 2],
    pub latent_dim: usize,
    pub k_samples: usize,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    /// Step-wise hierarchical fusion; off means one cross-attention unit
    /// per ordered modality pair.
    pub use_hsf: bool,
    /// Auxiliary scaled-trajectory head.
    pub use_sft: bool,
    /// Observation reconstruction branch.
    pub use_rot: bool,
    /// Partial-observation future branch, the alternative to `use_rot`.
    pub use_poft: bool,
    /// Decode a single trajectory from the prior mean at inference.
    pub deterministic: bool,
    pub modalities: Vec<Modality>,
    /// Visible width/height ratio used to build scaled targets.
    pub aspect_ratio: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            obs_len: 15,
            pred_len: 45,
            embed_dim: 64,
            model_dim: 128,
            heads: 2,
            ffn_dim: 256,
            enc_layers: 1,
            dec_layers: 1,
            cvae_hidden: [256, 128],
            latent_dim: 32,
            k_samples: 20,
            alpha: 10.0,
            beta: 2.0,
            gamma: 0.1,
            use_hsf: true,
            use_sft: true,
            use_rot: true,
            use_poft: false,
            deterministic: false,
            modalities: Modality::DEFAULT_ORDER.to_vec(),
            aspect_ratio: crate::trajectory::DEFAULT_ASPECT_RATIO,
        }
    }
}

impl ModelConfig {
    /// Small dimensions for gradient checks and fast tests.
    pub fn tiny() -> Self {
        ModelConfig {
            obs_len: 4,
            pred_len: 6,
            embed_dim: 8,
            model_dim: 16,
            ffn_dim: 32,
            cvae_hidden: [32, 16],
            latent_dim: 4,
            k_samples: 3,
            ..Self::default()
        }
    }

    /// Desk-scale dimensions on full-length windows.
    pub fn small() -> Self {
        ModelConfig {
            embed_dim: 16,
            model_dim: 32,
            ffn_dim: 64,
            cvae_hidden: [64, 32],
            latent_dim: 8,
            k_samples: 5,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.modalities.len() < 2 {
            return Err(Error::TooFewModalities(self.modalities.len()));
        }
        let mut seen = self.modalities.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.modalities.len() {
            return bad("modalities must be distinct".into());
        }
        if self.obs_len == 0 || self.pred_len == 0 {
            return bad("observation and prediction lengths must be positive".into());
        }
        if self.heads == 0 || self.model_dim % self.heads != 0 || self.embed_dim % self.heads != 0 {
            return bad(format!(
                "embed_dim {} and model_dim {} must be divisible by {} heads",
                self.embed_dim, self.model_dim, self.heads
            ));
        }
        if self.latent_dim == 0 || self.k_samples == 0 || self.enc_layers == 0 || self.dec_layers == 0 {
            return bad("latent_dim, k_samples and layer counts must be positive".into());
        }
        for (name, w) in [("alpha", self.alpha), ("beta", self.beta), ("gamma", self.gamma)] {
            if !(w >= 0.0 && w.is_finite()) {
                return bad(format!("loss weight {name} must be finite and non-negative"));
            }
        }
        if self.use_rot && self.use_poft {
            return bad("use_rot and use_poft are mutually exclusive".into());
        }
        if !(self.aspect_ratio > 0.0 && self.aspect_ratio < 1.0) {
            return bad(format!("aspect_ratio {} outside (0, 1)", self.aspect_ratio));
        }
        Ok(())
    }

    /// Turns on the partial-observation branch, which turns off reconstruction.
    pub fn with_poft(mut self) -> Self {
        self.use_poft = true;
        self.use_rot = false;
        self
    }

    /// Number of cross-attention units in the fusion stage.
    pub fn fusion_units(&self) -> usize {
        let m = self.modalities.len();
        if self.use_hsf {
            m - 1
        } else {
            m * (m - 1)
        }
    }
}

/// One row of the module ablation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AblationRow {
    pub hsf: bool,
    pub sft: bool,
    pub poft: bool,
    pub rot: bool,
}

impl AblationRow {
    pub const ALL: [AblationRow; 5] = [
        AblationRow { hsf: false, sft: false, poft: false, rot: false },
        AblationRow { hsf: true, sft: false, poft: false, rot: false },
        AblationRow { hsf: true, sft: true, poft: false, rot: false },
        AblationRow { hsf: true, sft: true, poft: true, rot: false },
        AblationRow { hsf: true, sft: true, poft: false, rot: true },
    ];

    pub fn name(&self) -> String {
        let mut parts = Vec::new();
        for (on, n) in [(self.hsf, "HSF"), (self.sft, "sFT"), (self.poft, "POFT"), (self.rot, "ROT")] {
            if on {
                parts.push(n);
            }
        }
        if parts.is_empty() {
            "none".into()
        } else {
            parts.join("+")
        }
    }

    pub fn apply(&self, base: &ModelConfig) -> ModelConfig {
        ModelConfig {
            use_hsf: self.hsf,
            use_sft: self.sft,
            use_poft: self.poft,
            use_rot: self.rot,
            ..base.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub seed: u64,
    /// Stop after this many optimizer steps, even mid-epoch.
    pub max_steps: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 100,
            batch_size: 128,
            lr: 4e-4,
            seed: 0,
            max_steps: None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        ModelConfig::default().validate().unwrap();
        ModelConfig::tiny().validate().unwrap();
        ModelConfig::small().validate().unwrap();
    }

    #[test]
    fn rot_and_poft_are_exclusive() {
        let c = ModelConfig::default().with_poft();
        assert!(c.use_poft && !c.use_rot);
        c.validate().unwrap();
        let both = ModelConfig {
            use_rot: true,
            ..c
        };
        assert!(both.validate().is_err());
    }

    #[test]
    fn too_few_modalities() {
        let c = ModelConfig {
            modalities: vec![Modality::Location],
            ..ModelConfig::tiny()
        };
        assert!(matches!(c.validate(), Err(Error::TooFewModalities(1))));
    }

    #[test]
    fn fusion_unit_counts() {
        let c = ModelConfig::default();
        assert_eq!(c.fusion_units(), 3);
        assert_eq!(ModelConfig { use_hsf: false, ..c }.fusion_units(), 12);
    }

    #[test]
    fn ablation_rows_are_distinct() {
        let names: Vec<_> = AblationRow::ALL.iter().map(|r| r.name()).collect();
        assert_eq!(names, ["none", "HSF", "HSF+sFT", "HSF+sFT+POFT", "HSF+sFT+ROT"]);
        for r in AblationRow::ALL {
            r.apply(&ModelConfig::tiny()).validate().unwrap();
        }
    }
}
