//! The trajectory network: modality fusion, encoder, latent model, masked
//! decoder, and the auxiliary branches.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::bundle::{Batch, EGO_FEATURES};
use super::config::{Modality, ModelConfig};
use super::loss::{best_of_many, gaussian_kld, per_draw_logcosh};
use crate::error::{Error, Result};
use crate::tensor::attention::causal_mask;
use crate::tensor::nn::{Init, LayerNorm, Linear, Mlp, MultiHeadAttention};
use crate::tensor::{ParamStore, Tape, Tensor, Var};

// Normalized box offsets are O(0.01) and per-frame deltas O(0.001); these
// gains bring both to roughly unit range before embedding.
const LOCATION_GAIN: f64 = 10.0;
const VELOCITY_GAIN: f64 = 100.0;

/// Attention followed by a residual connection and normalization.
#[derive(Debug, Clone, Copy)]
struct CrossUnit {
    att: MultiHeadAttention,
    norm: LayerNorm,
}

impl CrossUnit {
    fn new(init: &mut Init, name: &str, d: usize, heads: usize) -> Result<Self> {
        let mut s = init.scope(name);
        Ok(CrossUnit {
            att: MultiHeadAttention::new(&mut s, "att", d, heads)?,
            norm: LayerNorm::new(&mut s, "norm", d)?,
        })
    }

    fn forward(&self, tape: &mut Tape, store: &ParamStore, q: Var, kv: Var, mask: Option<&Tensor>) -> Result<Var> {
        let a = self.att.forward(tape, store, q, kv, mask)?;
        let r = tape.add(q, a)?;
        self.norm.forward(tape, store, r)
    }
}

#[derive(Debug, Clone)]
struct FeedForward {
    mlp: Mlp,
    norm: LayerNorm,
}

impl FeedForward {
    fn new(init: &mut Init, name: &str, d: usize, hidden: usize) -> Result<Self> {
        let mut s = init.scope(name);
        Ok(FeedForward {
            mlp: Mlp::new(&mut s, "mlp", &[d, hidden, d])?,
            norm: LayerNorm::new(&mut s, "norm", d)?,
        })
    }

    fn forward(&self, tape: &mut Tape, store: &ParamStore, x: Var) -> Result<Var> {
        let h = self.mlp.forward(tape, store, x)?;
        let r = tape.add(x, h)?;
        self.norm.forward(tape, store, r)
    }
}

#[derive(Debug, Clone)]
struct EncoderBlock {
    att: CrossUnit,
    ff: FeedForward,
}

impl EncoderBlock {
    fn new(init: &mut Init, name: &str, cfg: &ModelConfig) -> Result<Self> {
        let mut s = init.scope(name);
        Ok(EncoderBlock {
            att: CrossUnit::new(&mut s, "self", cfg.model_dim, cfg.heads)?,
            ff: FeedForward::new(&mut s, "ff", cfg.model_dim, cfg.ffn_dim)?,
        })
    }

    fn forward(&self, tape: &mut Tape, store: &ParamStore, x: Var) -> Result<Var> {
        let h = self.att.forward(tape, store, x, x, None)?;
        self.ff.forward(tape, store, h)
    }
}

#[derive(Debug, Clone)]
struct DecoderBlock {
    self_att: CrossUnit,
    cross_att: CrossUnit,
    ff: FeedForward,
}

impl DecoderBlock {
    fn new(init: &mut Init, name: &str, cfg: &ModelConfig) -> Result<Self> {
        let mut s = init.scope(name);
        Ok(DecoderBlock {
            self_att: CrossUnit::new(&mut s, "self", cfg.model_dim, cfg.heads)?,
            cross_att: CrossUnit::new(&mut s, "cross", cfg.model_dim, cfg.heads)?,
            ff: FeedForward::new(&mut s, "ff", cfg.model_dim, cfg.ffn_dim)?,
        })
    }

    fn forward(&self, tape: &mut Tape, store: &ParamStore, x: Var, memory: Var, mask: &Tensor) -> Result<Var> {
        let h = self.self_att.forward(tape, store, x, x, Some(mask))?;
        let h = self.cross_att.forward(tape, store, h, memory, None)?;
        self.ff.forward(tape, store, h)
    }
}

#[derive(Debug, Clone)]
enum Fusion {
    /// `f_1 = e_1`, `f_j = unit_j(f_{j-1}, e_j)`.
    Stepwise(Vec<CrossUnit>),
    /// One unit per ordered pair `(query, key)`.
    Pairwise(Vec<(usize, usize, CrossUnit)>),
}

#[derive(Debug, Clone)]
enum AuxHead {
    Reconstruct { block: EncoderBlock, head: Linear },
    PartialFuture { head: Linear },
}

/// The state-queried ego/box stream shared by reconstruction and its
/// partial-observation alternative.
#[derive(Debug, Clone)]
struct AuxBranch {
    query: Linear,
    kv: Linear,
    cross: CrossUnit,
    proj: Linear,
    head: AuxHead,
}

#[derive(Debug, Clone)]
pub(super) struct Net {
    embed: Vec<(Modality, Linear)>,
    fusion: Fusion,
    fuse_proj: Linear,
    encoder: Vec<EncoderBlock>,
    prior: Mlp,
    posterior: Mlp,
    future_embed: Linear,
    memory: Linear,
    dec_in: Linear,
    decoder: Vec<DecoderBlock>,
    traj_head: Mlp,
    scaled_head: Option<Mlp>,
    aux: Option<AuxBranch>,
}

/// How latent codes are drawn in a forward pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LatentMode {
    /// Reparameterized draws from the posterior; needs targets.
    PosteriorSample,
    /// The posterior mean, repeated for every draw; needs targets.
    PosteriorMean,
    PriorSample,
    PriorMean,
}

impl LatentMode {
    fn needs_future(self) -> bool {
        matches!(self, LatentMode::PosteriorSample | LatentMode::PosteriorMean)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Outputs {
    /// `[B*k, tau, 4]`, sample-major.
    pub trajectory: Var,
    pub scaled: Option<Var>,
    /// `[B, o, 4]` for reconstruction, `[B, tau, 4]` for partial observation.
    pub aux: Option<Var>,
    pub kld: Option<Var>,
    pub k: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct LossVars {
    pub total: Var,
    pub ft: Var,
    pub sft: Option<Var>,
    pub aux: Option<Var>,
    pub kld: Option<Var>,
}

/// Sinusoidal position table `[len, d]`.
pub fn positional_encoding(len: usize, d: usize) -> Tensor {
    Tensor::from_fn(&[len, d], |i| {
        let (t, c) = ((i / d) as f64, i % d);
        let freq = 10000f64.powf(-((c / 2 * 2) as f64) / d as f64);
        if c % 2 == 0 {
            (t * freq).sin()
        } else {
            (t * freq).cos()
        }
    })
}

/// Network definition plus its weights.
#[derive(Debug, Clone)]
pub struct Encore {
    pub config: ModelConfig,
    pub store: ParamStore,
    pub(super) net: Net,
}

impl Encore {
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut init = Init::new(&mut store, &mut rng);
        let net = Net::new(&mut init, &config)?;
        Ok(Encore { config, store, net })
    }

    /// Rebuilds the network for `config` around an existing set of weights.
    pub fn from_parts(config: ModelConfig, store: ParamStore) -> Result<Self> {
        let fresh = Encore::new(config, 0)?;
        if fresh.store.len() != store.len() {
            return Err(Error::BadCheckpoint(format!(
                "expected {} tensors, found {}",
                fresh.store.len(),
                store.len()
            )));
        }
        for ((_, a), (_, b)) in fresh.store.iter().zip(store.iter()) {
            if a.name != b.name || a.value.shape() != b.value.shape() {
                return Err(Error::BadCheckpoint(format!(
                    "tensor `{}` {:?} does not match expected `{}` {:?}",
                    b.name,
                    b.value.shape(),
                    a.name,
                    a.value.shape()
                )));
            }
        }
        Ok(Encore {
            config: fresh.config,
            store,
            net: fresh.net,
        })
    }

    /// Embedded, fused and encoded observation, `[B, o, D]`.
    pub fn encode(&self, tape: &mut Tape, batch: &Batch) -> Result<Var> {
        self.net.encode(tape, &self.store, &self.config, batch)
    }

    pub fn forward(&self, tape: &mut Tape, batch: &Batch, mode: LatentMode, k: usize, rng: &mut ChaCha8Rng) -> Result<Outputs> {
        self.net.forward(tape, &self.store, &self.config, batch, mode, k, rng)
    }

    /// Weighted training objective for one forward pass.
    pub fn loss(&self, tape: &mut Tape, out: &Outputs, batch: &Batch) -> Result<LossVars> {
        let cfg = &self.config;
        let target = batch.target.as_ref().ok_or(Error::MissingFuture)?;
        let ft_rows = per_draw_logcosh(tape, out.trajectory, target, out.k)?;
        let ft = best_of_many(tape, ft_rows, out.k)?;
        let mut total = ft;
        let mut sft = None;
        if let Some(s) = out.scaled {
            let scale = batch.scale.as_ref().ok_or(Error::MissingFuture)?;
            let scaled_target = Tensor::from_fn(target.shape(), |i| {
                let b = i / (batch.pred_len * 4);
                target.data()[i] / scale[b][i % 4]
            });
            let rows = per_draw_logcosh(tape, s, &scaled_target, out.k)?;
            let l = best_of_many(tape, rows, out.k)?;
            let w = tape.scale(l, cfg.alpha)?;
            total = tape.add(total, w)?;
            sft = Some(l);
        }
        let mut aux = None;
        if let Some(a) = out.aux {
            let aux_target = if cfg.use_poft { target } else { &batch.location };
            let rows = per_draw_logcosh(tape, a, aux_target, 1)?;
            let l = tape.mean_all(rows)?;
            let w = tape.scale(l, cfg.beta)?;
            total = tape.add(total, w)?;
            aux = Some(l);
        }
        if let Some(kl) = out.kld {
            let w = tape.scale(kl, cfg.gamma)?;
            total = tape.add(total, w)?;
        }
        Ok(LossVars {
            total,
            ft,
            sft,
            aux,
            kld: out.kld,
        })
    }

    /// Observed boxes rebuilt from state, ego-motion and the first box,
    /// `[B, o, 4]`.
    pub fn reconstruct(&self, tape: &mut Tape, batch: &Batch) -> Result<Var> {
        match &self.net.aux {
            Some(b) if self.config.use_rot => b.forward(&self.net, tape, &self.store, &self.config, batch),
            _ => Err(Error::DisabledBranch("reconstruction")),
        }
    }

    /// Future boxes from the partial-observation stream, `[B, tau, 4]`.
    pub fn partial_future(&self, tape: &mut Tape, batch: &Batch) -> Result<Var> {
        match &self.net.aux {
            Some(b) if self.config.use_poft => b.forward(&self.net, tape, &self.store, &self.config, batch),
            _ => Err(Error::DisabledBranch("partial observation")),
        }
    }

    /// Parameter names grouped by their first two dotted components.
    pub fn parameter_groups(&self) -> Vec<String> {
        let mut groups: Vec<String> = self
            .store
            .names()
            .map(|n| n.split('.').take(2).collect::<Vec<_>>().join("."))
            .collect();
        groups.dedup();
        groups
    }
}

impl Net {
    fn new(init: &mut Init, cfg: &ModelConfig) -> Result<Self> {
        let (e, d, l) = (cfg.embed_dim, cfg.model_dim, cfg.latent_dim);
        let m = cfg.modalities.len();
        let mut embed = Vec::with_capacity(m);
        {
            let mut s = init.scope("embed");
            for &md in &cfg.modalities {
                embed.push((md, Linear::new(&mut s, md.name(), md.dim(), e)?));
            }
        }
        let (fusion, fused_width) = {
            let mut s = init.scope("fusion");
            if cfg.use_hsf {
                let units = (1..m)
                    .map(|j| CrossUnit::new(&mut s, &format!("unit{j}"), e, cfg.heads))
                    .collect::<Result<Vec<_>>>()?;
                (Fusion::Stepwise(units), (m - 1) * e)
            } else {
                let mut units = Vec::with_capacity(m * (m - 1));
                for i in 0..m {
                    for j in 0..m {
                        if i != j {
                            units.push((i, j, CrossUnit::new(&mut s, &format!("pair{i}_{j}"), e, cfg.heads)?));
                        }
                    }
                }
                (Fusion::Pairwise(units), m * (m - 1) * e)
            }
        };
        let fuse_proj = Linear::new(&mut init.scope("fusion"), "proj", fused_width, d)?;
        let encoder = {
            let mut s = init.scope("encoder");
            (0..cfg.enc_layers)
                .map(|i| EncoderBlock::new(&mut s, &format!("block{i}"), cfg))
                .collect::<Result<Vec<_>>>()?
        };
        let (prior, posterior, future_embed) = {
            let mut s = init.scope("cvae");
            let [h1, h2] = cfg.cvae_hidden;
            (
                Mlp::new(&mut s, "prior", &[d, h1, h2, 2 * l])?,
                Mlp::new(&mut s, "posterior", &[2 * d, h1, h2, 2 * l])?,
                Linear::new(&mut s, "future", cfg.pred_len * 4, d)?,
            )
        };
        let (memory, dec_in, decoder) = {
            let mut s = init.scope("decoder");
            let memory = Linear::new(&mut s, "memory", d + l, d)?;
            let dec_in = Linear::new(&mut s, "input", EGO_FEATURES, d)?;
            let blocks = (0..cfg.dec_layers)
                .map(|i| DecoderBlock::new(&mut s, &format!("block{i}"), cfg))
                .collect::<Result<Vec<_>>>()?;
            (memory, dec_in, blocks)
        };
        let (traj_head, scaled_head) = {
            let mut s = init.scope("heads");
            let traj = Mlp::new(&mut s, "trajectory", &[d, d, 4])?;
            let scaled = if cfg.use_sft {
                Some(Mlp::new(&mut s, "scaled", &[d, d, 4])?)
            } else {
                None
            };
            (traj, scaled)
        };
        let aux = if cfg.use_rot || cfg.use_poft {
            let name = if cfg.use_rot { "reconstructor" } else { "partial" };
            let mut s = init.scope(name);
            let query = Linear::new(&mut s, "query", Modality::State.dim(), e)?;
            let kv = Linear::new(&mut s, "kv", EGO_FEATURES + 4, e)?;
            let cross = CrossUnit::new(&mut s, "cross", e, cfg.heads)?;
            let proj = Linear::new(&mut s, "proj", e, d)?;
            let head = if cfg.use_rot {
                AuxHead::Reconstruct {
                    block: EncoderBlock::new(&mut s, "decoder", cfg)?,
                    head: Linear::new(&mut s, "head", d, 4)?,
                }
            } else {
                AuxHead::PartialFuture {
                    head: Linear::new(&mut s, "head", d, cfg.pred_len * 4)?,
                }
            };
            Some(AuxBranch {
                query,
                kv,
                cross,
                proj,
                head,
            })
        } else {
            None
        };
        Ok(Net {
            embed,
            fusion,
            fuse_proj,
            encoder,
            prior,
            posterior,
            future_embed,
            memory,
            dec_in,
            decoder,
            traj_head,
            scaled_head,
            aux,
        })
    }

    fn modality_input(batch: &Batch, m: Modality) -> Tensor {
        match m {
            Modality::Location => batch.location.map(|v| v * LOCATION_GAIN),
            Modality::Velocity => batch.velocity.map(|v| v * VELOCITY_GAIN),
            Modality::State => batch.state.clone(),
            Modality::Ego => batch.ego.clone(),
        }
    }

    fn run_encoder(&self, tape: &mut Tape, store: &ParamStore, x: Var, cfg: &ModelConfig, len: usize) -> Result<Var> {
        let pe = tape.constant(positional_encoding(len, cfg.model_dim));
        let mut h = tape.add(x, pe)?;
        for block in &self.encoder {
            h = block.forward(tape, store, h)?;
        }
        Ok(h)
    }

    fn encode(&self, tape: &mut Tape, store: &ParamStore, cfg: &ModelConfig, batch: &Batch) -> Result<Var> {
        let mut embedded = Vec::with_capacity(self.embed.len());
        for (m, lin) in &self.embed {
            let x = tape.constant(Self::modality_input(batch, *m));
            embedded.push(lin.forward(tape, store, x)?);
        }
        let outs = match &self.fusion {
            Fusion::Stepwise(units) => {
                let mut f = embedded[0];
                let mut outs = Vec::with_capacity(units.len());
                for (j, unit) in units.iter().enumerate() {
                    f = unit.forward(tape, store, f, embedded[j + 1], None)?;
                    outs.push(f);
                }
                outs
            }
            Fusion::Pairwise(units) => units
                .iter()
                .map(|(i, j, unit)| unit.forward(tape, store, embedded[*i], embedded[*j], None))
                .collect::<Result<Vec<_>>>()?,
        };
        let cat = if outs.len() == 1 { outs[0] } else { tape.concat(&outs, 2)? };
        let fused = self.fuse_proj.forward(tape, store, cat)?;
        self.run_encoder(tape, store, fused, cfg, batch.obs_len)
    }

    fn gaussian(&self, tape: &mut Tape, params: Var, l: usize) -> Result<(Var, Var)> {
        let mu = tape.slice(params, 1, 0, l)?;
        let lv = tape.slice(params, 1, l, l)?;
        let lv = tape.clamp(lv, -10.0, 10.0)?;
        Ok((mu, lv))
    }

    #[allow(clippy::too_many_arguments)]
    fn forward(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        cfg: &ModelConfig,
        batch: &Batch,
        mode: LatentMode,
        k: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<Outputs> {
        if k == 0 {
            return Err(Error::Config("k must be at least 1".into()));
        }
        if mode.needs_future() && batch.target.is_none() {
            return Err(Error::MissingFuture);
        }
        let (b, o, tau) = (batch.size, batch.obs_len, batch.pred_len);
        let (d, l) = (cfg.model_dim, cfg.latent_dim);
        if o != cfg.obs_len || tau != cfg.pred_len {
            return Err(Error::ShapeMismatch {
                op: "window length",
                lhs: vec![cfg.obs_len, cfg.pred_len],
                rhs: vec![o, tau],
            });
        }

        let enc = self.encode(tape, store, cfg, batch)?;

        // Latent distributions.
        let pooled = tape.mean(enc, 1)?;
        let prior = self.prior.forward(tape, store, pooled)?;
        let (mu_p, lv_p) = self.gaussian(tape, prior, l)?;
        let mut kld = None;
        let (mu, lv) = if let Some(target) = batch.target.as_ref().filter(|_| mode.needs_future()) {
            let flat = tape.constant(target.reshaped(&[b, tau * 4])?);
            let fe = self.future_embed.forward(tape, store, flat)?;
            let joint = tape.concat(&[pooled, fe], 1)?;
            let post = self.posterior.forward(tape, store, joint)?;
            let (mu_q, lv_q) = self.gaussian(tape, post, l)?;
            kld = Some(gaussian_kld(tape, mu_q, lv_q, mu_p, lv_p)?);
            (mu_q, lv_q)
        } else {
            (mu_p, lv_p)
        };
        let mu_k = tape.repeat(mu, 1, k)?; // [B, k, L]
        let z = match mode {
            LatentMode::PosteriorSample | LatentMode::PriorSample => {
                let eps = tape.constant(Tensor::randn(&[b, k, l], rng));
                let half = tape.scale(lv, 0.5)?;
                let std = tape.exp(half)?;
                let std_k = tape.repeat(std, 1, k)?;
                let noise = tape.mul(std_k, eps)?;
                tape.add(mu_k, noise)?
            }
            LatentMode::PosteriorMean | LatentMode::PriorMean => mu_k,
        };
        let z = tape.reshape(z, &[b * k, l])?;
        let z = tape.repeat(z, 1, o)?; // [B*k, o, L]

        // Memory: encodings concatenated with the latent code.
        let enc_k = tape.repeat(enc, 1, k)?;
        let enc_k = tape.reshape(enc_k, &[b * k, o, d])?;
        let mem_in = tape.concat(&[enc_k, z], 2)?;
        let memory = self.memory.forward(tape, store, mem_in)?;

        // Decoder queries come from the planned ego-motion.
        let fut = tape.constant(batch.future_ego.clone());
        let q = self.dec_in.forward(tape, store, fut)?;
        let pe = tape.constant(positional_encoding(tau, d));
        let q = tape.add(q, pe)?;
        let q = tape.repeat(q, 1, k)?;
        let mut x = tape.reshape(q, &[b * k, tau, d])?;
        let mask = causal_mask(tau);
        for block in &self.decoder {
            x = block.forward(tape, store, x, memory, &mask)?;
        }

        // Heads predict offsets from the last observed box.
        let last = Tensor::from_fn(&[b * k, tau, 4], |i| batch.last[i / (k * tau * 4)][i % 4]);
        let head = self.traj_head.forward(tape, store, x)?;
        let last_v = tape.constant(last.clone());
        let trajectory = tape.add(head, last_v)?;
        let scaled = match (&self.scaled_head, &batch.scale) {
            (Some(h), Some(scale)) => {
                let offset = Tensor::from_fn(&[b * k, tau, 4], |i| {
                    let s = i / (k * tau * 4);
                    batch.last[s][i % 4] / scale[s][i % 4]
                });
                let y = h.forward(tape, store, x)?;
                let off = tape.constant(offset);
                Some(tape.add(y, off)?)
            }
            _ => None,
        };

        let aux = match &self.aux {
            Some(branch) if batch.target.is_some() => Some(branch.forward(self, tape, store, cfg, batch)?),
            _ => None,
        };

        Ok(Outputs {
            trajectory,
            scaled,
            aux,
            kld,
            k,
        })
    }
}

impl AuxBranch {
    fn forward(&self, net: &Net, tape: &mut Tape, store: &ParamStore, cfg: &ModelConfig, batch: &Batch) -> Result<Var> {
        let (b, o, tau) = (batch.size, batch.obs_len, batch.pred_len);
        let state = tape.constant(batch.state.clone());
        let q = self.query.forward(tape, store, state)?;
        let kv_in = tape.constant(batch.ego_with_origin.clone());
        let kv = self.kv.forward(tape, store, kv_in)?;
        let c = self.cross.forward(tape, store, q, kv, None)?;
        let p = self.proj.forward(tape, store, c)?;
        // Same encoder weights as the main path.
        let h = net.run_encoder(tape, store, p, cfg, o)?;
        match &self.head {
            AuxHead::Reconstruct { block, head } => {
                let h = block.forward(tape, store, h)?;
                head.forward(tape, store, h)
            }
            AuxHead::PartialFuture { head } => {
                let pooled = tape.mean(h, 1)?;
                let y = head.forward(tape, store, pooled)?;
                tape.reshape(y, &[b, tau, 4])
            }
        }
    }
}

/// Pulls the `[B*k, T, 4]` rows of an output back into per-sample draws.
pub fn split_draws(t: &Tensor, b: usize, k: usize) -> Vec<Vec<Vec<[f64; 4]>>> {
    let steps = t.shape()[1];
    (0..b)
        .map(|s| {
            (0..k)
                .map(|j| {
                    let base = (s * k + j) * steps * 4;
                    (0..steps)
                        .map(|t_| {
                            let r = &t.data()[base + t_ * 4..base + t_ * 4 + 4];
                            [r[0], r[1], r[2], r[3]]
                        })
                        .collect()
                })
                .collect()
        })
        .collect()
}
