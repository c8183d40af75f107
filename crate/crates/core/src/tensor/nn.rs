//! Parameterized building blocks.

use rand_chacha::ChaCha8Rng;

use super::attention::scaled_dot_attention;
use super::params::{ParamId, ParamStore};
use super::tape::{Tape, Var};
use super::Tensor;
use crate::error::Result;

/// Creates parameters under a dotted name prefix.
pub struct Init<'a> {
    pub store: &'a mut ParamStore,
    pub rng: &'a mut ChaCha8Rng,
    prefix: String,
}

impl<'a> Init<'a> {
    pub fn new(store: &'a mut ParamStore, rng: &'a mut ChaCha8Rng) -> Self {
        Init {
            store,
            rng,
            prefix: String::new(),
        }
    }

    pub fn scope(&mut self, name: &str) -> Init<'_> {
        let prefix = self.name(name);
        Init {
            store: self.store,
            rng: self.rng,
            prefix,
        }
    }

    fn name(&self, leaf: &str) -> String {
        if self.prefix.is_empty() {
            leaf.to_string()
        } else {
            format!("{}.{leaf}", self.prefix)
        }
    }

    /// Glorot-uniform matrix.
    pub fn weight(&mut self, name: &str, fan_in: usize, fan_out: usize) -> Result<ParamId> {
        let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let t = Tensor::uniform(&[fan_in, fan_out], bound, self.rng);
        self.store.add(self.name(name), t)
    }

    pub fn constant(&mut self, name: &str, shape: &[usize], v: f64) -> Result<ParamId> {
        self.store.add(self.name(name), Tensor::full(shape, v))
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Linear {
    pub w: ParamId,
    pub b: ParamId,
}

impl Linear {
    pub fn new(init: &mut Init, name: &str, d_in: usize, d_out: usize) -> Result<Self> {
        let mut s = init.scope(name);
        Ok(Linear {
            w: s.weight("w", d_in, d_out)?,
            b: s.constant("b", &[d_out], 0.0)?,
        })
    }

    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, x: Var) -> Result<Var> {
        let w = tape.param(store, self.w);
        let b = tape.param(store, self.b);
        let y = tape.matmul(x, w)?;
        tape.add(y, b)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LayerNorm {
    pub gain: ParamId,
    pub bias: ParamId,
    pub eps: f64,
}

impl LayerNorm {
    pub fn new(init: &mut Init, name: &str, d: usize) -> Result<Self> {
        let mut s = init.scope(name);
        Ok(LayerNorm {
            gain: s.constant("gain", &[d], 1.0)?,
            bias: s.constant("bias", &[d], 0.0)?,
            eps: 1e-5,
        })
    }

    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, x: Var) -> Result<Var> {
        let n = tape.layer_norm(x, self.eps)?;
        let g = tape.param(store, self.gain);
        let b = tape.param(store, self.bias);
        let y = tape.mul(n, g)?;
        tape.add(y, b)
    }
}

/// Linear layers with GELU between them and none after the last.
#[derive(Debug, Clone)]
pub struct Mlp {
    pub layers: Vec<Linear>,
}

impl Mlp {
    pub fn new(init: &mut Init, name: &str, dims: &[usize]) -> Result<Self> {
        let mut s = init.scope(name);
        let layers = dims
            .windows(2)
            .enumerate()
            .map(|(i, w)| Linear::new(&mut s, &format!("l{i}"), w[0], w[1]))
            .collect::<Result<_>>()?;
        Ok(Mlp { layers })
    }

    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, x: Var) -> Result<Var> {
        let mut h = x;
        for (i, l) in self.layers.iter().enumerate() {
            h = l.forward(tape, store, h)?;
            if i + 1 < self.layers.len() {
                h = tape.gelu(h)?;
            }
        }
        Ok(h)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct MultiHeadAttention {
    pub q: Linear,
    pub k: Linear,
    pub v: Linear,
    pub o: Linear,
    pub heads: usize,
}

impl MultiHeadAttention {
    pub fn new(init: &mut Init, name: &str, d: usize, heads: usize) -> Result<Self> {
        let mut s = init.scope(name);
        Ok(MultiHeadAttention {
            q: Linear::new(&mut s, "q", d, d)?,
            k: Linear::new(&mut s, "k", d, d)?,
            v: Linear::new(&mut s, "v", d, d)?,
            o: Linear::new(&mut s, "o", d, d)?,
            heads,
        })
    }

    /// `query` is `[B, Tq, D]`, `context` is `[B, Tk, D]`.
    pub fn forward(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        query: Var,
        context: Var,
        mask: Option<&Tensor>,
    ) -> Result<Var> {
        let q = self.q.forward(tape, store, query)?;
        let k = self.k.forward(tape, store, context)?;
        let v = self.v.forward(tape, store, context)?;
        let a = scaled_dot_attention(tape, q, k, v, self.heads, mask)?;
        self.o.forward(tape, store, a)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::attention::causal_mask;
    use crate::tensor::gradcheck::check_gradients;
    use rand::SeedableRng;

    #[test]
    fn names_are_scoped() {
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut init = Init::new(&mut store, &mut rng);
        let mut enc = init.scope("encoder");
        Linear::new(&mut enc, "proj", 3, 2).unwrap();
        let names: Vec<_> = store.names().map(str::to_string).collect();
        assert_eq!(names, ["encoder.proj.w", "encoder.proj.b"]);
    }

    #[test]
    fn attention_block_passes_gradcheck() {
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = Tensor::uniform(&[2, 3, 4], 1.0, &mut rng);
        let mut init = Init::new(&mut store, &mut rng);
        let mha = MultiHeadAttention::new(&mut init, "att", 4, 2).unwrap();
        let ln = LayerNorm::new(&mut init, "ln", 4).unwrap();
        let mlp = Mlp::new(&mut init, "mlp", &[4, 5, 2]).unwrap();
        let mask = causal_mask(3);
        let report = check_gradients(
            &mut store,
            |tape, s| {
                let xv = tape.constant(x.clone());
                let a = mha.forward(tape, s, xv, xv, Some(&mask))?;
                let r = tape.add(a, xv)?;
                let n = ln.forward(tape, s, r)?;
                let y = mlp.forward(tape, s, n)?;
                let l = tape.logcosh(y)?;
                tape.mean_all(l)
            },
            1e-5,
        )
        .unwrap();
        assert!(report.max_rel_error < 1e-4, "{report:?}");
    }
}
