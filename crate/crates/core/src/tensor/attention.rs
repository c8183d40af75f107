//! Multi-head scaled dot-product attention.

use super::tape::{Tape, Var};
use super::Tensor;
use crate::error::{Error, Result};

/// Additive mask that hides later keys from earlier queries.
pub fn causal_mask(len: usize) -> Tensor {
    Tensor::from_fn(&[len, len], |i| {
        if i % len > i / len {
            f64::NEG_INFINITY
        } else {
            0.0
        }
    })
}

/// Attention over already-projected inputs.
///
/// `q` is `[B, Tq, D]`, `k` and `v` are `[B, Tk, D]`. The model dimension is
/// split into `heads` equal slices, each attended independently, and the
/// head outputs are concatenated back to `[B, Tq, D]`. `mask`, if given, is
/// a `[Tq, Tk]` additive bias applied to every head's scores.
pub fn scaled_dot_attention(
    tape: &mut Tape,
    q: Var,
    k: Var,
    v: Var,
    heads: usize,
    mask: Option<&Tensor>,
) -> Result<Var> {
    let qs = tape.shape(q).to_vec();
    let ks = tape.shape(k).to_vec();
    if qs.len() != 3 || ks.len() != 3 || qs[0] != ks[0] || qs[2] != ks[2] || heads == 0 {
        return Err(Error::ShapeMismatch {
            op: "attention",
            lhs: qs,
            rhs: ks,
        });
    }
    if tape.shape(v) != ks.as_slice() {
        return Err(Error::ShapeMismatch {
            op: "attention",
            lhs: ks,
            rhs: tape.shape(v).to_vec(),
        });
    }
    let d = qs[2];
    if d % heads != 0 {
        return Err(Error::Config(format!(
            "model dimension {d} is not divisible by {heads} heads"
        )));
    }
    let dh = d / heads;
    let mask = match mask {
        Some(m) => {
            if m.shape() != [qs[1], ks[1]] {
                return Err(Error::ShapeMismatch {
                    op: "attention mask",
                    lhs: vec![qs[1], ks[1]],
                    rhs: m.shape().to_vec(),
                });
            }
            Some(tape.constant(m.clone()))
        }
        None => None,
    };
    let scale = 1.0 / (dh as f64).sqrt();
    let mut outs = Vec::with_capacity(heads);
    for h in 0..heads {
        let qh = tape.slice(q, 2, h * dh, dh)?;
        let kh = tape.slice(k, 2, h * dh, dh)?;
        let vh = tape.slice(v, 2, h * dh, dh)?;
        let kt = tape.transpose(kh)?;
        let mut scores = tape.matmul(qh, kt)?;
        scores = tape.scale(scores, scale)?;
        if let Some(m) = mask {
            scores = tape.add(scores, m)?;
        }
        let w = tape.softmax(scores, 2)?;
        outs.push(tape.matmul(w, vh)?);
    }
    if outs.len() == 1 {
        Ok(outs[0])
    } else {
        tape.concat(&outs, 2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    // Straightforward per-element loops, no shared code with the tape.
    fn naive(q: &Tensor, k: &Tensor, v: &Tensor, heads: usize, causal: bool) -> Vec<f64> {
        let (b, tq, d) = (q.shape()[0], q.shape()[1], q.shape()[2]);
        let tk = k.shape()[1];
        let dh = d / heads;
        let at = |t: &Tensor, bi: usize, i: usize, c: usize, len: usize| t.data()[(bi * len + i) * d + c];
        let mut out = vec![0.0; b * tq * d];
        for bi in 0..b {
            for h in 0..heads {
                for i in 0..tq {
                    let mut s = vec![f64::NEG_INFINITY; tk];
                    for (j, sj) in s.iter_mut().enumerate() {
                        if causal && j > i {
                            continue;
                        }
                        let mut dot = 0.0;
                        for c in 0..dh {
                            dot += at(q, bi, i, h * dh + c, tq) * at(k, bi, j, h * dh + c, tk);
                        }
                        *sj = dot / (dh as f64).sqrt();
                    }
                    let mx = s.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    let e: Vec<f64> = s.iter().map(|x| (x - mx).exp()).collect();
                    let z: f64 = e.iter().sum();
                    for c in 0..dh {
                        let mut acc = 0.0;
                        for j in 0..tk {
                            acc += e[j] / z * at(v, bi, j, h * dh + c, tk);
                        }
                        out[(bi * tq + i) * d + h * dh + c] = acc;
                    }
                }
            }
        }
        out
    }

    fn random(shape: &[usize], seed: u64) -> Tensor {
        Tensor::uniform(shape, 1.5, &mut ChaCha8Rng::seed_from_u64(seed))
    }

    #[test]
    fn two_heads_match_reference_loops() {
        let q = random(&[2, 3, 4], 1);
        let k = random(&[2, 5, 4], 2);
        let v = random(&[2, 5, 4], 3);
        let mut tape = Tape::new();
        let (qv, kv, vv) = (tape.constant(q.clone()), tape.constant(k.clone()), tape.constant(v.clone()));
        let out = scaled_dot_attention(&mut tape, qv, kv, vv, 2, None).unwrap();
        let reference = naive(&q, &k, &v, 2, false);
        for (a, b) in tape.value(out).data().iter().zip(&reference) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn causal_mask_matches_reference() {
        let q = random(&[1, 4, 6], 4);
        let k = random(&[1, 4, 6], 5);
        let v = random(&[1, 4, 6], 6);
        let mut tape = Tape::new();
        let (qv, kv, vv) = (tape.constant(q.clone()), tape.constant(k.clone()), tape.constant(v.clone()));
        let out = scaled_dot_attention(&mut tape, qv, kv, vv, 3, Some(&causal_mask(4))).unwrap();
        let reference = naive(&q, &k, &v, 3, true);
        for (a, b) in tape.value(out).data().iter().zip(&reference) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn key_permutation_leaves_output_unchanged() {
        let q = random(&[1, 2, 4], 7);
        let k = random(&[1, 3, 4], 8);
        let v = random(&[1, 3, 4], 9);
        let perm = [2, 0, 1];
        let permute = |t: &Tensor| {
            Tensor::from_fn(t.shape(), |i| {
                let (row, c) = (i / 4, i % 4);
                t.data()[perm[row] * 4 + c]
            })
        };
        let run = |k: Tensor, v: Tensor| {
            let mut tape = Tape::new();
            let (qv, kv, vv) = (tape.constant(q.clone()), tape.constant(k), tape.constant(v));
            let o = scaled_dot_attention(&mut tape, qv, kv, vv, 2, None).unwrap();
            tape.value(o).clone()
        };
        let a = run(k.clone(), v.clone());
        let b = run(permute(&k), permute(&v));
        assert!(a.max_abs_diff(&b) < 1e-12);
    }

    #[test]
    fn causal_output_ignores_future_keys() {
        let q = random(&[1, 4, 4], 10);
        let k = random(&[1, 4, 4], 11);
        let v = random(&[1, 4, 4], 12);
        let mut v2 = v.clone();
        for c in 0..4 {
            v2.data_mut()[3 * 4 + c] += 100.0;
        }
        let run = |v: Tensor| {
            let mut tape = Tape::new();
            let (qv, kv, vv) = (tape.constant(q.clone()), tape.constant(k.clone()), tape.constant(v));
            let o = scaled_dot_attention(&mut tape, qv, kv, vv, 2, Some(&causal_mask(4))).unwrap();
            tape.value(o).clone()
        };
        let (a, b) = (run(v), run(v2));
        assert_eq!(&a.data()[..12], &b.data()[..12]);
        assert_ne!(&a.data()[12..], &b.data()[12..]);
    }

    #[test]
    fn indivisible_heads_are_rejected() {
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::zeros(&[1, 2, 5]));
        assert!(scaled_dot_attention(&mut tape, x, x, x, 2, None).is_err());
    }
}
