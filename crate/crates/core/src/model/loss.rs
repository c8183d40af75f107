//! Regression and latent losses.

use crate::error::{Error, Result};
use crate::tensor::{Tape, Tensor, Var};

/// Repeats every leading-axis entry of `t` `k` times in place.
pub fn expand_draws(t: &Tensor, k: usize) -> Tensor {
    let b = t.shape()[0];
    let inner = t.numel() / b;
    let mut shape = t.shape().to_vec();
    shape[0] = b * k;
    let mut data = Vec::with_capacity(t.numel() * k);
    for i in 0..b {
        for _ in 0..k {
            data.extend_from_slice(&t.data()[i * inner..(i + 1) * inner]);
        }
    }
    Tensor::new(shape, data).expect("expanded shape")
}

/// LogCosh summed over every step and coordinate of each row.
///
/// `pred` is `[B*k, T, C]` laid out sample-major; `target` is `[B, T, C]`.
/// Returns `[B*k]`.
pub fn per_draw_logcosh(tape: &mut Tape, pred: Var, target: &Tensor, k: usize) -> Result<Var> {
    let expanded = expand_draws(target, k);
    let ps = tape.shape(pred).to_vec();
    if ps != expanded.shape() {
        return Err(Error::ShapeMismatch {
            op: "per_draw_logcosh",
            lhs: ps,
            rhs: expanded.shape().to_vec(),
        });
    }
    let t = tape.constant(expanded);
    let d = tape.sub(pred, t)?;
    let l = tape.logcosh(d)?;
    let rows = ps[0];
    let flat = tape.reshape(l, &[rows, ps[1..].iter().product()])?;
    tape.sum(flat, 1)
}

/// Index of the smallest of each sample's `k` draws; ties go to the first.
pub fn argmin_draws(values: &[f64], k: usize) -> Vec<usize> {
    values
        .chunks(k)
        .enumerate()
        .map(|(b, c)| {
            let mut best = 0;
            for (j, v) in c.iter().enumerate() {
                if *v < c[best] {
                    best = j;
                }
            }
            b * k + best
        })
        .collect()
}

/// Mean over samples of the minimum over draws. The gradient reaches only
/// the selected draw of each sample.
pub fn best_of_many(tape: &mut Tape, per_draw: Var, k: usize) -> Result<Var> {
    let rows = argmin_draws(tape.value(per_draw).data(), k);
    let picked = tape.gather_rows(per_draw, &rows)?;
    tape.mean_all(picked)
}

/// Closed-form `KL(q || p)` between diagonal Gaussians, summed over latent
/// dimensions and averaged over the batch. Inputs are `[B, L]`.
pub fn gaussian_kld(tape: &mut Tape, mu_q: Var, lv_q: Var, mu_p: Var, lv_p: Var) -> Result<Var> {
    let b = tape.shape(mu_q)[0] as f64;
    // d = lv_q - lv_p; kl = 0.5 * (exp(d) - d + (mu_q - mu_p)^2 exp(-lv_p) - 1)
    let d = tape.sub(lv_q, lv_p)?;
    let ed = tape.exp(d)?;
    let dm = tape.sub(mu_q, mu_p)?;
    let dm2 = tape.square(dm)?;
    let nlp = tape.neg(lv_p)?;
    let inv = tape.exp(nlp)?;
    let quad = tape.mul(dm2, inv)?;
    let s = tape.sub(ed, d)?;
    let s = tape.add(s, quad)?;
    let s = tape.add_scalar(s, -1.0)?;
    let total = tape.sum_all(s)?;
    tape.scale(total, 0.5 / b)
}

/// Plain-number version of [`gaussian_kld`] for one distribution pair.
pub fn kld_value(mu_q: &[f64], lv_q: &[f64], mu_p: &[f64], lv_p: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..mu_q.len() {
        let d = lv_q[i] - lv_p[i];
        s += d.exp() - d + (mu_q[i] - mu_p[i]).powi(2) * (-lv_p[i]).exp() - 1.0;
    }
    0.5 * s
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn kld_of_identical_distributions_is_zero() {
        assert_eq!(kld_value(&[0.3, -1.0], &[0.2, -2.0], &[0.3, -1.0], &[0.2, -2.0]), 0.0);
        let mut tape = Tape::new();
        let m = tape.constant(Tensor::new(vec![1, 2], vec![0.3, -1.0]).unwrap());
        let l = tape.constant(Tensor::new(vec![1, 2], vec![0.2, -2.0]).unwrap());
        let k = gaussian_kld(&mut tape, m, l, m, l).unwrap();
        assert_eq!(tape.value(k).item(), 0.0);
    }

    #[test]
    fn kld_against_unit_prior_is_half_squared_norm() {
        let mu = [1.0, -2.0, 0.5];
        let v = kld_value(&mu, &[0.0; 3], &[0.0; 3], &[0.0; 3]);
        assert!((v - 0.5 * (1.0 + 4.0 + 0.25)).abs() < 1e-15);
    }

    #[test]
    fn kld_matches_monte_carlo() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (mq, lq, mp, lp) = ([0.4, -0.3], [-0.5, 0.3], [-0.2, 0.1], [0.2, -0.4]);
        let closed = kld_value(&mq, &lq, &mp, &lp);
        let log_n = |x: f64, m: f64, lv: f64| -0.5 * (lv + (x - m).powi(2) / lv.exp() + (2.0 * std::f64::consts::PI).ln());
        let n = 1_000_000;
        let mut acc = 0.0;
        for _ in 0..n {
            for i in 0..2 {
                let e: f64 = StandardNormal.sample(&mut rng);
                let x = mq[i] + (0.5 * lq[i]).exp() * e;
                acc += log_n(x, mq[i], lq[i]) - log_n(x, mp[i], lp[i]);
            }
        }
        let mc = acc / n as f64;
        assert!(((mc - closed) / closed).abs() < 0.01, "mc {mc} closed {closed}");
    }

    #[test]
    fn best_of_many_with_one_draw_is_plain_mean() {
        let mut tape = Tape::new();
        let v = tape.var(Tensor::new(vec![3], vec![1.0, 4.0, 7.0]).unwrap());
        let l = best_of_many(&mut tape, v, 1).unwrap();
        assert_eq!(tape.value(l).item(), 4.0);
    }

    #[test]
    fn gradient_reaches_only_the_best_draw() {
        let mut tape = Tape::new();
        let v = tape.var(Tensor::new(vec![4], vec![3.0, 1.0, 2.0, 5.0]).unwrap());
        let l = best_of_many(&mut tape, v, 2).unwrap();
        assert_eq!(tape.value(l).item(), 1.5);
        let g = tape.backward(l).unwrap();
        assert_eq!(g.wrt(v).unwrap().data(), &[0.0, 0.5, 0.5, 0.0]);
    }

    #[test]
    fn per_draw_loss_matches_loops() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let pred = Tensor::from_fn(&[4, 3, 2], |_| rng.random_range(-1.0..1.0));
        let target = Tensor::from_fn(&[2, 3, 2], |_| rng.random_range(-1.0..1.0));
        let mut tape = Tape::new();
        let p = tape.constant(pred.clone());
        let l = per_draw_logcosh(&mut tape, p, &target, 2).unwrap();
        for row in 0..4 {
            let b = row / 2;
            let mut s = 0.0;
            for i in 0..6 {
                s += (pred.data()[row * 6 + i] - target.data()[b * 6 + i]).cosh().ln();
            }
            assert!((tape.value(l).data()[row] - s).abs() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn kld_is_nonnegative(v in prop::collection::vec(-3.0f64..3.0, 12)) {
            let k = kld_value(&v[0..3], &v[3..6], &v[6..9], &v[9..12]);
            prop_assert!(k >= -1e-12);
        }

        #[test]
        fn best_of_many_never_exceeds_mean(v in prop::collection::vec(0.0f64..10.0, 15)) {
            let mut tape = Tape::new();
            let x = tape.constant(Tensor::new(vec![15], v.clone()).unwrap());
            let b = best_of_many(&mut tape, x, 5).unwrap();
            let mean = v.iter().sum::<f64>() / 15.0;
            prop_assert!(tape.value(b).item() <= mean + 1e-12);
        }
    }
}
