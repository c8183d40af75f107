//! Adam with bias correction.

use super::params::ParamStore;
use super::Tensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
}

impl AdamState {
    pub fn new(lr: f64) -> Self {
        AdamState {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// Applies one update from the gradients currently held in `store`.
    ///
    /// Every parameter must have a gradient; nothing is modified otherwise.
    pub fn step(&mut self, store: &mut ParamStore) -> Result<()> {
        if let Some((_, p)) = store.iter().find(|(_, p)| p.grad.is_none()) {
            return Err(Error::MissingGrad(p.name.clone()));
        }
        if self.m.len() != store.len() {
            self.m = store.iter().map(|(_, p)| Tensor::zeros(p.value.shape())).collect();
            self.v = self.m.clone();
        }
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for (i, p) in store.iter_mut().enumerate() {
            let g = p.grad.as_ref().expect("checked above");
            let m = self.m[i].data_mut();
            let v = self.v[i].data_mut();
            for (k, w) in p.value.data_mut().iter_mut().enumerate() {
                let gk = g.data()[k];
                m[k] = self.beta1 * m[k] + (1.0 - self.beta1) * gk;
                v[k] = self.beta2 * v[k] + (1.0 - self.beta2) * gk * gk;
                let mh = m[k] / c1;
                let vh = v[k] / c2;
                *w -= self.lr * mh / (vh.sqrt() + self.eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_learning_rate() {
        // After bias correction the first update is lr * g / (|g| + eps).
        let mut store = ParamStore::new();
        let w = store.add("w", Tensor::scalar(1.0)).unwrap();
        store.get_mut(w).grad = Some(Tensor::scalar(0.5));
        let mut adam = AdamState::new(0.1);
        adam.step(&mut store).unwrap();
        let expected = 1.0 - 0.1 * 0.5 / (0.5 + 1e-8);
        assert!((store.get(w).value.item() - expected).abs() < 1e-15);
    }

    #[test]
    fn second_step_matches_hand_computation() {
        let mut store = ParamStore::new();
        let w = store.add("w", Tensor::scalar(0.0)).unwrap();
        let mut adam = AdamState::new(0.01);
        let mut x = 0.0;
        let (mut m, mut v) = (0.0, 0.0);
        for (t, g) in [(1, 2.0), (2, -1.0)] {
            store.get_mut(w).grad = Some(Tensor::scalar(g));
            adam.step(&mut store).unwrap();
            m = 0.9 * m + 0.1 * g;
            v = 0.999 * v + 0.001 * g * g;
            let mh = m / (1.0 - 0.9f64.powi(t));
            let vh = v / (1.0 - 0.999f64.powi(t));
            x -= 0.01 * mh / (vh.sqrt() + 1e-8);
        }
        assert!((store.get(w).value.item() - x).abs() < 1e-15);
    }

    #[test]
    fn missing_gradient_is_an_error() {
        let mut store = ParamStore::new();
        store.add("w", Tensor::scalar(1.0)).unwrap();
        let mut adam = AdamState::new(0.1);
        assert!(matches!(adam.step(&mut store), Err(Error::MissingGrad(n)) if n == "w"));
        assert_eq!(adam.steps_taken(), 0);
    }
}
