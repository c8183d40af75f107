//! Named trainable weights.

use std::collections::BTreeMap;

use super::Tensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
pub struct Parameter {
    pub name: String,
    pub value: Tensor,
    pub grad: Option<Tensor>,
}

/// Ordered collection of parameters, addressable by id or by dotted name.
#[derive(Debug, Clone, Default)]
pub struct ParamStore {
    params: Vec<Parameter>,
    by_name: BTreeMap<String, ParamId>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor) -> Result<ParamId> {
        let name = name.into();
        if self.by_name.contains_key(&name) {
            return Err(Error::Config(format!("duplicate parameter `{name}`")));
        }
        let id = ParamId(self.params.len());
        self.by_name.insert(name.clone(), id);
        self.params.push(Parameter {
            name,
            value,
            grad: None,
        });
        Ok(id)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Parameter {
        &self.params[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Parameter {
        &mut self.params[id.0]
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.by_name.get(name).copied()
    }

    pub fn by_name(&self, name: &str) -> Option<&Parameter> {
        self.id(name).map(|id| self.get(id))
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Parameter)> {
        self.params.iter().enumerate().map(|(i, p)| (ParamId(i), p))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Parameter> {
        self.params.iter_mut()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.params.iter().map(|p| p.name.as_str())
    }

    /// Total number of scalar weights.
    pub fn num_scalars(&self) -> usize {
        self.params.iter().map(|p| p.value.numel()).sum()
    }

    /// Scalar count over parameters whose name starts with `prefix`.
    pub fn num_scalars_with_prefix(&self, prefix: &str) -> usize {
        self.params
            .iter()
            .filter(|p| p.name.starts_with(prefix))
            .map(|p| p.value.numel())
            .sum()
    }

    /// Resets every gradient to zeros.
    pub fn zero_grad(&mut self) {
        for p in &mut self.params {
            p.grad = Some(Tensor::zeros(p.value.shape()));
        }
    }

    pub fn accumulate_grad(&mut self, id: ParamId, g: &Tensor) {
        let p = &mut self.params[id.0];
        match &mut p.grad {
            Some(acc) => acc.add_assign(g),
            None => p.grad = Some(g.clone()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_are_unique() {
        let mut s = ParamStore::new();
        let a = s.add("enc.w", Tensor::zeros(&[2, 3])).unwrap();
        assert!(s.add("enc.w", Tensor::zeros(&[1])).is_err());
        s.add("dec.w", Tensor::zeros(&[4])).unwrap();
        assert_eq!(s.id("enc.w"), Some(a));
        assert_eq!(s.num_scalars(), 10);
        assert_eq!(s.num_scalars_with_prefix("enc."), 6);
    }

    #[test]
    fn grads_accumulate() {
        let mut s = ParamStore::new();
        let a = s.add("w", Tensor::zeros(&[2])).unwrap();
        s.accumulate_grad(a, &Tensor::ones(&[2]));
        s.accumulate_grad(a, &Tensor::ones(&[2]));
        assert_eq!(s.get(a).grad.as_ref().unwrap().data(), &[2.0, 2.0]);
        s.zero_grad();
        assert_eq!(s.get(a).grad.as_ref().unwrap().data(), &[0.0, 0.0]);
    }
}
