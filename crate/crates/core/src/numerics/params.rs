use std::collections::HashMap;
use std::rc::Rc;

use super::graph::Gradients;
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::rng::RngState;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Named, ordered collection of trainable tensors.
#[derive(Debug, Clone, Default)]
pub struct ParamStore {
    names: Vec<String>,
    tensors: Vec<Rc<Tensor>>,
    index: HashMap<String, usize>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, mut t: Tensor) -> ParamId {
        let name = name.into();
        assert!(!self.index.contains_key(&name), "duplicate parameter {name}");
        t.set_requires_grad(true);
        self.index.insert(name.clone(), self.names.len());
        self.names.push(name);
        self.tensors.push(Rc::new(t));
        ParamId(self.names.len() - 1)
    }

    /// Weight initialized uniformly in `±sqrt(1/fan_in)`.
    pub fn weight(&mut self, name: impl Into<String>, shape: &[usize], fan_in: usize, rng: &mut RngState) -> ParamId {
        let bound = (1.0 / fan_in.max(1) as f64).sqrt();
        self.insert(name, Tensor::uniform(shape, bound, rng))
    }

    pub fn zeros(&mut self, name: impl Into<String>, shape: &[usize]) -> ParamId {
        self.insert(name, Tensor::zeros(shape))
    }

    pub fn ones(&mut self, name: impl Into<String>, shape: &[usize]) -> ParamId {
        self.insert(name, Tensor::ones(shape))
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    /// Total scalar count.
    pub fn numel(&self) -> usize {
        self.tensors.iter().map(|t| t.numel()).sum()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.names.len()).map(ParamId)
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.index.get(name).copied().map(ParamId)
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.tensors[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        Rc::make_mut(&mut self.tensors[id.0])
    }

    pub(crate) fn shared(&self, id: ParamId) -> Rc<Tensor> {
        Rc::clone(&self.tensors[id.0])
    }

    /// Replaces the values of an existing parameter, keeping its shape.
    pub fn set(&mut self, id: ParamId, t: Tensor) -> Result<()> {
        if t.shape() != self.tensors[id.0].shape() {
            return Err(Error::shape(
                "ParamStore::set",
                format!("{}: {:?} vs {:?}", self.names[id.0], t.shape(), self.tensors[id.0].shape()),
            ));
        }
        let mut t = t;
        t.set_requires_grad(true);
        self.tensors[id.0] = Rc::new(t);
        Ok(())
    }

    /// Folds a backward pass into each parameter's gradient slot.
    pub fn accumulate(&mut self, grads: &Gradients) {
        for (id, g) in grads.params() {
            self.get_mut(id).accumulate_grad(g);
        }
    }

    pub fn zero_grad(&mut self) {
        for i in 0..self.tensors.len() {
            if self.tensors[i].grad().is_some() {
                Rc::make_mut(&mut self.tensors[i]).zero_grad();
            }
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.names.iter().map(String::as_str).zip(self.tensors.iter().map(|t| &**t))
    }
}
