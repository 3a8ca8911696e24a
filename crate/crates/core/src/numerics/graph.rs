//! Reverse-mode differentiation over a recorded tape.
//!
//! Every op pushes one node holding its output value. When the graph is
//! recording and at least one input needs a gradient, the node also keeps a
//! backward closure; [`Graph::backward`] replays those in reverse order.

use std::rc::Rc;

use super::params::{ParamId, ParamStore};
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Handle to a node in a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(pub(crate) usize);

pub(crate) struct BackwardCtx<'a> {
    pub grad: &'a [f64],
    pub inputs: Vec<&'a Tensor>,
    pub output: &'a Tensor,
    pub needs: Vec<bool>,
}

pub(crate) type BackwardFn = Box<dyn Fn(&BackwardCtx<'_>) -> Vec<Option<Vec<f64>>>>;

struct Node {
    value: Rc<Tensor>,
    inputs: Vec<Var>,
    backward: Option<BackwardFn>,
    needs_grad: bool,
    param: Option<ParamId>,
    op: &'static str,
}

pub struct Graph {
    nodes: Vec<Node>,
    recording: bool,
}

impl Default for Graph {
    fn default() -> Self {
        Self::new()
    }
}

impl Graph {
    /// A graph that records backward closures.
    pub fn new() -> Self {
        Self { nodes: Vec::new(), recording: true }
    }

    /// A forward-only graph; nothing is retained for differentiation.
    pub fn inference() -> Self {
        Self { nodes: Vec::new(), recording: false }
    }

    pub fn is_recording(&self) -> bool {
        self.recording
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Input that never receives a gradient.
    pub fn constant(&mut self, t: Tensor) -> Var {
        self.push_leaf(Rc::new(t), false, None)
    }

    /// Differentiable input; its gradient is available via [`Gradients::wrt`].
    pub fn leaf(&mut self, t: Tensor) -> Var {
        let rec = self.recording;
        self.push_leaf(Rc::new(t), rec, None)
    }

    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Var {
        let rec = self.recording;
        self.push_leaf(store.shared(id), rec, Some(id))
    }

    fn push_leaf(&mut self, value: Rc<Tensor>, needs_grad: bool, param: Option<ParamId>) -> Var {
        self.nodes.push(Node { value, inputs: Vec::new(), backward: None, needs_grad, param, op: "leaf" });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    /// Records an op output. `backward` is only invoked (and only built) when
    /// some input needs a gradient.
    pub(crate) fn push(
        &mut self,
        op: &'static str,
        value: Tensor,
        inputs: &[Var],
        backward: impl FnOnce() -> BackwardFn,
    ) -> Result<Var> {
        if !value.is_finite() {
            return Err(Error::NonFinite { op });
        }
        let needs_grad = self.recording && inputs.iter().any(|v| self.nodes[v.0].needs_grad);
        let backward = needs_grad.then(backward);
        self.nodes.push(Node {
            value: Rc::new(value),
            inputs: inputs.to_vec(),
            backward,
            needs_grad,
            param: None,
            op,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    /// Back-propagates from a scalar (single-element) node.
    pub fn backward(&self, root: Var) -> Result<Gradients> {
        if self.value(root).numel() != 1 {
            return Err(Error::shape("backward", format!("root must be scalar, got {:?}", self.shape(root))));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; root.0 + 1];
        grads[root.0] = Some(vec![1.0]);
        for i in (0..=root.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            if let Some(bw) = &node.backward {
                let ctx = BackwardCtx {
                    grad: &g,
                    inputs: node.inputs.iter().map(|v| &*self.nodes[v.0].value).collect(),
                    output: &node.value,
                    needs: node.inputs.iter().map(|v| self.nodes[v.0].needs_grad).collect(),
                };
                let input_grads = bw(&ctx);
                debug_assert_eq!(input_grads.len(), node.inputs.len());
                for (v, ig) in node.inputs.iter().zip(input_grads) {
                    let Some(ig) = ig else { continue };
                    if !self.nodes[v.0].needs_grad {
                        continue;
                    }
                    if ig.iter().any(|x| !x.is_finite()) {
                        return Err(Error::NonFinite { op: node.op });
                    }
                    match &mut grads[v.0] {
                        Some(acc) => acc.iter_mut().zip(&ig).for_each(|(a, b)| *a += b),
                        slot @ None => *slot = Some(ig),
                    }
                }
            }
            // Leaves keep their gradient for the caller.
            if node.backward.is_none() {
                grads[i] = Some(g);
            }
        }
        let params = self
            .nodes
            .iter()
            .enumerate()
            .take(root.0 + 1)
            .filter_map(|(i, n)| n.param.map(|p| (p, i)))
            .collect();
        Ok(Gradients { grads, params })
    }
}

/// Result of a backward pass.
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
    params: Vec<(ParamId, usize)>,
}

impl Gradients {
    /// Gradient w.r.t. a leaf; `None` when the leaf did not influence the root.
    pub fn wrt(&self, v: Var) -> Option<&[f64]> {
        self.grads.get(v.0).and_then(|g| g.as_deref())
    }

    /// Gradients of every parameter leaf, in node order. A parameter that
    /// entered the graph more than once yields multiple entries.
    pub fn params(&self) -> impl Iterator<Item = (ParamId, &[f64])> {
        self.params.iter().filter_map(|&(p, i)| self.grads[i].as_deref().map(|g| (p, g)))
    }
}
