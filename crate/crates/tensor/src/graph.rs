//! Tape-based reverse-mode automatic differentiation.
//!
//! A [`Graph`] records every op in creation order, so the node list is
//! already topologically sorted. [`Graph::backward`] walks it once in reverse.

use std::cell::RefCell;
use std::collections::HashMap;
use std::sync::Arc;

use crate::element::Element;
use crate::error::{Result, TensorError};
use crate::param::{ParamId, ParamStore};
use crate::tensor::Tensor;

/// Handle to a value recorded on a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(pub(crate) usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Vector-Jacobian product of one recorded op.
///
/// Returns one entry per input; `None` means no gradient flows there.
pub trait Backward<T: Element> {
    fn backward(
        &self,
        inputs: &[&Tensor<T>],
        output: &Tensor<T>,
        grad: &Tensor<T>,
    ) -> Result<Vec<Option<Tensor<T>>>>;
}

impl<T, F> Backward<T> for F
where
    T: Element,
    F: Fn(&[&Tensor<T>], &Tensor<T>, &Tensor<T>) -> Result<Vec<Option<Tensor<T>>>>,
{
    fn backward(
        &self,
        inputs: &[&Tensor<T>],
        output: &Tensor<T>,
        grad: &Tensor<T>,
    ) -> Result<Vec<Option<Tensor<T>>>> {
        self(inputs, output, grad)
    }
}

struct Node<T: Element> {
    value: Arc<Tensor<T>>,
    parents: Vec<Var>,
    op: Option<Box<dyn Backward<T>>>,
    requires_grad: bool,
}

pub struct Graph<T: Element = f32> {
    nodes: RefCell<Vec<Node<T>>>,
    params: RefCell<HashMap<ParamId, Var>>,
    track: bool,
}

impl<T: Element> Default for Graph<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Element> Graph<T> {
    /// A graph that records backward rules.
    pub fn new() -> Self {
        Graph {
            nodes: RefCell::new(Vec::new()),
            params: RefCell::new(HashMap::new()),
            track: true,
        }
    }

    /// A graph for inference: values only, no backward rules kept.
    pub fn inference() -> Self {
        Graph {
            track: false,
            ..Self::new()
        }
    }

    pub fn is_tracking(&self) -> bool {
        self.track
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn push_node(&self, value: Arc<Tensor<T>>, parents: Vec<Var>, op: Option<Box<dyn Backward<T>>>, requires_grad: bool) -> Var {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node {
            value,
            parents,
            op,
            requires_grad,
        });
        Var(nodes.len() - 1)
    }

    /// A value that never receives gradient.
    pub fn constant(&self, value: Tensor<T>) -> Var {
        self.push_node(Arc::new(value), Vec::new(), None, false)
    }

    /// A leaf that collects gradient when the graph tracks.
    pub fn leaf(&self, value: Tensor<T>) -> Var {
        self.push_node(Arc::new(value), Vec::new(), None, self.track)
    }

    /// Leaf bound to a stored parameter. Repeated calls return the same
    /// handle, so uses of one parameter accumulate into one gradient.
    pub fn param(&self, store: &ParamStore<T>, id: ParamId) -> Var {
        if let Some(&v) = self.params.borrow().get(&id) {
            return v;
        }
        let v = self.push_node(store.value_arc(id), Vec::new(), None, self.track);
        self.params.borrow_mut().insert(id, v);
        v
    }

    /// Records an op output. The backward rule is dropped when no input
    /// needs gradient.
    pub fn record(&self, value: Tensor<T>, parents: &[Var], op: impl Backward<T> + 'static) -> Var {
        let requires_grad = self.track && {
            let nodes = self.nodes.borrow();
            parents.iter().any(|p| nodes[p.0].requires_grad)
        };
        let op: Option<Box<dyn Backward<T>>> = requires_grad.then(|| Box::new(op) as Box<dyn Backward<T>>);
        self.push_node(Arc::new(value), parents.to_vec(), op, requires_grad)
    }

    pub fn value(&self, v: Var) -> Arc<Tensor<T>> {
        Arc::clone(&self.nodes.borrow()[v.0].value)
    }

    pub fn shape(&self, v: Var) -> Vec<usize> {
        self.nodes.borrow()[v.0].value.shape().to_vec()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes.borrow()[v.0].requires_grad
    }

    /// Copy of `v` cut off from the tape.
    pub fn detach(&self, v: Var) -> Var {
        let value = self.value(v);
        self.push_node(value, Vec::new(), None, false)
    }

    /// Reverse pass from a one-element `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients<T>> {
        let nodes = self.nodes.borrow();
        let root = &nodes[loss.0];
        if root.value.numel() != 1 {
            return Err(TensorError::arg(format!(
                "backward needs a scalar loss, got shape {:?}",
                root.value.shape()
            )));
        }
        let mut grads: Vec<Option<Tensor<T>>> = (0..=loss.0).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::ones(root.value.shape()));
        let mut leaves = HashMap::new();
        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &nodes[i];
            let Some(op) = &node.op else {
                if node.requires_grad {
                    leaves.insert(Var(i), g);
                }
                continue;
            };
            let inputs: Vec<&Tensor<T>> = node.parents.iter().map(|p| &*nodes[p.0].value).collect();
            let parent_grads = op.backward(&inputs, &node.value, &g)?;
            for (p, pg) in node.parents.iter().zip(parent_grads) {
                let Some(pg) = pg else { continue };
                if !nodes[p.0].requires_grad {
                    continue;
                }
                if pg.shape() != nodes[p.0].value.shape() {
                    return Err(TensorError::shape("backward", pg.shape(), nodes[p.0].value.shape()));
                }
                match &mut grads[p.0] {
                    Some(acc) => acc
                        .data_mut()
                        .iter_mut()
                        .zip(pg.data())
                        .for_each(|(a, &b)| *a = *a + b),
                    slot @ None => *slot = Some(pg),
                }
            }
        }
        Ok(Gradients {
            leaves,
            params: self.params.borrow().clone(),
        })
    }
}

/// Leaf gradients produced by one backward pass.
pub struct Gradients<T> {
    leaves: HashMap<Var, Tensor<T>>,
    params: HashMap<ParamId, Var>,
}

impl<T: Element> Gradients<T> {
    pub fn get(&self, v: Var) -> Option<&Tensor<T>> {
        self.leaves.get(&v)
    }

    pub fn param(&self, id: ParamId) -> Option<&Tensor<T>> {
        self.params.get(&id).and_then(|v| self.leaves.get(v))
    }

    /// Adds every parameter gradient into the store's accumulators.
    pub fn accumulate_into(&self, store: &mut ParamStore<T>) -> Result<()> {
        let mut ids: Vec<_> = self.params.keys().copied().collect();
        ids.sort();
        for id in ids {
            if let Some(g) = self.param(id) {
                store.add_grad(id, g)?;
            }
        }
        Ok(())
    }
}
