use std::sync::Arc;

use super::{Array, DiffError};
use crate::Real;

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(pub(crate) usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Maps the adjoint of a node's output to adjoints of its parents, in parent
/// order. `None` marks a parent that receives no gradient.
pub type BackwardFn = Box<dyn Fn(&[Real]) -> Vec<Option<Vec<Real>>>>;

struct Node {
    value: Arc<Array>,
    parents: Vec<usize>,
    backward: Option<BackwardFn>,
    requires_grad: bool,
}

/// Linear record of executed operations.
///
/// Nodes are appended in execution order, so every node sits after the
/// producers of its inputs. [`Tape::backward`] walks the record in reverse and
/// adds into the gradient buffers of `requires_grad` leaves; calling it twice
/// without [`Tape::zero_grad`] doubles those gradients.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
    leaf_grads: Vec<Option<Vec<Real>>>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Adds an input array. Gradients are accumulated for it when
    /// `requires_grad` is set.
    pub fn leaf(&mut self, value: Array, requires_grad: bool) -> Var {
        self.push(Node {
            value: Arc::new(value),
            parents: Vec::new(),
            backward: None,
            requires_grad,
        })
    }

    pub fn constant(&mut self, value: Array) -> Var {
        self.leaf(value, false)
    }

    pub fn param(&mut self, value: Array) -> Var {
        self.leaf(value, true)
    }

    /// Records an operation computed outside the tape.
    pub fn custom<F>(&mut self, parents: &[Var], value: Array, backward: F) -> Var
    where
        F: Fn(&[Real]) -> Vec<Option<Vec<Real>>> + 'static,
    {
        let requires_grad = parents.iter().any(|p| self.nodes[p.0].requires_grad);
        self.push(Node {
            value: Arc::new(value),
            parents: parents.iter().map(|p| p.0).collect(),
            backward: if requires_grad {
                Some(Box::new(backward))
            } else {
                None
            },
            requires_grad,
        })
    }

    fn push(&mut self, node: Node) -> Var {
        self.nodes.push(node);
        self.leaf_grads.push(None);
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Array {
        &self.nodes[v.0].value
    }

    /// Shared handle to a node's value, for capture in backward closures.
    pub fn shared(&self, v: Var) -> Arc<Array> {
        Arc::clone(&self.nodes[v.0].value)
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Accumulated gradient of a leaf, if any backward pass reached it.
    pub fn grad(&self, v: Var) -> Option<&[Real]> {
        self.leaf_grads[v.0].as_deref()
    }

    /// Gradient of a leaf as an array shaped like its value (zeros if
    /// unreached).
    pub fn grad_array(&self, v: Var) -> Array {
        let shape = self.shape(v).to_vec();
        match self.grad(v) {
            Some(g) => Array::new(shape, g.to_vec()).expect("gradient shape"),
            None => Array::zeros(&shape),
        }
    }

    pub fn zero_grad(&mut self) {
        for g in &mut self.leaf_grads {
            *g = None;
        }
    }

    /// Reverse pass from a scalar loss.
    pub fn backward(&mut self, loss: Var) -> Result<(), DiffError> {
        if !self.nodes[loss.0].value.is_scalar() {
            return Err(DiffError::NonScalarLoss(
                self.nodes[loss.0].value.shape().to_vec(),
            ));
        }
        let mut adjoints: Vec<Option<Vec<Real>>> = vec![None; loss.0 + 1];
        adjoints[loss.0] = Some(vec![1.0]);
        for i in (0..=loss.0).rev() {
            let Some(adj) = adjoints[i].take() else {
                continue;
            };
            let node = &self.nodes[i];
            if !node.requires_grad {
                continue;
            }
            match &node.backward {
                None => {
                    // Leaf.
                    match &mut self.leaf_grads[i] {
                        Some(g) => g.iter_mut().zip(&adj).for_each(|(g, a)| *g += a),
                        slot @ None => *slot = Some(adj),
                    }
                }
                Some(back) => {
                    let grads = back(&adj);
                    debug_assert_eq!(grads.len(), node.parents.len());
                    for (&p, g) in node.parents.iter().zip(grads) {
                        let Some(g) = g else { continue };
                        if !self.nodes[p].requires_grad {
                            continue;
                        }
                        debug_assert_eq!(g.len(), self.nodes[p].value.len());
                        match &mut adjoints[p] {
                            Some(acc) => acc.iter_mut().zip(&g).for_each(|(a, b)| *a += b),
                            slot @ None => *slot = Some(g),
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sum_of_leaf_gives_ones() {
        let mut t = Tape::new();
        let x = t.param(Array::from_vec(vec![1.0, 2.0, 3.0]));
        let s = t.sum(x);
        t.backward(s).unwrap();
        assert_eq!(t.grad(x).unwrap(), &[1.0, 1.0, 1.0]);
    }

    #[test]
    fn sum_of_squares() {
        let mut t = Tape::new();
        let x = t.param(Array::from_vec(vec![1.0, 2.0]));
        let sq = t.mul(x, x).unwrap();
        let s = t.sum(sq);
        t.backward(s).unwrap();
        assert_eq!(t.grad(x).unwrap(), &[2.0, 4.0]);
    }

    #[test]
    fn backward_twice_accumulates() {
        let mut t = Tape::new();
        let x = t.param(Array::from_vec(vec![1.0, 2.0]));
        let sq = t.mul(x, x).unwrap();
        let s = t.sum(sq);
        t.backward(s).unwrap();
        t.backward(s).unwrap();
        assert_eq!(t.grad(x).unwrap(), &[4.0, 8.0]);
        t.zero_grad();
        assert!(t.grad(x).is_none());
    }

    #[test]
    fn non_scalar_loss_rejected() {
        let mut t = Tape::new();
        let x = t.param(Array::from_vec(vec![1.0, 2.0]));
        assert!(matches!(t.backward(x), Err(DiffError::NonScalarLoss(_))));
    }

    #[test]
    fn constants_receive_nothing() {
        let mut t = Tape::new();
        let x = t.param(Array::from_vec(vec![1.0, 2.0]));
        let c = t.constant(Array::from_vec(vec![3.0, 4.0]));
        let p = t.mul(x, c).unwrap();
        let s = t.sum(p);
        t.backward(s).unwrap();
        assert_eq!(t.grad(x).unwrap(), &[3.0, 4.0]);
        assert!(t.grad(c).is_none());
    }
}
