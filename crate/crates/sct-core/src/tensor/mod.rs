//! Dense tensors with reverse-mode differentiation.
//!
//! A [`Tensor`] is a shared handle to an immutable n-d array. Operations on
//! tensors build a graph: every result remembers its inputs and a backward
//! rule. [`backward`] walks that graph once in reverse topological order and
//! accumulates (`+=`) gradients into every tensor created with
//! `requires_grad`. Parameter data has interior mutability so an optimizer
//! can update weights in place between steps; graphs are rebuilt per step.
//!
//! Every operation validates shapes and rejects non-finite outputs.

mod adamw;
mod checkpoint;
mod gradcheck;
mod ops;
pub(crate) mod shape;

pub use adamw::AdamW;
pub use checkpoint::{apply_arrays, load_checkpoint, save_checkpoint, CheckpointArray};
pub use gradcheck::{grad_check, grad_check_input};

use std::cell::{Ref, RefCell, RefMut};
use std::collections::HashSet;
use std::rc::Rc;
use std::sync::atomic::{AtomicU64, Ordering};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

static NEXT_ID: AtomicU64 = AtomicU64::new(0);

/// Context handed to a backward rule: the output's gradient plus read access
/// to the output value and the parent tensors.
pub(crate) struct OpCtx<'a, T: Scalar> {
    pub grad: &'a [T],
    pub out_data: &'a [T],
    pub out_shape: &'a [usize],
    pub parents: &'a [Tensor<T>],
}

/// Maps the output gradient to one gradient per parent (`None` for parents
/// that do not need one).
pub(crate) type BackwardRule<T> = Box<dyn Fn(&OpCtx<'_, T>) -> Vec<Option<Vec<T>>>>;

pub(crate) struct Node<T: Scalar> {
    id: u64,
    shape: Vec<usize>,
    data: RefCell<Vec<T>>,
    grad: RefCell<Option<Vec<T>>>,
    requires_grad: bool,
    parents: Vec<Tensor<T>>,
    backward_rule: Option<BackwardRule<T>>,
}

/// Shared handle to a dense array, optionally tracked for gradients.
pub struct Tensor<T: Scalar>(Rc<Node<T>>);

impl<T: Scalar> Clone for Tensor<T> {
    fn clone(&self) -> Self {
        Tensor(Rc::clone(&self.0))
    }
}

impl<T: Scalar> std::fmt::Debug for Tensor<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Tensor")
            .field("shape", &self.0.shape)
            .field("requires_grad", &self.0.requires_grad)
            .finish()
    }
}

fn check_finite<T: Scalar>(data: &[T], op: &'static str) -> Result<()> {
    if data.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite { op })
    }
}

impl<T: Scalar> Tensor<T> {
    fn leaf(data: Vec<T>, shape: Vec<usize>, requires_grad: bool) -> Tensor<T> {
        Tensor(Rc::new(Node {
            id: NEXT_ID.fetch_add(1, Ordering::Relaxed),
            shape,
            data: RefCell::new(data),
            grad: RefCell::new(None),
            requires_grad,
            parents: Vec::new(),
            backward_rule: None,
        }))
    }

    /// New leaf tensor; validates element count and finiteness.
    pub fn from_vec(data: Vec<T>, shape: &[usize], requires_grad: bool) -> Result<Tensor<T>> {
        let numel = shape::numel(shape);
        if data.len() != numel {
            return Err(Error::Contract(format!(
                "tensor data length {} does not match shape {:?} ({} elements)",
                data.len(),
                shape,
                numel
            )));
        }
        check_finite(&data, "from_vec")?;
        Ok(Self::leaf(data, shape.to_vec(), requires_grad))
    }

    pub fn zeros(shape: &[usize]) -> Tensor<T> {
        Self::leaf(vec![T::zero(); shape::numel(shape)], shape.to_vec(), false)
    }

    pub fn full(shape: &[usize], value: T) -> Tensor<T> {
        Self::leaf(vec![value; shape::numel(shape)], shape.to_vec(), false)
    }

    pub fn scalar(value: T) -> Tensor<T> {
        Self::leaf(vec![value], vec![1], false)
    }

    /// Zero-initialized trainable parameter.
    pub fn param_zeros(shape: &[usize]) -> Tensor<T> {
        Self::leaf(vec![T::zero(); shape::numel(shape)], shape.to_vec(), true)
    }

    /// One-initialized trainable parameter (LayerNorm scales).
    pub fn param_ones(shape: &[usize]) -> Tensor<T> {
        Self::leaf(vec![T::one(); shape::numel(shape)], shape.to_vec(), true)
    }

    /// Normal(0, std) initialized trainable parameter.
    pub fn param_randn(shape: &[usize], std: f64, rng: &mut ChaCha8Rng) -> Tensor<T> {
        let dist = Normal::new(0.0, std).expect("std must be finite and positive");
        let data = (0..shape::numel(shape))
            .map(|_| T::from_f64(dist.sample(rng)))
            .collect();
        Self::leaf(data, shape.to_vec(), true)
    }

    /// Internal constructor for op results.
    pub(crate) fn from_op(
        data: Vec<T>,
        shape: Vec<usize>,
        parents: Vec<Tensor<T>>,
        rule: BackwardRule<T>,
        op: &'static str,
    ) -> Result<Tensor<T>> {
        debug_assert_eq!(data.len(), shape::numel(&shape));
        check_finite(&data, op)?;
        let requires_grad = parents.iter().any(|p| p.0.requires_grad);
        Ok(Tensor(Rc::new(Node {
            id: NEXT_ID.fetch_add(1, Ordering::Relaxed),
            shape,
            data: RefCell::new(data),
            grad: RefCell::new(None),
            requires_grad,
            parents: if requires_grad { parents } else { Vec::new() },
            backward_rule: if requires_grad { Some(rule) } else { None },
        })))
    }

    pub fn shape(&self) -> &[usize] {
        &self.0.shape
    }

    pub fn numel(&self) -> usize {
        shape::numel(&self.0.shape)
    }

    pub fn requires_grad(&self) -> bool {
        self.0.requires_grad
    }

    pub fn data(&self) -> Ref<'_, Vec<T>> {
        self.0.data.borrow()
    }

    pub(crate) fn data_mut(&self) -> RefMut<'_, Vec<T>> {
        self.0.data.borrow_mut()
    }

    pub fn to_vec(&self) -> Vec<T> {
        self.0.data.borrow().clone()
    }

    /// Value of a single-element tensor.
    pub fn item(&self) -> Result<T> {
        crate::contract!(self.numel() == 1, "item() on tensor of shape {:?}", self.shape());
        Ok(self.0.data.borrow()[0])
    }

    /// Copy of the accumulated gradient, if any.
    pub fn grad(&self) -> Option<Vec<T>> {
        self.0.grad.borrow().clone()
    }

    pub fn zero_grad(&self) {
        *self.0.grad.borrow_mut() = None;
    }

    /// Leaf copy of this tensor's current value, detached from the graph.
    pub fn detach(&self) -> Tensor<T> {
        Self::leaf(self.to_vec(), self.0.shape.to_vec(), false)
    }

    /// Overwrites the stored values. The new data must match the shape and
    /// stay finite; gradients are untouched.
    pub fn set_data(&self, data: &[T]) -> Result<()> {
        crate::contract!(
            data.len() == self.numel(),
            "set_data length {} vs shape {:?}",
            data.len(),
            self.shape()
        );
        check_finite(data, "set_data")?;
        self.0.data.borrow_mut().copy_from_slice(data);
        Ok(())
    }

    fn accumulate_grad(&self, delta: &[T]) {
        let mut slot = self.0.grad.borrow_mut();
        match slot.as_mut() {
            Some(g) => {
                for (gv, dv) in g.iter_mut().zip(delta) {
                    *gv += *dv;
                }
            }
            None => *slot = Some(delta.to_vec()),
        }
    }

    /// Inverted dropout. Keeps each element with probability `1 - rate` and
    /// scales survivors by `1/(1 - rate)`; the mask is frozen into the
    /// backward rule.
    pub fn dropout(&self, rate: f64, rng: &mut ChaCha8Rng) -> Result<Tensor<T>> {
        crate::contract!((0.0..1.0).contains(&rate), "dropout rate {rate} outside [0,1)");
        if rate == 0.0 {
            return Ok(self.clone());
        }
        let keep = T::from_f64(1.0 / (1.0 - rate));
        let mask: Vec<T> = (0..self.numel())
            .map(|_| {
                if rng.random::<f64>() < rate {
                    T::zero()
                } else {
                    keep
                }
            })
            .collect();
        let data: Vec<T> = self
            .data()
            .iter()
            .zip(&mask)
            .map(|(x, m)| *x * *m)
            .collect();
        Tensor::from_op(
            data,
            self.0.shape.clone(),
            vec![self.clone()],
            Box::new(move |ctx| {
                vec![Some(
                    ctx.grad.iter().zip(&mask).map(|(g, m)| *g * *m).collect(),
                )]
            }),
            "dropout",
        )
    }
}

/// The recorded operations reachable from one output, in topological order
/// (every operation's inputs precede it). One backward pass walks the list
/// exactly once, in reverse.
pub struct Tape<T: Scalar> {
    order: Vec<Tensor<T>>,
}

impl<T: Scalar> Tape<T> {
    /// Collects the gradient-relevant subgraph below `root` by iterative
    /// post-order DFS.
    pub fn record(root: &Tensor<T>) -> Tape<T> {
        let mut order: Vec<Tensor<T>> = Vec::new();
        if !root.0.requires_grad {
            return Tape { order };
        }
        let mut visited: HashSet<u64> = HashSet::new();
        let mut stack: Vec<(Tensor<T>, usize)> = vec![(root.clone(), 0)];
        visited.insert(root.0.id);
        while let Some((node, pi)) = stack.pop() {
            if pi < node.0.parents.len() {
                let parent = node.0.parents[pi].clone();
                stack.push((node, pi + 1));
                if parent.0.requires_grad && visited.insert(parent.0.id) {
                    stack.push((parent, 0));
                }
            } else {
                order.push(node);
            }
        }
        Tape { order }
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// True when every operation's inputs appear before the operation.
    pub fn is_topologically_ordered(&self) -> bool {
        let position: std::collections::HashMap<u64, usize> = self
            .order
            .iter()
            .enumerate()
            .map(|(i, t)| (t.0.id, i))
            .collect();
        self.order.iter().enumerate().all(|(i, node)| {
            node.0
                .parents
                .iter()
                .filter(|p| p.0.requires_grad)
                .all(|p| position.get(&p.0.id).is_some_and(|&pi| pi < i))
        })
    }

    /// Visits each recorded operation once, in reverse order, accumulating
    /// gradients into the parents. The tape is consumed.
    fn run_backward(self) -> Result<()> {
        for node in self.order.iter().rev() {
            let Some(rule) = node.0.backward_rule.as_ref() else {
                continue;
            };
            let grad_ref = node.0.grad.borrow();
            let Some(grad) = grad_ref.as_ref() else {
                continue;
            };
            let data_ref = node.0.data.borrow();
            let ctx = OpCtx {
                grad,
                out_data: &data_ref,
                out_shape: &node.0.shape,
                parents: &node.0.parents,
            };
            let parent_grads = rule(&ctx);
            drop(data_ref);
            drop(grad_ref);
            debug_assert_eq!(parent_grads.len(), node.0.parents.len());
            for (parent, pg) in node.0.parents.iter().zip(parent_grads) {
                if let Some(pg) = pg {
                    if parent.0.requires_grad {
                        if !pg.iter().all(|v| v.is_finite()) {
                            return Err(Error::NonFinite { op: "backward" });
                        }
                        parent.accumulate_grad(&pg);
                    }
                }
            }
        }
        Ok(())
    }
}

/// Runs reverse-mode differentiation from a scalar loss.
///
/// Gradients accumulate into every reachable tensor with `requires_grad`;
/// callers zero them between optimizer steps. The tape built for the pass
/// is dropped afterwards.
pub fn backward<T: Scalar>(loss: &Tensor<T>) -> Result<()> {
    crate::contract!(
        loss.numel() == 1,
        "backward requires a scalar loss, got shape {:?}",
        loss.shape()
    );
    if !loss.0.requires_grad {
        return Ok(());
    }
    let tape = Tape::record(loss);
    debug_assert!(tape.is_topologically_ordered());
    loss.accumulate_grad(&[T::one()]);
    tape.run_backward()
}

/// Clears the gradients of every tensor in the slice.
pub fn zero_grads<T: Scalar>(params: &[Tensor<T>]) {
    for p in params {
        p.zero_grad();
    }
}
