//! Dense row-major tensors with reverse-mode automatic differentiation.
//!
//! A [`Tensor`] is a cheap handle (`Arc`) onto immutable storage. Results of
//! operations on tensors that require gradients record a tape node holding
//! their inputs and a backward closure; [`Tensor::backward`] walks that tape
//! once in reverse topological order.
//!
//! Storage is contiguous. The only aliasing view is a leading-row prefix
//! ([`Tensor::narrow_rows`] with `start == 0`) and [`Tensor::reshape`], both of
//! which share the parent's buffer.

mod autograd;
mod ops;

use std::fmt;
use std::sync::{Arc, Mutex};

pub use autograd::BackwardStats;
pub use ops::{elementwise, Elementwise};

use crate::error::{Error, Result};
use crate::scalar::{DType, Scalar};

pub(crate) type BackwardFn<T> = Box<dyn Fn(&[T]) -> Vec<Option<Vec<T>>> + Send + Sync>;

pub(crate) struct TapeNode<T: Scalar> {
    pub(crate) op: &'static str,
    pub(crate) inputs: Vec<Tensor<T>>,
    pub(crate) backward: BackwardFn<T>,
}

struct Inner<T: Scalar> {
    storage: Arc<Vec<T>>,
    shape: Vec<usize>,
    requires_grad: bool,
    grad: Mutex<Option<Vec<T>>>,
    node: Option<TapeNode<T>>,
}

/// Handle to an immutable dense tensor.
pub struct Tensor<T: Scalar> {
    inner: Arc<Inner<T>>,
}

impl<T: Scalar> Clone for Tensor<T> {
    fn clone(&self) -> Self {
        Tensor {
            inner: Arc::clone(&self.inner),
        }
    }
}

impl<T: Scalar> fmt::Debug for Tensor<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = f.debug_struct("Tensor");
        s.field("shape", &self.inner.shape);
        if self.numel() <= 16 {
            s.field("data", &self.data());
        }
        if let Some(node) = &self.inner.node {
            s.field("op", &node.op);
        }
        s.field("requires_grad", &self.inner.requires_grad).finish()
    }
}

pub(crate) fn numel_of(shape: &[usize]) -> usize {
    shape.iter().product()
}

impl<T: Scalar> Tensor<T> {
    fn build(storage: Arc<Vec<T>>, shape: Vec<usize>, requires_grad: bool, node: Option<TapeNode<T>>) -> Self {
        debug_assert!(storage.len() >= numel_of(&shape));
        Tensor {
            inner: Arc::new(Inner {
                storage,
                shape,
                requires_grad,
                grad: Mutex::new(None),
                node,
            }),
        }
    }

    pub fn from_vec(data: Vec<T>, shape: &[usize]) -> Result<Self> {
        if data.len() != numel_of(shape) {
            return Err(Error::InvalidShape {
                op: "from_vec",
                msg: format!("{} values for shape {:?}", data.len(), shape),
            });
        }
        Ok(Self::build(Arc::new(data), shape.to_vec(), false, None))
    }

    /// Builds a tensor from `f64` values, converting to the element type.
    pub fn from_f64(data: &[f64], shape: &[usize]) -> Result<Self> {
        Self::from_vec(data.iter().map(|&v| T::from_f64_lossy(v)).collect(), shape)
    }

    pub fn scalar(value: T) -> Self {
        Self::build(Arc::new(vec![value]), Vec::new(), false, None)
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::full(shape, T::zero())
    }

    pub fn ones(shape: &[usize]) -> Self {
        Self::full(shape, T::one())
    }

    pub fn full(shape: &[usize], value: T) -> Self {
        Self::build(Arc::new(vec![value; numel_of(shape)]), shape.to_vec(), false, None)
    }

    /// Marks this tensor as a trainable leaf. Returns a new handle sharing
    /// the same storage.
    pub fn requires_grad_(self) -> Self {
        Self::build(Arc::clone(&self.inner.storage), self.inner.shape.clone(), true, None)
    }

    /// A leaf that tracks gradients.
    pub fn param(data: Vec<T>, shape: &[usize]) -> Result<Self> {
        Ok(Self::from_vec(data, shape)?.requires_grad_())
    }

    /// Same values, cut off from the tape.
    pub fn detach(&self) -> Self {
        Self::build(Arc::clone(&self.inner.storage), self.inner.shape.clone(), false, None)
    }

    /// Result of a differentiable operation. When no input requires a
    /// gradient the tape node is dropped.
    pub(crate) fn from_op(
        data: Vec<T>,
        shape: Vec<usize>,
        op: &'static str,
        inputs: Vec<Tensor<T>>,
        backward: BackwardFn<T>,
    ) -> Self {
        Self::from_op_shared(Arc::new(data), shape, op, inputs, backward)
    }

    pub(crate) fn from_op_shared(
        storage: Arc<Vec<T>>,
        shape: Vec<usize>,
        op: &'static str,
        inputs: Vec<Tensor<T>>,
        backward: BackwardFn<T>,
    ) -> Self {
        debug_assert_eq!(storage.len(), numel_of(&shape), "{op}");
        let requires_grad = inputs.iter().any(|t| t.requires_grad());
        let node = requires_grad.then(|| TapeNode { op, inputs, backward });
        Self::build(storage, shape, requires_grad, node)
    }

    /// Result that shares `parent`'s storage under a new shape.
    pub(crate) fn view_of(parent: &Tensor<T>, shape: Vec<usize>, op: &'static str, backward: BackwardFn<T>) -> Self {
        let requires_grad = parent.requires_grad();
        let node = requires_grad.then(|| TapeNode {
            op,
            inputs: vec![parent.clone()],
            backward,
        });
        Self::build(Arc::clone(&parent.inner.storage), shape, requires_grad, node)
    }

    pub fn shape(&self) -> &[usize] {
        &self.inner.shape
    }

    pub fn ndim(&self) -> usize {
        self.inner.shape.len()
    }

    pub fn numel(&self) -> usize {
        numel_of(&self.inner.shape)
    }

    pub fn dtype(&self) -> DType {
        T::DTYPE
    }

    pub fn data(&self) -> &[T] {
        &self.inner.storage[..self.numel()]
    }

    pub fn to_vec(&self) -> Vec<T> {
        self.data().to_vec()
    }

    pub fn to_f64_vec(&self) -> Vec<f64> {
        self.data().iter().map(|v| v.to_f64_lossy()).collect()
    }

    /// Value of a single-element tensor.
    pub fn item(&self) -> Result<T> {
        if self.numel() != 1 {
            return Err(Error::InvalidShape {
                op: "item",
                msg: format!("expected one element, shape {:?}", self.shape()),
            });
        }
        Ok(self.data()[0])
    }

    /// `(rows, cols)` of a rank-2 tensor.
    pub fn dims2(&self) -> Result<(usize, usize)> {
        match self.shape() {
            [r, c] => Ok((*r, *c)),
            s => Err(Error::InvalidShape {
                op: "dims2",
                msg: format!("expected a matrix, got shape {s:?}"),
            }),
        }
    }

    /// Number of rows (first extent); a rank-0 tensor has one row.
    pub fn rows(&self) -> usize {
        self.shape().first().copied().unwrap_or(1)
    }

    /// Product of all extents after the first.
    pub fn row_width(&self) -> usize {
        self.shape().iter().skip(1).product()
    }

    pub fn row(&self, i: usize) -> &[T] {
        let w = self.row_width();
        &self.data()[i * w..(i + 1) * w]
    }

    pub fn requires_grad(&self) -> bool {
        self.inner.requires_grad
    }

    pub fn is_leaf(&self) -> bool {
        self.inner.node.is_none()
    }

    /// Name of the operation that produced this tensor, if tracked.
    pub fn op_name(&self) -> Option<&'static str> {
        self.inner.node.as_ref().map(|n| n.op)
    }

    /// Accumulated gradient of a leaf, as a fresh untracked tensor.
    pub fn grad(&self) -> Option<Tensor<T>> {
        let g = self.inner.grad.lock().expect("grad lock poisoned");
        g.as_ref()
            .map(|v| Tensor::build(Arc::new(v.clone()), self.shape().to_vec(), false, None))
    }

    pub fn zero_grad(&self) {
        *self.inner.grad.lock().expect("grad lock poisoned") = None;
    }

    pub(crate) fn accumulate_grad(&self, g: &[T]) {
        let mut slot = self.inner.grad.lock().expect("grad lock poisoned");
        match slot.as_mut() {
            Some(acc) => acc.iter_mut().zip(g).for_each(|(a, &b)| *a += b),
            None => *slot = Some(g.to_vec()),
        }
    }

    pub(crate) fn node(&self) -> Option<&TapeNode<T>> {
        self.inner.node.as_ref()
    }

    pub(crate) fn id(&self) -> usize {
        Arc::as_ptr(&self.inner) as usize
    }

    /// True when both tensors read from the same underlying buffer.
    pub fn shares_storage(&self, other: &Tensor<T>) -> bool {
        Arc::ptr_eq(&self.inner.storage, &other.inner.storage)
    }

    /// True when both handles point at the very same tensor.
    pub fn same_tensor(&self, other: &Tensor<T>) -> bool {
        Arc::ptr_eq(&self.inner, &other.inner)
    }

    pub fn all_finite(&self) -> bool {
        self.data().iter().all(|v| v.is_finite())
    }
}
