use std::collections::{HashMap, HashSet};
use std::fmt;
use std::rc::Rc;
use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{Error, Result};
use crate::Float;

static NEXT_ID: AtomicU64 = AtomicU64::new(1);

fn next_id() -> u64 {
    NEXT_ID.fetch_add(1, Ordering::Relaxed)
}

/// The backward half of a recorded operation.
pub(crate) trait Backward<T: Float> {
    fn name(&self) -> &'static str;

    /// The tensors this op consumed, in the order `backward` reports grads.
    fn inputs(&self) -> Vec<&Tensor<T>>;

    /// Vector-Jacobian product. Entries for inputs that do not require a
    /// gradient may be `None`.
    fn backward(&self, out: &Tensor<T>, grad: &[T]) -> Vec<Option<Vec<T>>>;
}

struct Node<T: Float> {
    id: u64,
    shape: Vec<usize>,
    data: Rc<Vec<T>>,
    requires_grad: bool,
    grad_fn: Option<Box<dyn Backward<T>>>,
}

/// An immutable, reference-counted dense tensor in row-major layout.
pub struct Tensor<T: Float>(Rc<Node<T>>);

impl<T: Float> Clone for Tensor<T> {
    fn clone(&self) -> Self {
        Tensor(Rc::clone(&self.0))
    }
}

impl<T: Float> fmt::Debug for Tensor<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let op = self.0.grad_fn.as_ref().map(|g| g.name()).unwrap_or("leaf");
        write!(
            f,
            "Tensor(id={}, shape={:?}, op={}, requires_grad={})",
            self.0.id, self.0.shape, op, self.0.requires_grad
        )
    }
}

pub(crate) fn numel(shape: &[usize]) -> usize {
    shape.iter().product()
}

impl<T: Float> Tensor<T> {
    fn make(
        data: Rc<Vec<T>>,
        shape: Vec<usize>,
        requires_grad: bool,
        grad_fn: Option<Box<dyn Backward<T>>>,
    ) -> Self {
        debug_assert_eq!(data.len(), numel(&shape));
        Tensor(Rc::new(Node {
            id: next_id(),
            shape,
            data,
            requires_grad,
            grad_fn,
        }))
    }

    pub fn from_vec(data: Vec<T>, shape: &[usize]) -> Result<Self> {
        if data.len() != numel(shape) {
            return Err(Error::invalid(
                "from_vec",
                format!("{} values for shape {:?}", data.len(), shape),
            ));
        }
        Ok(Self::make(Rc::new(data), shape.to_vec(), false, None))
    }

    /// A leaf that participates in differentiation.
    pub fn var(data: Vec<T>, shape: &[usize]) -> Result<Self> {
        let t = Self::from_vec(data, shape)?;
        Ok(t.with_grad())
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::full(shape, T::zero())
    }

    pub fn ones(shape: &[usize]) -> Self {
        Self::full(shape, T::one())
    }

    pub fn full(shape: &[usize], value: T) -> Self {
        Self::make(Rc::new(vec![value; numel(shape)]), shape.to_vec(), false, None)
    }

    pub fn scalar(value: T) -> Self {
        Self::full(&[1], value)
    }

    /// Records the result of an op. The gradient function is dropped when
    /// none of the inputs require a gradient.
    pub(crate) fn from_op(data: Vec<T>, shape: Vec<usize>, grad_fn: impl Backward<T> + 'static) -> Self {
        let requires_grad = grad_fn.inputs().iter().any(|t| t.requires_grad());
        let grad_fn: Option<Box<dyn Backward<T>>> = if requires_grad {
            Some(Box::new(grad_fn))
        } else {
            None
        };
        Self::make(Rc::new(data), shape, requires_grad, grad_fn)
    }

    /// Same storage, new shape; used by reshape.
    pub(crate) fn share_with_op(&self, shape: Vec<usize>, grad_fn: impl Backward<T> + 'static) -> Self {
        let requires_grad = self.requires_grad();
        let grad_fn: Option<Box<dyn Backward<T>>> = if requires_grad {
            Some(Box::new(grad_fn))
        } else {
            None
        };
        Self::make(Rc::clone(&self.0.data), shape, requires_grad, grad_fn)
    }

    /// A new leaf sharing this tensor's storage that requires a gradient.
    pub fn with_grad(&self) -> Self {
        Self::make(Rc::clone(&self.0.data), self.0.shape.clone(), true, None)
    }

    /// A new leaf sharing this tensor's storage, cut from the graph.
    pub fn detach(&self) -> Self {
        Self::make(Rc::clone(&self.0.data), self.0.shape.clone(), false, None)
    }

    pub fn id(&self) -> u64 {
        self.0.id
    }

    pub fn shape(&self) -> &[usize] {
        &self.0.shape
    }

    pub fn rank(&self) -> usize {
        self.0.shape.len()
    }

    pub fn numel(&self) -> usize {
        self.0.data.len()
    }

    pub fn data(&self) -> &[T] {
        &self.0.data
    }

    pub fn to_vec(&self) -> Vec<T> {
        self.0.data.as_ref().clone()
    }

    pub fn requires_grad(&self) -> bool {
        self.0.requires_grad
    }

    pub fn op_name(&self) -> &'static str {
        self.0.grad_fn.as_ref().map(|g| g.name()).unwrap_or("leaf")
    }

    /// `(B, C, H, W)` for rank-4 tensors.
    pub fn dims4(&self) -> Result<(usize, usize, usize, usize)> {
        match self.shape() {
            &[b, c, h, w] => Ok((b, c, h, w)),
            s => Err(Error::invalid("dims4", format!("expected rank 4, got {s:?}"))),
        }
    }

    /// The single value of a one-element tensor.
    pub fn item(&self) -> Result<T> {
        if self.numel() != 1 {
            return Err(Error::invalid("item", format!("shape {:?} is not a scalar", self.shape())));
        }
        Ok(self.data()[0])
    }

    pub fn cast<U: Float>(&self) -> Tensor<U> {
        let data = self
            .data()
            .iter()
            .map(|v| U::from_f64(v.to_f64().unwrap_or(f64::NAN)).unwrap_or(U::nan()))
            .collect();
        Tensor::make(Rc::new(data), self.shape().to_vec(), false, None)
    }

    pub fn all_finite(&self) -> bool {
        self.data().iter().all(|v| v.is_finite())
    }

    /// Reverse-mode sweep from a scalar root.
    pub fn backward(&self) -> Result<Gradients<T>> {
        if self.numel() != 1 {
            return Err(Error::invalid(
                "backward",
                format!("root must be a scalar, got shape {:?}", self.shape()),
            ));
        }
        let mut grads = Gradients::default();
        if !self.requires_grad() {
            return Ok(grads);
        }

        // Iterative post-order DFS over the part of the graph that needs grads.
        let mut order: Vec<Tensor<T>> = Vec::new();
        let mut visited: HashSet<u64> = HashSet::new();
        let mut stack: Vec<(Tensor<T>, bool)> = vec![(self.clone(), false)];
        while let Some((t, expanded)) = stack.pop() {
            if expanded {
                order.push(t);
                continue;
            }
            if !visited.insert(t.id()) {
                continue;
            }
            stack.push((t.clone(), true));
            if let Some(g) = &t.0.grad_fn {
                for input in g.inputs() {
                    if input.requires_grad() && !visited.contains(&input.id()) {
                        stack.push((input.clone(), false));
                    }
                }
            }
        }

        let mut pending: HashMap<u64, Vec<T>> = HashMap::new();
        pending.insert(self.id(), vec![T::one()]);
        for node in order.iter().rev() {
            let Some(grad) = pending.remove(&node.id()) else {
                continue;
            };
            match &node.0.grad_fn {
                None => {
                    grads.insert(node.id(), Tensor::from_vec(grad, node.shape())?);
                }
                Some(g) => {
                    let input_grads = g.backward(node, &grad);
                    for (input, ig) in g.inputs().into_iter().zip(input_grads) {
                        let Some(ig) = ig else { continue };
                        if !input.requires_grad() {
                            continue;
                        }
                        debug_assert_eq!(ig.len(), input.numel(), "bad grad length from {}", g.name());
                        match pending.get_mut(&input.id()) {
                            Some(acc) => {
                                for (a, v) in acc.iter_mut().zip(ig) {
                                    *a += v;
                                }
                            }
                            None => {
                                pending.insert(input.id(), ig);
                            }
                        }
                    }
                }
            }
        }
        Ok(grads)
    }
}

/// Gradients of leaves, keyed by tensor identity.
pub struct Gradients<T: Float> {
    map: HashMap<u64, Tensor<T>>,
}

impl<T: Float> Default for Gradients<T> {
    fn default() -> Self {
        Self { map: HashMap::new() }
    }
}

impl<T: Float> Gradients<T> {
    fn insert(&mut self, id: u64, grad: Tensor<T>) {
        self.map.insert(id, grad);
    }

    pub fn get(&self, t: &Tensor<T>) -> Option<&Tensor<T>> {
        self.map.get(&t.id())
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn backward_requires_scalar_root() {
        let x = Tensor::<f64>::var(vec![1.0, 2.0], &[2]).unwrap();
        assert!(x.backward().is_err());
    }

    #[test]
    fn constants_carry_no_graph() {
        let a = Tensor::<f32>::ones(&[2, 2]);
        let b = a.mul(&a).unwrap();
        assert!(!b.requires_grad());
        assert_eq!(b.op_name(), "leaf");
    }

    #[test]
    fn shared_subexpression_accumulates() {
        // f = sum(x * x + x) => df/dx = 2x + 1
        let x = Tensor::<f64>::var(vec![1.0, -2.0, 3.0], &[3]).unwrap();
        let y = x.mul(&x).unwrap().add(&x).unwrap().sum_all();
        let g = y.backward().unwrap();
        assert_eq!(g.get(&x).unwrap().data(), &[3.0, -3.0, 7.0]);
    }

    #[test]
    fn detach_blocks_gradient() {
        let x = Tensor::<f64>::var(vec![2.0], &[1]).unwrap();
        let y = x.mul(&x.detach()).unwrap().sum_all();
        let g = y.backward().unwrap();
        assert_eq!(g.get(&x).unwrap().data(), &[2.0]);
    }
}
