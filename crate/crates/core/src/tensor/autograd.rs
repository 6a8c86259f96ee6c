use std::collections::{HashMap, HashSet};

use super::Tensor;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Bookkeeping returned by a backward pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BackwardStats {
    /// Tape nodes whose backward rule ran.
    pub nodes_visited: usize,
    /// Leaves that received a gradient.
    pub leaves_updated: usize,
}

impl<T: Scalar> Tensor<T> {
    /// Reverse-mode sweep from a scalar root. Leaf gradients accumulate
    /// across calls until [`Tensor::zero_grad`].
    pub fn backward(&self) -> Result<BackwardStats> {
        if self.numel() != 1 {
            return Err(Error::NonScalarRoot(self.shape().to_vec()));
        }
        if !self.requires_grad() {
            return Err(Error::NoGradient);
        }

        let order = topo_order(self);
        let mut grads: HashMap<usize, Vec<T>> = HashMap::new();
        grads.insert(self.id(), vec![T::one()]);

        let mut stats = BackwardStats {
            nodes_visited: 0,
            leaves_updated: 0,
        };
        for t in order.iter().rev() {
            let Some(g) = grads.remove(&t.id()) else {
                continue;
            };
            let Some(node) = t.node() else {
                t.accumulate_grad(&g);
                stats.leaves_updated += 1;
                continue;
            };
            stats.nodes_visited += 1;
            let input_grads = (node.backward)(&g);
            debug_assert_eq!(input_grads.len(), node.inputs.len(), "{}", node.op);
            for (input, ig) in node.inputs.iter().zip(input_grads) {
                let Some(ig) = ig else { continue };
                if !input.requires_grad() {
                    continue;
                }
                debug_assert_eq!(ig.len(), input.numel(), "grad width from {}", node.op);
                match grads.get_mut(&input.id()) {
                    Some(acc) => acc.iter_mut().zip(&ig).for_each(|(a, &b)| *a += b),
                    None => {
                        grads.insert(input.id(), ig);
                    }
                }
            }
        }
        Ok(stats)
    }
}

/// Post-order over tracked tensors reachable from `root`; each appears once.
fn topo_order<T: Scalar>(root: &Tensor<T>) -> Vec<Tensor<T>> {
    let mut order = Vec::new();
    let mut seen = HashSet::new();
    // (tensor, children expanded?)
    let mut stack = vec![(root.clone(), false)];
    while let Some((t, expanded)) = stack.pop() {
        if expanded {
            order.push(t);
            continue;
        }
        if !seen.insert(t.id()) {
            continue;
        }
        stack.push((t.clone(), true));
        if let Some(node) = t.node() {
            for input in &node.inputs {
                if input.requires_grad() && !seen.contains(&input.id()) {
                    stack.push((input.clone(), false));
                }
            }
        }
    }
    order
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diamond_visits_each_node_once() {
        let x = Tensor::<f64>::param(vec![1.0, 2.0], &[2]).unwrap();
        let a = x.scale(2.0);
        let b = a.mul(&a).unwrap();
        let c = b.add(&a).unwrap();
        let y = c.sum();
        let stats = y.backward().unwrap();
        // scale, mul, add, sum
        assert_eq!(stats.nodes_visited, 4);
        assert_eq!(stats.leaves_updated, 1);
        // y = sum(4x^2 + 2x) -> 8x + 2
        assert_eq!(x.grad().unwrap().to_vec(), vec![10.0, 18.0]);
    }

    #[test]
    fn repeated_backward_accumulates() {
        let x = Tensor::<f64>::param(vec![1.0, 2.0, 3.0], &[3]).unwrap();
        let y = x.sum();
        y.backward().unwrap();
        y.backward().unwrap();
        assert_eq!(x.grad().unwrap().to_vec(), vec![2.0; 3]);
        x.zero_grad();
        assert!(x.grad().is_none());
    }

    #[test]
    fn non_scalar_root_is_rejected() {
        let x = Tensor::<f64>::param(vec![1.0, 2.0], &[2]).unwrap();
        assert!(matches!(x.relu().backward(), Err(Error::NonScalarRoot(_))));
    }

    #[test]
    fn untracked_root_is_rejected() {
        let x = Tensor::<f64>::from_vec(vec![1.0], &[1]).unwrap();
        assert!(matches!(x.sum().backward(), Err(Error::NoGradient)));
    }
}
