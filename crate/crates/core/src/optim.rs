//! First-order optimizers over immutable parameter tensors: a step replaces
//! every parameter with a fresh leaf.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: i32,
    moments: Vec<(Vec<f64>, Vec<f64>)>,
}

impl Adam {
    pub fn new(lr: f64) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            moments: Vec::new(),
        }
    }

    /// Updates `params` from their accumulated gradients; parameters the
    /// loss did not reach count as having zero gradient. The parameter list
    /// must keep its order and shapes between steps.
    pub fn step<'a, T: Scalar>(&mut self, params: impl IntoIterator<Item = &'a mut Tensor<T>>) -> Result<()> {
        self.t += 1;
        let (b1, b2) = (self.beta1, self.beta2);
        let c1 = 1.0 - b1.powi(self.t);
        let c2 = 1.0 - b2.powi(self.t);
        for (i, p) in params.into_iter().enumerate() {
            let n = p.numel();
            if self.moments.len() == i {
                self.moments.push((vec![0.0; n], vec![0.0; n]));
            }
            let (m, v) = &mut self.moments[i];
            if m.len() != n {
                return Err(Error::InvalidShape {
                    op: "adam",
                    msg: format!("parameter {i} changed size from {} to {n}", m.len()),
                });
            }
            let grad = p.grad().map(|g| g.to_f64_vec());
            let mut next = p.to_f64_vec();
            for j in 0..n {
                let g = grad.as_ref().map_or(0.0, |g| g[j]);
                m[j] = b1 * m[j] + (1.0 - b1) * g;
                v[j] = b2 * v[j] + (1.0 - b2) * g * g;
                next[j] -= self.lr * (m[j] / c1) / ((v[j] / c2).sqrt() + self.eps);
            }
            *p = Tensor::from_f64(&next, p.shape())?.requires_grad_();
        }
        Ok(())
    }
}
