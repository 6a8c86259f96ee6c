#![allow(dead_code)]

use graphmill::edge_index::EdgeIndex;
use graphmill::Tensor;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_values(rng: &mut impl Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(lo..hi)).collect()
}

pub fn random_tensor(rng: &mut impl Rng, shape: &[usize]) -> Tensor<f64> {
    let n = shape.iter().product();
    Tensor::from_vec(random_values(rng, n, -1.0, 1.0), shape).unwrap()
}

pub fn random_param(rng: &mut impl Rng, shape: &[usize]) -> Tensor<f64> {
    random_tensor(rng, shape).requires_grad_()
}

/// Uniform endpoints, duplicates and self-loops allowed.
pub fn random_edges(rng: &mut impl Rng, n: usize, e: usize) -> EdgeIndex {
    let pairs: Vec<(usize, usize)> = (0..e).map(|_| (rng.gen_range(0..n), rng.gen_range(0..n))).collect();
    EdgeIndex::from_pairs(&pairs, n).unwrap()
}

/// `|a - b| / max(1, |a|, |b|)`: relative for large entries, absolute
/// near zero where central differences carry only absolute accuracy.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / 1f64.max(a.abs()).max(b.abs())
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Largest relative error between the tape's gradients of `f` at `inputs`
/// and central differences. `f` must be a scalar function built only from
/// the given tensors.
pub fn grad_check(inputs: &[Tensor<f64>], f: impl Fn(&[Tensor<f64>]) -> Tensor<f64>) -> f64 {
    const H: f64 = 1e-5;
    let leaves: Vec<Tensor<f64>> = inputs
        .iter()
        .map(|t| Tensor::param(t.to_vec(), t.shape()).unwrap())
        .collect();
    f(&leaves).backward().unwrap();
    let mut worst: f64 = 0.0;
    for (k, leaf) in leaves.iter().enumerate() {
        let analytic = leaf
            .grad()
            .map(|g| g.to_vec())
            .unwrap_or_else(|| vec![0.0; leaf.numel()]);
        let base = leaf.to_vec();
        for i in 0..base.len() {
            let at = |delta: f64| {
                let mut data = base.clone();
                data[i] += delta;
                let mut xs: Vec<Tensor<f64>> = leaves.iter().map(|t| t.detach()).collect();
                xs[k] = Tensor::from_vec(data, leaf.shape()).unwrap();
                f(&xs).item().unwrap()
            };
            let numeric = (at(H) - at(-H)) / (2.0 * H);
            worst = worst.max(rel_err(analytic[i], numeric));
        }
    }
    worst
}

/// `sum(t * r)` for a fixed random `r` of `t`'s shape, so every output
/// entry gets a distinct upstream gradient.
pub fn project(t: &Tensor<f64>, seed: u64) -> Tensor<f64> {
    let r = random_tensor(&mut rng(seed), t.shape());
    t.mul(&r).unwrap().sum()
}

pub mod gradcases;
