//! Seeded synthetic graphs for benchmarks, training checks and explainer
//! ground truth.

use std::collections::BTreeMap;

use rand::distributions::WeightedIndex;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::edge_index::EdgeIndex;
use crate::error::{Error, Result};
use crate::message_passing::{GnnModel, LayerKind};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Edges whose endpoints are drawn from a Zipf-like law `p(rank) ∝
/// (rank + 1)^-exponent` over a random node ranking (independent for
/// sources and destinations). Duplicates and self-loops are kept.
pub fn power_law_edges(num_nodes: usize, num_edges: usize, exponent: f64, seed: u64) -> Result<EdgeIndex> {
    if num_nodes == 0 && num_edges > 0 {
        return Err(Error::EdgeIndex("edges over an empty node set".into()));
    }
    if num_edges == 0 {
        return Ok(EdgeIndex::empty(num_nodes, num_nodes));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let weights: Vec<f64> = (0..num_nodes).map(|r| (r as f64 + 1.0).powf(-exponent)).collect();
    let dist = WeightedIndex::new(&weights).map_err(|e| Error::EdgeIndex(e.to_string()))?;
    let mut src_rank: Vec<usize> = (0..num_nodes).collect();
    let mut dst_rank = src_rank.clone();
    src_rank.shuffle(&mut rng);
    dst_rank.shuffle(&mut rng);
    let (src, dst) = (0..num_edges)
        .map(|_| (src_rank[dist.sample(&mut rng)], dst_rank[dist.sample(&mut rng)]))
        .unzip();
    EdgeIndex::new(src, dst, num_nodes, num_nodes, Default::default())
}

/// Endpoints drawn uniformly.
pub fn uniform_edges(num_nodes: usize, num_edges: usize, seed: u64) -> Result<EdgeIndex> {
    if num_nodes == 0 && num_edges > 0 {
        return Err(Error::EdgeIndex("edges over an empty node set".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (src, dst) = (0..num_edges)
        .map(|_| (rng.gen_range(0..num_nodes), rng.gen_range(0..num_nodes)))
        .unzip();
    EdgeIndex::new(src, dst, num_nodes, num_nodes, Default::default())
}

/// `[n × f]` features uniform in `[-1, 1)`.
pub fn uniform_features<T: Scalar>(n: usize, f: usize, seed: u64) -> Tensor<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data: Vec<T> = (0..n * f)
        .map(|_| T::from_f64_lossy(rng.gen_range(-1.0..1.0)))
        .collect();
    Tensor::from_vec(data, &[n, f]).expect("shape matches")
}

#[derive(Debug, Clone)]
pub struct LabeledGraph<T: Scalar> {
    pub x: Tensor<T>,
    pub edges: EdgeIndex,
    pub labels: Vec<usize>,
}

/// Two classes separated by the sign of feature 0 (|x_0| ≥ 0.5), the other
/// features uniform noise. Every node gets `degree` in-edges, 90% of them
/// from its own class.
pub fn two_class_graph<T: Scalar>(n: usize, f: usize, degree: usize, seed: u64) -> Result<LabeledGraph<T>> {
    if n < 2 || f == 0 {
        return Err(Error::InvalidShape {
            op: "two_class_graph",
            msg: format!("need at least 2 nodes and 1 feature, got {n} x {f}"),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let labels: Vec<usize> = (0..n).map(|i| i % 2).collect();
    let mut x = Vec::with_capacity(n * f);
    for &y in &labels {
        let sign = if y == 1 { 1.0 } else { -1.0 };
        x.push(T::from_f64_lossy(sign * rng.gen_range(0.5..1.5)));
        x.extend((1..f).map(|_| T::from_f64_lossy(rng.gen_range(-1.0..1.0))));
    }
    let by_class: [Vec<usize>; 2] = [
        (0..n).filter(|i| labels[*i] == 0).collect(),
        (0..n).filter(|i| labels[*i] == 1).collect(),
    ];
    let mut pairs = Vec::with_capacity(n * degree);
    for v in 0..n {
        for _ in 0..degree {
            let class = if rng.gen_bool(0.9) { labels[v] } else { 1 - labels[v] };
            let pool = &by_class[class];
            pairs.push((pool[rng.gen_range(0..pool.len())], v));
        }
    }
    Ok(LabeledGraph {
        x: Tensor::from_vec(x, &[n, f])?,
        edges: EdgeIndex::from_pairs(&pairs, n)?,
        labels,
    })
}

/// A one-layer GIN whose prediction at `target` depends on exactly one
/// incoming edge.
#[derive(Debug, Clone)]
pub struct Circuit<T: Scalar> {
    pub x: Tensor<T>,
    pub edges: EdgeIndex,
    pub model: GnnModel<T>,
    pub target: usize,
    /// Position of the edge `a -> target`.
    pub truth_edge: usize,
    /// Position of a second in-edge of `target` with no influence.
    pub null_edge: usize,
    pub class: usize,
}

/// Node 0 is the target, node 1 (`a`) carries the only signal on feature 0,
/// node 2 (`b`) and `distractors` more nodes carry signal on feature 1 only,
/// which the model ignores. Class 0's logit is `3 * h_0`, class 1 has a
/// constant logit of 1.5, so the target predicts class 0 through `a`.
pub fn circuit<T: Scalar>(distractors: usize, seed: u64) -> Result<Circuit<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = 3 + distractors;
    let mut x = vec![0.0; n * 2];
    x[2] = 1.0;
    for v in 0..n {
        if v != 1 {
            x[v * 2 + 1] = rng.gen_range(0.1..1.0);
        }
    }
    let mut pairs = vec![(1, 0), (2, 0)];
    for d in 3..n {
        if rng.gen_bool(0.5) {
            pairs.push((d, 0));
        }
        for _ in 0..2 {
            let u = rng.gen_range(1..n);
            pairs.push((d, u));
        }
    }
    pairs.shuffle(&mut rng);
    let truth_edge = pairs.iter().position(|&p| p == (1, 0)).expect("present");
    let null_edge = pairs.iter().position(|&p| p == (2, 0)).expect("present");

    let mut model = GnnModel::new(LayerKind::Gin, &[2, 2], 1, seed)?;
    let layer = &mut model.layers[0];
    let mut set = |name: &str, data: &[f64], shape: &[usize]| -> Result<()> {
        layer.set_weight(name, Tensor::from_f64(data, shape)?.requires_grad_())
    };
    set("mlp0.weight", &[1.0, 0.0, 0.0, 1.0], &[2, 2])?;
    set("mlp0.bias", &[0.0, 0.0], &[2])?;
    set("mlp1.weight", &[3.0, 0.0, 0.0, 0.0], &[2, 2])?;
    set("mlp1.bias", &[0.0, 1.5], &[2])?;
    Ok(Circuit {
        x: Tensor::from_f64(&x, &[n, 2])?,
        edges: EdgeIndex::from_pairs(&pairs, n)?,
        model,
        target: 0,
        truth_edge,
        null_edge,
        class: 0,
    })
}

/// Features per node type for a typed graph, uniform in `[-1, 1)`.
pub fn typed_features<T: Scalar>(counts: &BTreeMap<String, usize>, f: usize, seed: u64) -> BTreeMap<String, Tensor<T>> {
    counts
        .iter()
        .enumerate()
        .map(|(i, (name, &n))| (name.clone(), uniform_features(n, f, seed.wrapping_add(i as u64))))
        .collect()
}
