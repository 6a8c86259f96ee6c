use std::collections::BTreeMap;

use super::SampledSubgraph;
use crate::edge_index::EdgeIndex;
use crate::error::{Error, Result};
use crate::hetero::EdgeType;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Per-hop node and edge counts of a BFS-ordered homogeneous batch.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HopCounts {
    /// `k + 1` entries, seeds first.
    pub nodes: Vec<usize>,
    /// `k` entries.
    pub edges: Vec<usize>,
}

impl HopCounts {
    pub fn new(nodes: Vec<usize>, edges: Vec<usize>) -> Result<Self> {
        if nodes.len() != edges.len() + 1 {
            return Err(Error::Sampler(format!(
                "{} node hops for {} edge hops",
                nodes.len(),
                edges.len()
            )));
        }
        Ok(HopCounts { nodes, edges })
    }

    pub fn num_hops(&self) -> usize {
        self.edges.len()
    }

    /// `(edges, nodes)` kept at layer `layer`: hops `0..=k - layer` of nodes
    /// and `1..=k - layer` of edges.
    pub fn trim(&self, layer: usize) -> Result<(usize, usize)> {
        let k = self.num_hops();
        if layer >= k.max(1) {
            return Err(Error::Sampler(format!("layer {layer} out of range for {k} hops")));
        }
        let keep = k - layer;
        Ok((self.edges[..keep].iter().sum(), self.nodes[..=keep].iter().sum()))
    }
}

pub type TrimmedViews<T> = (BTreeMap<EdgeType, EdgeIndex>, BTreeMap<String, Tensor<T>>);

/// Prefix views of a batch for layer `layer`. Edge and feature views share
/// storage with their inputs; seed rows always survive.
pub fn trim_to_layer<T: Scalar>(
    batch: &SampledSubgraph,
    h: &BTreeMap<String, Tensor<T>>,
    layer: usize,
) -> Result<TrimmedViews<T>> {
    let counts = batch.hetero_hop_counts();
    let k = counts.num_hops();
    if layer >= k.max(1) {
        return Err(Error::Sampler(format!("layer {layer} out of range for {k} hops")));
    }
    let mut rows = BTreeMap::new();
    let mut feats = BTreeMap::new();
    for (name, x) in h {
        let n = counts.nodes_at(name, layer)?;
        rows.insert(name.as_str(), n);
        feats.insert(
            name.clone(),
            if x.rows() == n { x.clone() } else { x.narrow_rows(0, n)? },
        );
    }
    let mut edges = BTreeMap::new();
    for (et, index) in &batch.edges {
        let n_src = counts.nodes_at(&et.src, layer)?;
        let n_dst = counts.nodes_at(&et.dst, layer)?;
        let view = if layer == 0 {
            index.clone()
        } else {
            index.prefix(counts.edges_at(et, layer)?, n_src, n_dst)?
        };
        edges.insert(et.clone(), view);
    }
    Ok((edges, feats))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prefix_arithmetic() {
        let c = HopCounts::new(vec![1, 2, 4], vec![2, 5]).unwrap();
        assert_eq!(c.trim(0).unwrap(), (7, 7));
        assert_eq!(c.trim(1).unwrap(), (2, 3));
        assert!(c.trim(2).is_err());
        assert!(HopCounts::new(vec![1], vec![1]).is_err());
    }
}
