//! Feature and graph stores: what the sampler and loader read from.
//!
//! Two backends ship: [`InMemoryStore`] over a shared [`HeteroGraph`] and
//! [`DiskStore`] over a dataset directory (see [`disk`] for the layout).

pub mod disk;

use std::sync::Arc;

use serde::Serialize;

pub use disk::{load_dataset, save_dataset, DatasetManifest, DiskStore, EdgeRecord, NodeRecord};

use crate::edge_index::{CsrView, EdgeIndex};
use crate::error::{Error, Result};
use crate::hetero::{EdgeType, HeteroGraph};
use crate::scalar::{DType, Scalar};
use crate::tensor::Tensor;

/// The feature attribute every node type carries.
pub const FEATURES: &str = "x";

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AttrInfo {
    pub node_type: String,
    pub name: String,
    pub dtype: DType,
    pub width: usize,
}

pub trait FeatureStore<T: Scalar>: Send + Sync {
    /// Rows in the order given; repeated indices repeat rows.
    fn get(&self, node_type: &str, rows: &[usize], attr: &str) -> Result<Tensor<T>>;

    fn multi_get(&self, requests: &[(&str, &[usize], &str)]) -> Result<Vec<Tensor<T>>> {
        requests
            .iter()
            .map(|&(t, rows, attr)| self.get(t, rows, attr))
            .collect()
    }

    fn catalog(&self) -> Vec<AttrInfo>;
}

pub trait GraphStore: Send + Sync {
    fn node_types(&self) -> Vec<String>;

    fn num_nodes(&self, node_type: &str) -> Result<usize>;

    fn edge_types(&self) -> Vec<EdgeType>;

    /// COO structure; clones share compressed caches with the store.
    fn edge_index(&self, et: &EdgeType) -> Result<EdgeIndex>;

    fn csr(&self, et: &EdgeType) -> Result<Arc<CsrView>> {
        Ok(self.edge_index(et)?.to_csr())
    }

    fn csc(&self, et: &EdgeType) -> Result<Arc<CsrView>> {
        Ok(self.edge_index(et)?.to_csc())
    }

    fn edge_time(&self, et: &EdgeType) -> Result<Option<&[i64]>>;

    fn node_time(&self, node_type: &str) -> Result<Option<&[i64]>>;
}

pub(crate) fn gather_checked<T: Scalar>(
    n: usize,
    width: usize,
    rows: &[usize],
    read_row: impl Fn(usize, &mut Vec<T>),
) -> Result<Tensor<T>> {
    if let Some((position, &r)) = rows.iter().enumerate().find(|(_, &r)| r >= n) {
        return Err(Error::IndexOutOfRange {
            op: "feature get",
            position,
            index: r,
            bound: n,
        });
    }
    let mut out = Vec::with_capacity(rows.len() * width);
    for &r in rows {
        read_row(r, &mut out);
    }
    Tensor::from_vec(out, &[rows.len(), width])
}

/// Adapter exposing a [`HeteroGraph`] through both store interfaces without
/// copying it.
///
/// The graph is held behind an `Arc`; while an adapter lives, [`graph_mut`]
/// refuses to hand out mutable access.
#[derive(Debug, Clone)]
pub struct InMemoryStore<T: Scalar> {
    graph: Arc<HeteroGraph<T>>,
}

pub fn in_memory_stores<T: Scalar>(graph: &Arc<HeteroGraph<T>>) -> InMemoryStore<T> {
    InMemoryStore {
        graph: Arc::clone(graph),
    }
}

/// Exclusive access to a graph that no store adapter is reading.
pub fn graph_mut<T: Scalar>(graph: &mut Arc<HeteroGraph<T>>) -> Result<&mut HeteroGraph<T>> {
    Arc::get_mut(graph).ok_or(Error::SharedGraph)
}

impl<T: Scalar> InMemoryStore<T> {
    pub fn graph(&self) -> &HeteroGraph<T> {
        &self.graph
    }
}

impl<T: Scalar> FeatureStore<T> for InMemoryStore<T> {
    fn get(&self, node_type: &str, rows: &[usize], attr: &str) -> Result<Tensor<T>> {
        let node = self.graph.node(node_type)?;
        if attr != FEATURES {
            return Err(Error::UnknownAttribute {
                node_type: node_type.to_string(),
                attr: attr.to_string(),
            });
        }
        let x = &node.x;
        gather_checked(x.rows(), x.row_width(), rows, |r, out| out.extend_from_slice(x.row(r)))
    }

    fn catalog(&self) -> Vec<AttrInfo> {
        self.graph
            .nodes()
            .iter()
            .map(|(name, s)| AttrInfo {
                node_type: name.clone(),
                name: FEATURES.to_string(),
                dtype: T::DTYPE,
                width: s.x.row_width(),
            })
            .collect()
    }
}

impl<T: Scalar> GraphStore for InMemoryStore<T> {
    fn node_types(&self) -> Vec<String> {
        self.graph.node_types().map(str::to_string).collect()
    }

    fn num_nodes(&self, node_type: &str) -> Result<usize> {
        self.graph.num_nodes(node_type)
    }

    fn edge_types(&self) -> Vec<EdgeType> {
        self.graph.edge_types().cloned().collect()
    }

    fn edge_index(&self, et: &EdgeType) -> Result<EdgeIndex> {
        Ok(self.graph.edge(et)?.index.clone())
    }

    fn edge_time(&self, et: &EdgeType) -> Result<Option<&[i64]>> {
        Ok(self.graph.edge(et)?.time.as_deref())
    }

    fn node_time(&self, node_type: &str) -> Result<Option<&[i64]>> {
        Ok(self.graph.node(node_type)?.time.as_deref())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn graph() -> Arc<HeteroGraph<f64>> {
        let x = Tensor::from_vec((0..6).map(f64::from).collect(), &[3, 2]).unwrap();
        let e = EdgeIndex::from_pairs(&[(0, 1), (2, 1)], 3).unwrap();
        Arc::new(HeteroGraph::homogeneous(x, e).unwrap())
    }

    #[test]
    fn get_preserves_order_and_duplicates() {
        let g = graph();
        let s = in_memory_stores(&g);
        let t = s.get("node", &[2, 0, 2], FEATURES).unwrap();
        assert_eq!(t.to_vec(), vec![4.0, 5.0, 0.0, 1.0, 4.0, 5.0]);
        let empty = s.get("node", &[], FEATURES).unwrap();
        assert_eq!(empty.shape(), &[0, 2]);
        assert!(s.get("node", &[3], FEATURES).is_err());
        assert!(s.get("node", &[0], "y").is_err());
        assert!(s.get("user", &[0], FEATURES).is_err());
    }

    #[test]
    fn multi_get_is_concatenation_of_gets() {
        let g = graph();
        let s = in_memory_stores(&g);
        let parts = s
            .multi_get(&[("node", &[1], FEATURES), ("node", &[0, 2], FEATURES)])
            .unwrap();
        assert_eq!(parts[0].to_vec(), s.get("node", &[1], FEATURES).unwrap().to_vec());
        assert_eq!(parts[1].to_vec(), s.get("node", &[0, 2], FEATURES).unwrap().to_vec());
    }

    #[test]
    fn mutation_refused_while_adapter_lives() {
        let mut g = graph();
        let et = EdgeType::new("node", "to", "node");
        let adapter = in_memory_stores(&g);
        assert!(matches!(graph_mut(&mut g), Err(Error::SharedGraph)));
        drop(adapter);
        graph_mut(&mut g).unwrap().push_edge(&et, 1, 0, None).unwrap();
        assert_eq!(g.edge(&et).unwrap().index.num_edges(), 3);
    }
}
