//! Typed graphs and nested message passing over them.

mod grouped;
mod model;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use grouped::grouped_matmul;
pub use model::{
    hetero_propagate, to_hetero, AccessAudit, HeteroHopCounts, HeteroLayer, HeteroModel, HeteroOptions, InterTypeAgg,
};

use crate::edge_index::EdgeIndex;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// `(source node type, relation, destination node type)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EdgeType {
    pub src: String,
    pub rel: String,
    pub dst: String,
}

impl EdgeType {
    pub fn new(src: impl Into<String>, rel: impl Into<String>, dst: impl Into<String>) -> Self {
        EdgeType {
            src: src.into(),
            rel: rel.into(),
            dst: dst.into(),
        }
    }

    /// Same relation read against the message flow.
    pub fn reversed(&self) -> Self {
        EdgeType::new(self.dst.clone(), format!("rev_{}", self.rel), self.src.clone())
    }
}

impl fmt::Display for EdgeType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}__{}__{}", self.src, self.rel, self.dst)
    }
}

impl FromStr for EdgeType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split("__").collect();
        match parts.as_slice() {
            [a, r, b] if !a.is_empty() && !r.is_empty() && !b.is_empty() => Ok(EdgeType::new(*a, *r, *b)),
            _ => Err(Error::Hetero(format!(
                "malformed edge type {s:?}, expected src__rel__dst"
            ))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct NodeStore<T: Scalar> {
    pub x: Tensor<T>,
    pub time: Option<Vec<i64>>,
}

impl<T: Scalar> NodeStore<T> {
    pub fn num_nodes(&self) -> usize {
        self.x.rows()
    }
}

#[derive(Debug, Clone)]
pub struct EdgeStore<T: Scalar> {
    pub index: EdgeIndex,
    pub attr: Option<Tensor<T>>,
    pub time: Option<Vec<i64>>,
}

/// Node stores keyed by type name and edge stores keyed by [`EdgeType`];
/// iteration is in sorted key order everywhere.
#[derive(Debug, Clone, Default)]
pub struct HeteroGraph<T: Scalar> {
    nodes: BTreeMap<String, NodeStore<T>>,
    edges: BTreeMap<EdgeType, EdgeStore<T>>,
}

impl<T: Scalar> HeteroGraph<T> {
    pub fn new() -> Self {
        HeteroGraph {
            nodes: BTreeMap::new(),
            edges: BTreeMap::new(),
        }
    }

    /// One node type `"node"` with one edge type `node__to__node`.
    pub fn homogeneous(x: Tensor<T>, edges: EdgeIndex) -> Result<Self> {
        let mut g = HeteroGraph::new();
        g.add_node_type("node", x, None)?;
        g.add_edge_type(EdgeType::new("node", "to", "node"), edges, None, None)?;
        Ok(g)
    }

    pub fn add_node_type(&mut self, name: &str, x: Tensor<T>, time: Option<Vec<i64>>) -> Result<()> {
        if name.is_empty() || name.contains("__") {
            return Err(Error::Hetero(format!("invalid node type name {name:?}")));
        }
        if x.ndim() != 2 {
            return Err(Error::Hetero(format!(
                "features of {name:?} must be a matrix, got {:?}",
                x.shape()
            )));
        }
        if let Some(t) = &time {
            if t.len() != x.rows() {
                return Err(Error::Hetero(format!(
                    "{name:?}: {} timestamps for {} nodes",
                    t.len(),
                    x.rows()
                )));
            }
        }
        if let Some(count) = self.edges.iter().find_map(|(et, s)| {
            if et.src == name && s.index.num_src_nodes() != x.rows() {
                Some(s.index.num_src_nodes())
            } else if et.dst == name && s.index.num_dst_nodes() != x.rows() {
                Some(s.index.num_dst_nodes())
            } else {
                None
            }
        }) {
            return Err(Error::Hetero(format!(
                "{name:?} has {} nodes but an edge type expects {count}",
                x.rows()
            )));
        }
        self.nodes.insert(name.to_string(), NodeStore { x, time });
        Ok(())
    }

    pub fn add_edge_type(
        &mut self,
        et: EdgeType,
        index: EdgeIndex,
        attr: Option<Tensor<T>>,
        time: Option<Vec<i64>>,
    ) -> Result<()> {
        let count = |t: &str| {
            self.nodes
                .get(t)
                .map(NodeStore::num_nodes)
                .ok_or_else(|| Error::UnknownNodeType(t.to_string()))
        };
        let (ns, nd) = (count(&et.src)?, count(&et.dst)?);
        if index.num_src_nodes() != ns || index.num_dst_nodes() != nd {
            return Err(Error::Hetero(format!(
                "{et}: index bounds {}x{} do not match node counts {ns}x{nd}",
                index.num_src_nodes(),
                index.num_dst_nodes()
            )));
        }
        let e = index.num_edges();
        if attr.as_ref().is_some_and(|a| a.rows() != e) || time.as_ref().is_some_and(|t| t.len() != e) {
            return Err(Error::Hetero(format!(
                "{et}: edge attributes or timestamps do not cover {e} edges"
            )));
        }
        self.edges.insert(et, EdgeStore { index, attr, time });
        Ok(())
    }

    pub fn node_types(&self) -> impl Iterator<Item = &str> {
        self.nodes.keys().map(String::as_str)
    }

    pub fn edge_types(&self) -> impl Iterator<Item = &EdgeType> {
        self.edges.keys()
    }

    pub fn node(&self, name: &str) -> Result<&NodeStore<T>> {
        self.nodes
            .get(name)
            .ok_or_else(|| Error::UnknownNodeType(name.to_string()))
    }

    pub fn edge(&self, et: &EdgeType) -> Result<&EdgeStore<T>> {
        self.edges.get(et).ok_or_else(|| Error::UnknownEdgeType(et.to_string()))
    }

    pub fn nodes(&self) -> &BTreeMap<String, NodeStore<T>> {
        &self.nodes
    }

    pub fn edges(&self) -> &BTreeMap<EdgeType, EdgeStore<T>> {
        &self.edges
    }

    pub fn num_nodes(&self, name: &str) -> Result<usize> {
        self.node(name).map(NodeStore::num_nodes)
    }

    pub fn x_map(&self) -> BTreeMap<String, Tensor<T>> {
        self.nodes.iter().map(|(k, v)| (k.clone(), v.x.clone())).collect()
    }

    /// Appends an edge; drops the compressed caches of that edge type.
    pub fn push_edge(&mut self, et: &EdgeType, src: usize, dst: usize, time: Option<i64>) -> Result<()> {
        let store = self
            .edges
            .get_mut(et)
            .ok_or_else(|| Error::UnknownEdgeType(et.to_string()))?;
        if store.attr.is_some() {
            return Err(Error::Hetero(format!(
                "{et}: cannot append to an edge type with attributes"
            )));
        }
        match (&mut store.time, time) {
            (Some(ts), Some(t)) => ts.push(t),
            (None, None) => {}
            _ => return Err(Error::Hetero(format!("{et}: timestamp presence mismatch"))),
        }
        store.index.push_edge(src, dst)
    }
}
