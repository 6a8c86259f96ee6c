//! Generic neighborhood propagation with two execution paths.
//!
//! A propagation step computes, for every destination node `v`,
//!
//! ```text
//! h'_v = f(h_v, AGG{ c(g(h_w, e_wv, h_v)) : w -> v })
//! ```
//!
//! where `g` is the message function, `c` an optional edge-level callback and
//! `f` the update. The **edge-materialize** path builds the `[E × F]` message
//! matrix, runs the callback and scatters into nodes. The **segment-fused**
//! path walks destination-grouped structure directly: source-only messages
//! with sum/mean aggregation never leave node space (a sparse-dense product),
//! everything else is reduced segment by segment. Both paths reduce every
//! destination in ascending edge order.

mod bench;
mod layers;
mod model;
mod spmm;

use std::fmt;

pub use bench::{forward_backward, forward_backward_bench, time_repeat, TimingStats};
pub use layers::{bipartite_forward, layer_forward, LayerDims, LayerKind, LayerOptions, LayerParams};
pub use model::{GnnModel, ModelOptions};
pub use spmm::spmm;

use crate::aggregate::{aggregate, AggKind, AggregationSpec, Layout};
use crate::edge_index::{EdgeIndex, SortOrder};
use crate::error::{Error, Result};
use crate::hetero::EdgeType;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExecPath {
    EdgeMaterialize,
    SegmentFused,
}

impl ExecPath {
    pub fn name(self) -> &'static str {
        match self {
            ExecPath::EdgeMaterialize => "edge_materialize",
            ExecPath::SegmentFused => "segment_fused",
        }
    }
}

/// Picks the fused path when destination-grouped structure is already at
/// hand and no edge-level callback has to observe the messages.
pub fn select_path(edges: &EdgeIndex, needs_edge_callback: bool) -> ExecPath {
    let grouped = edges.sort_order() == SortOrder::ByDst || edges.csc_cached();
    if grouped && !needs_edge_callback {
        ExecPath::SegmentFused
    } else {
        ExecPath::EdgeMaterialize
    }
}

/// What a callback gets to know about the messages it receives.
#[derive(Clone, Copy)]
pub struct MessageContext<'a, T: Scalar> {
    /// Index of the layer within its model.
    pub layer: usize,
    /// Edge type of a heterogeneous propagation.
    pub edge_type: Option<&'a EdgeType>,
    pub num_edges: usize,
    /// Per-edge attention coefficients `[E × heads]` of attention layers.
    pub attention: Option<&'a Tensor<T>>,
}

impl<'a, T: Scalar> MessageContext<'a, T> {
    pub fn new(layer: usize, num_edges: usize) -> Self {
        MessageContext {
            layer,
            edge_type: None,
            num_edges,
            attention: None,
        }
    }
}

/// Edge-level transform applied to materialized messages before aggregation.
pub trait MessageCallback<T: Scalar>: Send + Sync {
    fn on_messages(&self, ctx: &MessageContext<'_, T>, messages: Tensor<T>) -> Result<Tensor<T>>;
}

impl<T, F> MessageCallback<T> for F
where
    T: Scalar,
    F: Fn(&MessageContext<'_, T>, Tensor<T>) -> Result<Tensor<T>> + Send + Sync,
{
    fn on_messages(&self, ctx: &MessageContext<'_, T>, messages: Tensor<T>) -> Result<Tensor<T>> {
        self(ctx, messages)
    }
}

/// Lazily gathered endpoint features for edge-level message functions.
pub struct EdgeContext<'a, T: Scalar> {
    pub edges: &'a EdgeIndex,
    pub h_src: &'a Tensor<T>,
    pub h_dst: &'a Tensor<T>,
    pub edge_attr: Option<&'a Tensor<T>>,
}

impl<T: Scalar> EdgeContext<'_, T> {
    /// `h_w` for every edge `w -> v`.
    pub fn source(&self) -> Result<Tensor<T>> {
        self.h_src.gather_rows(self.edges.src())
    }

    /// `h_v` for every edge `w -> v`.
    pub fn target(&self) -> Result<Tensor<T>> {
        self.h_dst.gather_rows(self.edges.dst())
    }
}

pub type EdgeMessageFn<'a, T> = dyn Fn(&EdgeContext<'_, T>) -> Result<Tensor<T>> + 'a;

/// The message function `g`.
#[derive(Clone, Copy)]
pub enum MessageFn<'a, T: Scalar> {
    /// `g = h_w`.
    CopySource,
    /// `g = a_wv · h_w` with per-edge weights of shape `[E]` or `[E × heads]`
    /// (heads split the feature axis evenly).
    ScaledSource(&'a Tensor<T>),
    /// Any edge-level function of the gathered endpoints.
    Edge(&'a EdgeMessageFn<'a, T>),
}

impl<T: Scalar> fmt::Debug for MessageFn<'_, T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MessageFn::CopySource => f.write_str("CopySource"),
            MessageFn::ScaledSource(w) => write!(f, "ScaledSource({:?})", w.shape()),
            MessageFn::Edge(_) => f.write_str("Edge(..)"),
        }
    }
}

/// One propagation request. `run` returns the aggregated neighborhood
/// (before the update `f`).
pub struct Propagation<'a, T: Scalar> {
    pub edges: &'a EdgeIndex,
    pub h_src: &'a Tensor<T>,
    /// Destination features; the source features when absent.
    pub h_dst: Option<&'a Tensor<T>>,
    pub edge_attr: Option<&'a Tensor<T>>,
    pub message: MessageFn<'a, T>,
    pub aggregation: &'a AggregationSpec<T>,
    /// Forced path; chosen by [`select_path`] when absent.
    pub path: Option<ExecPath>,
    pub callback: Option<&'a dyn MessageCallback<T>>,
    pub context: MessageContext<'a, T>,
}

impl<'a, T: Scalar> Propagation<'a, T> {
    pub fn new(
        edges: &'a EdgeIndex,
        h_src: &'a Tensor<T>,
        message: MessageFn<'a, T>,
        aggregation: &'a AggregationSpec<T>,
    ) -> Self {
        Propagation {
            edges,
            h_src,
            h_dst: None,
            edge_attr: None,
            message,
            aggregation,
            path: None,
            callback: None,
            context: MessageContext::new(0, edges.num_edges()),
        }
    }

    pub fn resolved_path(&self) -> ExecPath {
        self.path
            .unwrap_or_else(|| select_path(self.edges, self.callback.is_some()))
    }

    fn validate(&self) -> Result<()> {
        let e = self.edges;
        if self.h_src.ndim() != 2 || self.h_src.rows() != e.num_src_nodes() {
            return Err(Error::MessagePassing(format!(
                "source features {:?} for {} source nodes",
                self.h_src.shape(),
                e.num_src_nodes()
            )));
        }
        if let Some(h) = self.h_dst {
            if h.ndim() != 2 || h.rows() != e.num_dst_nodes() {
                return Err(Error::MessagePassing(format!(
                    "destination features {:?} for {} destination nodes",
                    h.shape(),
                    e.num_dst_nodes()
                )));
            }
        } else if e.num_src_nodes() != e.num_dst_nodes() {
            return Err(Error::MessagePassing(
                "bipartite propagation needs destination features".into(),
            ));
        }
        if let Some(a) = self.edge_attr {
            if a.rows() != e.num_edges() {
                return Err(Error::MessagePassing(format!(
                    "edge attributes {:?} for {} edges",
                    a.shape(),
                    e.num_edges()
                )));
            }
        }
        if let MessageFn::ScaledSource(w) = self.message {
            let f = self.h_src.row_width();
            let heads = w.row_width();
            if w.rows() != e.num_edges() || w.ndim() > 2 || heads == 0 || !f.is_multiple_of(heads) {
                return Err(Error::MessagePassing(format!(
                    "edge weights {:?} do not fit {} edges of width {f}",
                    w.shape(),
                    e.num_edges()
                )));
            }
        }
        Ok(())
    }

    /// Aggregated messages `[num_dst × F']`.
    pub fn run(&self) -> Result<Tensor<T>> {
        self.validate()?;
        match self.resolved_path() {
            ExecPath::EdgeMaterialize => self.run_materialized(),
            ExecPath::SegmentFused => {
                if self.callback.is_some() {
                    return Err(Error::PathCallbackConflict);
                }
                self.run_fused()
            }
        }
    }

    fn edge_context(&self) -> EdgeContext<'_, T> {
        EdgeContext {
            edges: self.edges,
            h_src: self.h_src,
            h_dst: self.h_dst.unwrap_or(self.h_src),
            edge_attr: self.edge_attr,
        }
    }

    fn materialize_messages(&self) -> Result<Tensor<T>> {
        match self.message {
            MessageFn::CopySource => self.h_src.gather_rows(self.edges.src()),
            MessageFn::ScaledSource(w) => {
                let gathered = self.h_src.gather_rows(self.edges.src())?;
                scale_rows(&gathered, w)
            }
            MessageFn::Edge(g) => {
                let m = g(&self.edge_context())?;
                if m.rows() != self.edges.num_edges() || m.ndim() != 2 {
                    return Err(Error::MessagePassing(format!(
                        "message function returned {:?} for {} edges",
                        m.shape(),
                        self.edges.num_edges()
                    )));
                }
                Ok(m)
            }
        }
    }

    fn run_materialized(&self) -> Result<Tensor<T>> {
        let mut messages = self.materialize_messages()?;
        if let Some(cb) = self.callback {
            let shape = messages.shape().to_vec();
            messages = cb.on_messages(&self.context, messages)?;
            if messages.shape() != shape.as_slice() {
                return Err(Error::MessagePassing(format!(
                    "callback changed message shape {shape:?} to {:?}",
                    messages.shape()
                )));
            }
        }
        aggregate(
            &messages,
            self.edges.dst(),
            self.edges.num_dst_nodes(),
            self.aggregation,
            Layout::UnsortedScatter,
        )
    }

    fn run_fused(&self) -> Result<Tensor<T>> {
        let linear = match self.aggregation.single() {
            Some(AggKind::Sum) => Some(false),
            Some(AggKind::Mean) => Some(true),
            _ => None,
        };
        match (self.message, linear) {
            (MessageFn::CopySource, Some(mean)) => spmm(self.edges, self.h_src, None, mean),
            (MessageFn::ScaledSource(w), Some(mean)) => spmm(self.edges, self.h_src, Some(w), mean),
            _ => {
                // Non-linear reductions or edge-level messages: reduce
                // contiguous destination segments.
                let messages = self.materialize_messages()?;
                let n = self.edges.num_dst_nodes();
                if self.edges.sort_order() == SortOrder::ByDst {
                    aggregate(&messages, self.edges.dst(), n, self.aggregation, Layout::SortedSegments)
                } else {
                    let csc = self.edges.to_csc();
                    let grouped = messages.gather_rows(&csc.perm)?;
                    let mut index = Vec::with_capacity(csc.num_edges());
                    for v in 0..csc.num_rows() {
                        index.extend(std::iter::repeat_n(v, csc.degree(v)));
                    }
                    aggregate(&grouped, &index, n, self.aggregation, Layout::SortedSegments)
                }
            }
        }
    }
}

/// Runs a propagation and applies the update `f` to the aggregate.
pub fn propagate<'a, T: Scalar>(
    p: &Propagation<'a, T>,
    update: impl FnOnce(Tensor<T>) -> Result<Tensor<T>>,
) -> Result<Tensor<T>> {
    update(p.run()?)
}

/// Multiplies each row (or each head block of a row) by its edge weight.
pub(crate) fn scale_rows<T: Scalar>(messages: &Tensor<T>, w: &Tensor<T>) -> Result<Tensor<T>> {
    let e = messages.rows();
    let f = messages.row_width();
    let heads = w.row_width();
    let blocks = messages.reshape(&[e, heads, f / heads])?;
    let weights = w.reshape(&[e, heads, 1])?;
    blocks.mul(&weights)?.reshape(&[e, f])
}
