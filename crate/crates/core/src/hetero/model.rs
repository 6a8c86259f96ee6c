use std::collections::BTreeMap;
use std::sync::Mutex;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{EdgeType, HeteroGraph};
use crate::aggregate::{aggregate, AggregationSpec, Layout};
use crate::edge_index::EdgeIndex;
use crate::error::{Error, Result};
use crate::message_passing::{
    bipartite_forward, ExecPath, LayerDims, LayerKind, LayerOptions, LayerParams, MessageCallback,
};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// How messages from several edge types into one node type are bundled.
#[derive(Clone)]
pub enum InterTypeAgg<T: Scalar> {
    Reduce(AggregationSpec<T>),
    /// Concatenates per-edge-type results (sorted edge-type order) and
    /// projects back with a learned `[R·F' × F']` matrix.
    ConcatProject,
}

impl<T: Scalar> InterTypeAgg<T> {
    pub fn sum() -> Self {
        InterTypeAgg::Reduce(AggregationSpec::sum())
    }
}

/// One heterogeneous layer: a replica of the template per edge type plus a
/// per-node-type bias applied after bundling.
#[derive(Clone)]
pub struct HeteroLayer<T: Scalar> {
    pub replicas: BTreeMap<EdgeType, LayerParams<T>>,
    pub inter_agg: InterTypeAgg<T>,
    pub bias: BTreeMap<String, Tensor<T>>,
    /// Concat-project matrices keyed by destination node type.
    pub project: BTreeMap<String, Tensor<T>>,
    pub out_dim: usize,
}

/// FNV-1a over the canonical edge-type name mixed into the model seed.
fn derive_seed(seed: u64, et: &EdgeType) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in et.to_string().bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    let mut z = seed ^ h;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Replicates `template` for every edge type.
///
/// Without `node_dims` every node type is assumed to have the template's
/// input width; node types of differing widths must be listed explicitly.
pub fn to_hetero<T: Scalar>(
    template: &LayerParams<T>,
    node_dims: Option<&BTreeMap<String, usize>>,
    edge_types: &[EdgeType],
    inter_agg: InterTypeAgg<T>,
    seed: u64,
) -> Result<HeteroLayer<T>> {
    let t = template.dims;
    let width = |name: &str| -> Result<usize> {
        match node_dims {
            Some(d) => d
                .get(name)
                .copied()
                .ok_or_else(|| Error::UnknownNodeType(name.to_string())),
            None => Ok(t.in_src),
        }
    };
    let mut replicas = BTreeMap::new();
    let mut incoming: BTreeMap<String, usize> = BTreeMap::new();
    for et in edge_types {
        if template.kind == LayerKind::Gcn && et.src != et.dst {
            return Err(Error::Hetero(format!("{et}: gcn replicas need a square adjacency")));
        }
        let dims = LayerDims::bipartite(width(&et.src)?, width(&et.dst)?, t.out).with_heads(t.heads);
        let params =
            LayerParams::with_aggregation(template.kind, dims, template.aggregation.clone(), derive_seed(seed, et))
                .map_err(|e| Error::Hetero(format!("{et}: {e}")))?;
        if replicas.insert(et.clone(), params).is_some() {
            return Err(Error::Hetero(format!("duplicate edge type {et}")));
        }
        *incoming.entry(et.dst.clone()).or_default() += 1;
    }
    let mut node_types: Vec<String> = edge_types
        .iter()
        .flat_map(|et| [et.src.clone(), et.dst.clone()])
        .collect();
    if let Some(d) = node_dims {
        node_types.extend(d.keys().cloned());
    }
    node_types.sort();
    node_types.dedup();
    let bias = node_types
        .iter()
        .map(|n| (n.clone(), Tensor::zeros(&[t.out]).requires_grad_()))
        .collect();
    let mut project = BTreeMap::new();
    if matches!(inter_agg, InterTypeAgg::ConcatProject) {
        for (d, &r) in &incoming {
            let fan = r * t.out;
            let bound = 1.0 / (fan as f64).sqrt();
            let mut rng =
                ChaCha8Rng::seed_from_u64(derive_seed(seed, &EdgeType::new(d.as_str(), "project", d.as_str())));
            let data = (0..fan * t.out)
                .map(|_| T::from_f64_lossy(rng.gen_range(-bound..=bound)))
                .collect();
            project.insert(d.clone(), Tensor::param(data, &[fan, t.out])?);
        }
    }
    Ok(HeteroLayer {
        replicas,
        inter_agg,
        bias,
        project,
        out_dim: t.out,
    })
}

/// Records which node-type features each edge type read.
#[derive(Debug, Default)]
pub struct AccessAudit {
    reads: Mutex<Vec<(EdgeType, String)>>,
}

impl AccessAudit {
    pub fn reads(&self) -> Vec<(EdgeType, String)> {
        self.reads.lock().unwrap().clone()
    }

    fn record(&self, et: &EdgeType, node_type: &str) {
        self.reads.lock().unwrap().push((et.clone(), node_type.to_string()));
    }
}

/// Per-type hop counts of a sampled heterogeneous batch.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct HeteroHopCounts {
    pub nodes: BTreeMap<String, Vec<usize>>,
    pub edges: BTreeMap<EdgeType, Vec<usize>>,
}

impl HeteroHopCounts {
    pub fn num_hops(&self) -> usize {
        self.edges
            .values()
            .map(Vec::len)
            .chain(self.nodes.values().map(|n| n.len().saturating_sub(1)))
            .max()
            .unwrap_or(0)
    }

    /// Node rows of `node_type` still needed at layer `layer`.
    pub fn nodes_at(&self, node_type: &str, layer: usize) -> Result<usize> {
        let k = self.num_hops();
        if layer >= k.max(1) {
            return Err(Error::Sampler(format!("layer {layer} out of range for {k} hops")));
        }
        let counts = self
            .nodes
            .get(node_type)
            .ok_or_else(|| Error::UnknownNodeType(node_type.to_string()))?;
        Ok(counts.iter().take(k - layer + 1).sum())
    }

    pub fn edges_at(&self, et: &EdgeType, layer: usize) -> Result<usize> {
        let k = self.num_hops();
        if layer >= k.max(1) {
            return Err(Error::Sampler(format!("layer {layer} out of range for {k} hops")));
        }
        let counts = self
            .edges
            .get(et)
            .ok_or_else(|| Error::UnknownEdgeType(et.to_string()))?;
        Ok(counts.iter().take(k - layer).sum())
    }
}

#[derive(Clone, Copy, Default)]
pub struct HeteroOptions<'a, T: Scalar> {
    pub path: Option<ExecPath>,
    pub callback: Option<&'a dyn MessageCallback<T>>,
    pub layer: usize,
    pub audit: Option<&'a AccessAudit>,
    /// Runs edge types one after another instead of on the thread pool.
    pub sequential: bool,
}

/// One nested propagation step: a bipartite layer per edge type, then a
/// per-destination-type bundling and bias.
///
/// Node types without incoming edge types receive a zero aggregate. Results
/// are combined in sorted edge-type order, whatever order the edge types
/// finished in.
pub fn hetero_propagate<T: Scalar>(
    g: &HeteroGraph<T>,
    layer: &HeteroLayer<T>,
    h: &BTreeMap<String, Tensor<T>>,
    opts: &HeteroOptions<'_, T>,
) -> Result<BTreeMap<String, Tensor<T>>> {
    let edges: BTreeMap<&EdgeType, &EdgeIndex> = g.edges().iter().map(|(k, v)| (k, &v.index)).collect();
    propagate_views(g.nodes().keys().map(String::as_str), &edges, layer, h, opts)
}

pub(crate) fn propagate_views<'n, T: Scalar>(
    node_types: impl Iterator<Item = &'n str>,
    edges: &BTreeMap<&EdgeType, &EdgeIndex>,
    layer: &HeteroLayer<T>,
    h: &BTreeMap<String, Tensor<T>>,
    opts: &HeteroOptions<'_, T>,
) -> Result<BTreeMap<String, Tensor<T>>> {
    let fetch = |et: &EdgeType, name: &str| -> Result<&Tensor<T>> {
        if let Some(a) = opts.audit {
            a.record(et, name);
        }
        h.get(name).ok_or_else(|| Error::UnknownNodeType(name.to_string()))
    };
    let run = |(et, index): (&&EdgeType, &&EdgeIndex)| -> Result<(EdgeType, Tensor<T>)> {
        let params = layer
            .replicas
            .get(*et)
            .ok_or_else(|| Error::Hetero(format!("no replica for edge type {et}")))?;
        let h_src = fetch(et, &et.src)?;
        let h_dst = fetch(et, &et.dst)?;
        let lo = LayerOptions {
            path: opts.path,
            callback: opts.callback,
            layer: opts.layer,
            edge_type: Some(*et),
            degree: None,
        };
        let out =
            bipartite_forward(params, index, h_src, h_dst, &lo).map_err(|e| Error::Hetero(format!("{et}: {e}")))?;
        Ok(((*et).clone(), out))
    };
    let messages: Vec<(EdgeType, Tensor<T>)> = if opts.sequential {
        edges.iter().map(run).collect::<Result<_>>()?
    } else {
        let items: Vec<_> = edges.iter().collect();
        items.into_par_iter().map(run).collect::<Result<_>>()?
    };

    let mut out = BTreeMap::new();
    for name in node_types {
        let rows = h
            .get(name)
            .ok_or_else(|| Error::UnknownNodeType(name.to_string()))?
            .rows();
        let incoming: Vec<&Tensor<T>> = messages
            .iter()
            .filter(|(et, _)| et.dst == name)
            .map(|(_, m)| m)
            .collect();
        let bundled = bundle(layer, name, rows, &incoming)?;
        let bundled = match layer.bias.get(name) {
            Some(b) => bundled.add(b)?,
            None => bundled,
        };
        out.insert(name.to_string(), bundled);
    }
    Ok(out)
}

fn bundle<T: Scalar>(layer: &HeteroLayer<T>, name: &str, rows: usize, incoming: &[&Tensor<T>]) -> Result<Tensor<T>> {
    let f = layer.out_dim;
    if incoming.is_empty() {
        return Ok(Tensor::zeros(&[rows, f]));
    }
    match &layer.inter_agg {
        InterTypeAgg::Reduce(spec) => {
            if incoming.len() == 1 && matches!(spec.single().map(|k| k.name()), Some("sum" | "mean")) {
                return Ok(incoming[0].clone());
            }
            let stacked = Tensor::concat_rows(incoming)?;
            let index: Vec<usize> = (0..incoming.len()).flat_map(|_| 0..rows).collect();
            aggregate(&stacked, &index, rows, spec, Layout::UnsortedScatter)
        }
        InterTypeAgg::ConcatProject => {
            let w = layer
                .project
                .get(name)
                .ok_or_else(|| Error::Hetero(format!("no projection for node type {name:?}")))?;
            Tensor::concat_cols(incoming)?.matmul(w)
        }
    }
}

/// A stack of heterogeneous layers with ReLU in between.
#[derive(Clone)]
pub struct HeteroModel<T: Scalar> {
    pub layers: Vec<HeteroLayer<T>>,
}

impl<T: Scalar> HeteroModel<T> {
    /// `widths = [in, hidden.., out]` shared by every node type.
    pub fn new(
        kind: LayerKind,
        widths: &[usize],
        edge_types: &[EdgeType],
        inter_agg: InterTypeAgg<T>,
        seed: u64,
    ) -> Result<Self> {
        if widths.len() < 2 {
            return Err(Error::Hetero("a model needs at least one layer".into()));
        }
        let layers = widths
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let template = LayerParams::new(kind, LayerDims::new(w[0], w[1]), 0)?;
                to_hetero(
                    &template,
                    None,
                    edge_types,
                    inter_agg.clone(),
                    seed.wrapping_add(i as u64),
                )
            })
            .collect::<Result<_>>()?;
        Ok(HeteroModel { layers })
    }

    pub fn parameters(&self) -> Vec<&Tensor<T>> {
        self.layers
            .iter()
            .flat_map(|l| {
                l.replicas
                    .values()
                    .flat_map(|p| p.weights.values())
                    .chain(l.bias.values())
                    .chain(l.project.values())
            })
            .collect()
    }

    pub fn zero_grad(&self) {
        self.parameters().into_iter().for_each(Tensor::zero_grad);
    }

    pub fn forward(
        &self,
        g: &HeteroGraph<T>,
        h: &BTreeMap<String, Tensor<T>>,
        opts: &HeteroOptions<'_, T>,
        trim: Option<&HeteroHopCounts>,
    ) -> Result<BTreeMap<String, Tensor<T>>> {
        let mut h = h.clone();
        for (l, layer) in self.layers.iter().enumerate() {
            let lo = HeteroOptions { layer: l, ..*opts };
            h = match trim {
                None => hetero_propagate(g, layer, &h, &lo)?,
                Some(counts) => {
                    let mut views = BTreeMap::new();
                    for (name, x) in &h {
                        let n = counts.nodes_at(name, l)?;
                        views.insert(
                            name.clone(),
                            if x.rows() == n { x.clone() } else { x.narrow_rows(0, n)? },
                        );
                    }
                    let mut trimmed = BTreeMap::new();
                    for (et, store) in g.edges() {
                        let e = counts.edges_at(et, l)?;
                        let view = store.index.prefix(e, views[&et.src].rows(), views[&et.dst].rows())?;
                        trimmed.insert(et, view);
                    }
                    let refs: BTreeMap<&EdgeType, &EdgeIndex> = trimmed.iter().map(|(k, v)| (*k, v)).collect();
                    propagate_views(g.nodes().keys().map(String::as_str), &refs, layer, &views, &lo)?
                }
            };
            if l + 1 < self.layers.len() {
                h = h.into_iter().map(|(k, v)| (k, v.relu())).collect();
            }
        }
        Ok(h)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::message_passing::layer_forward;

    fn graph() -> HeteroGraph<f64> {
        let x = Tensor::from_vec((0..12).map(|i| (i as f64 * 0.4).sin()).collect(), &[4, 3]).unwrap();
        let e = EdgeIndex::from_pairs(&[(0, 1), (1, 2), (3, 2), (2, 0)], 4).unwrap();
        HeteroGraph::homogeneous(x, e).unwrap()
    }

    #[test]
    fn single_type_collapses_to_homogeneous() {
        let g = graph();
        let et = EdgeType::new("node", "to", "node");
        for kind in LayerKind::ALL {
            let template = LayerParams::<f64>::new(kind, LayerDims::new(3, 2), 7).unwrap();
            let mut layer = to_hetero(&template, None, std::slice::from_ref(&et), InterTypeAgg::sum(), 1).unwrap();
            layer.replicas.insert(et.clone(), template.clone());
            let out = hetero_propagate(&g, &layer, &g.x_map(), &HeteroOptions::default()).unwrap();
            let x = &g.node("node").unwrap().x;
            let expect = layer_forward(&template, &g.edge(&et).unwrap().index, x, &LayerOptions::default()).unwrap();
            assert_eq!(out["node"].to_vec(), expect.to_vec(), "{kind}");
        }
    }

    #[test]
    fn replicas_get_distinct_seeds() {
        let template = LayerParams::<f64>::new(LayerKind::Sage, LayerDims::new(3, 2), 0).unwrap();
        let ets = [
            EdgeType::new("a", "r", "b"),
            EdgeType::new("b", "r", "a"),
            EdgeType::new("a", "s", "a"),
        ];
        let layer = to_hetero(&template, None, &ets, InterTypeAgg::sum(), 3).unwrap();
        assert_eq!(layer.replicas.len(), 3);
        let ws: Vec<Vec<f64>> = layer
            .replicas
            .values()
            .map(|p| p.weight("weight").unwrap().to_vec())
            .collect();
        assert_ne!(ws[0], ws[1]);
        assert_ne!(ws[1], ws[2]);
        assert_ne!(ws[0], ws[2]);
    }

    #[test]
    fn differing_widths_need_explicit_dims() {
        let template = LayerParams::<f64>::new(LayerKind::Gin, LayerDims::new(3, 2), 0).unwrap();
        let dims: BTreeMap<String, usize> = [("a".to_string(), 3), ("b".to_string(), 5)].into();
        let ets = [EdgeType::new("a", "r", "b")];
        assert!(to_hetero(&template, Some(&dims), &ets, InterTypeAgg::sum(), 0).is_err());
        let sage = LayerParams::<f64>::new(LayerKind::Sage, LayerDims::new(3, 2), 0).unwrap();
        let layer = to_hetero(&sage, Some(&dims), &ets, InterTypeAgg::sum(), 0).unwrap();
        assert_eq!(layer.replicas[&ets[0]].weight("weight").unwrap().shape(), &[8, 2]);
    }
}
