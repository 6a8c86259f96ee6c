use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{ExecPath, MessageCallback, MessageContext, MessageFn, Propagation};
use crate::aggregate::{segment_softmax, AggKind, AggregationSpec};
use crate::edge_index::EdgeIndex;
use crate::error::{Error, Result};
use crate::hetero::EdgeType;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

const GAT_SLOPE: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum LayerKind {
    Gcn,
    Sage,
    Gin,
    Gat,
    EdgeCnn,
}

impl LayerKind {
    pub const ALL: [LayerKind; 5] = [
        LayerKind::Gcn,
        LayerKind::Sage,
        LayerKind::Gin,
        LayerKind::Gat,
        LayerKind::EdgeCnn,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LayerKind::Gcn => "gcn",
            LayerKind::Sage => "sage",
            LayerKind::Gin => "gin",
            LayerKind::Gat => "gat",
            LayerKind::EdgeCnn => "edgecnn",
        }
    }

    pub fn default_aggregation<T: Scalar>(self) -> AggregationSpec<T> {
        match self {
            LayerKind::Sage => AggregationSpec::mean(),
            LayerKind::EdgeCnn => AggregationSpec::max(),
            _ => AggregationSpec::sum(),
        }
    }
}

impl fmt::Display for LayerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LayerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        LayerKind::ALL
            .into_iter()
            .find(|k| k.name() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::MessagePassing(format!("unknown layer kind {s:?}")))
    }
}

/// Feature widths of one layer. Source and destination widths differ only
/// for bipartite use between node types.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerDims {
    pub in_src: usize,
    pub in_dst: usize,
    pub out: usize,
    /// Attention heads (GAT only); `out` is split evenly across heads.
    pub heads: usize,
}

impl LayerDims {
    pub fn new(in_dim: usize, out_dim: usize) -> Self {
        LayerDims {
            in_src: in_dim,
            in_dst: in_dim,
            out: out_dim,
            heads: 1,
        }
    }

    pub fn bipartite(in_src: usize, in_dst: usize, out_dim: usize) -> Self {
        LayerDims {
            in_src,
            in_dst,
            out: out_dim,
            heads: 1,
        }
    }

    pub fn with_heads(mut self, heads: usize) -> Self {
        self.heads = heads;
        self
    }
}

#[derive(Clone)]
pub struct LayerParams<T: Scalar> {
    pub kind: LayerKind,
    pub weights: BTreeMap<String, Tensor<T>>,
    pub dims: LayerDims,
    pub aggregation: AggregationSpec<T>,
}

impl<T: Scalar> fmt::Debug for LayerParams<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let shapes: BTreeMap<&str, &[usize]> = self.weights.iter().map(|(k, v)| (k.as_str(), v.shape())).collect();
        f.debug_struct("LayerParams")
            .field("kind", &self.kind)
            .field("dims", &self.dims)
            .field("weights", &shapes)
            .finish()
    }
}

struct Init {
    rng: ChaCha8Rng,
}

impl Init {
    fn uniform<T: Scalar>(&mut self, fan_in: usize, shape: &[usize]) -> Tensor<T> {
        let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
        let n = shape.iter().product();
        let data = (0..n)
            .map(|_| T::from_f64_lossy(self.rng.gen_range(-bound..=bound)))
            .collect();
        Tensor::param(data, shape).expect("init shape")
    }

    fn zeros<T: Scalar>(shape: &[usize]) -> Tensor<T> {
        Tensor::zeros(shape).requires_grad_()
    }
}

impl<T: Scalar> LayerParams<T> {
    pub fn new(kind: LayerKind, dims: LayerDims, seed: u64) -> Result<Self> {
        Self::with_aggregation(kind, dims, kind.default_aggregation(), seed)
    }

    /// Weights drawn uniformly from `±1/√fan_in`, biases and GIN `eps` at 0.
    pub fn with_aggregation(
        kind: LayerKind,
        dims: LayerDims,
        aggregation: AggregationSpec<T>,
        seed: u64,
    ) -> Result<Self> {
        let LayerDims {
            in_src,
            in_dst,
            out,
            heads,
        } = dims;
        let err = |msg: String| Err(Error::MessagePassing(format!("{kind}: {msg}")));
        if matches!(kind, LayerKind::Gcn | LayerKind::Gat) && aggregation.single().map(AggKind::name) != Some("sum") {
            return err("aggregation is fixed to a weighted sum".into());
        }
        if in_src != in_dst && !matches!(kind, LayerKind::Sage) {
            return err(format!("source width {in_src} differs from destination width {in_dst}"));
        }
        if heads == 0 || (kind == LayerKind::Gat && out % heads != 0) {
            return err(format!("{out} output features over {heads} heads"));
        }
        if heads != 1 && kind != LayerKind::Gat {
            return err("only attention layers have heads".into());
        }
        let mut init = Init {
            rng: ChaCha8Rng::seed_from_u64(seed),
        };
        let mut w = BTreeMap::new();
        let agg_width = aggregation.output_width(in_src);
        match kind {
            LayerKind::Gcn => {
                w.insert("weight".into(), init.uniform(in_src, &[in_src, out]));
                w.insert("bias".into(), Init::zeros(&[out]));
            }
            LayerKind::Sage => {
                let fan = in_dst + agg_width;
                w.insert("weight".into(), init.uniform(fan, &[fan, out]));
                w.insert("bias".into(), Init::zeros(&[out]));
            }
            LayerKind::Gin => {
                if agg_width != in_dst {
                    return err("aggregation must preserve the feature width".into());
                }
                w.insert("eps".into(), Init::zeros(&[]));
                w.insert("mlp0.weight".into(), init.uniform(in_src, &[in_src, out]));
                w.insert("mlp0.bias".into(), Init::zeros(&[out]));
                w.insert("mlp1.weight".into(), init.uniform(out, &[out, out]));
                w.insert("mlp1.bias".into(), Init::zeros(&[out]));
            }
            LayerKind::Gat => {
                let c = out / heads;
                w.insert("weight".into(), init.uniform(in_src, &[in_src, out]));
                w.insert("att_src".into(), init.uniform(c, &[heads, c]));
                w.insert("att_dst".into(), init.uniform(c, &[heads, c]));
                w.insert("bias".into(), Init::zeros(&[out]));
            }
            LayerKind::EdgeCnn => {
                w.insert("mlp0.weight".into(), init.uniform(2 * in_src, &[2 * in_src, out]));
                w.insert("mlp0.bias".into(), Init::zeros(&[out]));
                w.insert("mlp1.weight".into(), init.uniform(out, &[out, out]));
                w.insert("mlp1.bias".into(), Init::zeros(&[out]));
            }
        }
        Ok(LayerParams {
            kind,
            weights: w,
            dims,
            aggregation,
        })
    }

    pub fn weight(&self, name: &str) -> Result<&Tensor<T>> {
        self.weights
            .get(name)
            .ok_or_else(|| Error::MessagePassing(format!("{}: missing weight {name:?}", self.kind)))
    }

    pub fn parameters(&self) -> impl Iterator<Item = (&str, &Tensor<T>)> {
        self.weights.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn num_parameters(&self) -> usize {
        self.weights.values().map(Tensor::numel).sum()
    }

    /// Replaces a weight, keeping its shape.
    pub fn set_weight(&mut self, name: &str, value: Tensor<T>) -> Result<()> {
        let old = self.weight(name)?;
        if old.shape() != value.shape() {
            return Err(Error::ShapeMismatch {
                op: "set_weight",
                lhs: old.shape().to_vec(),
                rhs: value.shape().to_vec(),
            });
        }
        self.weights.insert(name.to_string(), value);
        Ok(())
    }

    pub fn zero_grad(&self) {
        self.weights.values().for_each(Tensor::zero_grad);
    }
}

/// Per-call knobs of [`layer_forward`].
#[derive(Clone, Copy)]
pub struct LayerOptions<'a, T: Scalar> {
    pub path: Option<ExecPath>,
    pub callback: Option<&'a dyn MessageCallback<T>>,
    /// Layer position reported to callbacks.
    pub layer: usize,
    pub edge_type: Option<&'a EdgeType>,
    /// In-degrees used by GCN normalization instead of the ones of `edges`;
    /// lets a trimmed view normalize like the full batch.
    pub degree: Option<&'a [usize]>,
}

impl<T: Scalar> Default for LayerOptions<'_, T> {
    fn default() -> Self {
        LayerOptions {
            path: None,
            callback: None,
            layer: 0,
            edge_type: None,
            degree: None,
        }
    }
}

impl<'a, T: Scalar> LayerOptions<'a, T> {
    pub fn path(path: ExecPath) -> Self {
        LayerOptions {
            path: Some(path),
            ..Default::default()
        }
    }

    fn propagation(
        &self,
        edges: &'a EdgeIndex,
        h_src: &'a Tensor<T>,
        h_dst: &'a Tensor<T>,
        message: MessageFn<'a, T>,
        aggregation: &'a AggregationSpec<T>,
    ) -> Propagation<'a, T> {
        let mut p = Propagation::new(edges, h_src, message, aggregation);
        p.h_dst = Some(h_dst);
        p.path = self.path;
        p.callback = self.callback;
        p.context = MessageContext {
            layer: self.layer,
            edge_type: self.edge_type,
            num_edges: edges.num_edges(),
            attention: None,
        };
        p
    }
}

/// One layer over a square adjacency.
pub fn layer_forward<T: Scalar>(
    params: &LayerParams<T>,
    edges: &EdgeIndex,
    h: &Tensor<T>,
    opts: &LayerOptions<'_, T>,
) -> Result<Tensor<T>> {
    bipartite_forward(params, edges, h, h, opts)
}

/// One layer from `h_src` rows into `h_dst` rows.
pub fn bipartite_forward<T: Scalar>(
    params: &LayerParams<T>,
    edges: &EdgeIndex,
    h_src: &Tensor<T>,
    h_dst: &Tensor<T>,
    opts: &LayerOptions<'_, T>,
) -> Result<Tensor<T>> {
    let d = params.dims;
    if h_src.ndim() != 2 || h_src.row_width() != d.in_src || h_dst.ndim() != 2 || h_dst.row_width() != d.in_dst {
        return Err(Error::MessagePassing(format!(
            "{}: features {:?} / {:?} for widths {} / {}",
            params.kind,
            h_src.shape(),
            h_dst.shape(),
            d.in_src,
            d.in_dst
        )));
    }
    match params.kind {
        LayerKind::Gcn => gcn(params, edges, h_src, h_dst, opts),
        LayerKind::Sage => {
            let p = opts.propagation(edges, h_src, h_dst, MessageFn::CopySource, &params.aggregation);
            let agg = p.run()?;
            Tensor::concat_cols(&[h_dst, &agg])?
                .matmul(params.weight("weight")?)?
                .add(params.weight("bias")?)
        }
        LayerKind::Gin => {
            let p = opts.propagation(edges, h_src, h_dst, MessageFn::CopySource, &params.aggregation);
            let agg = p.run()?;
            let root = h_dst.mul(&params.weight("eps")?.add_scalar(T::one()))?;
            mlp(params, &root.add(&agg)?)
        }
        LayerKind::Gat => gat(params, edges, h_src, h_dst, opts),
        LayerKind::EdgeCnn => {
            let g = |ctx: &super::EdgeContext<'_, T>| {
                let h_i = ctx.target()?;
                let h_j = ctx.source()?;
                mlp(params, &Tensor::concat_cols(&[&h_i, &h_j.sub(&h_i)?])?)
            };
            let p = opts.propagation(edges, h_src, h_dst, MessageFn::Edge(&g), &params.aggregation);
            p.run()
        }
    }
}

/// `Linear -> ReLU -> Linear` over `mlp0.*` and `mlp1.*`.
fn mlp<T: Scalar>(params: &LayerParams<T>, x: &Tensor<T>) -> Result<Tensor<T>> {
    let h = x
        .matmul(params.weight("mlp0.weight")?)?
        .add(params.weight("mlp0.bias")?)?
        .relu();
    h.matmul(params.weight("mlp1.weight")?)?
        .add(params.weight("mlp1.bias")?)
}

fn gcn<T: Scalar>(
    params: &LayerParams<T>,
    edges: &EdgeIndex,
    h_src: &Tensor<T>,
    h_dst: &Tensor<T>,
    opts: &LayerOptions<'_, T>,
) -> Result<Tensor<T>> {
    let n = edges.num_dst_nodes();
    if edges.num_src_nodes() != n || !h_src.same_tensor(h_dst) {
        return Err(Error::MessagePassing(
            "gcn: self-loop normalization needs a square adjacency".into(),
        ));
    }
    let computed;
    let degree = match opts.degree {
        Some(d) if d.len() >= n => &d[..n],
        Some(d) => return Err(Error::MessagePassing(format!("gcn: {} degrees for {n} nodes", d.len()))),
        None => {
            computed = edges.in_degree();
            &computed[..]
        }
    };
    let inv_sqrt: Vec<T> = degree
        .iter()
        .map(|&d| T::one() / T::from_usize(d + 1).unwrap().sqrt())
        .collect();
    let norm: Vec<T> = edges.pairs().map(|(w, v)| inv_sqrt[w] * inv_sqrt[v]).collect();
    let norm = Tensor::from_vec(norm, &[edges.num_edges()])?;
    let self_norm: Vec<T> = degree
        .iter()
        .map(|&d| T::one() / T::from_usize(d + 1).unwrap())
        .collect();
    let self_norm = Tensor::from_vec(self_norm, &[n, 1])?;

    let xw = h_src.matmul(params.weight("weight")?)?;
    let p = opts.propagation(edges, &xw, &xw, MessageFn::ScaledSource(&norm), &params.aggregation);
    p.run()?.add(&xw.mul(&self_norm)?)?.add(params.weight("bias")?)
}

fn gat<T: Scalar>(
    params: &LayerParams<T>,
    edges: &EdgeIndex,
    h_src: &Tensor<T>,
    h_dst: &Tensor<T>,
    opts: &LayerOptions<'_, T>,
) -> Result<Tensor<T>> {
    let heads = params.dims.heads;
    let out = params.dims.out;
    let c = out / heads;
    let w = params.weight("weight")?;
    let xs = h_src.matmul(w)?;
    let xd = if h_src.same_tensor(h_dst) {
        xs.clone()
    } else {
        h_dst.matmul(w)?
    };
    let score = |x: &Tensor<T>, att: &Tensor<T>| -> Result<Tensor<T>> {
        x.reshape(&[x.rows(), heads, c])?.mul(att)?.sum_last_dim()
    };
    let s_src = score(&xs, params.weight("att_src")?)?;
    let s_dst = score(&xd, params.weight("att_dst")?)?;
    let logits = s_src
        .gather_rows(edges.src())?
        .add(&s_dst.gather_rows(edges.dst())?)?
        .leaky_relu(T::from_f64_lossy(GAT_SLOPE));
    let alpha = segment_softmax(&logits, edges.dst(), edges.num_dst_nodes())?;
    let mut p = opts.propagation(edges, &xs, &xd, MessageFn::ScaledSource(&alpha), &params.aggregation);
    p.context.attention = Some(&alpha);
    p.run()?.add(params.weight("bias")?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn identity(n: usize) -> Tensor<f64> {
        let mut d = vec![0.0; n * n];
        (0..n).for_each(|i| d[i * n + i] = 1.0);
        Tensor::param(d, &[n, n]).unwrap()
    }

    #[test]
    fn gcn_isolated_node_is_identity() {
        let mut p = LayerParams::<f64>::new(LayerKind::Gcn, LayerDims::new(3, 3), 1).unwrap();
        p.set_weight("weight", identity(3)).unwrap();
        let h = Tensor::from_vec(vec![1.0, -2.0, 0.5], &[1, 3]).unwrap();
        let out = layer_forward(&p, &EdgeIndex::empty(1, 1), &h, &LayerOptions::default()).unwrap();
        assert_eq!(out.to_vec(), h.to_vec());
    }

    #[test]
    fn gin_identity_mlp_sums_neighbor() {
        // eps = 0 and identity MLP on non-negative inputs
        let mut p = LayerParams::<f64>::new(LayerKind::Gin, LayerDims::new(2, 2), 1).unwrap();
        p.set_weight("mlp0.weight", identity(2)).unwrap();
        p.set_weight("mlp1.weight", identity(2)).unwrap();
        let e = EdgeIndex::from_pairs(&[(0, 1)], 2).unwrap();
        let h = Tensor::from_vec(vec![1.0, 2.0, 3.0, 5.0], &[2, 2]).unwrap();
        let out = layer_forward(&p, &e, &h, &LayerOptions::default()).unwrap();
        assert_eq!(out.row(1), &[4.0, 7.0]);
        assert_eq!(out.row(0), &[1.0, 2.0]);
    }

    #[test]
    fn gat_equal_logits_is_mean() {
        let mut p = LayerParams::<f64>::new(LayerKind::Gat, LayerDims::new(2, 2), 3).unwrap();
        p.set_weight("att_src", Tensor::zeros(&[1, 2])).unwrap();
        p.set_weight("att_dst", Tensor::zeros(&[1, 2])).unwrap();
        let e = EdgeIndex::from_pairs(&[(0, 2), (1, 2), (3, 2)], 4).unwrap();
        let h = Tensor::from_vec((0..8).map(|i| i as f64).collect(), &[4, 2]).unwrap();
        let out = layer_forward(&p, &e, &h, &LayerOptions::default()).unwrap();
        let xw = h.matmul(p.weight("weight").unwrap()).unwrap();
        for j in 0..2 {
            let mean = (xw.row(0)[j] + xw.row(1)[j] + xw.row(3)[j]) / 3.0;
            assert!((out.row(2)[j] - mean).abs() < 1e-12);
        }
    }

    #[test]
    fn gcn_rejects_bipartite() {
        let p = LayerParams::<f64>::new(LayerKind::Gcn, LayerDims::new(2, 2), 0).unwrap();
        let e = EdgeIndex::new(vec![0], vec![0], 2, 1, Default::default()).unwrap();
        let hs = Tensor::zeros(&[2, 2]);
        let hd = Tensor::zeros(&[1, 2]);
        assert!(bipartite_forward(&p, &e, &hs, &hd, &LayerOptions::default()).is_err());
    }

    #[test]
    fn kind_parsing() {
        for k in LayerKind::ALL {
            assert_eq!(k.name().parse::<LayerKind>().unwrap(), k);
        }
        assert!("transformer".parse::<LayerKind>().is_err());
    }

    #[test]
    fn seeded_init_is_reproducible() {
        let a = LayerParams::<f32>::new(LayerKind::Sage, LayerDims::new(4, 3), 9).unwrap();
        let b = LayerParams::<f32>::new(LayerKind::Sage, LayerDims::new(4, 3), 9).unwrap();
        let c = LayerParams::<f32>::new(LayerKind::Sage, LayerDims::new(4, 3), 10).unwrap();
        let w = |p: &LayerParams<f32>| p.weight("weight").unwrap().to_vec();
        assert_eq!(w(&a), w(&b));
        assert_ne!(w(&a), w(&c));
        assert!(w(&a).iter().all(|v| v.abs() <= 1.0 / 8f32.sqrt()));
    }
}
