//! Model-agnostic explanations through message callbacks.
//!
//! An explainer sees a model only through [`Explainable::run`]: node inputs
//! and edge structure go in, per-node-type outputs come out, and an optional
//! callback rewrites every layer's edge messages on the way. A soft edge
//! mask is such a callback, which makes edges as differentiable as node
//! features. Heterogeneous masks are flat: edge types are laid out back to
//! back in sorted order.
//!
//! Runs always take the edge-materialized path, with or without callback,
//! so masked and unmasked outputs are computed the same way.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Mutex;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::edge_index::EdgeIndex;
use crate::error::{Error, Result};
use crate::hetero::{EdgeType, HeteroGraph, HeteroModel, HeteroOptions};
use crate::message_passing::{ExecPath, GnnModel, MessageCallback, MessageContext, ModelOptions};
use crate::optim::Adam;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Node type name of homogeneous explanation targets.
pub const NODE: &str = "node";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    /// `|∂y/∂input|`.
    Saliency,
    /// `∂y/∂x ⊙ x` for features, the plain gradient for edges.
    GradInput,
    /// Sigmoid masks in `[0, 1]` trained to keep the prediction.
    MaskOpt,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Saliency => "saliency",
            Algorithm::GradInput => "grad_input",
            Algorithm::MaskOpt => "mask_opt",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "saliency" => Ok(Algorithm::Saliency),
            "grad_input" => Ok(Algorithm::GradInput),
            "mask_opt" => Ok(Algorithm::MaskOpt),
            other => Err(Error::Explain(format!("unknown algorithm `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputKind {
    #[default]
    Classification,
    Regression,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExplainerConfig {
    pub algorithm: Algorithm,
    pub output: OutputKind,
    pub epochs: usize,
    pub lr: f64,
    /// Weight of `mean(mask)`.
    pub sparsity: f64,
    /// Weight of the mean binary entropy of the mask.
    pub entropy: f64,
    pub seed: u64,
}

impl ExplainerConfig {
    pub fn new(algorithm: Algorithm) -> Self {
        ExplainerConfig {
            algorithm,
            output: OutputKind::Classification,
            epochs: 100,
            lr: 0.01,
            sparsity: 0.005,
            entropy: 0.1,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.algorithm == Algorithm::MaskOpt && self.epochs == 0 {
            return Err(Error::Explain("mask_opt needs at least one epoch".into()));
        }
        if !(self.sparsity >= 0.0 && self.entropy >= 0.0) {
            return Err(Error::Explain("penalties must be non-negative".into()));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Explain(format!("learning rate {} must be positive", self.lr)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Target {
    pub node_type: String,
    pub node: usize,
    /// Output column; the predicted class (or column 0 for regression) when
    /// absent.
    pub output: Option<usize>,
}

impl Target {
    pub fn node(node: usize) -> Self {
        Target {
            node_type: NODE.to_string(),
            node,
            output: None,
        }
    }
}

/// Edges of one edge type (`None` for homogeneous graphs).
#[derive(Debug, Clone)]
pub struct EdgeSegment {
    pub edge_type: Option<EdgeType>,
    pub index: EdgeIndex,
}

/// A model bound to its inputs.
pub trait Explainable<T: Scalar>: Sync {
    fn inputs(&self) -> BTreeMap<String, Tensor<T>>;

    /// Edge segments in mask order.
    fn segments(&self) -> Vec<EdgeSegment>;

    fn run(
        &self,
        x: &BTreeMap<String, Tensor<T>>,
        segments: &[EdgeSegment],
        callback: Option<&dyn MessageCallback<T>>,
    ) -> Result<BTreeMap<String, Tensor<T>>>;

    fn num_edges(&self) -> usize {
        self.segments().iter().map(|s| s.index.num_edges()).sum()
    }
}

pub struct HomogeneousRun<'a, T: Scalar> {
    pub model: &'a GnnModel<T>,
    pub edges: &'a EdgeIndex,
    pub x: &'a Tensor<T>,
}

impl<T: Scalar> Explainable<T> for HomogeneousRun<'_, T> {
    fn inputs(&self) -> BTreeMap<String, Tensor<T>> {
        [(NODE.to_string(), self.x.clone())].into()
    }

    fn segments(&self) -> Vec<EdgeSegment> {
        vec![EdgeSegment {
            edge_type: None,
            index: self.edges.clone(),
        }]
    }

    fn run(
        &self,
        x: &BTreeMap<String, Tensor<T>>,
        segments: &[EdgeSegment],
        callback: Option<&dyn MessageCallback<T>>,
    ) -> Result<BTreeMap<String, Tensor<T>>> {
        let [seg] = segments else {
            return Err(Error::Explain(format!(
                "{} edge segments for a homogeneous model",
                segments.len()
            )));
        };
        let x = x.get(NODE).ok_or_else(|| Error::UnknownNodeType(NODE.into()))?;
        let opts = ModelOptions {
            path: Some(ExecPath::EdgeMaterialize),
            callback,
            trim: None,
        };
        Ok([(NODE.to_string(), self.model.forward(&seg.index, x, &opts)?)].into())
    }
}

pub struct HeteroRun<'a, T: Scalar> {
    pub model: &'a HeteroModel<T>,
    pub graph: &'a HeteroGraph<T>,
}

impl<T: Scalar> Explainable<T> for HeteroRun<'_, T> {
    fn inputs(&self) -> BTreeMap<String, Tensor<T>> {
        self.graph.x_map()
    }

    fn segments(&self) -> Vec<EdgeSegment> {
        self.graph
            .edges()
            .iter()
            .map(|(et, s)| EdgeSegment {
                edge_type: Some(et.clone()),
                index: s.index.clone(),
            })
            .collect()
    }

    fn run(
        &self,
        x: &BTreeMap<String, Tensor<T>>,
        segments: &[EdgeSegment],
        callback: Option<&dyn MessageCallback<T>>,
    ) -> Result<BTreeMap<String, Tensor<T>>> {
        let mut g = HeteroGraph::new();
        for (name, h) in x {
            g.add_node_type(name, h.clone(), None)?;
        }
        for seg in segments {
            let et = seg
                .edge_type
                .clone()
                .ok_or_else(|| Error::Explain("untyped edge segment for a heterogeneous model".into()))?;
            g.add_edge_type(et, seg.index.clone(), None, None)?;
        }
        let opts = HeteroOptions {
            path: Some(ExecPath::EdgeMaterialize),
            callback,
            ..Default::default()
        };
        self.model.forward(&g, x, &opts, None)
    }
}

/// Multiplies the messages of edge `e` by `mask[e]` in every layer.
pub struct SoftMask<T: Scalar> {
    mask: Tensor<T>,
    offsets: BTreeMap<Option<EdgeType>, (usize, usize)>,
}

impl<T: Scalar> SoftMask<T> {
    pub fn new(mask: Tensor<T>, segments: &[EdgeSegment]) -> Result<Self> {
        let mut offsets = BTreeMap::new();
        let mut off = 0;
        for s in segments {
            let e = s.index.num_edges();
            offsets.insert(s.edge_type.clone(), (off, e));
            off += e;
        }
        if mask.ndim() != 1 || mask.rows() != off {
            return Err(Error::Explain(format!("edge mask {:?} for {off} edges", mask.shape())));
        }
        Ok(SoftMask { mask, offsets })
    }

    pub fn mask(&self) -> &Tensor<T> {
        &self.mask
    }
}

impl<T: Scalar> MessageCallback<T> for SoftMask<T> {
    fn on_messages(&self, ctx: &MessageContext<'_, T>, messages: Tensor<T>) -> Result<Tensor<T>> {
        let key = ctx.edge_type.cloned();
        let &(off, len) = self
            .offsets
            .get(&key)
            .ok_or_else(|| Error::Explain(format!("no mask segment for edge type {key:?}")))?;
        if len != ctx.num_edges || len != messages.rows() {
            return Err(Error::Explain(format!(
                "mask segment of {len} edges for {} messages",
                messages.rows()
            )));
        }
        let part = if off == 0 && len == self.mask.rows() {
            self.mask.clone()
        } else {
            self.mask.gather_rows(&(off..off + len).collect::<Vec<_>>())?
        };
        messages.mul(&part.reshape(&[len, 1])?)
    }
}

/// Records the attention coefficients layers expose to callbacks, passing
/// messages through unchanged.
#[derive(Default)]
pub struct AttentionRecorder<T: Scalar> {
    seen: Mutex<Vec<(usize, Option<EdgeType>, Tensor<T>)>>,
}

impl<T: Scalar> AttentionRecorder<T> {
    pub fn new() -> Self {
        AttentionRecorder {
            seen: Mutex::new(Vec::new()),
        }
    }

    /// `(layer, edge type, [E × heads])` in call order.
    pub fn take(&self) -> Vec<(usize, Option<EdgeType>, Tensor<T>)> {
        std::mem::take(&mut *self.seen.lock().expect("recorder lock"))
    }
}

impl<T: Scalar> MessageCallback<T> for AttentionRecorder<T> {
    fn on_messages(&self, ctx: &MessageContext<'_, T>, messages: Tensor<T>) -> Result<Tensor<T>> {
        if let Some(a) = ctx.attention {
            self.seen
                .lock()
                .expect("recorder lock")
                .push((ctx.layer, ctx.edge_type.cloned(), a.detach()));
        }
        Ok(messages)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metrics {
    pub kept_edges: usize,
    pub fidelity_plus: f64,
    pub fidelity_minus: f64,
    /// Classification outputs only.
    pub unfaithfulness: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct Explanation<T: Scalar> {
    pub algorithm: Algorithm,
    pub output: OutputKind,
    /// Target with the explained output column filled in.
    pub target: Target,
    pub node_mask: BTreeMap<String, Tensor<T>>,
    /// Flat `[E]` over `segments`.
    pub edge_mask: Tensor<T>,
    pub segments: Vec<EdgeSegment>,
    pub metrics: Option<Metrics>,
}

fn target_row<T: Scalar>(out: &BTreeMap<String, Tensor<T>>, target: &Target) -> Result<Tensor<T>> {
    let y = out
        .get(&target.node_type)
        .ok_or_else(|| Error::Explain(format!("model has no output for node type {}", target.node_type)))?;
    if target.node >= y.rows() {
        return Err(Error::Explain(format!(
            "target node {} out of range for {} nodes",
            target.node,
            y.rows()
        )));
    }
    y.gather_rows(&[target.node])
}

/// `row[col]` as a differentiable scalar.
fn pick<T: Scalar>(row: &Tensor<T>, col: usize) -> Result<Tensor<T>> {
    let w = row.row_width();
    let mut onehot = vec![T::zero(); w];
    onehot[col] = T::one();
    row.mul(&Tensor::from_vec(onehot, &[1, w])?).map(|t| t.sum())
}

fn resolve_output<T: Scalar>(row: &Tensor<T>, target: &Target, kind: OutputKind) -> Result<usize> {
    let w = row.row_width();
    let col = match (target.output, kind) {
        (Some(c), _) => c,
        (None, OutputKind::Regression) => 0,
        (None, OutputKind::Classification) => {
            row.data()
                .iter()
                .enumerate()
                .fold(
                    (0, T::neg_infinity()),
                    |best, (i, &v)| if v > best.1 { (i, v) } else { best },
                )
                .0
        }
    };
    if col >= w {
        return Err(Error::Explain(format!("output {col} out of range for width {w}")));
    }
    Ok(col)
}

fn leaves<T: Scalar>(x: &BTreeMap<String, Tensor<T>>) -> Result<BTreeMap<String, Tensor<T>>> {
    x.iter()
        .map(|(k, v)| Ok((k.clone(), Tensor::param(v.to_vec(), v.shape())?)))
        .collect()
}

pub fn explain<T: Scalar>(
    model: &dyn Explainable<T>,
    target: &Target,
    cfg: &ExplainerConfig,
) -> Result<Explanation<T>> {
    cfg.validate()?;
    let x = model.inputs();
    let segments = model.segments();
    let base = model.run(&x, &segments, None)?;
    let col = resolve_output(&target_row(&base, target)?, target, cfg.output)?;
    let target = Target {
        output: Some(col),
        ..target.clone()
    };
    let e = segments.iter().map(|s| s.index.num_edges()).sum::<usize>();
    let (node_mask, edge_mask) = match cfg.algorithm {
        Algorithm::Saliency | Algorithm::GradInput => {
            let xs = leaves(&x)?;
            let mask = Tensor::param(vec![T::one(); e], &[e])?;
            let cb = SoftMask::new(mask.clone(), &segments)?;
            let out = model.run(&xs, &segments, Some(&cb))?;
            pick(&target_row(&out, &target)?, col)?.backward()?;
            let grad_of = |t: &Tensor<T>| t.grad().map_or_else(|| vec![T::zero(); t.numel()], |g| g.to_vec());
            let saliency = cfg.algorithm == Algorithm::Saliency;
            let mut node_mask = BTreeMap::new();
            for (name, leaf) in &xs {
                let g = grad_of(leaf);
                let vals: Vec<T> = if saliency {
                    g.iter().map(|v| v.abs()).collect()
                } else {
                    g.iter().zip(leaf.data()).map(|(g, x)| *g * *x).collect()
                };
                node_mask.insert(name.clone(), Tensor::from_vec(vals, leaf.shape())?);
            }
            let g = grad_of(&mask);
            let edge = if saliency {
                g.iter().map(|v| v.abs()).collect()
            } else {
                g
            };
            (node_mask, Tensor::from_vec(edge, &[e])?)
        }
        Algorithm::MaskOpt => mask_opt(model, &x, &segments, &base, &target, col, cfg)?,
    };
    Ok(Explanation {
        algorithm: cfg.algorithm,
        output: cfg.output,
        target,
        node_mask,
        edge_mask,
        segments,
        metrics: None,
    })
}

fn mean_penalty<T: Scalar>(m: &Tensor<T>, cfg: &ExplainerConfig) -> Result<Tensor<T>> {
    let eps = T::epsilon();
    let one_minus = m.neg().add_scalar(T::one());
    let entropy = m
        .mul(&m.add_scalar(eps).log()?)?
        .add(&one_minus.mul(&one_minus.add_scalar(eps).log()?)?)?
        .neg();
    m.mean()
        .scale(T::from_f64_lossy(cfg.sparsity))
        .add(&entropy.mean().scale(T::from_f64_lossy(cfg.entropy)))
}

type Masks<T> = (BTreeMap<String, Tensor<T>>, Tensor<T>);

fn mask_opt<T: Scalar>(
    model: &dyn Explainable<T>,
    x: &BTreeMap<String, Tensor<T>>,
    segments: &[EdgeSegment],
    base: &BTreeMap<String, Tensor<T>>,
    target: &Target,
    col: usize,
    cfg: &ExplainerConfig,
) -> Result<Masks<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    // logits start around -1 (masks near 0.27): entropy then pulls edges
    // without evidence toward zero
    let mut init = |n: usize, shape: &[usize]| -> Result<Tensor<T>> {
        let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.2..-0.8)).collect();
        Ok(Tensor::from_f64(&v, shape)?.requires_grad_())
    };
    let e = segments.iter().map(|s| s.index.num_edges()).sum::<usize>();
    let mut edge_logits = init(e, &[e])?;
    let mut node_logits: Vec<(String, Tensor<T>)> = Vec::new();
    for (name, t) in x {
        node_logits.push((name.clone(), init(t.numel(), t.shape())?));
    }
    let reference = pick(&target_row(base, target)?, col)?.item()?;
    let mut opt = Adam::new(cfg.lr);
    for epoch in 0..cfg.epochs {
        let edge_mask = edge_logits.sigmoid();
        let mut masked = BTreeMap::new();
        let mut loss = Tensor::scalar(T::zero());
        for (name, logits) in &node_logits {
            let m = logits.sigmoid();
            masked.insert(name.clone(), x[name].mul(&m)?);
            if m.numel() > 0 {
                loss = loss.add(&mean_penalty(&m, cfg)?)?;
            }
        }
        if e > 0 {
            loss = loss.add(&mean_penalty(&edge_mask, cfg)?)?;
        }
        let cb = SoftMask::new(edge_mask, segments)?;
        let out = model.run(&masked, segments, Some(&cb))?;
        let row = target_row(&out, target)?;
        let pred = match cfg.output {
            OutputKind::Classification => row.cross_entropy(&[col])?,
            OutputKind::Regression => {
                let d = pick(&row, col)?.add_scalar(-reference);
                d.mul(&d)?
            }
        };
        let loss = loss.add(&pred)?;
        if !loss.all_finite() {
            return Err(Error::NonFiniteLoss { epoch });
        }
        loss.backward()?;
        let params = std::iter::once(&mut edge_logits).chain(node_logits.iter_mut().map(|(_, t)| t));
        opt.step(params)?;
    }
    let node_mask = node_logits
        .iter()
        .map(|(k, t)| (k.clone(), t.sigmoid().detach()))
        .collect();
    Ok((node_mask, edge_logits.sigmoid().detach()))
}

fn log_softmax(row: &[f64]) -> Vec<f64> {
    let top = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = top + row.iter().map(|v| (v - top).exp()).sum::<f64>().ln();
    row.iter().map(|v| v - lse).collect()
}

/// Keeps the top `threshold` fraction of edges by score (ties to the lower
/// position) and compares predictions with and without them. The compared
/// value is the softmax probability of the explained class for
/// classification, the raw output otherwise.
pub fn evaluate<T: Scalar>(expl: &Explanation<T>, model: &dyn Explainable<T>, threshold: f64) -> Result<Metrics> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::Explain(format!("threshold {threshold} outside (0, 1]")));
    }
    let scores = expl.edge_mask.to_f64_vec();
    let e = scores.len();
    let k = (threshold * e as f64 + 1e-9).floor() as usize;
    if k == 0 {
        return Err(Error::Explain(format!("threshold {threshold} keeps none of {e} edges")));
    }
    let mut order: Vec<usize> = (0..e).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut kept = vec![false; e];
    for &i in &order[..k] {
        kept[i] = true;
    }
    let restrict = |keep: &dyn Fn(usize) -> bool| -> Result<Vec<EdgeSegment>> {
        let mut off = 0;
        expl.segments
            .iter()
            .map(|s| {
                let n = s.index.num_edges();
                let mask: Vec<bool> = (off..off + n).map(keep).collect();
                off += n;
                Ok(EdgeSegment {
                    edge_type: s.edge_type.clone(),
                    index: s.index.filter(&mask)?,
                })
            })
            .collect()
    };
    let x = model.inputs();
    let col = expl.target.output.unwrap_or(0);
    let row_of = |segs: &[EdgeSegment]| -> Result<Vec<f64>> {
        Ok(target_row(&model.run(&x, segs, None)?, &expl.target)?.to_f64_vec())
    };
    let full = row_of(&expl.segments)?;
    let minus = row_of(&restrict(&|i| !kept[i])?)?;
    let only = row_of(&restrict(&|i| kept[i])?)?;
    let value = |row: &[f64]| match expl.output {
        OutputKind::Classification => log_softmax(row)[col].exp(),
        OutputKind::Regression => row[col],
    };
    let unfaithfulness = (expl.output == OutputKind::Classification).then(|| {
        let (p, q) = (log_softmax(&full), log_softmax(&only));
        let kl: f64 = p.iter().zip(&q).map(|(lp, lq)| lp.exp() * (lp - lq)).sum();
        1.0 - (-kl).exp()
    });
    Ok(Metrics {
        kept_edges: k,
        fidelity_plus: (value(&full) - value(&minus)).abs(),
        fidelity_minus: (value(&full) - value(&only)).abs(),
        unfaithfulness,
    })
}

#[derive(Serialize)]
struct MaskDump {
    shape: Vec<usize>,
    values: Vec<f64>,
}

#[derive(Serialize)]
struct EdgeDump {
    #[serde(skip_serializing_if = "Option::is_none")]
    edge_type: Option<String>,
    src: usize,
    dst: usize,
    score: f64,
}

#[derive(Serialize)]
struct ExplanationDump<'a> {
    algorithm: Algorithm,
    target: &'a Target,
    node_mask: BTreeMap<&'a str, MaskDump>,
    edges: Vec<EdgeDump>,
    metrics: Option<&'a Metrics>,
}

impl<T: Scalar> Explanation<T> {
    pub fn with_metrics(mut self, metrics: Metrics) -> Self {
        self.metrics = Some(metrics);
        self
    }

    /// Mask entries per edge segment, in segment order.
    pub fn edge_scores(&self) -> Vec<(Option<&EdgeType>, usize, usize, f64)> {
        let scores = self.edge_mask.to_f64_vec();
        self.segments
            .iter()
            .flat_map(|s| s.index.pairs().map(move |(u, v)| (s.edge_type.as_ref(), u, v)))
            .zip(scores)
            .map(|((et, u, v), score)| (et, u, v, score))
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        let dump = ExplanationDump {
            algorithm: self.algorithm,
            target: &self.target,
            node_mask: self
                .node_mask
                .iter()
                .map(|(k, t)| {
                    (
                        k.as_str(),
                        MaskDump {
                            shape: t.shape().to_vec(),
                            values: t.to_f64_vec(),
                        },
                    )
                })
                .collect(),
            edges: self
                .edge_scores()
                .into_iter()
                .map(|(et, src, dst, score)| EdgeDump {
                    edge_type: et.map(ToString::to_string),
                    src,
                    dst,
                    score,
                })
                .collect(),
            metrics: self.metrics.as_ref(),
        };
        Ok(serde_json::to_string_pretty(&dump)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::message_passing::LayerKind;
    use crate::synth::circuit;

    #[test]
    fn circuit_edge_beats_null_edge_for_all_algorithms() {
        let c = circuit::<f64>(5, 2).unwrap();
        let run = HomogeneousRun {
            model: &c.model,
            edges: &c.edges,
            x: &c.x,
        };
        for alg in [Algorithm::Saliency, Algorithm::GradInput, Algorithm::MaskOpt] {
            let ex = explain(&run, &Target::node(c.target), &ExplainerConfig::new(alg)).unwrap();
            let m = ex.edge_mask.to_vec();
            assert!(m[c.truth_edge] > m[c.null_edge], "{alg}: {m:?}");
        }
    }

    #[test]
    fn keeping_everything_is_exactly_faithful() {
        let c = circuit::<f64>(5, 3).unwrap();
        let run = HomogeneousRun {
            model: &c.model,
            edges: &c.edges,
            x: &c.x,
        };
        let ex = explain(&run, &Target::node(0), &ExplainerConfig::new(Algorithm::Saliency)).unwrap();
        let m = evaluate(&ex, &run, 1.0).unwrap();
        assert_eq!(m.fidelity_minus, 0.0);
        assert_eq!(m.unfaithfulness, Some(0.0));
        assert!(evaluate(&ex, &run, 0.5 / c.edges.num_edges() as f64).is_err());
        assert!(evaluate(&ex, &run, 0.0).is_err());
    }

    #[test]
    fn attention_is_recorded_for_gat() {
        let edges = EdgeIndex::from_pairs(&[(0, 1), (2, 1), (1, 0)], 3).unwrap();
        let x = crate::synth::uniform_features::<f64>(3, 4, 0);
        let model = GnnModel::new(LayerKind::Gat, &[4, 4, 2], 2, 1).unwrap();
        let rec = AttentionRecorder::new();
        let opts = ModelOptions {
            path: None,
            callback: Some(&rec),
            trim: None,
        };
        model.forward(&edges, &x, &opts).unwrap();
        let seen = rec.take();
        assert_eq!(seen.len(), 2);
        assert_eq!(seen[0].2.shape(), &[3, 2]);
        let a = seen[0].2.to_vec();
        // destination 1 has two in-edges whose coefficients sum to one per head
        assert!((a[0] + a[2] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn json_export_lists_edges() {
        let c = circuit::<f64>(2, 0).unwrap();
        let run = HomogeneousRun {
            model: &c.model,
            edges: &c.edges,
            x: &c.x,
        };
        let ex = explain(&run, &Target::node(0), &ExplainerConfig::new(Algorithm::Saliency)).unwrap();
        let v: serde_json::Value = serde_json::from_str(&ex.to_json().unwrap()).unwrap();
        assert_eq!(v["edges"].as_array().unwrap().len(), c.edges.num_edges());
        assert_eq!(v["node_mask"]["node"]["shape"], serde_json::json!([c.x.rows(), 2]));
    }
}
