use super::layers::{layer_forward, LayerDims, LayerKind, LayerOptions, LayerParams};
use super::{ExecPath, MessageCallback};
use crate::edge_index::EdgeIndex;
use crate::error::{Error, Result};
use crate::sampler::HopCounts;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// A stack of layers of one kind with ReLU in between.
#[derive(Debug, Clone)]
pub struct GnnModel<T: Scalar> {
    pub layers: Vec<LayerParams<T>>,
}

#[derive(Clone, Copy)]
pub struct ModelOptions<'a, T: Scalar> {
    pub path: Option<ExecPath>,
    pub callback: Option<&'a dyn MessageCallback<T>>,
    /// Per-hop counts of a BFS-ordered sampled batch; layer `l` then only
    /// sees the prefix that can still reach the seeds.
    pub trim: Option<&'a HopCounts>,
}

impl<T: Scalar> Default for ModelOptions<'_, T> {
    fn default() -> Self {
        ModelOptions {
            path: None,
            callback: None,
            trim: None,
        }
    }
}

impl<'a, T: Scalar> ModelOptions<'a, T> {
    pub fn path(path: ExecPath) -> Self {
        ModelOptions {
            path: Some(path),
            ..Default::default()
        }
    }
}

impl<T: Scalar> GnnModel<T> {
    /// `widths = [in, hidden.., out]`; layer `i` is seeded with `seed + i`.
    pub fn new(kind: LayerKind, widths: &[usize], heads: usize, seed: u64) -> Result<Self> {
        if widths.len() < 2 {
            return Err(Error::MessagePassing("a model needs at least one layer".into()));
        }
        let layers = widths
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let h = if kind == LayerKind::Gat { heads } else { 1 };
                LayerParams::new(
                    kind,
                    LayerDims::new(w[0], w[1]).with_heads(h),
                    seed.wrapping_add(i as u64),
                )
            })
            .collect::<Result<_>>()?;
        Ok(GnnModel { layers })
    }

    pub fn kind(&self) -> LayerKind {
        self.layers[0].kind
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn parameters(&self) -> impl Iterator<Item = &Tensor<T>> {
        self.layers.iter().flat_map(|l| l.weights.values())
    }

    pub fn parameters_mut(&mut self) -> impl Iterator<Item = &mut Tensor<T>> {
        self.layers.iter_mut().flat_map(|l| l.weights.values_mut())
    }

    pub fn zero_grad(&self) {
        self.layers.iter().for_each(LayerParams::zero_grad);
    }

    pub fn forward(&self, edges: &EdgeIndex, x: &Tensor<T>, opts: &ModelOptions<'_, T>) -> Result<Tensor<T>> {
        let full_degree = match (opts.trim, self.kind()) {
            (Some(_), LayerKind::Gcn) => Some(edges.in_degree()),
            _ => None,
        };
        let mut h = x.clone();
        for (l, params) in self.layers.iter().enumerate() {
            let layer_opts = LayerOptions {
                path: opts.path,
                callback: opts.callback,
                layer: l,
                edge_type: None,
                degree: full_degree.as_deref(),
            };
            h = match opts.trim {
                Some(counts) => {
                    let (e, n) = counts.trim(l)?;
                    let view = edges.prefix(e, n, n)?;
                    let h_in = if h.rows() == n { h } else { h.narrow_rows(0, n)? };
                    layer_forward(params, &view, &h_in, &layer_opts)?
                }
                None => layer_forward(params, edges, &h, &layer_opts)?,
            };
            if l + 1 < self.layers.len() {
                h = h.relu();
            }
        }
        Ok(h)
    }
}
