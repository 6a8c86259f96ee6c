use crate::edge_index::EdgeIndex;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Sparse-dense product over destination-grouped structure:
/// `out[v] = Σ_{e = (w -> v)} a_e · x[w]`, divided by the in-degree when
/// `mean` is set.
///
/// Without weights the transposed view is used, which for undirected graphs
/// is the CSR cache itself. The backward pass groups by source through the
/// CSR cache, so repeated training steps over the same index pay for each
/// compressed view once.
pub fn spmm<T: Scalar>(edges: &EdgeIndex, x: &Tensor<T>, weight: Option<&Tensor<T>>, mean: bool) -> Result<Tensor<T>> {
    let (n_src, f) = x.dims2()?;
    if n_src != edges.num_src_nodes() {
        return Err(Error::MessagePassing(format!(
            "spmm: {n_src} feature rows for {} source nodes",
            edges.num_src_nodes()
        )));
    }
    let heads = weight.map_or(1, |w| w.row_width());
    if let Some(w) = weight {
        if w.rows() != edges.num_edges() || heads == 0 || f % heads != 0 {
            return Err(Error::MessagePassing(format!(
                "spmm: weights {:?} for {} edges of width {f}",
                w.shape(),
                edges.num_edges()
            )));
        }
    }
    let block = f / heads;
    let n_dst = edges.num_dst_nodes();
    let view = if weight.is_some() {
        edges.to_csc()
    } else {
        edges.transpose_view()
    };

    let xd = x.data();
    let wd = weight.map(|w| w.data());
    let mut out = vec![T::zero(); n_dst * f];
    let mut scale = vec![T::one(); n_dst];
    for v in 0..n_dst {
        let acc = &mut out[v * f..(v + 1) * f];
        for p in view.row_range(v) {
            let w = view.col[p];
            let src_row = &xd[w * f..(w + 1) * f];
            match wd {
                None => acc.iter_mut().zip(src_row).for_each(|(a, &s)| *a += s),
                Some(wd) => {
                    let e = view.perm[p];
                    for h in 0..heads {
                        let a_e = wd[e * heads + h];
                        let r = h * block..(h + 1) * block;
                        acc[r.clone()]
                            .iter_mut()
                            .zip(&src_row[r])
                            .for_each(|(a, &s)| *a += a_e * s);
                    }
                }
            }
        }
        let deg = view.degree(v);
        if mean && deg > 0 {
            let c = T::from_usize(deg).unwrap();
            scale[v] = T::one() / c;
            acc.iter_mut().for_each(|a| *a /= c);
        }
    }

    let x_in = x.clone();
    let w_in = weight.cloned();
    let graph = edges.clone();
    let mut inputs = vec![x.clone()];
    if let Some(w) = weight {
        inputs.push(w.clone());
    }
    let backward = Box::new(move |g: &[T]| {
        let gx = x_in.requires_grad().then(|| {
            let csr = graph.to_csr();
            let wd = w_in.as_ref().map(|w| w.data());
            let mut gx = vec![T::zero(); n_src * f];
            for w in 0..n_src {
                let acc = &mut gx[w * f..(w + 1) * f];
                for p in csr.row_range(w) {
                    let v = csr.col[p];
                    let s = scale[v];
                    let g_row = &g[v * f..(v + 1) * f];
                    match wd {
                        None => acc.iter_mut().zip(g_row).for_each(|(a, &gv)| *a += s * gv),
                        Some(wd) => {
                            let e = csr.perm[p];
                            for h in 0..heads {
                                let c = s * wd[e * heads + h];
                                let r = h * block..(h + 1) * block;
                                acc[r.clone()]
                                    .iter_mut()
                                    .zip(&g_row[r])
                                    .for_each(|(a, &gv)| *a += c * gv);
                            }
                        }
                    }
                }
            }
            gx
        });
        let gw = w_in.as_ref().filter(|w| w.requires_grad()).map(|_| {
            let xd = x_in.data();
            let mut gw = vec![T::zero(); graph.num_edges() * heads];
            for (e, (w, v)) in graph.pairs().enumerate() {
                for h in 0..heads {
                    let r = h * block..(h + 1) * block;
                    let dot: T = g[v * f..(v + 1) * f][r.clone()]
                        .iter()
                        .zip(&xd[w * f..(w + 1) * f][r])
                        .map(|(&a, &b)| a * b)
                        .sum();
                    gw[e * heads + h] = dot * scale[v];
                }
            }
            gw
        });
        let mut grads = vec![gx];
        if w_in.is_some() {
            grads.push(gw);
        }
        grads
    });
    Ok(Tensor::from_op(out, vec![n_dst, f], "spmm", inputs, backward))
}
