use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// `out[g] = inputs[g] · weights[g]` for a `[G × F × F']` weight tensor.
///
/// All groups run as one tape node over the row-concatenated inputs, so the
/// backward pass produces gradients for every input and the whole weight
/// tensor at once. Empty groups yield `0 × F'` outputs.
pub fn grouped_matmul<T: Scalar>(inputs: &[&Tensor<T>], weights: &Tensor<T>) -> Result<Vec<Tensor<T>>> {
    let [groups, f, f_out] = *weights.shape() else {
        return Err(Error::InvalidShape {
            op: "grouped_matmul",
            msg: format!("weights must be [G x F x F'], got {:?}", weights.shape()),
        });
    };
    if groups != inputs.len() {
        return Err(Error::InvalidShape {
            op: "grouped_matmul",
            msg: format!("{} inputs for {groups} weight groups", inputs.len()),
        });
    }
    let mut offsets = vec![0];
    for h in inputs {
        let (n, width) = h.dims2()?;
        if width != f {
            return Err(Error::ShapeMismatch {
                op: "grouped_matmul",
                lhs: h.shape().to_vec(),
                rhs: weights.shape().to_vec(),
            });
        }
        offsets.push(offsets.last().unwrap() + n);
    }
    let total = *offsets.last().unwrap();
    let block = f * f_out;
    let wd = weights.data();
    let mut out = vec![T::zero(); total * f_out];
    for (g, h) in inputs.iter().enumerate() {
        let n = h.rows();
        T::gemm(
            n,
            f,
            f_out,
            T::one(),
            h.data(),
            (f as isize, 1),
            &wd[g * block..(g + 1) * block],
            (f_out as isize, 1),
            T::zero(),
            &mut out[offsets[g] * f_out..offsets[g + 1] * f_out],
            (f_out as isize, 1),
        );
    }

    let hs: Vec<Tensor<T>> = inputs.iter().map(|&h| h.clone()).collect();
    let w = weights.clone();
    let offs = offsets.clone();
    let backward = Box::new(move |g: &[T]| {
        let wd = w.data();
        let mut grads: Vec<Option<Vec<T>>> = hs
            .iter()
            .enumerate()
            .map(|(i, h)| {
                h.requires_grad().then(|| {
                    // dH = G · Wᵀ
                    let n = h.rows();
                    let mut gh = vec![T::zero(); n * f];
                    T::gemm(
                        n,
                        f_out,
                        f,
                        T::one(),
                        &g[offs[i] * f_out..offs[i + 1] * f_out],
                        (f_out as isize, 1),
                        &wd[i * block..(i + 1) * block],
                        (1, f_out as isize),
                        T::zero(),
                        &mut gh,
                        (f as isize, 1),
                    );
                    gh
                })
            })
            .collect();
        let gw = w.requires_grad().then(|| {
            // dW = Hᵀ · G per group
            let mut gw = vec![T::zero(); groups * block];
            for (i, h) in hs.iter().enumerate() {
                let n = h.rows();
                T::gemm(
                    f,
                    n,
                    f_out,
                    T::one(),
                    h.data(),
                    (1, f as isize),
                    &g[offs[i] * f_out..offs[i + 1] * f_out],
                    (f_out as isize, 1),
                    T::zero(),
                    &mut gw[i * block..(i + 1) * block],
                    (f_out as isize, 1),
                );
            }
            gw
        });
        grads.push(gw);
        grads
    });
    let mut tape_inputs: Vec<Tensor<T>> = inputs.iter().map(|&h| h.clone()).collect();
    tape_inputs.push(weights.clone());
    let joined = Tensor::from_op(out, vec![total, f_out], "grouped_matmul", tape_inputs, backward);
    offsets
        .windows(2)
        .map(|o| joined.narrow_rows(o[0], o[1] - o[0]))
        .collect()
}
