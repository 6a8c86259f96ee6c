use std::sync::Arc;

use super::{numel_of, Tensor};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Elementwise operation kinds exposed through [`elementwise`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Elementwise {
    Add,
    Sub,
    Mul,
    Relu,
    Sigmoid,
    Exp,
    Log,
    Neg,
    Scale(f64),
}

/// Applies `kind` to one (unary) or two (binary) inputs.
pub fn elementwise<T: Scalar>(kind: Elementwise, inputs: &[&Tensor<T>]) -> Result<Tensor<T>> {
    let arity = match kind {
        Elementwise::Add | Elementwise::Sub | Elementwise::Mul => 2,
        _ => 1,
    };
    if inputs.len() != arity {
        return Err(Error::InvalidShape {
            op: "elementwise",
            msg: format!("{kind:?} takes {arity} inputs, got {}", inputs.len()),
        });
    }
    let x = inputs[0];
    match kind {
        Elementwise::Add => x.add(inputs[1]),
        Elementwise::Sub => x.sub(inputs[1]),
        Elementwise::Mul => x.mul(inputs[1]),
        Elementwise::Relu => Ok(x.relu()),
        Elementwise::Sigmoid => Ok(x.sigmoid()),
        Elementwise::Exp => Ok(x.exp()),
        Elementwise::Log => x.log(),
        Elementwise::Neg => Ok(x.neg()),
        Elementwise::Scale(c) => Ok(x.scale(T::from_f64_lossy(c))),
    }
}

/// Right-aligned broadcast of two shapes; extents must match or be 1.
pub(crate) fn broadcast_shape(a: &[usize], b: &[usize]) -> Option<Vec<usize>> {
    let n = a.len().max(b.len());
    let mut out = vec![0; n];
    for i in 0..n {
        let da = if i + a.len() >= n { a[i + a.len() - n] } else { 1 };
        let db = if i + b.len() >= n { b[i + b.len() - n] } else { 1 };
        out[i] = match (da, db) {
            (x, y) if x == y => x,
            (1, y) => y,
            (x, 1) => x,
            _ => return None,
        };
    }
    Some(out)
}

/// Strides of `shape` laid against `out`, zero on broadcast axes.
fn broadcast_strides(shape: &[usize], out: &[usize]) -> Vec<usize> {
    let n = out.len();
    let mut strides = vec![0; n];
    let mut acc = 1;
    for i in (0..shape.len()).rev() {
        let oi = i + n - shape.len();
        strides[oi] = if shape[i] == 1 && out[oi] != 1 { 0 } else { acc };
        acc *= shape[i];
    }
    strides
}

/// Calls `f(out_pos, a_pos, b_pos)` for every output element.
fn for_each_broadcast(out: &[usize], sa: &[usize], sb: &[usize], mut f: impl FnMut(usize, usize, usize)) {
    let total = numel_of(out);
    if total == 0 {
        return;
    }
    if out.is_empty() {
        f(0, 0, 0);
        return;
    }
    let last = out.len() - 1;
    let inner = out[last];
    let (ia, ib) = (sa[last], sb[last]);
    let mut idx = vec![0usize; last];
    let mut pos = 0;
    loop {
        let base_a: usize = idx.iter().zip(sa).map(|(i, s)| i * s).sum();
        let base_b: usize = idx.iter().zip(sb).map(|(i, s)| i * s).sum();
        for j in 0..inner {
            f(pos, base_a + j * ia, base_b + j * ib);
            pos += 1;
        }
        // advance the outer multi-index
        let mut d = last;
        loop {
            if d == 0 {
                return;
            }
            d -= 1;
            idx[d] += 1;
            if idx[d] < out[d] {
                break;
            }
            idx[d] = 0;
        }
    }
}

/// How the right operand lines up with the output in the common cases.
#[derive(Clone, Copy)]
enum Pattern {
    Same,
    /// `b` is one block repeated every `k` outputs (a bias, a scalar).
    Row(usize),
    /// each `b` element covers `k` consecutive outputs (e.g. `[n, 1]`).
    Col(usize),
    General,
}

fn pattern(a: &[usize], b: &[usize], out: &[usize]) -> Pattern {
    if a == b {
        return Pattern::Same;
    }
    if a != out {
        return Pattern::General;
    }
    if numel_of(b) == 1 {
        return Pattern::Col(numel_of(out));
    }
    let b: &[usize] = &b[b.iter().take_while(|&&d| d == 1).count()..];
    if b.len() <= out.len() && out[out.len() - b.len()..] == *b {
        return Pattern::Row(numel_of(b));
    }
    let lead = b.iter().rposition(|&d| d != 1).map_or(0, |p| p + 1);
    if b.len() == out.len() && out[..lead] == b[..lead] {
        return Pattern::Col(numel_of(&out[lead..]));
    }
    Pattern::General
}

impl<T: Scalar> Tensor<T> {
    fn binary<F, P>(&self, other: &Tensor<T>, op: &'static str, fwd: F, partials: P) -> Result<Tensor<T>>
    where
        F: Fn(T, T) -> T,
        // partials given (a, b) -> (d/da, d/db)
        P: Fn(T, T) -> (T, T) + Send + Sync + 'static,
    {
        let out_shape = broadcast_shape(self.shape(), other.shape()).ok_or_else(|| Error::ShapeMismatch {
            op,
            lhs: self.shape().to_vec(),
            rhs: other.shape().to_vec(),
        })?;
        let a = self.data();
        let b = other.data();
        let total = numel_of(&out_shape);
        let pat = pattern(self.shape(), other.shape(), &out_shape);
        let sa = broadcast_strides(self.shape(), &out_shape);
        let sb = broadcast_strides(other.shape(), &out_shape);
        let mut out = Vec::with_capacity(total);
        match pat {
            Pattern::Same => out.extend(a.iter().zip(b).map(|(&x, &y)| fwd(x, y))),
            Pattern::Row(k) if k > 0 => {
                for c in a.chunks_exact(k) {
                    out.extend(c.iter().zip(b).map(|(&x, &y)| fwd(x, y)));
                }
            }
            Pattern::Col(k) if k > 0 => {
                for (c, &y) in a.chunks_exact(k).zip(b) {
                    out.extend(c.iter().map(|&x| fwd(x, y)));
                }
            }
            _ => {
                out.resize(total, T::zero());
                for_each_broadcast(&out_shape, &sa, &sb, |o, i, j| out[o] = fwd(a[i], b[j]));
            }
        }

        let (lhs, rhs) = (self.clone(), other.clone());
        let shape_for_bw = out_shape.clone();
        let backward = Box::new(move |g: &[T]| {
            let a = lhs.data();
            let b = rhs.data();
            let want_a = lhs.requires_grad();
            let want_b = rhs.requires_grad();
            let mut ga = if want_a { vec![T::zero(); a.len()] } else { Vec::new() };
            let mut gb = if want_b { vec![T::zero(); b.len()] } else { Vec::new() };
            // a, ga and g share the output layout except in the general case;
            // each input gets its own pass so the loops stay branch-free
            match pat {
                Pattern::Same => {
                    if want_a {
                        for ((ga, &g), (&x, &y)) in ga.iter_mut().zip(g).zip(a.iter().zip(b)) {
                            *ga = g * partials(x, y).0;
                        }
                    }
                    if want_b {
                        for ((gb, &g), (&x, &y)) in gb.iter_mut().zip(g).zip(a.iter().zip(b)) {
                            *gb = g * partials(x, y).1;
                        }
                    }
                }
                Pattern::Row(k) if k > 0 => {
                    if want_a {
                        for ((ga, g), a) in ga.chunks_exact_mut(k).zip(g.chunks_exact(k)).zip(a.chunks_exact(k)) {
                            for (((ga, &g), &x), &y) in ga.iter_mut().zip(g).zip(a).zip(b) {
                                *ga = g * partials(x, y).0;
                            }
                        }
                    }
                    if want_b {
                        for (g, a) in g.chunks_exact(k).zip(a.chunks_exact(k)) {
                            for (((gb, &g), &x), &y) in gb.iter_mut().zip(g).zip(a).zip(b) {
                                *gb += g * partials(x, y).1;
                            }
                        }
                    }
                }
                Pattern::Col(k) if k > 0 => {
                    if want_a {
                        for (((ga, g), a), &y) in ga
                            .chunks_exact_mut(k)
                            .zip(g.chunks_exact(k))
                            .zip(a.chunks_exact(k))
                            .zip(b)
                        {
                            for ((ga, &g), &x) in ga.iter_mut().zip(g).zip(a) {
                                *ga = g * partials(x, y).0;
                            }
                        }
                    }
                    if want_b {
                        for (((gb, g), a), &y) in gb.iter_mut().zip(g.chunks_exact(k)).zip(a.chunks_exact(k)).zip(b) {
                            *gb += g.iter().zip(a).fold(T::zero(), |s, (&g, &x)| s + g * partials(x, y).1);
                        }
                    }
                }
                _ => for_each_broadcast(&shape_for_bw, &sa, &sb, |o, i, j| {
                    let (da, db) = partials(a[i], b[j]);
                    if want_a {
                        ga[i] += g[o] * da;
                    }
                    if want_b {
                        gb[j] += g[o] * db;
                    }
                }),
            }
            vec![want_a.then_some(ga), want_b.then_some(gb)]
        });
        Ok(Tensor::from_op(
            out,
            out_shape,
            op,
            vec![self.clone(), other.clone()],
            backward,
        ))
    }

    fn unary(
        &self,
        op: &'static str,
        fwd: impl Fn(T) -> T,
        // derivative given (x, y = f(x))
        deriv: impl Fn(T, T) -> T + Send + Sync + 'static,
    ) -> Tensor<T> {
        let out: Arc<Vec<T>> = Arc::new(self.data().iter().map(|&x| fwd(x)).collect());
        let input = self.clone();
        let saved = Arc::clone(&out);
        let backward = Box::new(move |g: &[T]| {
            let x = input.data();
            vec![Some(
                g.iter()
                    .zip(x)
                    .zip(saved.iter())
                    .map(|((&g, &x), &y)| g * deriv(x, y))
                    .collect(),
            )]
        });
        Tensor::from_op_shared(out, self.shape().to_vec(), op, vec![self.clone()], backward)
    }

    pub fn add(&self, other: &Tensor<T>) -> Result<Tensor<T>> {
        self.binary(other, "add", |a, b| a + b, |_, _| (T::one(), T::one()))
    }

    pub fn sub(&self, other: &Tensor<T>) -> Result<Tensor<T>> {
        self.binary(other, "sub", |a, b| a - b, |_, _| (T::one(), -T::one()))
    }

    pub fn mul(&self, other: &Tensor<T>) -> Result<Tensor<T>> {
        self.binary(other, "mul", |a, b| a * b, |a, b| (b, a))
    }

    pub fn neg(&self) -> Tensor<T> {
        self.unary("neg", |x| -x, |_, _| -T::one())
    }

    pub fn scale(&self, c: T) -> Tensor<T> {
        self.unary("scale", move |x| x * c, move |_, _| c)
    }

    pub fn add_scalar(&self, c: T) -> Tensor<T> {
        self.unary("add_scalar", move |x| x + c, |_, _| T::one())
    }

    /// Rectifier; the subgradient at zero is zero.
    pub fn relu(&self) -> Tensor<T> {
        self.unary(
            "relu",
            |x| if x > T::zero() { x } else { T::zero() },
            |x, _| if x > T::zero() { T::one() } else { T::zero() },
        )
    }

    pub fn leaky_relu(&self, slope: T) -> Tensor<T> {
        self.unary(
            "leaky_relu",
            move |x| if x > T::zero() { x } else { x * slope },
            move |x, _| if x > T::zero() { T::one() } else { slope },
        )
    }

    pub fn sigmoid(&self) -> Tensor<T> {
        self.unary(
            "sigmoid",
            |x| {
                if x >= T::zero() {
                    T::one() / (T::one() + (-x).exp())
                } else {
                    let e = x.exp();
                    e / (T::one() + e)
                }
            },
            |_, y| y * (T::one() - y),
        )
    }

    pub fn exp(&self) -> Tensor<T> {
        self.unary("exp", |x| x.exp(), |_, y| y)
    }

    pub fn log(&self) -> Result<Tensor<T>> {
        if let Some((position, v)) = self.data().iter().enumerate().find(|(_, v)| !(**v > T::zero())) {
            return Err(Error::Domain {
                position,
                value: v.to_f64_lossy(),
            });
        }
        Ok(self.unary("log", |x| x.ln(), |x, _| T::one() / x))
    }

    /// Sum of all elements as a rank-0 tensor.
    pub fn sum(&self) -> Tensor<T> {
        let total = self.data().iter().copied().sum();
        let n = self.numel();
        Tensor::from_op(
            vec![total],
            Vec::new(),
            "sum",
            vec![self.clone()],
            Box::new(move |g: &[T]| vec![Some(vec![g[0]; n])]),
        )
    }

    pub fn mean(&self) -> Tensor<T> {
        let n = self.numel().max(1);
        self.sum().scale(T::one() / T::from_usize(n).unwrap())
    }

    /// Sums over the last axis: `[.., k] -> [..]`.
    pub fn sum_last_dim(&self) -> Result<Tensor<T>> {
        let Some((&k, lead)) = self.shape().split_last() else {
            return Err(Error::InvalidShape {
                op: "sum_last_dim",
                msg: "rank-0 input".into(),
            });
        };
        let out: Vec<T> = if k == 0 {
            vec![T::zero(); numel_of(lead)]
        } else {
            self.data().chunks_exact(k).map(|c| c.iter().copied().sum()).collect()
        };
        Ok(Tensor::from_op(
            out,
            lead.to_vec(),
            "sum_last_dim",
            vec![self.clone()],
            Box::new(move |g: &[T]| vec![Some(g.iter().flat_map(|&v| std::iter::repeat_n(v, k)).collect())]),
        ))
    }

    /// Dense matrix product of two rank-2 tensors.
    pub fn matmul(&self, other: &Tensor<T>) -> Result<Tensor<T>> {
        let mismatch = || Error::ShapeMismatch {
            op: "matmul",
            lhs: self.shape().to_vec(),
            rhs: other.shape().to_vec(),
        };
        let (m, k) = self.dims2().map_err(|_| mismatch())?;
        let (k2, n) = other.dims2().map_err(|_| mismatch())?;
        if k != k2 {
            return Err(mismatch());
        }
        let mut out = vec![T::zero(); m * n];
        T::gemm(
            m,
            k,
            n,
            T::one(),
            self.data(),
            (k as isize, 1),
            other.data(),
            (n as isize, 1),
            T::zero(),
            &mut out,
            (n as isize, 1),
        );
        let (a, b) = (self.clone(), other.clone());
        let backward = Box::new(move |g: &[T]| {
            let ga = a.requires_grad().then(|| {
                // dA = G · Bᵀ
                let mut ga = vec![T::zero(); m * k];
                T::gemm(
                    m,
                    n,
                    k,
                    T::one(),
                    g,
                    (n as isize, 1),
                    b.data(),
                    (1, n as isize),
                    T::zero(),
                    &mut ga,
                    (k as isize, 1),
                );
                ga
            });
            let gb = b.requires_grad().then(|| {
                // dB = Aᵀ · G
                let mut gb = vec![T::zero(); k * n];
                T::gemm(
                    k,
                    m,
                    n,
                    T::one(),
                    a.data(),
                    (1, k as isize),
                    g,
                    (n as isize, 1),
                    T::zero(),
                    &mut gb,
                    (n as isize, 1),
                );
                gb
            });
            vec![ga, gb]
        });
        Ok(Tensor::from_op(
            out,
            vec![m, n],
            "matmul",
            vec![self.clone(), other.clone()],
            backward,
        ))
    }

    /// Row `i` of the output is row `index[i]` of `self`.
    pub fn gather_rows(&self, index: &[usize]) -> Result<Tensor<T>> {
        let n = self.rows();
        let w = self.row_width();
        if let Some((position, &i)) = index.iter().enumerate().find(|(_, &i)| i >= n) {
            return Err(Error::IndexOutOfRange {
                op: "gather_rows",
                position,
                index: i,
                bound: n,
            });
        }
        let src = self.data();
        let mut out = Vec::with_capacity(index.len() * w);
        for &i in index {
            out.extend_from_slice(&src[i * w..(i + 1) * w]);
        }
        let mut shape = self.shape().to_vec();
        if shape.is_empty() {
            shape.push(1);
        }
        shape[0] = index.len();
        let index: Arc<[usize]> = index.into();
        let backward = Box::new(move |g: &[T]| vec![Some(scatter_add_raw(g, &index, n, w))]);
        Ok(Tensor::from_op(out, shape, "gather_rows", vec![self.clone()], backward))
    }

    /// Adds row `i` of `self` into row `index[i]` of an `n`-row zero tensor.
    pub fn scatter_add_rows(&self, index: &[usize], n: usize) -> Result<Tensor<T>> {
        if index.len() != self.rows() {
            return Err(Error::InvalidShape {
                op: "scatter_add_rows",
                msg: format!("{} indices for {} rows", index.len(), self.rows()),
            });
        }
        if let Some((position, &i)) = index.iter().enumerate().find(|(_, &i)| i >= n) {
            return Err(Error::IndexOutOfRange {
                op: "scatter_add_rows",
                position,
                index: i,
                bound: n,
            });
        }
        let w = self.row_width();
        let out = scatter_add_raw(self.data(), index, n, w);
        let mut shape = self.shape().to_vec();
        shape[0] = n;
        let index: Arc<[usize]> = index.into();
        let backward = Box::new(move |g: &[T]| {
            let mut out = Vec::with_capacity(index.len() * w);
            for &i in index.iter() {
                out.extend_from_slice(&g[i * w..(i + 1) * w]);
            }
            vec![Some(out)]
        });
        Ok(Tensor::from_op(
            out,
            shape,
            "scatter_add_rows",
            vec![self.clone()],
            backward,
        ))
    }

    /// Rows `start..start + len`. A prefix (`start == 0`) shares storage
    /// with `self`; any other window is copied.
    pub fn narrow_rows(&self, start: usize, len: usize) -> Result<Tensor<T>> {
        let n = self.rows();
        if start + len > n || self.ndim() == 0 {
            return Err(Error::InvalidShape {
                op: "narrow_rows",
                msg: format!("rows {start}..{} of {n}", start + len),
            });
        }
        let w = self.row_width();
        let mut shape = self.shape().to_vec();
        shape[0] = len;
        let total = n * w;
        let backward = Box::new(move |g: &[T]| {
            let mut full = vec![T::zero(); total];
            full[start * w..(start + len) * w].copy_from_slice(g);
            vec![Some(full)]
        });
        if start == 0 {
            Ok(Tensor::view_of(self, shape, "narrow_rows", backward))
        } else {
            let data = self.data()[start * w..(start + len) * w].to_vec();
            Ok(Tensor::from_op(
                data,
                shape,
                "narrow_rows",
                vec![self.clone()],
                backward,
            ))
        }
    }

    /// Same elements under a new shape; shares storage.
    pub fn reshape(&self, shape: &[usize]) -> Result<Tensor<T>> {
        if numel_of(shape) != self.numel() {
            return Err(Error::ShapeMismatch {
                op: "reshape",
                lhs: self.shape().to_vec(),
                rhs: shape.to_vec(),
            });
        }
        Ok(Tensor::view_of(
            self,
            shape.to_vec(),
            "reshape",
            Box::new(|g: &[T]| vec![Some(g.to_vec())]),
        ))
    }

    /// Concatenates rank-2 tensors with equal row counts along columns.
    pub fn concat_cols(parts: &[&Tensor<T>]) -> Result<Tensor<T>> {
        let Some(first) = parts.first() else {
            return Err(Error::InvalidShape {
                op: "concat_cols",
                msg: "no inputs".into(),
            });
        };
        let rows = first.dims2()?.0;
        let mut widths = Vec::with_capacity(parts.len());
        for p in parts {
            let (r, c) = p.dims2()?;
            if r != rows {
                return Err(Error::ShapeMismatch {
                    op: "concat_cols",
                    lhs: first.shape().to_vec(),
                    rhs: p.shape().to_vec(),
                });
            }
            widths.push(c);
        }
        let total: usize = widths.iter().sum();
        let mut out = Vec::with_capacity(rows * total);
        for r in 0..rows {
            for (p, &w) in parts.iter().zip(&widths) {
                out.extend_from_slice(&p.data()[r * w..(r + 1) * w]);
            }
        }
        let inputs: Vec<Tensor<T>> = parts.iter().map(|t| (*t).clone()).collect();
        let tracked: Vec<bool> = inputs.iter().map(|t| t.requires_grad()).collect();
        let backward = Box::new(move |g: &[T]| {
            let mut offset = 0;
            let mut grads = Vec::with_capacity(widths.len());
            for (&w, &track) in widths.iter().zip(&tracked) {
                grads.push(track.then(|| {
                    let mut part = Vec::with_capacity(rows * w);
                    for r in 0..rows {
                        let s = r * total + offset;
                        part.extend_from_slice(&g[s..s + w]);
                    }
                    part
                }));
                offset += w;
            }
            grads
        });
        Ok(Tensor::from_op(out, vec![rows, total], "concat_cols", inputs, backward))
    }

    /// Stacks tensors along the first axis; trailing extents must agree.
    pub fn concat_rows(parts: &[&Tensor<T>]) -> Result<Tensor<T>> {
        let Some(first) = parts.first() else {
            return Err(Error::InvalidShape {
                op: "concat_rows",
                msg: "no inputs".into(),
            });
        };
        let tail = first.shape().get(1..).unwrap_or(&[]).to_vec();
        let mut rows = Vec::with_capacity(parts.len());
        for p in parts {
            if p.ndim() == 0 || p.shape()[1..] != tail[..] {
                return Err(Error::ShapeMismatch {
                    op: "concat_rows",
                    lhs: first.shape().to_vec(),
                    rhs: p.shape().to_vec(),
                });
            }
            rows.push(p.numel());
        }
        let mut out = Vec::with_capacity(rows.iter().sum());
        for p in parts {
            out.extend_from_slice(p.data());
        }
        let mut shape = vec![parts.iter().map(|p| p.rows()).sum()];
        shape.extend_from_slice(&tail);
        let inputs: Vec<Tensor<T>> = parts.iter().map(|t| (*t).clone()).collect();
        let backward = Box::new(move |g: &[T]| {
            let mut offset = 0;
            rows.iter()
                .map(|&len| {
                    let part = g[offset..offset + len].to_vec();
                    offset += len;
                    Some(part)
                })
                .collect()
        });
        Ok(Tensor::from_op(out, shape, "concat_rows", inputs, backward))
    }

    /// Mean softmax cross-entropy of `[n × c]` logits against class labels.
    pub fn cross_entropy(&self, labels: &[usize]) -> Result<Tensor<T>> {
        let (n, c) = self.dims2()?;
        if labels.len() != n {
            return Err(Error::InvalidShape {
                op: "cross_entropy",
                msg: format!("{} labels for {n} rows", labels.len()),
            });
        }
        if let Some((position, &l)) = labels.iter().enumerate().find(|(_, &l)| l >= c) {
            return Err(Error::IndexOutOfRange {
                op: "cross_entropy",
                position,
                index: l,
                bound: c,
            });
        }
        let mut probs = Vec::with_capacity(n * c);
        let mut loss = T::zero();
        for (row, &label) in self.data().chunks_exact(c.max(1)).zip(labels) {
            let max = row.iter().copied().fold(T::neg_infinity(), T::max);
            let z: T = row.iter().map(|&v| (v - max).exp()).sum();
            loss += z.ln() + max - row[label];
            probs.extend(row.iter().map(|&v| (v - max).exp() / z));
        }
        let inv_n = T::one() / T::from_usize(n.max(1)).unwrap();
        let labels: Vec<usize> = labels.to_vec();
        let backward = Box::new(move |g: &[T]| {
            let scale = g[0] * inv_n;
            let mut grad: Vec<T> = probs.iter().map(|&p| p * scale).collect();
            for (r, &l) in labels.iter().enumerate() {
                grad[r * c + l] -= scale;
            }
            vec![Some(grad)]
        });
        Ok(Tensor::from_op(
            vec![loss * inv_n],
            Vec::new(),
            "cross_entropy",
            vec![self.clone()],
            backward,
        ))
    }
}

pub(crate) fn scatter_add_raw<T: Scalar>(src: &[T], index: &[usize], n: usize, w: usize) -> Vec<T> {
    let mut out = vec![T::zero(); n * w];
    for (row, &i) in src.chunks_exact(w.max(1)).zip(index) {
        if w == 0 {
            break;
        }
        out[i * w..(i + 1) * w].iter_mut().zip(row).for_each(|(o, &v)| *o += v);
    }
    out
}
