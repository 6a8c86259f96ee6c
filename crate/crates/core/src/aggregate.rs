//! Permutation-invariant reductions over index-defined groups.
//!
//! Rows of a `[e × f]` value tensor are reduced into `n` groups given a
//! per-row group index. The same operators serve message aggregation and
//! global readouts. Conventions:
//!
//! * an empty group yields `0` for every kind;
//! * `var`/`std` use the population estimator, `median` the lower median;
//! * `max`/`min` route the gradient to the first attaining row;
//! * `median`, `var` and `std` are forward-only.
//!
//! Both layouts reduce each group in ascending row order, so at a fixed
//! dtype they produce bit-identical results.

use std::fmt;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Clone)]
pub enum AggKind<T: Scalar> {
    Sum,
    Mean,
    Max,
    Min,
    Median,
    Var,
    Std,
    /// Softmax-weighted sum with a (possibly learnable) scalar temperature.
    Softmax(Tensor<T>),
}

impl<T: Scalar> AggKind<T> {
    pub fn name(&self) -> &'static str {
        match self {
            AggKind::Sum => "sum",
            AggKind::Mean => "mean",
            AggKind::Max => "max",
            AggKind::Min => "min",
            AggKind::Median => "median",
            AggKind::Var => "var",
            AggKind::Std => "std",
            AggKind::Softmax(_) => "softmax",
        }
    }

    pub fn softmax(t: T, learnable: bool) -> Self {
        let t = Tensor::scalar(t);
        AggKind::Softmax(if learnable { t.requires_grad_() } else { t })
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "sum" | "add" => AggKind::Sum,
            "mean" => AggKind::Mean,
            "max" => AggKind::Max,
            "min" => AggKind::Min,
            "median" => AggKind::Median,
            "var" => AggKind::Var,
            "std" => AggKind::Std,
            _ => return None,
        })
    }
}

impl<T: Scalar> fmt::Debug for AggKind<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AggKind::Softmax(t) => write!(f, "Softmax(t={:?})", t.data()),
            other => f.write_str(other.name()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Combine {
    Concat,
    Sum,
}

#[derive(Debug, Clone)]
pub enum AggregationSpec<T: Scalar> {
    Single(AggKind<T>),
    Multi { kinds: Vec<AggKind<T>>, combine: Combine },
}

impl<T: Scalar> AggregationSpec<T> {
    pub fn sum() -> Self {
        AggregationSpec::Single(AggKind::Sum)
    }

    pub fn mean() -> Self {
        AggregationSpec::Single(AggKind::Mean)
    }

    pub fn max() -> Self {
        AggregationSpec::Single(AggKind::Max)
    }

    /// The single kind, if this is not a stacked spec.
    pub fn single(&self) -> Option<&AggKind<T>> {
        match self {
            AggregationSpec::Single(k) => Some(k),
            AggregationSpec::Multi { .. } => None,
        }
    }

    /// Output width for input width `f`.
    pub fn output_width(&self, f: usize) -> usize {
        match self {
            AggregationSpec::Single(_) => f,
            AggregationSpec::Multi {
                kinds,
                combine: Combine::Concat,
            } => f * kinds.len(),
            AggregationSpec::Multi { .. } => f,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layout {
    /// Index is non-decreasing; groups are contiguous row ranges.
    SortedSegments,
    /// Arbitrary index order; rows are scattered into their group.
    UnsortedScatter,
}

/// Validated grouping of `e` rows into `n` groups.
pub(crate) struct Groups<'a> {
    pub index: &'a [usize],
    pub n: usize,
    /// Row lists per group in ascending row order (CSR layout).
    pub ptr: Vec<usize>,
    pub rows: Vec<usize>,
}

impl<'a> Groups<'a> {
    pub fn new(index: &'a [usize], n: usize, layout: Layout) -> Result<Self> {
        if let Some((position, &i)) = index.iter().enumerate().find(|(_, &i)| i >= n) {
            return Err(Error::IndexOutOfRange {
                op: "aggregate",
                position,
                index: i,
                bound: n,
            });
        }
        let mut ptr = vec![0usize; n + 1];
        for &g in index {
            ptr[g + 1] += 1;
        }
        for g in 0..n {
            ptr[g + 1] += ptr[g];
        }
        let rows = match layout {
            Layout::SortedSegments => {
                if let Some(p) = index.windows(2).position(|w| w[0] > w[1]) {
                    return Err(Error::UnsortedSegments(p + 1));
                }
                (0..index.len()).collect()
            }
            Layout::UnsortedScatter => {
                let mut next = ptr[..n].to_vec();
                let mut rows = vec![0; index.len()];
                for (r, &g) in index.iter().enumerate() {
                    rows[next[g]] = r;
                    next[g] += 1;
                }
                rows
            }
        };
        Ok(Groups { index, n, ptr, rows })
    }

    pub fn count(&self, g: usize) -> usize {
        self.ptr[g + 1] - self.ptr[g]
    }

    pub fn members(&self, g: usize) -> &[usize] {
        &self.rows[self.ptr[g]..self.ptr[g + 1]]
    }
}

fn out_shape<T: Scalar>(values: &Tensor<T>, n: usize) -> Vec<usize> {
    let mut shape = values.shape().to_vec();
    if shape.is_empty() {
        shape.push(1);
    }
    shape[0] = n;
    shape
}

fn check_rows<T: Scalar>(values: &Tensor<T>, index: &[usize]) -> Result<()> {
    if values.ndim() == 0 || values.rows() != index.len() {
        return Err(Error::Aggregation(format!(
            "{} index entries for values of shape {:?}",
            index.len(),
            values.shape()
        )));
    }
    Ok(())
}

/// Reduces `values` rows into `num_groups` groups according to `spec`.
pub fn aggregate<T: Scalar>(
    values: &Tensor<T>,
    index: &[usize],
    num_groups: usize,
    spec: &AggregationSpec<T>,
    layout: Layout,
) -> Result<Tensor<T>> {
    match spec {
        AggregationSpec::Single(kind) => aggregate_kind(values, index, num_groups, kind, layout),
        AggregationSpec::Multi { kinds, combine } => {
            multi_aggregate_with(values, index, num_groups, kinds, *combine, layout)
        }
    }
}

/// Stacked aggregation with the scatter layout.
pub fn multi_aggregate<T: Scalar>(
    values: &Tensor<T>,
    index: &[usize],
    num_groups: usize,
    kinds: &[AggKind<T>],
    combine: Combine,
) -> Result<Tensor<T>> {
    multi_aggregate_with(values, index, num_groups, kinds, combine, Layout::UnsortedScatter)
}

fn multi_aggregate_with<T: Scalar>(
    values: &Tensor<T>,
    index: &[usize],
    n: usize,
    kinds: &[AggKind<T>],
    combine: Combine,
    layout: Layout,
) -> Result<Tensor<T>> {
    if kinds.is_empty() {
        return Err(Error::Aggregation("empty multi-aggregation".into()));
    }
    let parts = kinds
        .iter()
        .map(|k| aggregate_kind(values, index, n, k, layout))
        .collect::<Result<Vec<_>>>()?;
    if parts.len() == 1 {
        return Ok(parts.into_iter().next().expect("one part"));
    }
    match combine {
        Combine::Concat => {
            let flat = parts
                .iter()
                .map(|p| p.reshape(&[n, p.row_width()]))
                .collect::<Result<Vec<_>>>()?;
            Tensor::concat_cols(&flat.iter().collect::<Vec<_>>())
        }
        Combine::Sum => {
            let mut acc = parts[0].clone();
            for p in &parts[1..] {
                if p.shape() != acc.shape() {
                    return Err(Error::Aggregation(format!(
                        "width mismatch under sum combine: {:?} vs {:?}",
                        acc.shape(),
                        p.shape()
                    )));
                }
                acc = acc.add(p)?;
            }
            Ok(acc)
        }
    }
}

fn aggregate_kind<T: Scalar>(
    values: &Tensor<T>,
    index: &[usize],
    n: usize,
    kind: &AggKind<T>,
    layout: Layout,
) -> Result<Tensor<T>> {
    check_rows(values, index)?;
    let groups = Groups::new(index, n, layout)?;
    match kind {
        AggKind::Sum => Ok(reduce_sum(values, &groups, false)),
        AggKind::Mean => Ok(reduce_sum(values, &groups, true)),
        AggKind::Max => Ok(reduce_extreme(values, &groups, true)),
        AggKind::Min => Ok(reduce_extreme(values, &groups, false)),
        AggKind::Median | AggKind::Var | AggKind::Std => {
            if values.requires_grad() {
                return Err(Error::NotDifferentiable(kind.name()));
            }
            Ok(reduce_forward_only(values, &groups, kind))
        }
        AggKind::Softmax(t) => softmax_aggregate_grouped(values, &groups, t),
    }
}

fn reduce_sum<T: Scalar>(values: &Tensor<T>, groups: &Groups<'_>, mean: bool) -> Tensor<T> {
    let w = values.row_width();
    let n = groups.n;
    let data = values.data();
    let mut out = vec![T::zero(); n * w];
    for g in 0..n {
        let acc = &mut out[g * w..(g + 1) * w];
        for &r in groups.members(g) {
            acc.iter_mut()
                .zip(&data[r * w..(r + 1) * w])
                .for_each(|(a, &v)| *a += v);
        }
        if mean && groups.count(g) > 0 {
            let c = T::from_usize(groups.count(g)).unwrap();
            acc.iter_mut().for_each(|a| *a /= c);
        }
    }
    let index = groups.index.to_vec();
    let scale: Vec<T> = (0..n)
        .map(|g| {
            if mean && groups.count(g) > 0 {
                T::one() / T::from_usize(groups.count(g)).unwrap()
            } else {
                T::one()
            }
        })
        .collect();
    Tensor::from_op(
        out,
        out_shape(values, n),
        if mean { "aggregate_mean" } else { "aggregate_sum" },
        vec![values.clone()],
        Box::new(move |g: &[T]| {
            let mut grad = Vec::with_capacity(index.len() * w);
            for &i in &index {
                let s = scale[i];
                grad.extend(g[i * w..(i + 1) * w].iter().map(|&v| v * s));
            }
            vec![Some(grad)]
        }),
    )
}

fn reduce_extreme<T: Scalar>(values: &Tensor<T>, groups: &Groups<'_>, is_max: bool) -> Tensor<T> {
    let w = values.row_width();
    let n = groups.n;
    let data = values.data();
    let mut out = vec![T::zero(); n * w];
    // row attaining the extreme, usize::MAX for empty groups
    let mut arg = vec![usize::MAX; n * w];
    for g in 0..n {
        for &r in groups.members(g) {
            for j in 0..w {
                let v = data[r * w + j];
                let k = g * w + j;
                let better = arg[k] == usize::MAX || if is_max { v > out[k] } else { v < out[k] };
                if better {
                    out[k] = v;
                    arg[k] = r;
                }
            }
        }
    }
    let rows = values.rows();
    Tensor::from_op(
        out,
        out_shape(values, n),
        if is_max { "aggregate_max" } else { "aggregate_min" },
        vec![values.clone()],
        Box::new(move |g: &[T]| {
            let mut grad = vec![T::zero(); rows * w];
            for (k, &r) in arg.iter().enumerate() {
                if r != usize::MAX {
                    grad[r * w + k % w] += g[k];
                }
            }
            vec![Some(grad)]
        }),
    )
}

fn reduce_forward_only<T: Scalar>(values: &Tensor<T>, groups: &Groups<'_>, kind: &AggKind<T>) -> Tensor<T> {
    let w = values.row_width();
    let n = groups.n;
    let data = values.data();
    let mut out = vec![T::zero(); n * w];
    let mut column = Vec::new();
    for g in 0..n {
        let members = groups.members(g);
        if members.is_empty() {
            continue;
        }
        let c = T::from_usize(members.len()).unwrap();
        for j in 0..w {
            let v = match kind {
                AggKind::Median => {
                    column.clear();
                    column.extend(members.iter().map(|&r| data[r * w + j]));
                    column.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
                    column[(column.len() - 1) / 2]
                }
                _ => {
                    let mut mean = T::zero();
                    for &r in members {
                        mean += data[r * w + j];
                    }
                    mean /= c;
                    let mut var = T::zero();
                    for &r in members {
                        let d = data[r * w + j] - mean;
                        var += d * d;
                    }
                    var /= c;
                    if matches!(kind, AggKind::Std) {
                        var.sqrt()
                    } else {
                        var
                    }
                }
            };
            out[g * w + j] = v;
        }
    }
    Tensor::from_vec(out, &out_shape(values, n)).expect("shape matches buffer")
}

/// Per-group softmax of each column: `exp(v - max) / Σ exp(v - max)`.
pub fn segment_softmax<T: Scalar>(values: &Tensor<T>, index: &[usize], num_groups: usize) -> Result<Tensor<T>> {
    check_rows(values, index)?;
    let groups = Groups::new(index, num_groups, Layout::UnsortedScatter)?;
    Ok(segment_softmax_grouped(values, &groups))
}

pub(crate) fn segment_softmax_grouped<T: Scalar>(values: &Tensor<T>, groups: &Groups<'_>) -> Tensor<T> {
    let w = values.row_width();
    let data = values.data();
    let mut out = vec![T::zero(); data.len()];
    let mut max = vec![T::zero(); w];
    let mut denom = vec![T::zero(); w];
    for g in 0..groups.n {
        let members = groups.members(g);
        if members.is_empty() {
            continue;
        }
        max.iter_mut().for_each(|m| *m = T::neg_infinity());
        for &r in members {
            for j in 0..w {
                max[j] = max[j].max(data[r * w + j]);
            }
        }
        denom.iter_mut().for_each(|d| *d = T::zero());
        for &r in members {
            for j in 0..w {
                let e = (data[r * w + j] - max[j]).exp();
                out[r * w + j] = e;
                denom[j] += e;
            }
        }
        for &r in members {
            for j in 0..w {
                out[r * w + j] /= denom[j];
            }
        }
    }
    let saved = out.clone();
    let ptr = groups.ptr.clone();
    let rows = groups.rows.clone();
    Tensor::from_op(
        out,
        values.shape().to_vec(),
        "segment_softmax",
        vec![values.clone()],
        Box::new(move |g: &[T]| {
            let mut grad = vec![T::zero(); saved.len()];
            let mut dot = vec![T::zero(); w];
            for grp in 0..ptr.len() - 1 {
                let members = &rows[ptr[grp]..ptr[grp + 1]];
                dot.iter_mut().for_each(|d| *d = T::zero());
                for &r in members {
                    for j in 0..w {
                        dot[j] += saved[r * w + j] * g[r * w + j];
                    }
                }
                for &r in members {
                    for j in 0..w {
                        let k = r * w + j;
                        grad[k] = saved[k] * (g[k] - dot[j]);
                    }
                }
            }
            vec![Some(grad)]
        }),
    )
}

/// `out_g = Σ_{i∈g} softmax_g(t·v)_i ⊙ v_i`, differentiable in `v` and `t`.
pub fn softmax_aggregate<T: Scalar>(
    values: &Tensor<T>,
    index: &[usize],
    num_groups: usize,
    t: &Tensor<T>,
) -> Result<Tensor<T>> {
    check_rows(values, index)?;
    let groups = Groups::new(index, num_groups, Layout::UnsortedScatter)?;
    softmax_aggregate_grouped(values, &groups, t)
}

fn softmax_aggregate_grouped<T: Scalar>(values: &Tensor<T>, groups: &Groups<'_>, t: &Tensor<T>) -> Result<Tensor<T>> {
    if t.numel() != 1 {
        return Err(Error::Aggregation(format!(
            "softmax temperature must be a scalar, got shape {:?}",
            t.shape()
        )));
    }
    let scaled = values.mul(t)?;
    let weights = segment_softmax_grouped(&scaled, groups);
    let weighted = weights.mul(values)?;
    Ok(reduce_sum(&weighted, groups, false))
}
