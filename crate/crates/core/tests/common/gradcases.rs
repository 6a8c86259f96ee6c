use graphmill::aggregate::{
    aggregate, multi_aggregate, segment_softmax, softmax_aggregate, AggKind, AggregationSpec, Combine, Layout,
};
use graphmill::hetero::grouped_matmul;
use graphmill::message_passing::{layer_forward, spmm, ExecPath, LayerDims, LayerKind, LayerOptions, LayerParams};
use graphmill::Tensor;
use rand::prelude::*;

use super::{grad_check, project, random_edges, random_tensor, random_values, rng};

pub type Case = (&'static str, fn(u64) -> f64);

fn unary(seed: u64, f: fn(&Tensor<f64>) -> Tensor<f64>) -> f64 {
    let x = random_tensor(&mut rng(seed), &[3, 4]);
    grad_check(&[x], |t| project(&f(&t[0]), seed))
}

fn binary(seed: u64, a: &[usize], b: &[usize], f: fn(&Tensor<f64>, &Tensor<f64>) -> Tensor<f64>) -> f64 {
    let mut r = rng(seed);
    let x = random_tensor(&mut r, a);
    let y = random_tensor(&mut r, b);
    grad_check(&[x, y], |t| project(&f(&t[0], &t[1]), seed))
}

fn groups(r: &mut impl Rng, e: usize, n: usize, sorted: bool) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..e).map(|_| r.gen_range(0..n)).collect();
    if sorted {
        idx.sort_unstable();
    }
    idx
}

fn agg_case(seed: u64, kind: fn() -> AggKind<f64>) -> f64 {
    let mut r = rng(seed);
    let x = random_tensor(&mut r, &[9, 3]);
    let sorted = seed.is_multiple_of(2);
    let idx = groups(&mut r, 9, 4, sorted);
    let layout = if sorted {
        Layout::SortedSegments
    } else {
        Layout::UnsortedScatter
    };
    let spec = AggregationSpec::Single(kind());
    grad_check(&[x], |t| {
        project(&aggregate(&t[0], &idx, 4, &spec, layout).unwrap(), seed)
    })
}

fn layer_case(seed: u64, kind: LayerKind, path: ExecPath) -> f64 {
    let mut r = rng(seed);
    let n = 6;
    let edges = random_edges(&mut r, n, 14);
    let heads = if kind == LayerKind::Gat { 2 } else { 1 };
    let mut params = LayerParams::<f64>::new(kind, LayerDims::new(3, 4).with_heads(heads), seed).unwrap();
    // zero-initialized biases and eps would leave some paths untested
    let names: Vec<String> = params.weights.keys().cloned().collect();
    for name in &names {
        let shape = params.weights[name].shape().to_vec();
        params.weights.insert(name.clone(), random_tensor(&mut r, &shape));
    }
    let x = random_tensor(&mut r, &[n, 3]);
    let mut inputs = vec![x];
    inputs.extend(names.iter().map(|k| params.weights[k].clone()));
    grad_check(&inputs, |t| {
        let mut p = params.clone();
        for (name, w) in names.iter().zip(&t[1..]) {
            p.weights.insert(name.clone(), w.clone());
        }
        let opts = LayerOptions::path(path);
        project(&layer_forward(&p, &edges, &t[0], &opts).unwrap(), seed)
    })
}

pub fn op_cases() -> Vec<Case> {
    vec![
        ("add", |s| binary(s, &[3, 4], &[3, 4], |a, b| a.add(b).unwrap())),
        ("add_row_broadcast", |s| {
            binary(s, &[3, 4], &[4], |a, b| a.add(b).unwrap())
        }),
        ("add_col_broadcast", |s| {
            binary(s, &[3, 4], &[3, 1], |a, b| a.add(b).unwrap())
        }),
        ("sub", |s| binary(s, &[3, 4], &[3, 4], |a, b| a.sub(b).unwrap())),
        ("mul", |s| binary(s, &[3, 4], &[3, 4], |a, b| a.mul(b).unwrap())),
        ("mul_scalar_broadcast", |s| {
            binary(s, &[3, 4], &[], |a, b| a.mul(b).unwrap())
        }),
        ("mul_general_broadcast", |s| {
            binary(s, &[2, 1, 3], &[1, 4, 1], |a, b| a.mul(b).unwrap())
        }),
        ("neg", |s| unary(s, |x| x.neg())),
        ("scale", |s| unary(s, |x| x.scale(-1.7))),
        ("add_scalar", |s| unary(s, |x| x.add_scalar(0.3))),
        ("relu", |s| unary(s, |x| x.relu())),
        ("leaky_relu", |s| unary(s, |x| x.leaky_relu(0.2))),
        ("sigmoid", |s| unary(s, |x| x.sigmoid())),
        ("exp", |s| unary(s, |x| x.exp())),
        ("log", |s| {
            let x = Tensor::from_vec(random_values(&mut rng(s), 12, 0.5, 2.0), &[3, 4]).unwrap();
            grad_check(&[x], |t| project(&t[0].log().unwrap(), s))
        }),
        ("sum", |s| unary(s, |x| x.sum())),
        ("mean", |s| unary(s, |x| x.mean())),
        ("sum_last_dim", |s| unary(s, |x| x.sum_last_dim().unwrap())),
        ("matmul", |s| binary(s, &[3, 4], &[4, 2], |a, b| a.matmul(b).unwrap())),
        ("gather_rows", |s| {
            unary(s, |x| x.gather_rows(&[2, 0, 2, 1, 2]).unwrap())
        }),
        ("scatter_add_rows", |s| {
            unary(s, |x| x.scatter_add_rows(&[1, 1, 4], 5).unwrap())
        }),
        ("narrow_rows", |s| unary(s, |x| x.narrow_rows(1, 2).unwrap())),
        ("reshape", |s| {
            unary(s, |x| {
                x.reshape(&[2, 6]).unwrap().matmul(&Tensor::ones(&[6, 1])).unwrap()
            })
        }),
        ("concat_cols", |s| {
            binary(s, &[3, 4], &[3, 2], |a, b| Tensor::concat_cols(&[a, b]).unwrap())
        }),
        ("concat_rows", |s| {
            binary(s, &[3, 4], &[2, 4], |a, b| Tensor::concat_rows(&[a, b]).unwrap())
        }),
        ("cross_entropy", |s| {
            let x = random_tensor(&mut rng(s), &[4, 3]);
            grad_check(&[x], |t| t[0].scale(3.0).cross_entropy(&[0, 2, 1, 2]).unwrap())
        }),
        ("aggregate_sum", |s| agg_case(s, || AggKind::Sum)),
        ("aggregate_mean", |s| agg_case(s, || AggKind::Mean)),
        ("aggregate_max", |s| agg_case(s, || AggKind::Max)),
        ("aggregate_min", |s| agg_case(s, || AggKind::Min)),
        ("aggregate_softmax", |s| agg_case(s, || AggKind::softmax(0.7, false))),
        ("softmax_temperature", |s| {
            let mut r = rng(s);
            let x = random_tensor(&mut r, &[9, 3]);
            let t = Tensor::scalar(r.gen_range(0.2..2.0));
            let idx = groups(&mut r, 9, 4, false);
            grad_check(&[x, t], |v| {
                project(&softmax_aggregate(&v[0], &idx, 4, &v[1]).unwrap(), s)
            })
        }),
        ("multi_aggregate", |s| {
            let mut r = rng(s);
            let x = random_tensor(&mut r, &[9, 3]);
            let idx = groups(&mut r, 9, 4, false);
            let combine = if s % 2 == 0 { Combine::Concat } else { Combine::Sum };
            grad_check(&[x], |t| {
                let kinds = [AggKind::Sum, AggKind::Mean, AggKind::Max, AggKind::Min];
                project(&multi_aggregate(&t[0], &idx, 4, &kinds, combine).unwrap(), s)
            })
        }),
        ("segment_softmax", |s| {
            let mut r = rng(s);
            let x = random_tensor(&mut r, &[9, 2]);
            let idx = groups(&mut r, 9, 4, false);
            grad_check(&[x], |t| project(&segment_softmax(&t[0], &idx, 4).unwrap(), s))
        }),
        ("spmm", |s| {
            let mut r = rng(s);
            let e = random_edges(&mut r, 5, 12);
            let x = random_tensor(&mut r, &[5, 3]);
            grad_check(&[x], |t| project(&spmm(&e, &t[0], None, s % 2 == 0).unwrap(), s))
        }),
        ("spmm_weighted", |s| {
            let mut r = rng(s);
            let e = random_edges(&mut r, 5, 12);
            let x = random_tensor(&mut r, &[5, 4]);
            let w = random_tensor(&mut r, &[12, 2]);
            grad_check(&[x, w], |t| project(&spmm(&e, &t[0], Some(&t[1]), false).unwrap(), s))
        }),
        ("grouped_matmul", |s| {
            let mut r = rng(s);
            let a = random_tensor(&mut r, &[3, 2]);
            let b = random_tensor(&mut r, &[1, 2]);
            let w = random_tensor(&mut r, &[2, 2, 3]);
            grad_check(&[a, b, w], |t| {
                let out = grouped_matmul(&[&t[0], &t[1]], &t[2]).unwrap();
                project(&Tensor::concat_rows(&[&out[0], &out[1]]).unwrap(), s)
            })
        }),
    ]
}

pub fn layer_cases() -> Vec<Case> {
    vec![
        ("gcn", |s| layer_case(s, LayerKind::Gcn, ExecPath::SegmentFused)),
        ("gcn_materialized", |s| {
            layer_case(s, LayerKind::Gcn, ExecPath::EdgeMaterialize)
        }),
        ("sage", |s| layer_case(s, LayerKind::Sage, ExecPath::SegmentFused)),
        ("sage_materialized", |s| {
            layer_case(s, LayerKind::Sage, ExecPath::EdgeMaterialize)
        }),
        ("gin", |s| layer_case(s, LayerKind::Gin, ExecPath::SegmentFused)),
        ("gin_materialized", |s| {
            layer_case(s, LayerKind::Gin, ExecPath::EdgeMaterialize)
        }),
        ("gat", |s| layer_case(s, LayerKind::Gat, ExecPath::SegmentFused)),
        ("gat_materialized", |s| {
            layer_case(s, LayerKind::Gat, ExecPath::EdgeMaterialize)
        }),
        ("edgecnn", |s| layer_case(s, LayerKind::EdgeCnn, ExecPath::SegmentFused)),
        ("edgecnn_materialized", |s| {
            layer_case(s, LayerKind::EdgeCnn, ExecPath::EdgeMaterialize)
        }),
    ]
}
