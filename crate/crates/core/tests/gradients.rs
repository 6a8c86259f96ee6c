mod common;

use common::gradcases::{layer_cases, op_cases};

fn run(cases: Vec<common::gradcases::Case>, trials: u64) {
    for (name, case) in cases {
        for seed in 0..trials {
            let err = case(seed);
            assert!(err <= 1e-4, "{name} seed {seed}: relative error {err:e}");
        }
    }
}

#[test]
fn ops_match_finite_differences() {
    run(op_cases(), 4);
}

#[test]
fn layers_match_finite_differences() {
    run(layer_cases(), 3);
}

#[test]
fn order_statistics_refuse_gradients() {
    use graphmill::aggregate::{aggregate, AggKind, AggregationSpec, Layout};
    let x = graphmill::Tensor::<f64>::param(vec![1.0, 3.0, 2.0], &[3, 1]).unwrap();
    for kind in [AggKind::Median, AggKind::Var, AggKind::Std] {
        let spec = AggregationSpec::Single(kind);
        let err = aggregate(&x, &[0, 0, 0], 1, &spec, Layout::SortedSegments).unwrap_err();
        assert!(matches!(err, graphmill::Error::NotDifferentiable(_)));
    }
    let spec = AggregationSpec::Single(AggKind::Median);
    let plain = x.detach();
    let m = aggregate(&plain, &[0, 0, 0], 1, &spec, Layout::SortedSegments).unwrap();
    assert_eq!(m.to_vec(), vec![2.0]);
}
