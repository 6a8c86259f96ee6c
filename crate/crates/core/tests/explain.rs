mod common;

use graphmill::explain::{evaluate, explain, Algorithm, ExplainerConfig, HomogeneousRun, Target};
use graphmill::message_passing::{GnnModel, LayerKind};
use graphmill::synth::circuit;

use common::{random_edges, random_tensor, rng};

#[test]
fn saliency_masks_cover_features_and_edges() {
    let mut r = rng(8);
    let edges = random_edges(&mut r, 12, 40);
    let x = random_tensor(&mut r, &[12, 3]);
    for kind in LayerKind::ALL {
        let model = GnnModel::<f64>::new(kind, &[3, 4, 2], 1, 0).unwrap();
        let run = HomogeneousRun {
            model: &model,
            edges: &edges,
            x: &x,
        };
        for alg in [Algorithm::Saliency, Algorithm::GradInput, Algorithm::MaskOpt] {
            let cfg = ExplainerConfig {
                epochs: 10,
                ..ExplainerConfig::new(alg)
            };
            let e = explain(&run, &Target::node(5), &cfg).unwrap();
            assert_eq!(e.node_mask["node"].shape(), &[12, 3]);
            assert_eq!(e.edge_mask.shape(), &[40]);
            assert!(e.edge_mask.to_vec().iter().all(|v| v.is_finite()));
            if alg != Algorithm::GradInput {
                assert!(e.edge_mask.to_vec().iter().all(|v| *v >= 0.0), "{kind} {alg}");
            }
        }
    }
}

#[test]
fn saliency_ignores_edges_outside_the_receptive_field() {
    let c = circuit::<f64>(6, 4).unwrap();
    let run = HomogeneousRun {
        model: &c.model,
        edges: &c.edges,
        x: &c.x,
    };
    let e = explain(
        &run,
        &Target::node(c.target),
        &ExplainerConfig::new(Algorithm::Saliency),
    )
    .unwrap();
    let m = e.edge_mask.to_vec();
    assert_eq!(m[c.null_edge], 0.0);
    assert!(m[c.truth_edge] > 0.0);
}

#[test]
fn fidelity_improves_when_keeping_the_circuit() {
    let c = circuit::<f64>(8, 6).unwrap();
    let run = HomogeneousRun {
        model: &c.model,
        edges: &c.edges,
        x: &c.x,
    };
    let e = explain(&run, &Target::node(c.target), &ExplainerConfig::new(Algorithm::MaskOpt)).unwrap();
    let keep_one = 1.0 / c.edges.num_edges() as f64;
    let m = evaluate(&e, &run, keep_one).unwrap();
    assert_eq!(m.kept_edges, 1);
    assert!(m.fidelity_plus >= m.fidelity_minus, "{m:?}");
}

#[test]
fn bad_targets_and_configs_fail() {
    let c = circuit::<f64>(3, 1).unwrap();
    let run = HomogeneousRun {
        model: &c.model,
        edges: &c.edges,
        x: &c.x,
    };
    let n = c.x.shape()[0];
    assert!(explain(&run, &Target::node(n), &ExplainerConfig::new(Algorithm::Saliency)).is_err());
    let zero = ExplainerConfig {
        epochs: 0,
        ..ExplainerConfig::new(Algorithm::MaskOpt)
    };
    assert!(explain(&run, &Target::node(0), &zero).is_err());
    let mut t = Target::node(0);
    t.output = Some(99);
    assert!(explain(&run, &t, &ExplainerConfig::new(Algorithm::Saliency)).is_err());
}
