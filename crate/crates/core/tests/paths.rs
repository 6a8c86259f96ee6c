mod common;

use std::sync::Arc;

use graphmill::hetero::HeteroGraph;
use graphmill::message_passing::{ExecPath, GnnModel, LayerKind, ModelOptions};
use graphmill::sampler::{sample_neighbors, SamplerConfig, Seeds};
use graphmill::store::{in_memory_stores, FeatureStore};
use proptest::prelude::*;

use common::{max_abs_diff, random_edges, random_tensor, rng};

fn kind() -> impl Strategy<Value = LayerKind> {
    prop::sample::select(LayerKind::ALL.to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn paths_agree_bitwise(seed in any::<u64>(), n in 1usize..40, e in 0usize..200, kind in kind()) {
        let mut r = rng(seed);
        let edges = random_edges(&mut r, n, e);
        let x = random_tensor(&mut r, &[n, 5]);
        let model = GnnModel::<f64>::new(kind, &[5, 6, 3], if kind == LayerKind::Gat { 3 } else { 1 }, seed).unwrap();
        let a = model.forward(&edges, &x, &ModelOptions::path(ExecPath::EdgeMaterialize)).unwrap();
        let b = model.forward(&edges, &x, &ModelOptions::path(ExecPath::SegmentFused)).unwrap();
        prop_assert_eq!(a.shape(), &[n, 3][..]);
        prop_assert_eq!(a.to_vec(), b.to_vec());
    }

    #[test]
    fn trimming_keeps_seed_rows(seed in any::<u64>(), n in 2usize..80, e in 1usize..400, kind in kind(),
                                fanouts in prop::collection::vec(prop::sample::select(vec![-1i64, 1, 2, 4]), 1..4)) {
        let mut r = rng(seed);
        let edges = random_edges(&mut r, n, e);
        let g = Arc::new(HeteroGraph::homogeneous(random_tensor(&mut r, &[n, 4]), edges).unwrap());
        let store = in_memory_stores(&g);
        let seeds: Vec<usize> = (0..3).map(|i| (seed as usize + 7 * i) % n).collect();
        let sub = sample_neighbors(&store, &Seeds::of("node", seeds), &SamplerConfig::new(fanouts.clone(), seed)).unwrap();
        let x = store.get("node", &sub.node_ids["node"], "x").unwrap();
        let counts = sub.hop_counts().unwrap();
        let mut widths = vec![4];
        widths.extend(std::iter::repeat_n(5, fanouts.len()));
        let model = GnnModel::<f64>::new(kind, &widths, 1, seed).unwrap();
        let e = sub.homogeneous_edges().unwrap();
        let full = model.forward(e, &x, &ModelOptions::default()).unwrap();
        let trimmed = model.forward(e, &x, &ModelOptions { trim: Some(&counts), ..Default::default() }).unwrap();
        let k = counts.nodes[0];
        let d = max_abs_diff(&full.narrow_rows(0, k).unwrap().to_vec(), &trimmed.narrow_rows(0, k).unwrap().to_vec());
        prop_assert!(d <= 1e-12, "seed rows differ by {}", d);
    }
}
