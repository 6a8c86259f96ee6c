mod common;

use std::collections::HashSet;
use std::sync::Arc;

use graphmill::hetero::HeteroGraph;
use graphmill::sampler::{make_loader, sample_neighbors, SamplerConfig, SeedBatch, Seeds, TemporalStrategy};
use graphmill::store::{in_memory_stores, InMemoryStore};
use graphmill::Tensor;

use common::{random_edges, rng};

fn store(n: usize, e: usize, seed: u64) -> InMemoryStore<f32> {
    let edges = random_edges(&mut rng(seed), n, e);
    let x = Tensor::<f32>::from_f64(&(0..n).map(|i| i as f64).collect::<Vec<_>>(), &[n, 1]).unwrap();
    in_memory_stores(&Arc::new(HeteroGraph::homogeneous(x, edges).unwrap()))
}

#[test]
fn zero_fanout_returns_seeds_only() {
    let s = store(30, 200, 1);
    let sub = sample_neighbors(
        &s,
        &Seeds::of("node", vec![3, 9, 3]),
        &SamplerConfig::new(vec![0, 0], 0),
    )
    .unwrap();
    assert_eq!(sub.node_ids["node"], [3, 9]);
    assert_eq!(sub.seed_map["node"], [0, 1, 0]);
    assert_eq!(sub.homogeneous_edges().unwrap().num_edges(), 0);
}

#[test]
fn disjoint_groups_stay_apart() {
    let s = store(40, 400, 2);
    let mut cfg = SamplerConfig::new(vec![3, 3], 5);
    cfg.disjoint = true;
    let sub = sample_neighbors(&s, &Seeds::of("node", vec![1, 1, 7]), &cfg).unwrap();
    let batch = &sub.batch["node"];
    assert_eq!(&batch[..3], [0, 1, 2]);
    let e = sub.homogeneous_edges().unwrap();
    for (u, v) in e.pairs() {
        assert_eq!(batch[u], batch[v]);
    }
    let per_group = |g: usize| -> HashSet<usize> {
        batch
            .iter()
            .zip(&sub.node_ids["node"])
            .filter(|(b, _)| **b == g)
            .map(|(_, id)| *id)
            .collect()
    };
    assert!(per_group(0).contains(&1) && per_group(1).contains(&1));
}

#[test]
fn replacement_may_repeat_edges() {
    let s = store(3, 4, 3);
    let mut cfg = SamplerConfig::new(vec![50], 0);
    cfg.replace = true;
    let sub = sample_neighbors(&s, &Seeds::of("node", vec![0, 1, 2]), &cfg).unwrap();
    let ids = sub.edge_ids.values().next().unwrap();
    let distinct: HashSet<&usize> = ids.iter().collect();
    assert!(ids.len() > distinct.len());
}

#[test]
fn invalid_configs_are_rejected() {
    let s = store(10, 30, 4);
    assert!(sample_neighbors(&s, &Seeds::of("node", vec![10]), &SamplerConfig::new(vec![2], 0)).is_err());
    assert!(sample_neighbors(&s, &Seeds::of("article", vec![0]), &SamplerConfig::new(vec![2], 0)).is_err());
    assert!(sample_neighbors(&s, &Seeds::of("node", vec![0]), &SamplerConfig::new(vec![-2], 0)).is_err());
    let mut cfg = SamplerConfig::new(vec![2], 0);
    cfg.temporal = TemporalStrategy::Uniform;
    assert!(sample_neighbors(&s, &Seeds::of("node", vec![0]), &cfg).is_err());
}

#[test]
fn loader_keeps_batch_order_and_features() {
    let s = Arc::new(store(100, 800, 5));
    let nodes: Vec<usize> = (0..100).rev().collect();
    let labels: Vec<usize> = nodes.iter().map(|v| v % 3).collect();
    let batches = SeedBatch::chunks("node", &nodes, None, Some(&labels), 16);
    let loader = make_loader(
        s.clone(),
        s.clone(),
        batches,
        SamplerConfig::new(vec![4, 4], 1),
        3,
        None,
    )
    .unwrap();
    assert_eq!(loader.num_batches(), 7);
    let mut seen = Vec::new();
    for (i, b) in loader.enumerate() {
        let b = b.unwrap();
        assert_eq!(b.index, i);
        let ids = &b.subgraph.node_ids["node"];
        let x: Vec<f64> = b.x["node"].to_f64_vec();
        assert!(ids.iter().zip(&x).all(|(&id, &v)| id as f64 == v));
        let labels = b.labels.unwrap();
        let seeds: Vec<usize> = b.subgraph.seed_map["node"].iter().map(|&l| ids[l]).collect();
        assert!(seeds.iter().zip(&labels).all(|(v, y)| v % 3 == *y));
        seen.extend(seeds);
    }
    assert_eq!(seen, nodes);
}
