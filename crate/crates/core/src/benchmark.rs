//! Forward+backward timing of one sampled batch under the three run modes,
//! behind a correctness gate.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::edge_index::EdgeIndex;
use crate::error::{Error, Result};
use crate::hetero::HeteroGraph;
use crate::message_passing::{forward_backward_bench, ExecPath, GnnModel, LayerKind, ModelOptions};
use crate::sampler::{sample_neighbors, HopCounts, SamplerConfig, Seeds};
use crate::scalar::Scalar;
use crate::store::{in_memory_stores, FeatureStore, GraphStore, InMemoryStore, FEATURES};
use crate::synth::{power_law_edges, uniform_features};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RunMode {
    #[serde(rename = "baseline")]
    Baseline,
    #[serde(rename = "fused")]
    Fused,
    #[serde(rename = "fused+trim")]
    FusedTrim,
}

impl RunMode {
    pub const ALL: [RunMode; 3] = [RunMode::Baseline, RunMode::Fused, RunMode::FusedTrim];

    pub fn name(self) -> &'static str {
        match self {
            RunMode::Baseline => "baseline",
            RunMode::Fused => "fused",
            RunMode::FusedTrim => "fused+trim",
        }
    }

    fn options<'a, T: Scalar>(self, counts: &'a HopCounts) -> ModelOptions<'a, T> {
        match self {
            RunMode::Baseline => ModelOptions::path(ExecPath::EdgeMaterialize),
            RunMode::Fused => ModelOptions::path(ExecPath::SegmentFused),
            RunMode::FusedTrim => ModelOptions {
                trim: Some(counts),
                ..ModelOptions::path(ExecPath::SegmentFused)
            },
        }
    }
}

impl fmt::Display for RunMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RunMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        RunMode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::MessagePassing(format!("unknown run mode `{s}`")))
    }
}

/// A BFS-ordered homogeneous batch.
#[derive(Debug, Clone)]
pub struct BenchBatch<T: Scalar> {
    pub edges: EdgeIndex,
    pub x: Tensor<T>,
    pub counts: HopCounts,
    pub num_seeds: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Workload {
    pub source: String,
    pub num_nodes: usize,
    pub num_edges: usize,
    pub feature_dim: usize,
    pub hidden_dim: usize,
    pub fanouts: Vec<i64>,
    pub num_seeds: usize,
    pub batch_nodes: usize,
    pub batch_edges: usize,
    pub seed: u64,
    pub warmup: usize,
    pub repeat: usize,
    pub dtype: &'static str,
}

pub const DEFAULT_NUM_NODES: usize = 10_000;
pub const DEFAULT_NUM_EDGES: usize = 100_000;
pub const DEFAULT_DIM: usize = 64;
pub const DEFAULT_FANOUTS: [i64; 2] = [10, 10];
pub const DEFAULT_NUM_SEEDS: usize = 2048;
pub const POWER_LAW_EXPONENT: f64 = 0.5;

/// The default synthetic workload: a power-law graph with 10^4 nodes,
/// 10^5 edges and 64 features.
pub fn synthetic_store<T: Scalar>(
    num_nodes: usize,
    num_edges: usize,
    dim: usize,
    seed: u64,
) -> Result<InMemoryStore<T>> {
    let edges = power_law_edges(num_nodes, num_edges, POWER_LAW_EXPONENT, seed)?;
    let x = uniform_features(num_nodes, dim, seed ^ 0x5eed);
    Ok(in_memory_stores(&Arc::new(HeteroGraph::homogeneous(x, edges)?)))
}

/// Samples `num_seeds` distinct seeds of `node_type` and their
/// neighborhood along the store's only edge type into that node type.
pub fn sample_bench_batch<T: Scalar>(
    fs: &dyn FeatureStore<T>,
    gs: &dyn GraphStore,
    node_type: &str,
    num_seeds: usize,
    fanouts: &[i64],
    seed: u64,
) -> Result<BenchBatch<T>> {
    let n = gs.num_nodes(node_type)?;
    if num_seeds == 0 || num_seeds > n {
        return Err(Error::Sampler(format!("{num_seeds} seeds from {n} nodes")));
    }
    let ets = gs.edge_types();
    if ets.len() != 1 || ets[0].src != node_type || ets[0].dst != node_type {
        return Err(Error::Sampler(format!(
            "benchmarks need one edge type over `{node_type}`, found {}",
            ets.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let seeds = index::sample(&mut rng, n, num_seeds).into_vec();
    let sub = sample_neighbors(
        gs,
        &Seeds::of(node_type, seeds),
        &SamplerConfig::new(fanouts.to_vec(), seed),
    )?;
    Ok(BenchBatch {
        edges: sub.homogeneous_edges()?.clone(),
        x: fs.get(node_type, &sub.node_ids[node_type], FEATURES)?,
        counts: sub.hop_counts()?,
        num_seeds,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchOptions {
    pub layers: Vec<LayerKind>,
    /// Baseline is always measured; it anchors the speedups.
    pub modes: Vec<RunMode>,
    pub hidden_dim: usize,
    pub heads: usize,
    pub warmup: usize,
    pub repeat: usize,
    pub seed: u64,
    /// Largest admissible |seed row - baseline seed row|.
    pub tolerance: f64,
}

impl Default for BenchOptions {
    fn default() -> Self {
        BenchOptions {
            layers: LayerKind::ALL.to_vec(),
            modes: RunMode::ALL.to_vec(),
            hidden_dim: 64,
            heads: 2,
            warmup: 3,
            repeat: 20,
            seed: 0,
            tolerance: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModeResult {
    pub layer: LayerKind,
    pub mode: RunMode,
    pub mean_ms: f64,
    pub std_ms: f64,
    pub speedup: f64,
    pub samples_ms: Vec<f64>,
    /// Largest seed-row deviation from the baseline.
    pub max_abs_diff: f64,
    /// FNV-1a over the seed rows' bits.
    pub output_digest: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchReport {
    pub workload: Workload,
    pub results: Vec<ModeResult>,
}

fn digest<T: Scalar>(values: &[T]) -> String {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let mut buf = Vec::with_capacity(8);
    for v in values {
        buf.clear();
        (*v).write_le(&mut buf);
        for &b in &buf {
            h = (h ^ b as u64).wrapping_mul(0x0100_0000_01b3);
        }
    }
    format!("{h:016x}")
}

/// Seed rows of one forward pass per mode, then timings. Fails before any
/// timing when a mode's seed rows leave the tolerance.
pub fn run_benchmark<T: Scalar>(batch: &BenchBatch<T>, opts: &BenchOptions) -> Result<Vec<ModeResult>> {
    if opts.repeat == 0 {
        return Err(Error::MessagePassing("repeat must be at least 1".into()));
    }
    let k = batch.counts.num_hops();
    let mut widths = vec![batch.x.row_width()];
    widths.extend(std::iter::repeat_n(opts.hidden_dim, k.max(1)));
    let mut modes = vec![RunMode::Baseline];
    modes.extend(opts.modes.iter().filter(|m| **m != RunMode::Baseline));
    let mut results = Vec::new();
    for &kind in &opts.layers {
        let model = GnnModel::<T>::new(kind, &widths, opts.heads, opts.seed)?;
        let mut seed_rows = Vec::new();
        for &mode in &modes {
            let out = model.forward(&batch.edges, &batch.x, &mode.options(&batch.counts))?;
            let rows = out.narrow_rows(0, batch.num_seeds)?.to_vec();
            let max_abs_diff = match seed_rows.first() {
                None => 0.0,
                Some((_, base)) => rows
                    .iter()
                    .zip(base)
                    .map(|(a, b): (&T, &T)| (a.to_f64_lossy() - b.to_f64_lossy()).abs())
                    .fold(0.0, f64::max),
            };
            if !(max_abs_diff <= opts.tolerance) {
                return Err(Error::CorrectnessGate {
                    layer: kind.to_string(),
                    mode: mode.to_string(),
                    max_diff: max_abs_diff,
                });
            }
            seed_rows.push((max_abs_diff, rows));
        }
        let mut baseline_ms = None;
        for (&mode, (max_abs_diff, rows)) in modes.iter().zip(&seed_rows) {
            let stats = forward_backward_bench(
                &model,
                &batch.edges,
                &batch.x,
                &mode.options(&batch.counts),
                batch.num_seeds,
                opts.warmup,
                opts.repeat,
            )?;
            let base = *baseline_ms.get_or_insert(stats.mean_ms);
            if mode == RunMode::Baseline || opts.modes.contains(&mode) {
                results.push(ModeResult {
                    layer: kind,
                    mode,
                    mean_ms: stats.mean_ms,
                    std_ms: stats.std_ms,
                    speedup: base / stats.mean_ms,
                    samples_ms: stats.samples_ms,
                    max_abs_diff: *max_abs_diff,
                    output_digest: digest(rows),
                });
            }
        }
    }
    Ok(results)
}
