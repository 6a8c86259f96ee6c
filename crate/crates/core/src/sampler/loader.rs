//! Parallel mini-batch loading with ordered delivery.
//!
//! Workers claim batch indices in order and hold one of a fixed number of
//! tokens per batch until the consumer takes it, which bounds the number of
//! batches in flight. Finished batches pass through a reorder buffer, so the
//! stream is identical for any worker count.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;

use crossbeam_channel::{bounded, unbounded, Receiver, Sender};

use super::{mix, sample_neighbors, SampledSubgraph, SamplerConfig, Seeds};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::store::{FeatureStore, GraphStore, FEATURES};
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeedBatch {
    pub node_type: String,
    pub nodes: Vec<usize>,
    pub times: Option<Vec<i64>>,
    pub labels: Option<Vec<usize>>,
}

impl SeedBatch {
    /// Splits a seed table into consecutive batches of `batch_size`.
    pub fn chunks(
        node_type: &str,
        nodes: &[usize],
        times: Option<&[i64]>,
        labels: Option<&[usize]>,
        batch_size: usize,
    ) -> Vec<SeedBatch> {
        let size = batch_size.max(1);
        (0..nodes.len())
            .step_by(size)
            .map(|lo| {
                let hi = (lo + size).min(nodes.len());
                SeedBatch {
                    node_type: node_type.to_string(),
                    nodes: nodes[lo..hi].to_vec(),
                    times: times.map(|t| t[lo..hi].to_vec()),
                    labels: labels.map(|l| l[lo..hi].to_vec()),
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct MiniBatch<T: Scalar> {
    pub index: usize,
    pub subgraph: SampledSubgraph,
    /// Gathered features per node type, aligned with `subgraph.node_ids`.
    pub x: BTreeMap<String, Tensor<T>>,
    pub labels: Option<Vec<usize>>,
}

pub type Transform<T> = Arc<dyn Fn(MiniBatch<T>) -> Result<MiniBatch<T>> + Send + Sync>;

struct Job<T: Scalar> {
    fs: Arc<dyn FeatureStore<T>>,
    gs: Arc<dyn GraphStore>,
    batches: Vec<SeedBatch>,
    cfg: SamplerConfig,
    transform: Option<Transform<T>>,
}

impl<T: Scalar> Job<T> {
    fn build(&self, index: usize) -> Result<MiniBatch<T>> {
        self.build_inner(index).map_err(|e| Error::Batch {
            index,
            source: Box::new(e),
        })
    }

    fn build_inner(&self, index: usize) -> Result<MiniBatch<T>> {
        let b = &self.batches[index];
        let seeds = Seeds {
            nodes: [(b.node_type.clone(), b.nodes.clone())].into(),
            times: b.times.as_ref().map(|t| [(b.node_type.clone(), t.clone())].into()),
        };
        let mut cfg = self.cfg.clone();
        cfg.seed = mix(&[self.cfg.seed, index as u64]);
        let subgraph = sample_neighbors(self.gs.as_ref(), &seeds, &cfg)?;
        let mut x = BTreeMap::new();
        for (name, ids) in &subgraph.node_ids {
            x.insert(name.clone(), self.fs.get(name, ids, FEATURES)?);
        }
        let batch = MiniBatch {
            index,
            subgraph,
            x,
            labels: b.labels.clone(),
        };
        match &self.transform {
            Some(t) => t(batch),
            None => Ok(batch),
        }
    }
}

/// Iterator over mini-batches in index order.
pub struct Loader<T: Scalar> {
    job: Arc<Job<T>>,
    next: usize,
    pending: BTreeMap<usize, Result<MiniBatch<T>>>,
    results: Option<Receiver<(usize, Result<MiniBatch<T>>)>>,
    tokens: Option<Sender<()>>,
    stop: Arc<AtomicBool>,
    workers: Vec<JoinHandle<()>>,
}

/// `workers == 0` builds batches on the consuming thread.
pub fn make_loader<T: Scalar>(
    fs: Arc<dyn FeatureStore<T>>,
    gs: Arc<dyn GraphStore>,
    batches: Vec<SeedBatch>,
    cfg: SamplerConfig,
    workers: usize,
    transform: Option<Transform<T>>,
) -> Result<Loader<T>> {
    cfg.validate()?;
    let job = Arc::new(Job {
        fs,
        gs,
        batches,
        cfg,
        transform,
    });
    let stop = Arc::new(AtomicBool::new(false));
    let mut loader = Loader {
        job: Arc::clone(&job),
        next: 0,
        pending: BTreeMap::new(),
        results: None,
        tokens: None,
        stop: Arc::clone(&stop),
        workers: Vec::new(),
    };
    if workers == 0 {
        return Ok(loader);
    }
    let in_flight = 2 * workers;
    let (token_tx, token_rx) = bounded::<()>(in_flight);
    for _ in 0..in_flight {
        token_tx.send(()).expect("fresh channel");
    }
    let (result_tx, result_rx) = unbounded();
    let claim = Arc::new(AtomicUsize::new(0));
    for _ in 0..workers {
        let job = Arc::clone(&job);
        let token_rx = token_rx.clone();
        let result_tx = result_tx.clone();
        let claim = Arc::clone(&claim);
        let stop = Arc::clone(&stop);
        loader.workers.push(std::thread::spawn(move || {
            while token_rx.recv().is_ok() {
                if stop.load(Ordering::Relaxed) {
                    break;
                }
                let i = claim.fetch_add(1, Ordering::SeqCst);
                if i >= job.batches.len() {
                    break;
                }
                if result_tx.send((i, job.build(i))).is_err() {
                    break;
                }
            }
        }));
    }
    loader.results = Some(result_rx);
    loader.tokens = Some(token_tx);
    Ok(loader)
}

impl<T: Scalar> Loader<T> {
    pub fn num_batches(&self) -> usize {
        self.job.batches.len()
    }
}

impl<T: Scalar> Iterator for Loader<T> {
    type Item = Result<MiniBatch<T>>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.next >= self.job.batches.len() {
            return None;
        }
        let i = self.next;
        self.next += 1;
        let Some(results) = &self.results else {
            return Some(self.job.build(i));
        };
        let item = loop {
            if let Some(r) = self.pending.remove(&i) {
                break r;
            }
            match results.recv() {
                Ok((j, r)) => {
                    self.pending.insert(j, r);
                }
                Err(_) => {
                    break Err(Error::Batch {
                        index: i,
                        source: Box::new(Error::Sampler("loader worker exited".into())),
                    })
                }
            }
        };
        if let Some(t) = &self.tokens {
            let _ = t.send(());
        }
        Some(item)
    }
}

impl<T: Scalar> Drop for Loader<T> {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::Relaxed);
        self.tokens.take();
        self.results.take();
        for w in self.workers.drain(..) {
            let _ = w.join();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::edge_index::EdgeIndex;
    use crate::hetero::HeteroGraph;
    use crate::store::in_memory_stores;

    fn stores() -> (Arc<dyn FeatureStore<f64>>, Arc<dyn GraphStore>) {
        let n = 40;
        let pairs: Vec<(usize, usize)> = (0..n)
            .flat_map(|i| [((i * 7 + 3) % n, i), ((i * 11 + 5) % n, i)])
            .collect();
        let x = Tensor::from_vec((0..n * 2).map(|v| v as f64).collect(), &[n, 2]).unwrap();
        let g = Arc::new(HeteroGraph::homogeneous(x, EdgeIndex::from_pairs(&pairs, n).unwrap()).unwrap());
        let s = Arc::new(in_memory_stores(&g));
        (s.clone(), s)
    }

    fn run(workers: usize) -> Vec<(Vec<usize>, Vec<f64>)> {
        let (fs, gs) = stores();
        let nodes: Vec<usize> = (0..40).collect();
        let batches = SeedBatch::chunks("node", &nodes, None, None, 3);
        let loader = make_loader(fs, gs, batches, SamplerConfig::new(vec![1, 1], 9), workers, None).unwrap();
        loader
            .map(|b| {
                let b = b.unwrap();
                (b.subgraph.node_ids["node"].clone(), b.x["node"].to_vec())
            })
            .collect()
    }

    #[test]
    fn stream_independent_of_workers() {
        let serial = run(0);
        assert_eq!(serial.len(), 14);
        assert_eq!(serial, run(1));
        assert_eq!(serial, run(4));
    }

    #[test]
    fn errors_are_tagged_with_batch_index() {
        let (fs, gs) = stores();
        let batches = vec![
            SeedBatch {
                node_type: "node".into(),
                nodes: vec![0],
                times: None,
                labels: None,
            },
            SeedBatch {
                node_type: "node".into(),
                nodes: vec![99],
                times: None,
                labels: None,
            },
        ];
        let out: Vec<_> = make_loader(fs, gs, batches, SamplerConfig::new(vec![1], 0), 2, None)
            .unwrap()
            .collect();
        assert!(out[0].is_ok());
        assert!(matches!(out[1], Err(Error::Batch { index: 1, .. })));
    }

    #[test]
    fn early_drop_joins_workers() {
        let (fs, gs) = stores();
        let nodes: Vec<usize> = (0..40).collect();
        let batches = SeedBatch::chunks("node", &nodes, None, None, 1);
        let mut loader = make_loader(fs, gs, batches, SamplerConfig::new(vec![2], 0), 3, None).unwrap();
        assert!(loader.next().unwrap().is_ok());
        drop(loader);
    }
}
