//! Mini-batch node classification on a homogeneous graph.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::message_passing::{GnnModel, LayerKind, ModelOptions};
use crate::optim::Adam;
use crate::sampler::{make_loader, mix, MiniBatch, SamplerConfig, SeedBatch};
use crate::scalar::Scalar;
use crate::store::{FeatureStore, GraphStore, FEATURES};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainConfig {
    pub kind: LayerKind,
    pub hidden: usize,
    pub epochs: usize,
    pub lr: f64,
    pub fanouts: Vec<i64>,
    pub batch_size: usize,
    pub seed: u64,
    pub workers: usize,
    pub heads: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            kind: LayerKind::Gcn,
            hidden: 16,
            epochs: 50,
            lr: 0.01,
            fanouts: vec![10, 10],
            batch_size: 64,
            seed: 0,
            workers: 0,
            heads: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochMetrics {
    /// 0 is the untrained model.
    pub epoch: usize,
    /// Mean training loss over the epoch's batches; the evaluation loss for
    /// epoch 0.
    pub train_loss: f64,
    pub loss: f64,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainReport {
    pub config: TrainConfig,
    pub num_classes: usize,
    pub num_seeds: usize,
    pub history: Vec<EpochMetrics>,
}

impl TrainReport {
    pub fn final_metrics(&self) -> &EpochMetrics {
        self.history.last().expect("initial metrics are always recorded")
    }
}

struct Task<T: Scalar> {
    fs: Arc<dyn FeatureStore<T>>,
    gs: Arc<dyn GraphStore>,
    node_type: String,
    nodes: Vec<usize>,
    labels: Vec<usize>,
    cfg: TrainConfig,
}

impl<T: Scalar> Task<T> {
    fn batches(&self, order: &[usize]) -> Vec<SeedBatch> {
        let nodes: Vec<usize> = order.iter().map(|&i| self.nodes[i]).collect();
        let labels: Vec<usize> = order.iter().map(|&i| self.labels[i]).collect();
        SeedBatch::chunks(&self.node_type, &nodes, None, Some(&labels), self.cfg.batch_size)
    }

    fn for_each_batch(
        &self,
        order: &[usize],
        sampler_seed: u64,
        mut f: impl FnMut(MiniBatch<T>) -> Result<()>,
    ) -> Result<()> {
        let loader = make_loader(
            Arc::clone(&self.fs),
            Arc::clone(&self.gs),
            self.batches(order),
            SamplerConfig::new(self.cfg.fanouts.clone(), sampler_seed),
            self.cfg.workers,
            None,
        )?;
        for batch in loader {
            f(batch?)?;
        }
        Ok(())
    }

    /// Seed logits of one batch and its labels.
    fn logits(&self, model: &GnnModel<T>, b: &MiniBatch<T>) -> Result<(crate::Tensor<T>, Vec<usize>)> {
        let edges = b.subgraph.homogeneous_edges()?;
        let out = model.forward(edges, &b.x[&self.node_type], &ModelOptions::default())?;
        let rows = out.gather_rows(&b.subgraph.seed_map[&self.node_type])?;
        Ok((rows, b.labels.clone().unwrap_or_default()))
    }

    fn evaluate(&self, model: &GnnModel<T>) -> Result<(f64, f64)> {
        let order: Vec<usize> = (0..self.nodes.len()).collect();
        let (mut loss, mut correct) = (0.0, 0usize);
        self.for_each_batch(&order, mix(&[self.cfg.seed, u64::MAX]), |b| {
            let (logits, labels) = self.logits(model, &b)?;
            loss += logits.cross_entropy(&labels)?.item()?.to_f64_lossy() * labels.len() as f64;
            let c = logits.row_width();
            correct += logits
                .data()
                .chunks_exact(c)
                .zip(&labels)
                .filter(|(row, &y)| argmax(row) == y)
                .count();
            Ok(())
        })?;
        let n = self.nodes.len() as f64;
        Ok((loss / n, correct as f64 / n))
    }
}

fn argmax<T: Scalar>(row: &[T]) -> usize {
    let mut best = 0;
    for (i, v) in row.iter().enumerate() {
        if *v > row[best] {
            best = i;
        }
    }
    best
}

/// Trains a fresh model of `cfg.kind` on the labeled `nodes`, evaluating on
/// the same nodes after every epoch.
pub fn train_node_classifier<T: Scalar>(
    fs: Arc<dyn FeatureStore<T>>,
    gs: Arc<dyn GraphStore>,
    node_type: &str,
    nodes: &[usize],
    labels: &[usize],
    cfg: &TrainConfig,
) -> Result<(GnnModel<T>, TrainReport)> {
    if nodes.is_empty() {
        return Err(Error::Train("no labeled seeds".into()));
    }
    if labels.len() != nodes.len() {
        return Err(Error::Train(format!(
            "{} labels for {} seeds",
            labels.len(),
            nodes.len()
        )));
    }
    if cfg.batch_size == 0 || cfg.hidden == 0 || cfg.fanouts.is_empty() {
        return Err(Error::Train(
            "batch size, hidden width and fanouts must be non-empty".into(),
        ));
    }
    if !(cfg.lr > 0.0) {
        return Err(Error::Train(format!("learning rate {} is not positive", cfg.lr)));
    }
    let ets = gs.edge_types();
    if ets.len() != 1 || ets[0].src != node_type || ets[0].dst != node_type {
        return Err(Error::Train(format!(
            "training needs a single edge type over `{node_type}`"
        )));
    }
    let num_classes = labels.iter().max().map_or(0, |m| m + 1).max(2);
    let in_dim = fs
        .catalog()
        .into_iter()
        .find(|a| a.node_type == node_type && a.name == FEATURES)
        .ok_or_else(|| Error::UnknownNodeType(node_type.to_string()))?
        .width;
    let mut widths = vec![in_dim];
    widths.extend(std::iter::repeat_n(cfg.hidden, cfg.fanouts.len() - 1));
    widths.push(num_classes);
    let mut model = GnnModel::<T>::new(cfg.kind, &widths, cfg.heads, cfg.seed)?;

    let task = Task {
        fs,
        gs,
        node_type: node_type.to_string(),
        nodes: nodes.to_vec(),
        labels: labels.to_vec(),
        cfg: cfg.clone(),
    };
    let (loss, accuracy) = task.evaluate(&model)?;
    let mut history = vec![EpochMetrics {
        epoch: 0,
        train_loss: loss,
        loss,
        accuracy,
    }];
    let mut adam = Adam::new(cfg.lr);
    for epoch in 1..=cfg.epochs {
        let epoch_seed = mix(&[cfg.seed, epoch as u64]);
        let order = shuffled(nodes.len(), epoch_seed);
        let (mut total, mut count) = (0.0, 0usize);
        task.for_each_batch(&order, epoch_seed, |b| {
            let (logits, labels) = task.logits(&model, &b)?;
            let l = logits.cross_entropy(&labels)?;
            let v = l.item()?.to_f64_lossy();
            if !v.is_finite() {
                return Err(Error::NonFiniteLoss { epoch });
            }
            l.backward()?;
            adam.step(model.parameters_mut())?;
            total += v * labels.len() as f64;
            count += labels.len();
            Ok(())
        })?;
        let (loss, accuracy) = task.evaluate(&model)?;
        history.push(EpochMetrics {
            epoch,
            train_loss: total / count as f64,
            loss,
            accuracy,
        });
    }
    Ok((
        model,
        TrainReport {
            config: cfg.clone(),
            num_classes,
            num_seeds: nodes.len(),
            history,
        },
    ))
}

fn shuffled(n: usize, seed: u64) -> Vec<usize> {
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
    order
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hetero::HeteroGraph;
    use crate::store::in_memory_stores;
    use crate::synth::two_class_graph;

    fn setup() -> (Arc<dyn FeatureStore<f32>>, Arc<dyn GraphStore>, Vec<usize>) {
        let g = two_class_graph::<f32>(200, 8, 5, 3).unwrap();
        let s = Arc::new(in_memory_stores(&Arc::new(
            HeteroGraph::homogeneous(g.x, g.edges).unwrap(),
        )));
        (s.clone(), s, g.labels)
    }

    #[test]
    fn gcn_learns_separable_classes() {
        let (fs, gs, labels) = setup();
        let nodes: Vec<usize> = (0..labels.len()).collect();
        let cfg = TrainConfig {
            epochs: 20,
            ..Default::default()
        };
        let (_, report) = train_node_classifier(fs, gs, "node", &nodes, &labels, &cfg).unwrap();
        assert_eq!(report.history.len(), 21);
        assert!(report.final_metrics().accuracy >= 0.95, "{:?}", report.final_metrics());
    }

    #[test]
    fn zero_epochs_reports_initial_metrics() {
        let (fs, gs, labels) = setup();
        let nodes: Vec<usize> = (0..labels.len()).collect();
        let cfg = TrainConfig {
            epochs: 0,
            ..Default::default()
        };
        let (_, report) = train_node_classifier(fs.clone(), gs.clone(), "node", &nodes, &labels, &cfg).unwrap();
        assert_eq!(report.history.len(), 1);
        assert!(train_node_classifier(fs, gs, "node", &nodes, &labels[..3], &cfg).is_err());
    }
}
