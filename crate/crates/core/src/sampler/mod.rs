//! Multi-hop neighbor sampling, temporal sampling, trimming and loading.
//!
//! A batch is grown hop by hop from its seeds. Every frontier node draws up
//! to `fanouts[hop]` of its incoming edges per edge type; newly discovered
//! endpoints form the next frontier. Nodes are relabeled in discovery order,
//! so each node type's rows are laid out hop by hop with the seeds first,
//! and edges are emitted grouped by (ascending) destination. Per-hop counts
//! record that layout for [`trim_to_layer`].
//!
//! Randomness for one frontier node is drawn from a stream keyed by
//! `(seed, hop, node, edge type, seed group)`, so results never depend on
//! iteration or thread scheduling.

mod loader;
mod trim;

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

pub use loader::{make_loader, Loader, MiniBatch, SeedBatch, Transform};
pub use trim::{trim_to_layer, HopCounts, TrimmedViews};

use crate::edge_index::{Claims, CsrView, EdgeIndex, SortOrder};
use crate::error::{Error, Result};
use crate::hetero::{EdgeType, HeteroHopCounts};
use crate::store::GraphStore;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// Follow incoming edges only (the message-flow direction).
    #[default]
    Directional,
    /// Also follow outgoing edges, emitted reversed toward the frontier.
    Bidirectional,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TemporalStrategy {
    #[default]
    None,
    Uniform,
    /// The admissible edges with the largest timestamps; ties go to the
    /// larger edge position.
    MostRecent,
    /// Draw without replacement with weight `exp(-rate * (t_seed - t_e))`.
    Anneal(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SamplerConfig {
    /// Per-hop budgets; `-1` takes every neighbor.
    pub fanouts: Vec<i64>,
    pub replace: bool,
    pub direction: Direction,
    pub disjoint: bool,
    pub temporal: TemporalStrategy,
    pub seed: u64,
}

impl SamplerConfig {
    pub fn new(fanouts: Vec<i64>, seed: u64) -> Self {
        SamplerConfig {
            fanouts,
            replace: false,
            direction: Direction::Directional,
            disjoint: false,
            temporal: TemporalStrategy::None,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(f) = self.fanouts.iter().find(|&&f| f < -1) {
            return Err(Error::Sampler(format!("fanout {f} below -1")));
        }
        if let TemporalStrategy::Anneal(rate) = self.temporal {
            if !(rate > 0.0 && rate.is_finite()) {
                return Err(Error::Sampler(format!("anneal rate must be positive, got {rate}")));
            }
        }
        Ok(())
    }
}

/// Seed nodes per node type, optionally with one timestamp per seed.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Seeds {
    pub nodes: BTreeMap<String, Vec<usize>>,
    pub times: Option<BTreeMap<String, Vec<i64>>>,
}

impl Seeds {
    pub fn of(node_type: &str, nodes: Vec<usize>) -> Self {
        Seeds {
            nodes: [(node_type.to_string(), nodes)].into(),
            times: None,
        }
    }

    pub fn timed(node_type: &str, nodes: Vec<usize>, times: Vec<i64>) -> Self {
        Seeds {
            nodes: [(node_type.to_string(), nodes)].into(),
            times: Some([(node_type.to_string(), times)].into()),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// A relabeled multi-hop batch.
#[derive(Debug, Clone)]
pub struct SampledSubgraph {
    /// Original node ids per type, hop by hop, seeds first.
    pub node_ids: BTreeMap<String, Vec<usize>>,
    /// Seed group (global seed position) each node was discovered for;
    /// meaningful under disjoint sampling, all zero otherwise.
    pub batch: BTreeMap<String, Vec<usize>>,
    /// Relabeled edges, sorted by destination.
    pub edges: BTreeMap<EdgeType, EdgeIndex>,
    /// Original COO position of every sampled edge.
    pub edge_ids: BTreeMap<EdgeType, Vec<usize>>,
    pub num_sampled_nodes_per_hop: BTreeMap<String, Vec<usize>>,
    pub num_sampled_edges_per_hop: BTreeMap<EdgeType, Vec<usize>>,
    /// Local row of every seed, in seed order.
    pub seed_map: BTreeMap<String, Vec<usize>>,
    pub seed_times: Option<BTreeMap<String, Vec<i64>>>,
}

#[derive(Serialize)]
struct EdgeDump<'a> {
    src: &'a [usize],
    dst: &'a [usize],
    edge_ids: &'a [usize],
}

#[derive(Serialize)]
struct SubgraphDump<'a> {
    node_ids: &'a BTreeMap<String, Vec<usize>>,
    edges: BTreeMap<String, EdgeDump<'a>>,
    num_sampled_nodes_per_hop: &'a BTreeMap<String, Vec<usize>>,
    num_sampled_edges_per_hop: BTreeMap<String, &'a Vec<usize>>,
    seed_map: &'a BTreeMap<String, Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed_times: Option<&'a BTreeMap<String, Vec<i64>>>,
}

impl SampledSubgraph {
    pub fn num_nodes(&self, node_type: &str) -> usize {
        self.node_ids.get(node_type).map_or(0, Vec::len)
    }

    pub fn hetero_hop_counts(&self) -> HeteroHopCounts {
        HeteroHopCounts {
            nodes: self.num_sampled_nodes_per_hop.clone(),
            edges: self.num_sampled_edges_per_hop.clone(),
        }
    }

    /// Hop counts of a batch with one node type and one edge type.
    pub fn hop_counts(&self) -> Result<HopCounts> {
        match (
            self.num_sampled_nodes_per_hop.values().collect::<Vec<_>>().as_slice(),
            self.num_sampled_edges_per_hop.values().collect::<Vec<_>>().as_slice(),
        ) {
            ([n], [e]) => HopCounts::new((*n).clone(), (*e).clone()),
            _ => Err(Error::Sampler(
                "hop counts of a heterogeneous batch are per type".into(),
            )),
        }
    }

    /// The only edge index of a homogeneous batch.
    pub fn homogeneous_edges(&self) -> Result<&EdgeIndex> {
        match self.edges.values().collect::<Vec<_>>().as_slice() {
            [e] => Ok(e),
            _ => Err(Error::Sampler(format!("batch has {} edge types", self.edges.len()))),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let dump = SubgraphDump {
            node_ids: &self.node_ids,
            edges: self
                .edges
                .iter()
                .map(|(et, e)| {
                    (
                        et.to_string(),
                        EdgeDump {
                            src: e.src(),
                            dst: e.dst(),
                            edge_ids: &self.edge_ids[et],
                        },
                    )
                })
                .collect(),
            num_sampled_nodes_per_hop: &self.num_sampled_nodes_per_hop,
            num_sampled_edges_per_hop: self
                .num_sampled_edges_per_hop
                .iter()
                .map(|(et, c)| (et.to_string(), c))
                .collect(),
            seed_map: &self.seed_map,
            seed_times: self.seed_times.as_ref(),
        };
        Ok(serde_json::to_string_pretty(&dump)?)
    }
}

pub(crate) fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub(crate) fn mix(parts: &[u64]) -> u64 {
    parts.iter().fold(0x5851_f42d_4c95_7f2d, |h, &p| splitmix(h ^ p))
}

enum Lookup {
    Dense(Vec<usize>),
    Keyed(HashMap<(usize, usize), usize>),
}

struct TypeState {
    ids: Vec<usize>,
    batch: Vec<usize>,
    lookup: Lookup,
    per_hop: Vec<usize>,
    frontier: std::ops::Range<usize>,
    time: Option<Vec<i64>>,
}

impl TypeState {
    /// Local id of `(group, node)`, appending it when new.
    fn intern(&mut self, group: usize, node: usize, disjoint: bool) -> (usize, bool) {
        let next = self.ids.len();
        let (local, fresh) = match &mut self.lookup {
            Lookup::Dense(slots) => {
                if slots[node] == usize::MAX {
                    slots[node] = next;
                    (next, true)
                } else {
                    (slots[node], false)
                }
            }
            Lookup::Keyed(map) => {
                let key = (if disjoint { group } else { 0 }, node);
                match map.get(&key) {
                    Some(&l) => (l, false),
                    None => {
                        map.insert(key, next);
                        (next, true)
                    }
                }
            }
        };
        if fresh {
            self.ids.push(node);
            self.batch.push(group);
        }
        (local, fresh)
    }
}

struct OutEdges {
    src: Vec<usize>,
    dst: Vec<usize>,
    ids: Vec<usize>,
    per_hop: Vec<usize>,
}

/// One traversal rule: follow `et` backwards (incoming) or forwards.
struct Rule {
    et: EdgeType,
    incoming: bool,
    /// Edge type the sampled edges are emitted under.
    out: EdgeType,
    /// Node type of the discovered neighbors.
    neighbor: String,
    view: Arc<CsrView>,
    time: Option<Vec<i64>>,
    key: u64,
}

struct Candidate {
    edge: usize,
    neighbor: usize,
    time: Option<i64>,
}

/// Neighbor sampling; temporal when `cfg.temporal` is set (see
/// [`sample_temporal`]).
pub fn sample_neighbors(gs: &dyn GraphStore, seeds: &Seeds, cfg: &SamplerConfig) -> Result<SampledSubgraph> {
    if cfg.temporal != TemporalStrategy::None {
        return sample_temporal(gs, seeds, cfg);
    }
    sample(gs, seeds, cfg)
}

/// Sampling that admits only elements timestamped at or before their seed's
/// time. Batches are always disjoint so seeds may carry different times;
/// types without timestamps are not constrained.
pub fn sample_temporal(gs: &dyn GraphStore, seeds: &Seeds, cfg: &SamplerConfig) -> Result<SampledSubgraph> {
    if cfg.temporal == TemporalStrategy::None {
        return Err(Error::Sampler("temporal sampling needs a temporal strategy".into()));
    }
    if seeds.times.is_none() {
        return Err(Error::Sampler("temporal sampling needs seed times".into()));
    }
    let timed = gs.edge_types().iter().any(|et| matches!(gs.edge_time(et), Ok(Some(_))))
        || gs.node_types().iter().any(|t| matches!(gs.node_time(t), Ok(Some(_))));
    if !timed {
        return Err(Error::Sampler("temporal sampling on a graph without timestamps".into()));
    }
    let mut cfg = cfg.clone();
    cfg.disjoint = true;
    sample(gs, seeds, &cfg)
}

fn sample(gs: &dyn GraphStore, seeds: &Seeds, cfg: &SamplerConfig) -> Result<SampledSubgraph> {
    cfg.validate()?;
    let k = cfg.fanouts.len();
    let temporal = cfg.temporal != TemporalStrategy::None;

    let mut states: BTreeMap<String, TypeState> = BTreeMap::new();
    for name in gs.node_types() {
        let n = gs.num_nodes(&name)?;
        let lookup = if cfg.disjoint {
            Lookup::Keyed(HashMap::new())
        } else {
            Lookup::Dense(vec![usize::MAX; n])
        };
        let time = if temporal {
            gs.node_time(&name)?.map(<[i64]>::to_vec)
        } else {
            None
        };
        states.insert(
            name,
            TypeState {
                ids: Vec::new(),
                batch: Vec::new(),
                lookup,
                per_hop: Vec::with_capacity(k + 1),
                frontier: 0..0,
                time,
            },
        );
    }

    // seeds, one group per seed in (type, position) order
    let mut seed_map = BTreeMap::new();
    let mut group_time = Vec::new();
    let mut group = 0;
    for (name, nodes) in &seeds.nodes {
        let n = gs.num_nodes(name)?;
        let times = match &seeds.times {
            Some(t) => {
                let t = t
                    .get(name)
                    .ok_or_else(|| Error::Sampler(format!("no seed times for node type {name}")))?;
                if t.len() != nodes.len() {
                    return Err(Error::Sampler(format!(
                        "{} seed times for {} seeds of {name}",
                        t.len(),
                        nodes.len()
                    )));
                }
                Some(t)
            }
            None => None,
        };
        let state = states.get_mut(name).expect("known node type");
        let mut map = Vec::with_capacity(nodes.len());
        for (i, &s) in nodes.iter().enumerate() {
            if s >= n {
                return Err(Error::Sampler(format!("seed {s} out of range for {n} nodes of {name}")));
            }
            map.push(state.intern(group, s, cfg.disjoint).0);
            group_time.push(times.map_or(i64::MAX, |t| t[i]));
            group += 1;
        }
        seed_map.insert(name.clone(), map);
    }
    for s in states.values_mut() {
        s.per_hop.push(s.ids.len());
        s.frontier = 0..s.ids.len();
    }

    let mut rules = Vec::new();
    for (i, et) in gs.edge_types().into_iter().enumerate() {
        let time = if temporal {
            gs.edge_time(&et)?.map(<[i64]>::to_vec)
        } else {
            None
        };
        rules.push(Rule {
            incoming: true,
            out: et.clone(),
            neighbor: et.src.clone(),
            view: gs.csc(&et)?,
            time: time.clone(),
            key: 2 * i as u64,
            et: et.clone(),
        });
        if cfg.direction == Direction::Bidirectional {
            let out = if et.src == et.dst { et.clone() } else { et.reversed() };
            rules.push(Rule {
                incoming: false,
                out,
                neighbor: et.dst.clone(),
                view: gs.csr(&et)?,
                time,
                key: 2 * i as u64 + 1,
                et,
            });
        }
    }
    let mut out: BTreeMap<EdgeType, OutEdges> = rules
        .iter()
        .map(|r| {
            (
                r.out.clone(),
                OutEdges {
                    src: Vec::new(),
                    dst: Vec::new(),
                    ids: Vec::new(),
                    per_hop: vec![0; k],
                },
            )
        })
        .collect();

    let names: Vec<String> = states.keys().cloned().collect();
    let mut cands = Vec::new();
    for (hop, &fanout) in cfg.fanouts.iter().enumerate() {
        let frontiers: Vec<(String, std::ops::Range<usize>)> =
            names.iter().map(|n| (n.clone(), states[n].frontier.clone())).collect();
        for (name, frontier) in &frontiers {
            let owned = rules.iter().filter(|r| {
                if r.incoming {
                    &r.et.dst == name
                } else {
                    &r.et.src == name
                }
            });
            let owned: Vec<&Rule> = owned.collect();
            if owned.is_empty() {
                continue;
            }
            for v in frontier.clone() {
                let (orig, grp) = {
                    let s = &states[name];
                    (s.ids[v], s.batch[v])
                };
                let t_seed = group_time.get(grp).copied().unwrap_or(i64::MAX);
                for rule in &owned {
                    cands.clear();
                    let ntime = states[&rule.neighbor].time.as_deref();
                    for p in rule.view.row_range(orig) {
                        let edge = rule.view.perm[p];
                        let neighbor = rule.view.col[p];
                        let et_time = rule.time.as_ref().map(|t| t[edge]);
                        let nt = ntime.map(|t| t[neighbor]);
                        if temporal && (et_time.is_some_and(|t| t > t_seed) || nt.is_some_and(|t| t > t_seed)) {
                            continue;
                        }
                        cands.push(Candidate {
                            edge,
                            neighbor,
                            time: et_time.or(nt),
                        });
                    }
                    let stream = mix(&[
                        cfg.seed,
                        hop as u64,
                        orig as u64,
                        rule.key,
                        if cfg.disjoint { grp as u64 } else { u64::MAX },
                    ]);
                    let chosen = select(&cands, fanout, cfg, t_seed, stream);
                    let nstate = states.get_mut(&rule.neighbor).expect("known node type");
                    let buf = out.get_mut(&rule.out).expect("rule output");
                    for c in chosen {
                        let cand = &cands[c];
                        let (w, _) = nstate.intern(grp, cand.neighbor, cfg.disjoint);
                        buf.src.push(w);
                        buf.dst.push(v);
                        buf.ids.push(cand.edge);
                        buf.per_hop[hop] += 1;
                    }
                }
            }
        }
        for s in states.values_mut() {
            let before: usize = s.per_hop.iter().sum();
            s.per_hop.push(s.ids.len() - before);
            s.frontier = before..s.ids.len();
        }
    }

    let mut sub = SampledSubgraph {
        node_ids: BTreeMap::new(),
        batch: BTreeMap::new(),
        edges: BTreeMap::new(),
        edge_ids: BTreeMap::new(),
        num_sampled_nodes_per_hop: BTreeMap::new(),
        num_sampled_edges_per_hop: BTreeMap::new(),
        seed_map,
        seed_times: seeds.times.clone(),
    };
    let counts: BTreeMap<String, usize> = states.iter().map(|(n, s)| (n.clone(), s.ids.len())).collect();
    for (et, buf) in out {
        let index = EdgeIndex::new(
            buf.src,
            buf.dst,
            counts[&et.src],
            counts[&et.dst],
            Claims::sorted(SortOrder::ByDst),
        )?;
        sub.edges.insert(et.clone(), index);
        sub.edge_ids.insert(et.clone(), buf.ids);
        sub.num_sampled_edges_per_hop.insert(et, buf.per_hop);
    }
    for (name, s) in states {
        sub.node_ids.insert(name.clone(), s.ids);
        sub.batch.insert(name.clone(), s.batch);
        sub.num_sampled_nodes_per_hop.insert(name, s.per_hop);
    }
    Ok(sub)
}

/// Positions into `cands` to take, in emission order.
fn select(cands: &[Candidate], fanout: i64, cfg: &SamplerConfig, t_seed: i64, stream: u64) -> Vec<usize> {
    let m = cands.len();
    if m == 0 || fanout == 0 {
        return Vec::new();
    }
    let timed = cands.iter().all(|c| c.time.is_some());
    match cfg.temporal {
        TemporalStrategy::MostRecent if timed => {
            let mut order: Vec<usize> = (0..m).collect();
            order.sort_by(|&a, &b| (cands[b].time, cands[b].edge).cmp(&(cands[a].time, cands[a].edge)));
            if fanout >= 0 {
                order.truncate(fanout as usize);
            }
            return order;
        }
        _ => {}
    }
    if fanout < 0 || (!cfg.replace && fanout as usize >= m) {
        return (0..m).collect();
    }
    let f = fanout as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(stream);
    match cfg.temporal {
        TemporalStrategy::Anneal(rate) if timed => {
            let log_w: Vec<f64> = cands
                .iter()
                .map(|c| -rate * (t_seed - c.time.unwrap()) as f64)
                .collect();
            if cfg.replace {
                let top = log_w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let w: Vec<f64> = log_w.iter().map(|l| (l - top).exp()).collect();
                let total: f64 = w.iter().sum();
                (0..f)
                    .map(|_| {
                        let mut u = rng.gen::<f64>() * total;
                        w.iter()
                            .position(|&x| {
                                u -= x;
                                u < 0.0
                            })
                            .unwrap_or(m - 1)
                    })
                    .collect()
            } else {
                // Gumbel top-k: keys log w + G rank a weighted draw without
                // replacement
                let mut keyed: Vec<(f64, usize)> = log_w
                    .iter()
                    .enumerate()
                    .map(|(i, l)| {
                        let u: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
                        (l - (-u.ln()).ln(), i)
                    })
                    .collect();
                keyed.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
                let mut picked: Vec<usize> = keyed[..f].iter().map(|&(_, i)| i).collect();
                picked.sort_unstable();
                picked
            }
        }
        _ => {
            if cfg.replace {
                (0..f).map(|_| rng.gen_range(0..m)).collect()
            } else {
                let mut picked = index::sample(&mut rng, m, f).into_vec();
                picked.sort_unstable();
                picked
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hetero::HeteroGraph;
    use crate::store::in_memory_stores;
    use crate::tensor::Tensor;

    fn store(pairs: &[(usize, usize)], n: usize, time: Option<Vec<i64>>) -> crate::store::InMemoryStore<f64> {
        let mut g = HeteroGraph::new();
        g.add_node_type("node", Tensor::zeros(&[n, 1]), None).unwrap();
        g.add_edge_type(
            EdgeType::new("node", "to", "node"),
            EdgeIndex::from_pairs(pairs, n).unwrap(),
            None,
            time,
        )
        .unwrap();
        in_memory_stores(&Arc::new(g))
    }

    #[test]
    fn star_take_all() {
        let s = store(&[(1, 0), (2, 0), (3, 0), (4, 0), (5, 0)], 6, None);
        let sub = sample_neighbors(&s, &Seeds::of("node", vec![0]), &SamplerConfig::new(vec![-1], 0)).unwrap();
        assert_eq!(sub.num_sampled_nodes_per_hop["node"], vec![1, 5]);
        assert_eq!(sub.node_ids["node"], vec![0, 1, 2, 3, 4, 5]);
        assert_eq!(sub.homogeneous_edges().unwrap().num_edges(), 5);
    }

    #[test]
    fn disjoint_duplicates_shared_neighbor() {
        let s = store(&[(2, 0), (2, 1)], 3, None);
        let mut cfg = SamplerConfig::new(vec![-1], 0);
        cfg.disjoint = true;
        let sub = sample_neighbors(&s, &Seeds::of("node", vec![0, 1]), &cfg).unwrap();
        assert_eq!(sub.node_ids["node"], vec![0, 1, 2, 2]);
        assert_eq!(sub.batch["node"], vec![0, 1, 0, 1]);
        cfg.disjoint = false;
        let sub = sample_neighbors(&s, &Seeds::of("node", vec![0, 1]), &cfg).unwrap();
        assert_eq!(sub.node_ids["node"], vec![0, 1, 2]);
    }

    #[test]
    fn most_recent_examples() {
        let s = store(&[(1, 0), (2, 0), (3, 0)], 4, Some(vec![1, 3, 7]));
        let mut cfg = SamplerConfig::new(vec![2], 0);
        cfg.temporal = TemporalStrategy::MostRecent;
        let seeds = Seeds::timed("node", vec![0], vec![5]);
        let sub = sample_temporal(&s, &seeds, &cfg).unwrap();
        let et = EdgeType::new("node", "to", "node");
        assert_eq!(sub.edge_ids[&et], vec![1, 0]);
        cfg.fanouts = vec![1];
        let sub = sample_temporal(&s, &seeds, &cfg).unwrap();
        assert_eq!(sub.edge_ids[&et], vec![1]);
    }

    #[test]
    fn early_seed_time_keeps_seeds_only() {
        let s = store(&[(1, 0), (2, 0)], 3, Some(vec![10, 20]));
        let mut cfg = SamplerConfig::new(vec![-1, -1], 0);
        cfg.temporal = TemporalStrategy::Uniform;
        let sub = sample_temporal(&s, &Seeds::timed("node", vec![0], vec![5]), &cfg).unwrap();
        assert_eq!(sub.node_ids["node"], vec![0]);
        assert_eq!(sub.num_sampled_nodes_per_hop["node"], vec![1, 0, 0]);
    }

    #[test]
    fn config_errors() {
        let s = store(&[(1, 0)], 2, None);
        let bad = SamplerConfig::new(vec![-2], 0);
        assert!(sample_neighbors(&s, &Seeds::of("node", vec![0]), &bad).is_err());
        let ok = SamplerConfig::new(vec![1], 0);
        assert!(sample_neighbors(&s, &Seeds::of("node", vec![7]), &ok).is_err());
        assert!(sample_neighbors(&s, &Seeds::of("user", vec![0]), &ok).is_err());
        let mut temporal = ok.clone();
        temporal.temporal = TemporalStrategy::Uniform;
        assert!(sample_temporal(&s, &Seeds::timed("node", vec![0], vec![1]), &temporal).is_err());
        assert!(sample_temporal(&s, &Seeds::of("node", vec![0]), &ok).is_err());
    }

    #[test]
    fn bidirectional_reaches_out_neighbors() {
        let s = store(&[(0, 1)], 2, None);
        let mut cfg = SamplerConfig::new(vec![-1], 0);
        let sub = sample_neighbors(&s, &Seeds::of("node", vec![0]), &cfg).unwrap();
        assert_eq!(sub.node_ids["node"], vec![0]);
        cfg.direction = Direction::Bidirectional;
        let sub = sample_neighbors(&s, &Seeds::of("node", vec![0]), &cfg).unwrap();
        assert_eq!(sub.node_ids["node"], vec![0, 1]);
        let e = sub.homogeneous_edges().unwrap();
        assert_eq!((e.src(), e.dst()), (&[1][..], &[0][..]));
    }
}
