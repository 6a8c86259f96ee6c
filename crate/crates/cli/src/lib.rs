//! The `graphmill` command line: dataset conversion, sampling dumps,
//! benchmarks, training and explanations.

use std::collections::{BTreeMap, HashMap};
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use graphmill::benchmark::{
    run_benchmark, sample_bench_batch, synthetic_store, BenchOptions, BenchReport, RunMode, Workload,
    DEFAULT_NUM_EDGES, DEFAULT_NUM_NODES, DEFAULT_NUM_SEEDS,
};
use graphmill::edge_index::EdgeIndex;
use graphmill::explain::{evaluate, explain, Algorithm, ExplainerConfig, HomogeneousRun, Target};
use graphmill::hetero::{EdgeType, HeteroGraph};
use graphmill::message_passing::LayerKind;
use graphmill::sampler::{sample_neighbors, Direction, SamplerConfig, Seeds, TemporalStrategy};
use graphmill::store::disk::MANIFEST;
use graphmill::store::{load_dataset, save_dataset, DatasetManifest, DiskStore, FeatureStore, GraphStore};
use graphmill::train::{train_node_classifier, TrainConfig};
use graphmill::{DType, Scalar, Tensor};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_GATE: i32 = 3;

#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Gate(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => EXIT_VALIDATION,
            CliError::Gate(_) => EXIT_GATE,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let (CliError::Validation(m) | CliError::Gate(m)) = self;
        write!(f, "error: {m}")
    }
}

impl From<graphmill::Error> for CliError {
    fn from(e: graphmill::Error) -> Self {
        match e {
            graphmill::Error::CorrectnessGate { .. } => CliError::Gate(e.to_string()),
            other => CliError::Validation(other.to_string()),
        }
    }
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Validation(msg.into())
}

type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "graphmill", version, about = "Graph learning on the CPU")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a dataset directory from node and edge CSV files.
    Convert(ConvertArgs),
    /// Dump one sampled subgraph as JSON.
    Sample(SampleArgs),
    /// Time forward+backward passes under each run mode.
    Bench(BenchArgs),
    /// Train a node classifier on labeled seeds.
    Train(TrainArgs),
    /// Train a node classifier, then explain one node's prediction.
    Explain(ExplainArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum DTypeArg {
    F32,
    F64,
}

#[derive(Debug, Args)]
pub struct ConvertArgs {
    /// Directory holding `nodes_<type>.csv` and `edges_<src>__<rel>__<dst>.csv`.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value = "f32")]
    pub dtype: DTypeArg,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    /// CSV with header `node_type,node_id[,time]`.
    #[arg(long)]
    pub seeds: PathBuf,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "10,10")]
    pub fanouts: Vec<i64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub replace: bool,
    #[arg(long)]
    pub disjoint: bool,
    #[arg(long)]
    pub bidirectional: bool,
    /// `uniform`, `most_recent` or `anneal:<rate>`; `uniform` when the
    /// seeds carry times.
    #[arg(long)]
    pub temporal: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Dataset directory; the synthetic power-law workload when absent.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "gcn,sage,gin,gat,edgecnn")]
    pub layer: Vec<LayerKind>,
    #[arg(long, value_delimiter = ',', default_value = "baseline,fused,fused+trim")]
    pub mode: Vec<RunMode>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "10,10")]
    pub fanouts: Vec<i64>,
    /// Hidden width, and the feature width of the synthetic workload.
    #[arg(long, default_value_t = 64)]
    pub dim: usize,
    #[arg(long, default_value_t = 20)]
    pub repeat: usize,
    #[arg(long, default_value_t = 3)]
    pub warmup: usize,
    /// Seed nodes per batch; capped at the node count by default.
    #[arg(long)]
    pub num_seeds: Option<usize>,
    #[arg(long, default_value_t = 2)]
    pub heads: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Largest admissible seed-row deviation from the baseline.
    #[arg(long, default_value_t = 1e-4, allow_negative_numbers = true)]
    pub tolerance: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    /// CSV with header `node_type,node_id,label`.
    #[arg(long)]
    pub seeds: PathBuf,
    #[arg(long, default_value = "gcn")]
    pub layer: LayerKind,
    #[arg(long, default_value_t = 50)]
    pub epochs: usize,
    #[arg(long, default_value_t = 16)]
    pub hidden: usize,
    #[arg(long, default_value_t = 0.01)]
    pub lr: f64,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "10,10")]
    pub fanouts: Vec<i64>,
    #[arg(long, default_value_t = 64)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 1)]
    pub heads: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0)]
    pub workers: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExplainArgs {
    #[command(flatten)]
    pub train: TrainArgs,
    /// Row of the node to explain.
    #[arg(long)]
    pub target: usize,
    #[arg(long, default_value = "mask_opt")]
    pub algorithm: Algorithm,
    #[arg(long, default_value_t = 100)]
    pub explain_epochs: usize,
    /// Fraction of edges kept when scoring fidelity.
    #[arg(long, default_value_t = 0.2)]
    pub keep: f64,
}

/// Parses `args` (program name first), runs the command and returns the
/// exit code.
pub fn run<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
        }
    };
    match execute(&cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}

pub fn execute(cmd: &Command) -> CliResult<()> {
    match cmd {
        Command::Convert(a) => {
            let manifest = match a.dtype {
                DTypeArg::F32 => convert::<f32>(&a.input, &a.out)?,
                DTypeArg::F64 => convert::<f64>(&a.input, &a.out)?,
            };
            println!("{}", to_json(&manifest)?);
            Ok(())
        }
        Command::Sample(a) => emit(a.out.as_deref(), &sample(a)?),
        Command::Bench(a) => {
            let report = match &a.dataset {
                None => {
                    let store = synthetic_store::<f32>(DEFAULT_NUM_NODES, DEFAULT_NUM_EDGES, a.dim, a.seed)?;
                    bench(a, &store, &store, "synthetic")?
                }
                Some(dir) => match dataset_dtype(dir)? {
                    DType::F32 => {
                        let s = load_dataset::<f32>(dir)?;
                        bench(a, &s, &s, &dir.display().to_string())?
                    }
                    DType::F64 => {
                        let s = load_dataset::<f64>(dir)?;
                        bench(a, &s, &s, &dir.display().to_string())?
                    }
                },
            };
            if a.out.is_some() {
                for r in &report.results {
                    println!(
                        "{:<8} {:<11} {:>9.3} ms  ±{:>7.3}  {:>5.2}x",
                        r.layer.to_string(),
                        r.mode.to_string(),
                        r.mean_ms,
                        r.std_ms,
                        r.speedup
                    );
                }
            }
            emit(a.out.as_deref(), &to_json(&report)?)
        }
        Command::Train(a) => {
            let report = match dataset_dtype(&a.dataset)? {
                DType::F32 => to_json(&train_model::<f32>(a)?.2)?,
                DType::F64 => to_json(&train_model::<f64>(a)?.2)?,
            };
            emit(a.out.as_deref(), &report)
        }
        Command::Explain(a) => {
            let json = match dataset_dtype(&a.train.dataset)? {
                DType::F32 => explain_node::<f32>(a)?,
                DType::F64 => explain_node::<f64>(a)?,
            };
            emit(a.train.out.as_deref(), &json)
        }
    }
}

fn to_json(v: &impl serde::Serialize) -> CliResult<String> {
    serde_json::to_string_pretty(v).map_err(|e| invalid(e.to_string()))
}

/// Writes `text` to `out`, or stdout.
fn emit(out: Option<&Path>, text: &str) -> CliResult<()> {
    match out {
        Some(path) => fs::write(path, format!("{text}\n")).map_err(|e| invalid(format!("{}: {e}", path.display()))),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn dataset_dtype(dir: &Path) -> CliResult<DType> {
    let path = dir.join(MANIFEST);
    let text = fs::read(&path).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
    let manifest: DatasetManifest =
        serde_json::from_slice(&text).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
    let mut dtypes = manifest.nodes.iter().map(|n| n.dtype);
    let first = dtypes.next().unwrap_or(DType::F32);
    if dtypes.any(|d| d != first) {
        return Err(invalid(format!("{}: mixed feature dtypes", dir.display())));
    }
    Ok(first)
}

// ---------------------------------------------------------------- convert

fn csv_reader(path: &Path) -> CliResult<csv::Reader<fs::File>> {
    csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| invalid(format!("{}: {e}", path.display())))
}

/// Records with their 1-based line numbers, rejecting ragged rows.
fn records(path: &Path) -> CliResult<(Vec<String>, Vec<(u64, csv::StringRecord)>)> {
    let name = file_name(path);
    let mut reader = csv_reader(path)?;
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| invalid(format!("{name}: {e}")))?
        .iter()
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| invalid(format!("{name}: {e}")))?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != header.len() {
            return Err(invalid(format!(
                "{name} row {line}: expected {} fields, found {}",
                header.len(),
                rec.len()
            )));
        }
        rows.push((line, rec));
    }
    Ok((header, rows))
}

fn file_name(path: &Path) -> String {
    path.file_name()
        .map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into_owned())
}

fn parse_field<V: std::str::FromStr>(name: &str, line: u64, col: &str, text: &str) -> CliResult<V> {
    text.parse()
        .map_err(|_| invalid(format!("{name} row {line}: bad {col} value {text:?}")))
}

struct NodeTable {
    ids: HashMap<String, usize>,
    features: Vec<f64>,
    width: usize,
    time: Option<Vec<i64>>,
}

fn read_nodes(path: &Path) -> CliResult<NodeTable> {
    let name = file_name(path);
    let (header, rows) = records(path)?;
    if header.is_empty() {
        return Err(invalid(format!("{name}: missing id column")));
    }
    let timed = header.len() > 1 && header.last().is_some_and(|h| h == "time");
    let width = header.len() - 1 - usize::from(timed);
    let mut table = NodeTable {
        ids: HashMap::new(),
        features: Vec::with_capacity(rows.len() * width),
        width,
        time: timed.then(Vec::new),
    };
    for (row, (line, rec)) in rows.iter().enumerate() {
        if table.ids.insert(rec[0].to_string(), row).is_some() {
            return Err(invalid(format!("{name} row {line}: duplicate id {:?}", &rec[0])));
        }
        for (col, text) in header[1..=width].iter().zip(rec.iter().skip(1)) {
            table.features.push(parse_field(&name, *line, col, text)?);
        }
        if let Some(t) = &mut table.time {
            t.push(parse_field(&name, *line, "time", &rec[header.len() - 1])?);
        }
    }
    Ok(table)
}

/// Converts a CSV directory into a dataset at `out`.
pub fn convert<T: Scalar>(input: &Path, out: &Path) -> CliResult<DatasetManifest> {
    let mut node_files = BTreeMap::new();
    let mut edge_files = BTreeMap::new();
    let entries = fs::read_dir(input).map_err(|e| invalid(format!("{}: {e}", input.display())))?;
    for entry in entries {
        let path = entry.map_err(|e| invalid(e.to_string()))?.path();
        let fname = file_name(&path);
        let Some(stem) = fname.strip_suffix(".csv") else {
            continue;
        };
        if let Some(t) = stem.strip_prefix("nodes_") {
            node_files.insert(t.to_string(), path);
        } else if let Some(triple) = stem.strip_prefix("edges_") {
            let et: EdgeType = triple.parse().map_err(|e| invalid(format!("{fname}: {e}")))?;
            edge_files.insert(et, path);
        }
    }
    if node_files.is_empty() {
        return Err(invalid(format!("{}: no nodes_<type>.csv files", input.display())));
    }

    let mut g = HeteroGraph::<T>::new();
    let mut tables = BTreeMap::new();
    for (t, path) in &node_files {
        let table = read_nodes(path)?;
        let n = table.ids.len();
        let x = Tensor::<T>::from_f64(&table.features, &[n, table.width])?;
        g.add_node_type(t, x, table.time.clone())?;
        tables.insert(t.clone(), table);
    }
    for (et, path) in &edge_files {
        let name = file_name(path);
        let lookup = |t: &str| {
            tables
                .get(t)
                .ok_or_else(|| invalid(format!("{name}: unknown node type {t:?}")))
        };
        let (src_table, dst_table) = (lookup(&et.src)?, lookup(&et.dst)?);
        let (header, rows) = records(path)?;
        let timed = match header.len() {
            2 => false,
            3 if header[2] == "time" => true,
            _ => return Err(invalid(format!("{name}: header must be src,dst[,time]"))),
        };
        let resolve = |table: &NodeTable, line: u64, col: &str, id: &str, t: &str| {
            table.ids.get(id).copied().ok_or_else(|| {
                invalid(format!(
                    "{name} row {line}: {col} id {id:?} is not a node of type {t:?}"
                ))
            })
        };
        let mut src = Vec::with_capacity(rows.len());
        let mut dst = Vec::with_capacity(rows.len());
        let mut time = timed.then(|| Vec::with_capacity(rows.len()));
        for (line, rec) in &rows {
            src.push(resolve(src_table, *line, "src", &rec[0], &et.src)?);
            dst.push(resolve(dst_table, *line, "dst", &rec[1], &et.dst)?);
            if let Some(t) = &mut time {
                t.push(parse_field(&name, *line, "time", &rec[2])?);
            }
        }
        let index = EdgeIndex::new(src, dst, src_table.ids.len(), dst_table.ids.len(), Default::default())?;
        g.add_edge_type(et.clone(), index, None, time)?;
    }
    Ok(save_dataset(&g, out)?)
}

// ---------------------------------------------------------------- seeds

/// One seed file: per-type node rows, times and labels in file order.
#[derive(Debug, Default)]
pub struct SeedTable {
    pub nodes: BTreeMap<String, Vec<usize>>,
    pub times: Option<BTreeMap<String, Vec<i64>>>,
    pub labels: Option<BTreeMap<String, Vec<usize>>>,
}

pub fn read_seeds(path: &Path) -> CliResult<SeedTable> {
    let name = file_name(path);
    let (header, rows) = records(path)?;
    let col = |c: &str| header.iter().position(|h| h == c);
    let (Some(ty), Some(id)) = (col("node_type"), col("node_id")) else {
        return Err(invalid(format!("{name}: header must start with node_type,node_id")));
    };
    let (time_col, label_col) = (col("time"), col("label"));
    let mut table = SeedTable {
        times: time_col.map(|_| BTreeMap::new()),
        labels: label_col.map(|_| BTreeMap::new()),
        ..Default::default()
    };
    for (line, rec) in &rows {
        let t = rec[ty].to_string();
        table
            .nodes
            .entry(t.clone())
            .or_default()
            .push(parse_field(&name, *line, "node_id", &rec[id])?);
        if let (Some(c), Some(times)) = (time_col, &mut table.times) {
            times
                .entry(t.clone())
                .or_default()
                .push(parse_field(&name, *line, "time", &rec[c])?);
        }
        if let (Some(c), Some(labels)) = (label_col, &mut table.labels) {
            labels
                .entry(t)
                .or_default()
                .push(parse_field(&name, *line, "label", &rec[c])?);
        }
    }
    if table.nodes.is_empty() {
        return Err(invalid(format!("{name}: no seeds")));
    }
    Ok(table)
}

// ---------------------------------------------------------------- sample

fn temporal_strategy(text: &str) -> CliResult<TemporalStrategy> {
    match text {
        "uniform" => Ok(TemporalStrategy::Uniform),
        "most_recent" => Ok(TemporalStrategy::MostRecent),
        other => other
            .strip_prefix("anneal:")
            .and_then(|r| r.parse().ok())
            .map(TemporalStrategy::Anneal)
            .ok_or_else(|| invalid(format!("unknown temporal strategy {other:?}"))),
    }
}

/// The sampled subgraph's JSON dump.
pub fn sample(a: &SampleArgs) -> CliResult<String> {
    let store = load_dataset::<f32>(&a.dataset)?;
    let table = read_seeds(&a.seeds)?;
    let mut cfg = SamplerConfig::new(a.fanouts.clone(), a.seed);
    cfg.replace = a.replace;
    cfg.disjoint = a.disjoint;
    if a.bidirectional {
        cfg.direction = Direction::Bidirectional;
    }
    cfg.temporal = match (&a.temporal, &table.times) {
        (Some(t), _) => temporal_strategy(t)?,
        (None, Some(_)) => TemporalStrategy::Uniform,
        (None, None) => TemporalStrategy::None,
    };
    let seeds = Seeds {
        nodes: table.nodes,
        times: table.times,
    };
    Ok(sample_neighbors(&store, &seeds, &cfg)?.to_json()?)
}

// ---------------------------------------------------------------- bench

fn bench<T: Scalar>(
    a: &BenchArgs,
    fs: &dyn FeatureStore<T>,
    gs: &dyn GraphStore,
    source: &str,
) -> CliResult<BenchReport> {
    if a.repeat < 20 || a.warmup < 3 {
        return Err(invalid("benchmarks need --repeat >= 20 and --warmup >= 3"));
    }
    if a.layer.is_empty() || a.mode.is_empty() {
        return Err(invalid("no layers or modes selected"));
    }
    let ets = gs.edge_types();
    let node_type = match ets.as_slice() {
        [et] if et.src == et.dst => et.dst.clone(),
        _ => {
            return Err(invalid(
                "benchmarks need a dataset with one edge type between nodes of one type",
            ))
        }
    };
    let num_nodes = gs.num_nodes(&node_type)?;
    let num_seeds = a.num_seeds.unwrap_or(DEFAULT_NUM_SEEDS.min(num_nodes));
    let batch = sample_bench_batch(fs, gs, &node_type, num_seeds, &a.fanouts, a.seed)?;
    let opts = BenchOptions {
        layers: a.layer.clone(),
        modes: a.mode.clone(),
        hidden_dim: a.dim,
        heads: a.heads,
        warmup: a.warmup,
        repeat: a.repeat,
        seed: a.seed,
        tolerance: a.tolerance,
    };
    let results = run_benchmark(&batch, &opts)?;
    Ok(BenchReport {
        workload: Workload {
            source: source.to_string(),
            num_nodes,
            num_edges: ets
                .iter()
                .map(|et| gs.edge_index(et).map(|e| e.num_edges()))
                .sum::<graphmill::Result<usize>>()?,
            feature_dim: batch.x.row_width(),
            hidden_dim: a.dim,
            fanouts: a.fanouts.clone(),
            num_seeds,
            batch_nodes: batch.x.shape()[0],
            batch_edges: batch.edges.num_edges(),
            seed: a.seed,
            warmup: a.warmup,
            repeat: a.repeat,
            dtype: T::DTYPE.name(),
        },
        results,
    })
}

// ---------------------------------------------------------------- train, explain

type Trained<T> = (
    Arc<DiskStore<T>>,
    graphmill::message_passing::GnnModel<T>,
    graphmill::train::TrainReport,
);

fn train_model<T: Scalar>(a: &TrainArgs) -> CliResult<Trained<T>> {
    let store = Arc::new(load_dataset::<T>(&a.dataset)?);
    let table = read_seeds(&a.seeds)?;
    if table.times.is_some() {
        return Err(invalid("training seeds carry no times"));
    }
    let Some(labels) = table.labels else {
        return Err(invalid(format!("{}: missing label column", a.seeds.display())));
    };
    let [(node_type, nodes)] = <[_; 1]>::try_from(table.nodes.into_iter().collect::<Vec<_>>())
        .map_err(|_| invalid("training seeds must share one node type"))?;
    let cfg = TrainConfig {
        kind: a.layer,
        hidden: a.hidden,
        epochs: a.epochs,
        lr: a.lr,
        fanouts: a.fanouts.clone(),
        batch_size: a.batch_size,
        seed: a.seed,
        workers: a.workers,
        heads: a.heads,
    };
    let (model, report) = train_node_classifier::<T>(
        store.clone(),
        store.clone(),
        &node_type,
        &nodes,
        &labels[&node_type],
        &cfg,
    )?;
    Ok((store, model, report))
}

fn explain_node<T: Scalar>(a: &ExplainArgs) -> CliResult<String> {
    let (store, model, _) = train_model::<T>(&a.train)?;
    let g = store.to_graph()?;
    let (Some((_, node)), Some((_, edge))) = (g.nodes().iter().next(), g.edges().iter().next()) else {
        return Err(invalid("explanations need a dataset with nodes and edges"));
    };
    if a.target >= node.num_nodes() {
        return Err(invalid(format!(
            "target {} out of range for {} nodes",
            a.target,
            node.num_nodes()
        )));
    }
    let run = HomogeneousRun {
        model: &model,
        edges: &edge.index,
        x: &node.x,
    };
    let cfg = ExplainerConfig {
        epochs: a.explain_epochs,
        seed: a.train.seed,
        ..ExplainerConfig::new(a.algorithm)
    };
    let expl = explain(&run, &Target::node(a.target), &cfg)?;
    let e = edge.index.num_edges();
    let expl = if e > 0 {
        let keep = a.keep.max(1.0 / e as f64).min(1.0);
        let metrics = evaluate(&expl, &run, keep)?;
        expl.with_metrics(metrics)
    } else {
        expl
    };
    Ok(expl.to_json()?)
}
