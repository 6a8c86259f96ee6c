use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use graphmill::store::{load_dataset, GraphStore};
use graphmill::synth::two_class_graph;
use serde_json::{json, Value};
use tempfile::TempDir;

fn graphmill(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_graphmill"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// CSV directory converted into `<tmp>/data`.
fn convert(files: &[(&str, &str)], extra: &[&str]) -> (TempDir, PathBuf, Output) {
    let tmp = TempDir::new().unwrap();
    let csv = tmp.path().join("csv");
    fs::create_dir(&csv).unwrap();
    for (name, text) in files {
        write(&csv, name, text);
    }
    let data = tmp.path().join("data");
    let mut args = vec!["convert", "--input", s(&csv), "--out", s(&data)];
    args.extend(extra);
    let out = graphmill(&args);
    (tmp, data, out)
}

const TOY_NODES: &str = "id,f0,f1,time\nu,0.5,-1.25,3\nv,2,0.125,7\nw,-3.5,4,1\n";
const TOY_EDGES: &str = "src,dst,time\nu,v,10\nw,u,4\n";

#[test]
fn convert_toy_round_trips() {
    for dtype in ["f32", "f64"] {
        let (_tmp, data, out) = convert(
            &[
                ("nodes_user.csv", TOY_NODES),
                ("edges_user__knows__user.csv", TOY_EDGES),
            ],
            &["--dtype", dtype],
        );
        let manifest: Value = serde_json::from_str(&ok(&out)).unwrap();
        assert_eq!(manifest["nodes"][0]["count"], 3);
        assert_eq!(manifest["edges"][0]["edge_count"], 2);

        let (x, g) = match dtype {
            "f32" => {
                let g = load_dataset::<f32>(&data).unwrap().to_graph().unwrap();
                (g.node("user").unwrap().x.to_f64_vec(), None)
            }
            _ => {
                let g = load_dataset::<f64>(&data).unwrap().to_graph().unwrap();
                (g.node("user").unwrap().x.to_vec(), Some(g))
            }
        };
        assert_eq!(x, [0.5, -1.25, 2.0, 0.125, -3.5, 4.0]);
        let Some(g) = g else { continue };
        let node = g.node("user").unwrap();
        assert_eq!(node.time.as_deref(), Some(&[3, 7, 1][..]));
        let et = g.edge_types().next().unwrap().clone();
        let e = g.edge(&et).unwrap();
        assert_eq!((e.index.src(), e.index.dst()), (&[0, 2][..], &[1, 0][..]));
        assert_eq!(e.time.as_deref(), Some(&[10, 4][..]));
    }
}

#[test]
fn convert_names_file_and_row_of_bad_input() {
    let edges = "src,dst\nu,v\nv,zz\n";
    let (_t, _d, out) = convert(
        &[("nodes_user.csv", TOY_NODES), ("edges_user__knows__user.csv", edges)],
        &[],
    );
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    assert!(
        err.contains("edges_user__knows__user.csv") && err.contains("row 3") && err.contains("zz"),
        "{err}"
    );

    let ragged = "id,f0,f1\nu,1,2\nv,3\n";
    let (_t, _d, out) = convert(&[("nodes_user.csv", ragged)], &[]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    assert!(err.contains("nodes_user.csv") && err.contains("row 3"), "{err}");
}

#[test]
fn empty_edge_file_gives_edgeless_type() {
    let (_t, data, out) = convert(
        &[
            ("nodes_user.csv", TOY_NODES),
            ("edges_user__knows__user.csv", "src,dst\n"),
        ],
        &[],
    );
    ok(&out);
    let store = load_dataset::<f32>(&data).unwrap();
    let ets = store.edge_types();
    assert_eq!(ets.len(), 1);
    assert_eq!(store.edge_index(&ets[0]).unwrap().num_edges(), 0);
}

// Rows: a=0 .. f=5; edges e0..e4 in file order.
const TREE_NODES: &str = "id,x,time\na,0,0\nb,1,0\nc,2,0\nd,3,0\ne,4,0\nf,5,0\n";
const TREE_EDGES: &str = "src,dst,time\nb,a,5\nc,a,6\nd,a,7\ne,b,8\nf,c,9\n";

fn tree() -> (TempDir, PathBuf) {
    let (tmp, data, out) = convert(
        &[("nodes_node.csv", TREE_NODES), ("edges_node__to__node.csv", TREE_EDGES)],
        &[],
    );
    ok(&out);
    (tmp, data)
}

#[test]
fn take_all_sample_matches_fixture() {
    let (tmp, data) = tree();
    let seeds = write(tmp.path(), "seeds.csv", "node_type,node_id\nnode,0\n");
    let out = ok(&graphmill(&[
        "sample",
        "--dataset",
        s(&data),
        "--seeds",
        s(&seeds),
        "--fanouts",
        "-1,-1",
    ]));
    let got: Value = serde_json::from_str(&out).unwrap();
    // breadth first from a: b, c, d at hop 1, then e (via b) and f (via c)
    let want = json!({
        "node_ids": {"node": [0, 1, 2, 3, 4, 5]},
        "edges": {"node__to__node": {"src": [1, 2, 3, 4, 5], "dst": [0, 0, 0, 1, 2], "edge_ids": [0, 1, 2, 3, 4]}},
        "num_sampled_nodes_per_hop": {"node": [1, 3, 2]},
        "num_sampled_edges_per_hop": {"node__to__node": [3, 2]},
        "seed_map": {"node": [0]}
    });
    assert_eq!(got, want);
}

#[test]
fn sample_is_byte_identical_across_runs() {
    let tmp = TempDir::new().unwrap();
    let data = dataset_of_two_classes(tmp.path(), 300);
    let seeds = write(
        tmp.path(),
        "seeds.csv",
        "node_type,node_id\nnode,4\nnode,17\nnode,250\n",
    );
    let args = [
        "sample",
        "--dataset",
        s(&data),
        "--seeds",
        s(&seeds),
        "--fanouts",
        "3,2",
        "--seed",
        "9",
    ];
    let first = ok(&graphmill(&args));
    assert_eq!(first, ok(&graphmill(&args)));
    let other = ok(&graphmill(&[&args[..7], &["--seed", "10"]].concat()));
    assert_ne!(first, other);
}

#[test]
fn seed_time_before_every_edge_yields_seeds_only() {
    let (tmp, data) = tree();
    let seeds = write(tmp.path(), "seeds.csv", "node_type,node_id,time\nnode,0,1\nnode,1,2\n");
    let out = ok(&graphmill(&[
        "sample",
        "--dataset",
        s(&data),
        "--seeds",
        s(&seeds),
        "--fanouts",
        "-1,-1",
    ]));
    let got: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(got["node_ids"]["node"], json!([0, 1]));
    assert_eq!(got["edges"]["node__to__node"]["src"], json!([]));
    assert_eq!(got["seed_times"]["node"], json!([1, 2]));
}

/// A separable two-class graph as a dataset, plus `labels.csv` beside it.
fn dataset_of_two_classes(dir: &Path, n: usize) -> PathBuf {
    let g = two_class_graph::<f64>(n, 6, 5, 11).unwrap();
    let csv = dir.join("csv");
    fs::create_dir_all(&csv).unwrap();
    let mut nodes = String::from("id,f0,f1,f2,f3,f4,f5\n");
    for (i, row) in g.x.to_vec().chunks(6).enumerate() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        writeln!(nodes, "n{i},{}", cells.join(",")).unwrap();
    }
    let mut edges = String::from("src,dst\n");
    for (u, v) in g.edges.pairs() {
        writeln!(edges, "n{u},n{v}").unwrap();
    }
    let mut labels = String::from("node_type,node_id,label\n");
    for (i, y) in g.labels.iter().enumerate() {
        writeln!(labels, "node,{i},{y}").unwrap();
    }
    write(&csv, "nodes_node.csv", &nodes);
    write(&csv, "edges_node__to__node.csv", &edges);
    write(dir, "labels.csv", &labels);
    let data = dir.join("data");
    ok(&graphmill(&["convert", "--input", s(&csv), "--out", s(&data)]));
    data
}

#[test]
fn bench_reports_every_mode_behind_the_gate() {
    let tmp = TempDir::new().unwrap();
    let data = dataset_of_two_classes(tmp.path(), 400);
    let report = tmp.path().join("report.json");
    let args = [
        "bench",
        "--dataset",
        s(&data),
        "--layer",
        "gin,sage",
        "--fanouts",
        "4,4",
        "--dim",
        "8",
        "--num-seeds",
        "32",
        "--out",
        s(&report),
    ];
    ok(&graphmill(&args));
    let r: Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    let results = r["results"].as_array().unwrap();
    assert_eq!(results.len(), 6);
    for m in results {
        assert_eq!(m["samples_ms"].as_array().unwrap().len(), 20);
        assert!(m["max_abs_diff"].as_f64().unwrap() <= 1e-4);
    }
    assert_eq!(results[0]["speedup"], 1.0);
    assert_eq!(r["workload"]["repeat"], 20);
    assert_eq!(r["workload"]["warmup"], 3);

    ok(&graphmill(&args));
    let again: Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    let digests = |v: &Value| {
        v["results"]
            .as_array()
            .unwrap()
            .iter()
            .map(|m| m["output_digest"].clone())
            .collect::<Vec<_>>()
    };
    assert_eq!(digests(&r), digests(&again));

    let gate = graphmill(&[&args[..11], &["--tolerance", "-1"]].concat());
    assert_eq!(gate.status.code(), Some(3), "{}", stderr(&gate));
    let short = graphmill(&[&args[..11], &["--repeat", "5"]].concat());
    assert_eq!(short.status.code(), Some(2));
    let bad_mode = graphmill(&["bench", "--mode", "turbo"]);
    assert_eq!(bad_mode.status.code(), Some(2));
}

#[test]
fn gcn_training_separates_two_classes() {
    let tmp = TempDir::new().unwrap();
    let data = dataset_of_two_classes(tmp.path(), 200);
    let labels = tmp.path().join("labels.csv");
    let args = [
        "train",
        "--dataset",
        s(&data),
        "--seeds",
        s(&labels),
        "--layer",
        "gcn",
        "--epochs",
        "50",
    ];
    let out = ok(&graphmill(&args));
    let report: Value = serde_json::from_str(&out).unwrap();
    let history = report["history"].as_array().unwrap();
    assert_eq!(history.len(), 51);
    let best = history
        .iter()
        .map(|m| m["accuracy"].as_f64().unwrap())
        .fold(0.0, f64::max);
    assert!(best >= 0.95, "{}", history.last().unwrap());
    assert_eq!(out, ok(&graphmill(&args)));

    let initial = ok(&graphmill(&[&args[..7], &["--epochs", "0"]].concat()));
    let report: Value = serde_json::from_str(&initial).unwrap();
    assert_eq!(report["history"].as_array().unwrap().len(), 1);
    assert_eq!(report["history"][0]["epoch"], 0);
}

#[test]
fn training_without_labels_is_rejected() {
    let tmp = TempDir::new().unwrap();
    let data = dataset_of_two_classes(tmp.path(), 50);
    let seeds = write(tmp.path(), "seeds.csv", "node_type,node_id\nnode,0\nnode,1\n");
    let out = graphmill(&["train", "--dataset", s(&data), "--seeds", s(&seeds)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("label"), "{}", stderr(&out));
}

#[test]
fn explain_dumps_masks_scores_and_metrics() {
    let tmp = TempDir::new().unwrap();
    let data = dataset_of_two_classes(tmp.path(), 60);
    let labels = tmp.path().join("labels.csv");
    let out = ok(&graphmill(&[
        "explain",
        "--dataset",
        s(&data),
        "--seeds",
        s(&labels),
        "--epochs",
        "5",
        "--target",
        "7",
        "--explain-epochs",
        "20",
    ]));
    let e: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(e["algorithm"], "mask_opt");
    assert_eq!(e["target"]["node"], 7);
    let mask = &e["node_mask"]["node"];
    assert_eq!(mask["shape"], json!([60, 6]));
    assert_eq!(mask["values"].as_array().unwrap().len(), 360);
    let edges = e["edges"].as_array().unwrap();
    assert_eq!(edges.len(), 300);
    assert!(edges
        .iter()
        .all(|x| x["score"].as_f64().is_some_and(|v| (0.0..=1.0).contains(&v))));
    assert!(e["metrics"]["fidelity_plus"].is_number());

    let bad = graphmill(&[
        "explain",
        "--dataset",
        s(&data),
        "--seeds",
        s(&labels),
        "--epochs",
        "0",
        "--target",
        "60",
    ]);
    assert_eq!(bad.status.code(), Some(2));
}
