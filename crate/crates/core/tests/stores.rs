mod common;

use std::fs;
use std::sync::Arc;

use graphmill::edge_index::EdgeIndex;
use graphmill::hetero::{EdgeType, HeteroGraph};
use graphmill::store::{in_memory_stores, load_dataset, save_dataset, FeatureStore, GraphStore};
use graphmill::Tensor;

use common::{random_tensor, rng};

fn small_graph() -> HeteroGraph<f64> {
    let mut r = rng(4);
    let mut g = HeteroGraph::new();
    g.add_node_type("article", random_tensor(&mut r, &[5, 3]), Some(vec![4, 1, 9, 2, 7]))
        .unwrap();
    g.add_node_type("author", random_tensor(&mut r, &[3, 2]), None).unwrap();
    let writes = EdgeIndex::new(vec![0, 1, 2, 2], vec![0, 3, 4, 1], 3, 5, Default::default()).unwrap();
    g.add_edge_type(
        EdgeType::new("author", "writes", "article"),
        writes,
        None,
        Some(vec![1, 2, 3, 4]),
    )
    .unwrap();
    let cites = EdgeIndex::from_pairs(&[(1, 0), (2, 0), (4, 3)], 5).unwrap();
    g.add_edge_type(EdgeType::new("article", "cites", "article"), cites, None, None)
        .unwrap();
    g
}

#[test]
fn every_single_byte_truncation_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    save_dataset(&small_graph(), dir.path()).unwrap();
    let mut checked = 0;
    for entry in fs::read_dir(dir.path()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "json") {
            continue;
        }
        let bytes = fs::read(&path).unwrap();
        for len in 0..bytes.len() {
            fs::write(&path, &bytes[..len]).unwrap();
            assert!(
                load_dataset::<f64>(dir.path()).is_err(),
                "{} cut to {len}",
                path.display()
            );
            checked += 1;
        }
        fs::write(&path, &bytes).unwrap();
    }
    assert!(checked > 100);
    assert!(load_dataset::<f64>(dir.path()).is_ok());
}

#[test]
fn corrupt_manifest_and_out_of_range_edges_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    save_dataset(&small_graph(), dir.path()).unwrap();
    let manifest = dir.path().join("manifest.json");
    let text = fs::read_to_string(&manifest).unwrap();
    fs::write(&manifest, &text[..text.len() / 2]).unwrap();
    assert!(load_dataset::<f64>(dir.path()).is_err());
    fs::write(&manifest, text.replace("\"version\": 1", "\"version\": 2")).unwrap();
    assert!(load_dataset::<f64>(dir.path()).is_err());
    fs::write(&manifest, &text).unwrap();

    let edges = dir.path().join("edge_article__cites__article.u64.bin");
    let mut bytes = fs::read(&edges).unwrap();
    bytes[..8].copy_from_slice(&99u64.to_le_bytes());
    fs::write(&edges, &bytes).unwrap();
    let err = load_dataset::<f64>(dir.path()).err().unwrap().to_string();
    assert!(err.contains("edge_article__cites__article"), "{err}");
}

#[test]
fn disk_and_memory_stores_answer_alike() {
    let g = Arc::new(small_graph());
    let mem = in_memory_stores(&g);
    let dir = tempfile::tempdir().unwrap();
    save_dataset(&g, dir.path()).unwrap();
    let disk = load_dataset::<f64>(dir.path()).unwrap();
    assert_eq!(mem.node_types(), disk.node_types());
    assert_eq!(mem.edge_types(), disk.edge_types());
    for t in mem.node_types() {
        assert_eq!(mem.node_time(&t).unwrap(), disk.node_time(&t).unwrap());
        let n = mem.num_nodes(&t).unwrap();
        let rows: Vec<usize> = (0..n).rev().chain([0, 0]).collect();
        let a: Tensor<f64> = mem.get(&t, &rows, "x").unwrap();
        let b = disk.get(&t, &rows, "x").unwrap();
        assert_eq!(a.to_vec(), b.to_vec());
        assert!(disk.get(&t, &[n], "x").is_err());
    }
    for et in mem.edge_types() {
        let (a, b) = (mem.edge_index(&et).unwrap(), disk.edge_index(&et).unwrap());
        assert_eq!((a.src(), a.dst()), (b.src(), b.dst()));
        assert_eq!(mem.edge_time(&et).unwrap(), disk.edge_time(&et).unwrap());
    }
    assert!(disk.get("article", &[0], "y").is_err());
    assert!(load_dataset::<f32>(dir.path())
        .unwrap()
        .get("article", &[0], "x")
        .is_err());
}
