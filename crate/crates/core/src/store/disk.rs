//! Dataset directory layout.
//!
//! ```text
//! manifest.json                        format tag, version, node and edge records
//! node_<type>.<dtype>.bin              features, row-major little-endian
//! node_<type>.time.i64.bin             optional node timestamps
//! edge_<src>__<rel>__<dst>.u64.bin     |E| (src, dst) pairs of little-endian u64
//! edge_<src>__<rel>__<dst>.time.i64.bin optional edge timestamps
//! ```
//!
//! Every binary must have exactly the byte length the manifest implies.
//! Feature files are memory-mapped and decoded row by row on `get`; edge and
//! timestamp arrays are decoded and validated when the store opens.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::Write;
use std::marker::PhantomData;
use std::path::{Path, PathBuf};

use memmap2::Mmap;
use serde::{Deserialize, Serialize};

use super::{gather_checked, AttrInfo, FeatureStore, GraphStore, FEATURES};
use crate::edge_index::{Claims, EdgeIndex, SortOrder};
use crate::error::{Error, Result};
use crate::hetero::{EdgeType, HeteroGraph};
use crate::scalar::{DType, Scalar};
use crate::tensor::Tensor;

pub const FORMAT_TAG: &str = "graphmill-dataset";
pub const FORMAT_VERSION: u32 = 1;
pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeRecord {
    pub name: String,
    pub count: usize,
    pub feature_width: usize,
    pub dtype: DType,
    pub has_time: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeRecord {
    pub triple: String,
    pub edge_count: usize,
    pub has_time: bool,
    /// Timestamps are non-decreasing; checked on open.
    #[serde(default)]
    pub time_sorted: bool,
    #[serde(default)]
    pub sort_order: SortOrder,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format: String,
    pub version: u32,
    pub nodes: Vec<NodeRecord>,
    pub edges: Vec<EdgeRecord>,
}

pub fn node_file(name: &str, dtype: DType) -> String {
    format!("node_{name}.{}.bin", dtype.name())
}

pub fn node_time_file(name: &str) -> String {
    format!("node_{name}.time.i64.bin")
}

pub fn edge_file(et: &EdgeType) -> String {
    format!("edge_{et}.u64.bin")
}

pub fn edge_time_file(et: &EdgeType) -> String {
    format!("edge_{et}.time.i64.bin")
}

/// Type and relation names end up in file names.
fn check_name(dir: &Path, name: &str) -> Result<()> {
    let ok = !name.is_empty()
        && !name.contains("__")
        && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-');
    if ok {
        Ok(())
    } else {
        Err(Error::dataset(dir, format!("invalid type or relation name {name:?}")))
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(bytes).map_err(|e| Error::io(path, e))
}

fn i64_bytes(values: &[i64]) -> Vec<u8> {
    values.iter().flat_map(|v| v.to_le_bytes()).collect()
}

/// Writes `g` into `dir` (created if missing) and returns the manifest.
pub fn save_dataset<T: Scalar>(g: &HeteroGraph<T>, dir: &Path) -> Result<DatasetManifest> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut manifest = DatasetManifest {
        format: FORMAT_TAG.into(),
        version: FORMAT_VERSION,
        nodes: Vec::new(),
        edges: Vec::new(),
    };
    for (name, store) in g.nodes() {
        check_name(dir, name)?;
        let mut bytes = Vec::with_capacity(store.x.numel() * T::DTYPE.size_of());
        store.x.data().iter().for_each(|v| v.write_le(&mut bytes));
        write_file(&dir.join(node_file(name, T::DTYPE)), &bytes)?;
        if let Some(t) = &store.time {
            write_file(&dir.join(node_time_file(name)), &i64_bytes(t))?;
        }
        manifest.nodes.push(NodeRecord {
            name: name.clone(),
            count: store.num_nodes(),
            feature_width: store.x.row_width(),
            dtype: T::DTYPE,
            has_time: store.time.is_some(),
        });
    }
    for (et, store) in g.edges() {
        check_name(dir, &et.rel)?;
        if store.attr.is_some() {
            return Err(Error::dataset(
                dir,
                format!("{et}: edge attributes are not part of the format"),
            ));
        }
        let bytes: Vec<u8> = store
            .index
            .pairs()
            .flat_map(|(s, d)| [(s as u64).to_le_bytes(), (d as u64).to_le_bytes()])
            .flatten()
            .collect();
        write_file(&dir.join(edge_file(et)), &bytes)?;
        if let Some(t) = &store.time {
            write_file(&dir.join(edge_time_file(et)), &i64_bytes(t))?;
        }
        manifest.edges.push(EdgeRecord {
            triple: et.to_string(),
            edge_count: store.index.num_edges(),
            has_time: store.time.is_some(),
            time_sorted: store.time.as_ref().is_some_and(|t| t.windows(2).all(|w| w[0] <= w[1])),
            sort_order: store.index.sort_order(),
        });
    }
    let json = serde_json::to_vec_pretty(&manifest)?;
    write_file(&dir.join(MANIFEST), &json)?;
    Ok(manifest)
}

#[derive(Debug)]
struct DiskNode {
    count: usize,
    width: usize,
    dtype: DType,
    /// `None` for zero-byte files, which cannot be mapped.
    map: Option<Mmap>,
    time: Option<Vec<i64>>,
}

#[derive(Debug)]
struct DiskEdge {
    index: EdgeIndex,
    time: Option<Vec<i64>>,
}

/// File-backed stores over a dataset directory; read-only once open.
#[derive(Debug)]
pub struct DiskStore<T: Scalar> {
    root: PathBuf,
    manifest: DatasetManifest,
    nodes: BTreeMap<String, DiskNode>,
    edges: BTreeMap<EdgeType, DiskEdge>,
    _scalar: PhantomData<fn() -> T>,
}

fn open_exact(path: &Path, expected: usize) -> Result<Option<Mmap>> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    let len = f.metadata().map_err(|e| Error::io(path, e))?.len() as usize;
    if len != expected {
        return Err(Error::dataset(path, format!("expected {expected} bytes, found {len}")));
    }
    if len == 0 {
        return Ok(None);
    }
    // SAFETY: stores are read-only and the format forbids writers while a
    // dataset is open.
    let map = unsafe { Mmap::map(&f) }.map_err(|e| Error::io(path, e))?;
    Ok(Some(map))
}

fn read_i64s(path: &Path, count: usize) -> Result<Vec<i64>> {
    let map = open_exact(path, count * 8)?;
    Ok(map
        .as_deref()
        .unwrap_or(&[])
        .chunks_exact(8)
        .map(|c| i64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect())
}

/// Opens and validates a dataset directory.
pub fn load_dataset<T: Scalar>(dir: &Path) -> Result<DiskStore<T>> {
    let manifest_path = dir.join(MANIFEST);
    let text = fs::read(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
    let manifest: DatasetManifest = serde_json::from_slice(&text)
        .map_err(|e| Error::dataset(&manifest_path, format!("malformed manifest: {e}")))?;
    if manifest.format != FORMAT_TAG {
        return Err(Error::dataset(
            &manifest_path,
            format!("bad format tag {:?}", manifest.format),
        ));
    }
    if manifest.version != FORMAT_VERSION {
        return Err(Error::dataset(
            &manifest_path,
            format!("unsupported version {}", manifest.version),
        ));
    }

    let mut nodes = BTreeMap::new();
    for rec in &manifest.nodes {
        check_name(dir, &rec.name)?;
        let path = dir.join(node_file(&rec.name, rec.dtype));
        let map = open_exact(&path, rec.count * rec.feature_width * rec.dtype.size_of())?;
        let time = if rec.has_time {
            Some(read_i64s(&dir.join(node_time_file(&rec.name)), rec.count)?)
        } else {
            None
        };
        let node = DiskNode {
            count: rec.count,
            width: rec.feature_width,
            dtype: rec.dtype,
            map,
            time,
        };
        if nodes.insert(rec.name.clone(), node).is_some() {
            return Err(Error::dataset(
                &manifest_path,
                format!("duplicate node type {}", rec.name),
            ));
        }
    }

    let mut edges = BTreeMap::new();
    for rec in &manifest.edges {
        let et: EdgeType = rec
            .triple
            .parse()
            .map_err(|e| Error::dataset(&manifest_path, format!("{e}")))?;
        for name in [&et.src, &et.rel, &et.dst] {
            check_name(dir, name)?;
        }
        let count = |t: &str| {
            nodes
                .get(t)
                .map(|n: &DiskNode| n.count)
                .ok_or_else(|| Error::dataset(&manifest_path, format!("{et} references unknown node type {t}")))
        };
        let (ns, nd) = (count(&et.src)?, count(&et.dst)?);
        let path = dir.join(edge_file(&et));
        let map = open_exact(&path, rec.edge_count * 16)?;
        let words: Vec<u64> = map
            .as_deref()
            .unwrap_or(&[])
            .chunks_exact(8)
            .map(|c| u64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        let to_index = |w: u64, bound: usize| -> Result<usize> {
            usize::try_from(w)
                .ok()
                .filter(|&i| i < bound)
                .ok_or_else(|| Error::dataset(&path, format!("node index {w} out of bounds {bound}")))
        };
        let mut src = Vec::with_capacity(rec.edge_count);
        let mut dst = Vec::with_capacity(rec.edge_count);
        for pair in words.chunks_exact(2) {
            src.push(to_index(pair[0], ns)?);
            dst.push(to_index(pair[1], nd)?);
        }
        let index = EdgeIndex::new(src, dst, ns, nd, Claims::sorted(rec.sort_order))
            .map_err(|e| Error::dataset(&path, e.to_string()))?;
        let time = if rec.has_time {
            let tpath = dir.join(edge_time_file(&et));
            let t = read_i64s(&tpath, rec.edge_count)?;
            if rec.time_sorted {
                if let Some(p) = t.windows(2).position(|w| w[0] > w[1]) {
                    return Err(Error::dataset(
                        &tpath,
                        format!("timestamps decrease at position {}", p + 1),
                    ));
                }
            }
            Some(t)
        } else {
            None
        };
        if edges.insert(et.clone(), DiskEdge { index, time }).is_some() {
            return Err(Error::dataset(&manifest_path, format!("duplicate edge type {et}")));
        }
    }
    Ok(DiskStore {
        root: dir.to_path_buf(),
        manifest,
        nodes,
        edges,
        _scalar: PhantomData,
    })
}

impl<T: Scalar> DiskStore<T> {
    pub fn manifest(&self) -> &DatasetManifest {
        &self.manifest
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn node(&self, name: &str) -> Result<&DiskNode> {
        self.nodes
            .get(name)
            .ok_or_else(|| Error::UnknownNodeType(name.to_string()))
    }

    fn edge(&self, et: &EdgeType) -> Result<&DiskEdge> {
        self.edges.get(et).ok_or_else(|| Error::UnknownEdgeType(et.to_string()))
    }

    /// Materializes the whole dataset as an in-memory graph.
    pub fn to_graph(&self) -> Result<HeteroGraph<T>> {
        let mut g = HeteroGraph::new();
        for (name, node) in &self.nodes {
            let rows: Vec<usize> = (0..node.count).collect();
            let x = self.get(name, &rows, FEATURES)?;
            g.add_node_type(name, x, node.time.clone())?;
        }
        for (et, e) in &self.edges {
            g.add_edge_type(et.clone(), e.index.clone(), None, e.time.clone())?;
        }
        Ok(g)
    }
}

impl<T: Scalar> FeatureStore<T> for DiskStore<T> {
    fn get(&self, node_type: &str, rows: &[usize], attr: &str) -> Result<Tensor<T>> {
        let node = self.node(node_type)?;
        if attr != FEATURES {
            return Err(Error::UnknownAttribute {
                node_type: node_type.to_string(),
                attr: attr.to_string(),
            });
        }
        if node.dtype != T::DTYPE {
            return Err(Error::dataset(
                self.root.join(node_file(node_type, node.dtype)),
                format!("stored as {}, requested {}", node.dtype.name(), T::DTYPE.name()),
            ));
        }
        let size = node.dtype.size_of();
        let row_bytes = node.width * size;
        let bytes = node.map.as_deref().unwrap_or(&[]);
        gather_checked(node.count, node.width, rows, |r, out| {
            out.extend(
                bytes[r * row_bytes..(r + 1) * row_bytes]
                    .chunks_exact(size)
                    .map(T::read_le),
            )
        })
    }

    fn catalog(&self) -> Vec<AttrInfo> {
        self.nodes
            .iter()
            .map(|(name, n)| AttrInfo {
                node_type: name.clone(),
                name: FEATURES.to_string(),
                dtype: n.dtype,
                width: n.width,
            })
            .collect()
    }
}

impl<T: Scalar> GraphStore for DiskStore<T> {
    fn node_types(&self) -> Vec<String> {
        self.nodes.keys().cloned().collect()
    }

    fn num_nodes(&self, node_type: &str) -> Result<usize> {
        self.node(node_type).map(|n| n.count)
    }

    fn edge_types(&self) -> Vec<EdgeType> {
        self.edges.keys().cloned().collect()
    }

    fn edge_index(&self, et: &EdgeType) -> Result<EdgeIndex> {
        Ok(self.edge(et)?.index.clone())
    }

    fn edge_time(&self, et: &EdgeType) -> Result<Option<&[i64]>> {
        Ok(self.edge(et)?.time.as_deref())
    }

    fn node_time(&self, node_type: &str) -> Result<Option<&[i64]>> {
        Ok(self.node(node_type)?.time.as_deref())
    }
}
