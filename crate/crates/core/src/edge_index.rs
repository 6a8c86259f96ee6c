//! COO edge lists with verified metadata and demand-filled CSR/CSC caches.
//!
//! An [`EdgeIndex`] stores `(src, dst)` pairs together with the bounds of the
//! source and destination node sets, an optional sort order, and whether the
//! edge set is symmetric. Compressed views are built on first request by a
//! stable counting sort and published once; later calls return the cached
//! `Arc`. For undirected graphs the transposed view is the CSR itself, so no
//! CSC is ever allocated.

use std::ops::Deref;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SortOrder {
    #[default]
    Unsorted,
    BySrc,
    ByDst,
}

/// Metadata a caller asserts about the arrays it hands over. Every claim is
/// checked before it is recorded.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Claims {
    pub sort_order: Option<SortOrder>,
    pub is_undirected: bool,
}

impl Claims {
    pub fn sorted(order: SortOrder) -> Self {
        Claims {
            sort_order: Some(order),
            is_undirected: false,
        }
    }

    pub fn undirected() -> Self {
        Claims {
            sort_order: None,
            is_undirected: true,
        }
    }
}

/// Compressed grouping of edges by one endpoint.
///
/// Row `r` owns compressed positions `rowptr[r]..rowptr[r + 1]`; `col[p]` is
/// the opposite endpoint and `perm[p]` the original COO position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsrView {
    pub rowptr: Vec<usize>,
    pub col: Vec<usize>,
    pub perm: Vec<usize>,
}

impl CsrView {
    pub fn num_rows(&self) -> usize {
        self.rowptr.len() - 1
    }

    pub fn num_edges(&self) -> usize {
        self.col.len()
    }

    pub fn degree(&self, row: usize) -> usize {
        self.rowptr[row + 1] - self.rowptr[row]
    }

    pub fn row_range(&self, row: usize) -> std::ops::Range<usize> {
        self.rowptr[row]..self.rowptr[row + 1]
    }

    /// Rebuilds `(row, col)` pairs in original COO order.
    pub fn expand(&self) -> Vec<(usize, usize)> {
        let mut out = vec![(0, 0); self.col.len()];
        for r in 0..self.num_rows() {
            for p in self.row_range(r) {
                out[self.perm[p]] = (r, self.col[p]);
            }
        }
        out
    }

    /// Stable counting sort of `keys` into `num_rows` buckets.
    pub(crate) fn build(keys: &[usize], other: &[usize], num_rows: usize) -> Self {
        let mut rowptr = vec![0usize; num_rows + 1];
        for &k in keys {
            rowptr[k + 1] += 1;
        }
        for r in 0..num_rows {
            rowptr[r + 1] += rowptr[r];
        }
        let mut next = rowptr[..num_rows].to_vec();
        let mut col = vec![0; keys.len()];
        let mut perm = vec![0; keys.len()];
        for (e, (&k, &o)) in keys.iter().zip(other).enumerate() {
            let p = next[k];
            next[k] += 1;
            col[p] = o;
            perm[p] = e;
        }
        CsrView { rowptr, col, perm }
    }

    fn heap_bytes(&self) -> usize {
        (self.rowptr.len() + self.col.len() + self.perm.len()) * std::mem::size_of::<usize>()
    }
}

/// Shared, immutable index buffer; a prefix of a parent buffer aliases it.
#[derive(Debug, Clone)]
pub struct IndexBuf {
    data: Arc<Vec<usize>>,
    len: usize,
}

impl IndexBuf {
    fn new(v: Vec<usize>) -> Self {
        let len = v.len();
        IndexBuf { data: Arc::new(v), len }
    }

    fn prefix(&self, len: usize) -> Self {
        IndexBuf {
            data: Arc::clone(&self.data),
            len,
        }
    }

    pub fn shares_storage(&self, other: &IndexBuf) -> bool {
        Arc::ptr_eq(&self.data, &other.data)
    }
}

impl Deref for IndexBuf {
    type Target = [usize];

    fn deref(&self) -> &[usize] {
        &self.data[..self.len]
    }
}

#[derive(Debug)]
pub struct EdgeIndex {
    src: IndexBuf,
    dst: IndexBuf,
    num_src: usize,
    num_dst: usize,
    sort_order: SortOrder,
    undirected: bool,
    // shared between clones; mutation swaps in fresh cells
    csr: Arc<OnceLock<Arc<CsrView>>>,
    csc: Arc<OnceLock<Arc<CsrView>>>,
    builds: Arc<AtomicUsize>,
}

impl Clone for EdgeIndex {
    fn clone(&self) -> Self {
        EdgeIndex {
            src: self.src.clone(),
            dst: self.dst.clone(),
            num_src: self.num_src,
            num_dst: self.num_dst,
            sort_order: self.sort_order,
            undirected: self.undirected,
            csr: Arc::clone(&self.csr),
            csc: Arc::clone(&self.csc),
            builds: Arc::clone(&self.builds),
        }
    }
}

fn first_descent(keys: &[usize]) -> Option<usize> {
    keys.windows(2).position(|w| w[0] > w[1]).map(|p| p + 1)
}

impl EdgeIndex {
    /// Builds an edge index after checking bounds and every metadata claim.
    pub fn new(src: Vec<usize>, dst: Vec<usize>, num_src: usize, num_dst: usize, claims: Claims) -> Result<Self> {
        if src.len() != dst.len() {
            return Err(Error::EdgeIndex(format!(
                "src has {} entries, dst has {}",
                src.len(),
                dst.len()
            )));
        }
        check_bounds(&src, num_src, "src")?;
        check_bounds(&dst, num_dst, "dst")?;
        let sort_order = claims.sort_order.unwrap_or(SortOrder::Unsorted);
        match sort_order {
            SortOrder::Unsorted => {}
            SortOrder::BySrc => {
                if let Some(position) = first_descent(&src) {
                    return Err(Error::ClaimRejected {
                        claim: "by_src",
                        position,
                    });
                }
            }
            SortOrder::ByDst => {
                if let Some(position) = first_descent(&dst) {
                    return Err(Error::ClaimRejected {
                        claim: "by_dst",
                        position,
                    });
                }
            }
        }
        if claims.is_undirected {
            if num_src != num_dst {
                return Err(Error::ClaimRejected {
                    claim: "is_undirected",
                    position: 0,
                });
            }
            if let Some(position) = first_unmatched_reverse(&src, &dst) {
                return Err(Error::ClaimRejected {
                    claim: "is_undirected",
                    position,
                });
            }
        }
        Ok(EdgeIndex {
            src: IndexBuf::new(src),
            dst: IndexBuf::new(dst),
            num_src,
            num_dst,
            sort_order,
            undirected: claims.is_undirected,
            csr: Arc::default(),
            csc: Arc::default(),
            builds: Arc::default(),
        })
    }

    /// Square edge index over `num_nodes` nodes without claims.
    pub fn from_pairs(pairs: &[(usize, usize)], num_nodes: usize) -> Result<Self> {
        let (src, dst) = pairs.iter().copied().unzip();
        Self::new(src, dst, num_nodes, num_nodes, Claims::default())
    }

    /// Like [`EdgeIndex::new`], additionally recording whichever sort order
    /// the arrays happen to satisfy (destination order preferred).
    pub fn with_detected_order(src: Vec<usize>, dst: Vec<usize>, num_src: usize, num_dst: usize) -> Result<Self> {
        let order = if first_descent(&dst).is_none() {
            SortOrder::ByDst
        } else if first_descent(&src).is_none() {
            SortOrder::BySrc
        } else {
            SortOrder::Unsorted
        };
        Self::new(src, dst, num_src, num_dst, Claims::sorted(order))
    }

    pub fn empty(num_src: usize, num_dst: usize) -> Self {
        Self::new(Vec::new(), Vec::new(), num_src, num_dst, Claims::default())
            .expect("empty edge set satisfies all invariants")
    }

    pub fn src(&self) -> &[usize] {
        &self.src
    }

    pub fn dst(&self) -> &[usize] {
        &self.dst
    }

    pub fn src_buf(&self) -> &IndexBuf {
        &self.src
    }

    pub fn dst_buf(&self) -> &IndexBuf {
        &self.dst
    }

    pub fn num_edges(&self) -> usize {
        self.src.len()
    }

    pub fn num_src_nodes(&self) -> usize {
        self.num_src
    }

    pub fn num_dst_nodes(&self) -> usize {
        self.num_dst
    }

    pub fn sort_order(&self) -> SortOrder {
        self.sort_order
    }

    pub fn is_undirected(&self) -> bool {
        self.undirected
    }

    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.src.iter().copied().zip(self.dst.iter().copied())
    }

    /// Number of compressed views computed over this index's lifetime.
    pub fn cache_builds(&self) -> usize {
        self.builds.load(Ordering::Relaxed)
    }

    pub fn csr_cached(&self) -> bool {
        self.csr.get().is_some()
    }

    pub fn csc_cached(&self) -> bool {
        self.csc.get().is_some()
    }

    /// Heap bytes held by populated caches.
    pub fn cache_bytes(&self) -> usize {
        self.csr.get().map_or(0, |c| c.heap_bytes()) + self.csc.get().map_or(0, |c| c.heap_bytes())
    }

    fn fill(&self, cell: &OnceLock<Arc<CsrView>>, by_src: bool) -> Arc<CsrView> {
        if let Some(v) = cell.get() {
            return Arc::clone(v);
        }
        // compute, then publish; a racing caller may win the publish
        let view = if by_src {
            CsrView::build(&self.src, &self.dst, self.num_src)
        } else {
            CsrView::build(&self.dst, &self.src, self.num_dst)
        };
        self.builds.fetch_add(1, Ordering::Relaxed);
        let _ = cell.set(Arc::new(view));
        Arc::clone(cell.get().expect("published above"))
    }

    /// Edges grouped by source node.
    pub fn to_csr(&self) -> Arc<CsrView> {
        self.fill(&self.csr, true)
    }

    /// Edges grouped by destination node.
    pub fn to_csc(&self) -> Arc<CsrView> {
        self.fill(&self.csc, false)
    }

    /// Rows of `Aᵀ`: edges grouped by destination. For an undirected graph
    /// `A = Aᵀ`, and the CSR cache is returned instead.
    pub fn transpose_view(&self) -> Arc<CsrView> {
        if self.undirected {
            self.to_csr()
        } else {
            self.to_csc()
        }
    }

    /// Stable sort. Returns the sorted index and `perm` with
    /// `perm[new_position] = old_position`.
    pub fn sort_by(&self, order: SortOrder) -> (EdgeIndex, Vec<usize>) {
        let e = self.num_edges();
        if order == SortOrder::Unsorted || order == self.sort_order {
            return (self.clone(), (0..e).collect());
        }
        let by_src = order == SortOrder::BySrc;
        let view = if by_src { self.to_csr() } else { self.to_csc() };
        let perm = view.perm.clone();
        let src: Vec<usize> = perm.iter().map(|&p| self.src[p]).collect();
        let dst: Vec<usize> = perm.iter().map(|&p| self.dst[p]).collect();
        let sorted = EdgeIndex {
            src: IndexBuf::new(src),
            dst: IndexBuf::new(dst),
            num_src: self.num_src,
            num_dst: self.num_dst,
            sort_order: order,
            undirected: self.undirected,
            csr: Arc::default(),
            csc: Arc::default(),
            builds: Arc::default(),
        };
        // The grouping the sort followed is still valid; only its perm
        // collapses to the identity.
        let carried = Arc::new(CsrView {
            rowptr: view.rowptr.clone(),
            col: view.col.clone(),
            perm: (0..e).collect(),
        });
        let cell = if by_src { &sorted.csr } else { &sorted.csc };
        let _ = cell.set(carried);
        (sorted, perm)
    }

    /// Zero-copy view of the first `num_edges` edges over shrunken node
    /// bounds. Sort order and symmetry-free metadata carry over.
    pub fn prefix(&self, num_edges: usize, num_src: usize, num_dst: usize) -> Result<EdgeIndex> {
        if num_edges > self.num_edges() || num_src > self.num_src || num_dst > self.num_dst {
            return Err(Error::EdgeIndex(format!(
                "prefix ({num_edges}, {num_src}, {num_dst}) exceeds ({}, {}, {})",
                self.num_edges(),
                self.num_src,
                self.num_dst
            )));
        }
        let src = self.src.prefix(num_edges);
        let dst = self.dst.prefix(num_edges);
        check_bounds(&src, num_src, "src")?;
        check_bounds(&dst, num_dst, "dst")?;
        Ok(EdgeIndex {
            src,
            dst,
            num_src,
            num_dst,
            sort_order: self.sort_order,
            // a prefix of a symmetric set need not be symmetric
            undirected: false,
            csr: Arc::default(),
            csc: Arc::default(),
            builds: Arc::default(),
        })
    }

    /// Number of incoming edges per destination node.
    pub fn in_degree(&self) -> Vec<usize> {
        let mut deg = vec![0usize; self.num_dst];
        for &d in self.dst.iter() {
            deg[d] += 1;
        }
        deg
    }

    /// Copy of this index without the edges where `keep[e]` is false.
    pub fn filter(&self, keep: &[bool]) -> Result<EdgeIndex> {
        if keep.len() != self.num_edges() {
            return Err(Error::EdgeIndex(format!(
                "keep mask of length {} for {} edges",
                keep.len(),
                self.num_edges()
            )));
        }
        let (src, dst): (Vec<usize>, Vec<usize>) = self.pairs().zip(keep).filter(|(_, &k)| k).map(|(p, _)| p).unzip();
        let order = self.sort_order;
        Self::new(src, dst, self.num_src, self.num_dst, Claims::sorted(order))
    }

    fn invalidate(&mut self) {
        self.csr = Arc::default();
        self.csc = Arc::default();
    }

    fn owned_arrays(&mut self) -> (&mut Vec<usize>, &mut Vec<usize>) {
        let src = Arc::make_mut(&mut self.src.data);
        src.truncate(self.src.len);
        let dst = Arc::make_mut(&mut self.dst.data);
        dst.truncate(self.dst.len);
        (src, dst)
    }

    /// Appends an edge. Caches are dropped; a sort order survives only if the
    /// new edge keeps it.
    pub fn push_edge(&mut self, src: usize, dst: usize) -> Result<()> {
        check_bounds(&[src], self.num_src, "src")?;
        check_bounds(&[dst], self.num_dst, "dst")?;
        let keeps_order = match self.sort_order {
            SortOrder::Unsorted => true,
            SortOrder::BySrc => self.src.last().is_none_or(|&l| l <= src),
            SortOrder::ByDst => self.dst.last().is_none_or(|&l| l <= dst),
        };
        if !keeps_order {
            self.sort_order = SortOrder::Unsorted;
        }
        self.undirected = false;
        let (s, d) = self.owned_arrays();
        s.push(src);
        d.push(dst);
        self.src.len += 1;
        self.dst.len += 1;
        self.invalidate();
        Ok(())
    }

    /// Removes the edge at COO position `pos`, preserving the order of the rest.
    pub fn remove_edge(&mut self, pos: usize) -> Result<(usize, usize)> {
        if pos >= self.num_edges() {
            return Err(Error::IndexOutOfRange {
                op: "remove_edge",
                position: pos,
                index: pos,
                bound: self.num_edges(),
            });
        }
        self.undirected = false;
        let (s, d) = self.owned_arrays();
        let pair = (s.remove(pos), d.remove(pos));
        self.src.len -= 1;
        self.dst.len -= 1;
        self.invalidate();
        Ok(pair)
    }
}

fn check_bounds(ids: &[usize], bound: usize, side: &str) -> Result<()> {
    match ids.iter().position(|&v| v >= bound) {
        Some(p) => Err(Error::EdgeIndex(format!(
            "{side}[{p}] = {} out of range for {bound} nodes",
            ids[p]
        ))),
        None => Ok(()),
    }
}

/// First position whose reversed pair occurs a different number of times
/// than the pair itself (multiset symmetry).
fn first_unmatched_reverse(src: &[usize], dst: &[usize]) -> Option<usize> {
    let mut sorted: Vec<(usize, usize)> = src.iter().copied().zip(dst.iter().copied()).collect();
    sorted.sort_unstable();
    let count = |pair: (usize, usize)| {
        let lo = sorted.partition_point(|p| *p < pair);
        let hi = sorted.partition_point(|p| *p <= pair);
        hi - lo
    };
    src.iter().zip(dst).position(|(&s, &d)| count((s, d)) != count((d, s)))
}
