//! RBF kernel evaluation, bandwidth heuristics, and a kernel-row cache that
//! survives index swaps and logical shrinking of the active set.
//!
//! The cache keeps whole rows of the kernel matrix under an LRU policy with a
//! byte budget. When two data indices are swapped, cached rows are
//! column-swapped in place instead of evicted, so a solver that permutes the
//! working set keeps its cache hot. All cached values are exact `f64`
//! evaluations: results with the cache enabled are identical to results with
//! the cache disabled.

use crate::dataset::DataMatrix;
use crate::error::{Error, Result};

/// Default cache budget: 256 MiB of kernel rows.
pub const DEFAULT_CACHE_BYTES: usize = 256 << 20;

/// Kernel function. `Rbf` is the production kernel; `Linear` exists for
/// analytic tests and diagnostics only and is not reachable from the CLI.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelKind {
    Rbf { gamma: f64 },
    Linear,
}

impl KernelKind {
    /// K(x, x) for an arbitrary point.
    pub fn eval_self(&self, x: &[f64]) -> f64 {
        self.eval(x, x)
    }

    fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            KernelKind::Rbf { gamma } => {
                let mut dist_sq = 0.0;
                for (x, y) in a.iter().zip(b) {
                    let d = x - y;
                    dist_sq += d * d;
                }
                (-gamma * dist_sq).exp()
            }
            KernelKind::Linear => a.iter().zip(b).map(|(x, y)| x * y).sum(),
        }
    }
}

const NO_LINK: usize = usize::MAX;

struct LruNode {
    prev: usize,
    next: usize,
}

/// LRU cache of full kernel rows, indexed by current data position. Index
/// `n` is the sentinel head of a circular doubly-linked recency list.
struct RowCache {
    n: usize,
    budget_rows: usize,
    rows: Vec<Option<Vec<f64>>>,
    nodes: Vec<LruNode>,
    cached: usize,
}

impl RowCache {
    fn new(n: usize, budget_bytes: usize) -> Self {
        let row_bytes = (n * std::mem::size_of::<f64>()).max(1);
        // Keep at least two rows so a violating pair always fits.
        let budget_rows = (budget_bytes / row_bytes).max(2);
        let mut nodes: Vec<LruNode> = (0..n)
            .map(|_| LruNode {
                prev: NO_LINK,
                next: NO_LINK,
            })
            .collect();
        nodes.push(LruNode { prev: n, next: n });
        RowCache {
            n,
            budget_rows,
            rows: (0..n).map(|_| None).collect(),
            nodes,
            cached: 0,
        }
    }

    fn in_list(&self, i: usize) -> bool {
        self.nodes[i].prev != NO_LINK
    }

    fn unlink(&mut self, i: usize) {
        let (prev, next) = (self.nodes[i].prev, self.nodes[i].next);
        self.nodes[prev].next = next;
        self.nodes[next].prev = prev;
        self.nodes[i].prev = NO_LINK;
        self.nodes[i].next = NO_LINK;
    }

    fn push_back(&mut self, i: usize) {
        let head = self.n;
        let tail = self.nodes[head].prev;
        self.nodes[i].prev = tail;
        self.nodes[i].next = head;
        self.nodes[tail].next = i;
        self.nodes[head].prev = i;
    }

    fn touch(&mut self, i: usize) {
        if self.in_list(i) {
            self.unlink(i);
            self.push_back(i);
        }
    }

    fn insert(&mut self, i: usize, row: Vec<f64>) {
        debug_assert!(self.rows[i].is_none());
        while self.cached >= self.budget_rows {
            let victim = self.nodes[self.n].next;
            if victim == self.n {
                break;
            }
            self.unlink(victim);
            self.rows[victim] = None;
            self.cached -= 1;
        }
        self.rows[i] = Some(row);
        self.push_back(i);
        self.cached += 1;
    }

    fn swap_index(&mut self, i: usize, j: usize) {
        if i == j {
            return;
        }
        // Row identity follows the data point.
        let i_in = self.in_list(i);
        let j_in = self.in_list(j);
        if i_in {
            self.unlink(i);
        }
        if j_in {
            self.unlink(j);
        }
        self.rows.swap(i, j);
        if i_in {
            self.push_back(j);
        }
        if j_in {
            self.push_back(i);
        }
        // Column entries move with the data point in every cached row.
        for row in self.rows.iter_mut().flatten() {
            row.swap(i, j);
        }
    }
}

/// Kernel parameters plus the data in its current internal order. Row
/// lookups go through the cache when one is configured; swaps permute data,
/// ids, labels, and cached rows consistently.
pub struct KernelContext {
    kind: KernelKind,
    dims: usize,
    n: usize,
    points: Vec<f64>,
    ids: Vec<u64>,
    labels: Option<Vec<bool>>,
    active_size: usize,
    cache: Option<RowCache>,
    scratch: Vec<f64>,
}

impl KernelContext {
    /// Context with the default 256 MiB row cache.
    pub fn new(data: &DataMatrix, kind: KernelKind) -> Self {
        Self::with_cache_budget(data, kind, Some(DEFAULT_CACHE_BYTES))
    }

    /// Context with an explicit cache budget; `None` disables caching and
    /// every row request recomputes the row.
    pub fn with_cache_budget(
        data: &DataMatrix,
        kind: KernelKind,
        budget_bytes: Option<usize>,
    ) -> Self {
        let n = data.n_rows();
        let mut points = Vec::with_capacity(n * data.dims());
        for i in 0..n {
            points.extend_from_slice(data.row(i));
        }
        KernelContext {
            kind,
            dims: data.dims(),
            n,
            points,
            ids: data.ids().to_vec(),
            labels: data.labels().map(|l| l.to_vec()),
            active_size: n,
            cache: budget_bytes.map(|b| RowCache::new(n, b)),
            scratch: vec![0.0; n],
        }
    }

    pub fn kind(&self) -> KernelKind {
        self.kind
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    /// Total number of points, including any swapped out of the active set.
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn active_size(&self) -> usize {
        self.active_size
    }

    /// Logically truncate or grow the active prefix. Points beyond the
    /// active size stay addressable for scoring.
    pub fn set_active_size(&mut self, active: usize) {
        assert!(active <= self.n);
        self.active_size = active;
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dims..(i + 1) * self.dims]
    }

    pub fn id(&self, i: usize) -> u64 {
        self.ids[i]
    }

    pub fn label(&self, i: usize) -> Option<bool> {
        self.labels.as_ref().map(|l| l[i])
    }

    pub fn has_labels(&self) -> bool {
        self.labels.is_some()
    }

    /// Bounds-checked kernel evaluation within the active set.
    pub fn kernel_eval(&self, i: usize, j: usize) -> Result<f64> {
        if i >= self.active_size || j >= self.active_size {
            return Err(Error::IndexOutOfRange {
                index: i.max(j),
                active: self.active_size,
            });
        }
        Ok(self.eval(i, j))
    }

    /// Direct kernel evaluation between two stored points (no cache).
    pub fn eval(&self, i: usize, j: usize) -> f64 {
        debug_assert!(i < self.n && j < self.n);
        self.kind.eval(self.point(i), self.point(j))
    }

    /// Kernel evaluation against an external point.
    pub fn eval_external(&self, i: usize, x: &[f64]) -> f64 {
        debug_assert!(i < self.n);
        self.kind.eval(self.point(i), x)
    }

    /// Full kernel row for index `i`, served from the cache when possible.
    pub fn row(&mut self, i: usize) -> &[f64] {
        debug_assert!(i < self.n);
        match &mut self.cache {
            Some(cache) => {
                if cache.rows[i].is_some() {
                    cache.touch(i);
                } else {
                    let mut row = vec![0.0; self.n];
                    fill_row(&self.kind, &self.points, self.dims, i, &mut row);
                    cache.insert(i, row);
                }
                cache.rows[i].as_deref().unwrap()
            }
            None => {
                let mut row = std::mem::take(&mut self.scratch);
                fill_row(&self.kind, &self.points, self.dims, i, &mut row);
                self.scratch = row;
                &self.scratch
            }
        }
    }

    /// Exchange the points at indices `i` and `j`, keeping ids, labels, and
    /// every cached row consistent with the new order.
    pub fn swap(&mut self, i: usize, j: usize) {
        assert!(i < self.n && j < self.n);
        if i == j {
            return;
        }
        for k in 0..self.dims {
            self.points.swap(i * self.dims + k, j * self.dims + k);
        }
        self.ids.swap(i, j);
        if let Some(labels) = &mut self.labels {
            labels.swap(i, j);
        }
        if let Some(cache) = &mut self.cache {
            cache.swap_index(i, j);
        }
    }

    /// Number of rows currently held by the cache.
    pub fn cached_rows(&self) -> usize {
        self.cache.as_ref().map(|c| c.cached).unwrap_or(0)
    }

    /// Precompute all kernel rows with `threads` workers. Values are
    /// independent of the thread count; only wall time changes.
    pub fn prewarm(&mut self, threads: usize) {
        let Some(cache) = &self.cache else { return };
        if cache.budget_rows < self.n {
            return;
        }
        let missing: Vec<usize> = (0..self.n).filter(|&i| cache.rows[i].is_none()).collect();
        if missing.is_empty() {
            return;
        }
        let threads = threads.max(1).min(missing.len());
        let mut computed: Vec<(usize, Vec<f64>)> = Vec::with_capacity(missing.len());
        if threads == 1 {
            for &i in &missing {
                let mut row = vec![0.0; self.n];
                fill_row(&self.kind, &self.points, self.dims, i, &mut row);
                computed.push((i, row));
            }
        } else {
            let kind = self.kind;
            let points = &self.points;
            let dims = self.dims;
            let n = self.n;
            let chunks: Vec<&[usize]> = missing.chunks(missing.len().div_ceil(threads)).collect();
            let results: Vec<Vec<(usize, Vec<f64>)>> = std::thread::scope(|scope| {
                let handles: Vec<_> = chunks
                    .into_iter()
                    .map(|chunk| {
                        scope.spawn(move || {
                            chunk
                                .iter()
                                .map(|&i| {
                                    let mut row = vec![0.0; n];
                                    fill_row(&kind, points, dims, i, &mut row);
                                    (i, row)
                                })
                                .collect()
                        })
                    })
                    .collect();
                handles.into_iter().map(|h| h.join().unwrap()).collect()
            });
            for part in results {
                computed.extend(part);
            }
            computed.sort_by_key(|(i, _)| *i);
        }
        let cache = self.cache.as_mut().unwrap();
        for (i, row) in computed {
            cache.insert(i, row);
        }
    }
}

fn fill_row(kind: &KernelKind, points: &[f64], dims: usize, i: usize, out: &mut Vec<f64>) {
    let n = points.len() / dims;
    out.clear();
    let xi = &points[i * dims..(i + 1) * dims];
    for j in 0..n {
        out.push(kind.eval(xi, &points[j * dims..(j + 1) * dims]));
    }
}

/// Scott's rule of thumb in gamma form: `0.5 * n^(2/(d+4)) / var`.
pub fn gamma_scott(n: usize, d: usize, var: f64) -> Result<f64> {
    assert!(n >= 1 && d >= 1);
    if var <= 0.0 {
        return Err(Error::NonPositiveVariance(var));
    }
    Ok(0.5 * (n as f64).powf(2.0 / (d as f64 + 4.0)) / var)
}

/// The sklearn heuristic in gamma form: `1 / (d * var)`. Does not depend on
/// the data set size.
pub fn gamma_sklearn(d: usize, var: f64) -> Result<f64> {
    assert!(d >= 1);
    if var <= 0.0 {
        return Err(Error::NonPositiveVariance(var));
    }
    Ok(1.0 / (d as f64 * var))
}

/// Silverman's rule of thumb in gamma form:
/// `0.5 * (n * (d+2) / 4)^(2/(d+4)) / var`. For d = 2 the inner factor is
/// exactly 1, so this coincides with Scott's rule.
pub fn gamma_silverman(n: usize, d: usize, var: f64) -> Result<f64> {
    assert!(n >= 1 && d >= 1);
    if var <= 0.0 {
        return Err(Error::NonPositiveVariance(var));
    }
    Ok(0.5 * ((n as f64) * (d as f64 + 2.0) * 0.25).powf(2.0 / (d as f64 + 4.0)) / var)
}

/// Convert a kernel bandwidth sigma to gamma: `gamma = 1 / (2 sigma^2)`.
pub fn gamma_from_sigma(sigma: f64) -> Result<f64> {
    if sigma <= 0.0 {
        return Err(Error::NonPositiveBandwidth(sigma));
    }
    Ok(1.0 / (2.0 * sigma * sigma))
}
