//! Data ingestion, cleaning, standardization, and the synthetic dirty-data
//! benchmark generator.
//!
//! CSV input is comma-separated with an optional header row. The header is
//! auto-detected: a file has a header iff the first row fails numeric parsing.
//! Lines starting with `#` are skipped. Label columns accept `0`/`1` and
//! `no`/`yes`. Rows with missing cells are dropped, exact duplicate rows are
//! removed, both before standardization.

use std::collections::HashSet;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};

use crate::error::{Error, Result};

/// Immutable matrix of N observations with d real features, optional
/// outlier labels, and stable per-row identifiers that survive any internal
/// reordering done downstream.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    values: Vec<f64>, // row-major, n * dims
    dims: usize,
    ids: Vec<u64>,
    labels: Option<Vec<bool>>, // true = outlier
    dropped_missing: usize,
    dropped_duplicates: usize,
}

impl DataMatrix {
    /// Build a matrix from row-major values. Ids are assigned 0..n.
    pub fn from_parts(values: Vec<f64>, dims: usize, labels: Option<Vec<bool>>) -> Self {
        assert!(dims > 0, "dims must be positive");
        assert_eq!(values.len() % dims, 0, "values length must be n * dims");
        let n = values.len() / dims;
        if let Some(l) = &labels {
            assert_eq!(l.len(), n, "labels length must match row count");
        }
        DataMatrix {
            values,
            dims,
            ids: (0..n as u64).collect(),
            labels,
            dropped_missing: 0,
            dropped_duplicates: 0,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.ids.len()
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.dims..(i + 1) * self.dims]
    }

    pub fn id(&self, i: usize) -> u64 {
        self.ids[i]
    }

    pub fn ids(&self) -> &[u64] {
        &self.ids
    }

    pub fn labels(&self) -> Option<&[bool]> {
        self.labels.as_deref()
    }

    /// Rows dropped during ingestion because of missing values.
    pub fn dropped_missing(&self) -> usize {
        self.dropped_missing
    }

    /// Exact duplicate rows removed during ingestion.
    pub fn dropped_duplicates(&self) -> usize {
        self.dropped_duplicates
    }

    /// Number of labeled outliers, 0 when unlabeled.
    pub fn outlier_count(&self) -> usize {
        self.labels
            .as_ref()
            .map(|l| l.iter().filter(|&&o| o).count())
            .unwrap_or(0)
    }

    /// Matrix with the given rows selected in order; ids and labels travel
    /// with their rows.
    pub fn permuted(&self, order: &[usize]) -> Self {
        assert!(order.iter().all(|&i| i < self.n_rows()));
        let mut values = Vec::with_capacity(self.values.len());
        let mut ids = Vec::with_capacity(order.len());
        let mut labels = self.labels.as_ref().map(|_| Vec::with_capacity(order.len()));
        for &i in order {
            values.extend_from_slice(self.row(i));
            ids.push(self.ids[i]);
            if let (Some(out), Some(src)) = (labels.as_mut(), self.labels.as_ref()) {
                out.push(src[i]);
            }
        }
        DataMatrix {
            values,
            dims: self.dims,
            ids,
            labels,
            dropped_missing: self.dropped_missing,
            dropped_duplicates: self.dropped_duplicates,
        }
    }

    /// Matrix without row `i`; used by cold-retrain checks.
    pub fn without_row(&self, i: usize) -> Self {
        let order: Vec<usize> = (0..self.n_rows()).filter(|&j| j != i).collect();
        self.permuted(&order)
    }
}

fn is_missing(cell: &str) -> bool {
    let t = cell.trim();
    t.is_empty() || t == "?" || t.eq_ignore_ascii_case("na") || t.eq_ignore_ascii_case("nan")
}

fn parse_label(cell: &str, row: usize) -> Result<bool> {
    let t = cell.trim();
    match t {
        "0" => Ok(false),
        "1" => Ok(true),
        _ if t.eq_ignore_ascii_case("no") => Ok(false),
        _ if t.eq_ignore_ascii_case("yes") => Ok(true),
        _ => Err(Error::BadLabel {
            row,
            value: cell.to_string(),
        }),
    }
}

/// Load a CSV file into a [`DataMatrix`].
///
/// Rows containing missing values are dropped and counted, exact duplicate
/// rows are removed, non-finite or unparseable cells are a hard error with
/// their location. Ids are the 0-based data row numbers of the surviving
/// rows in file order.
pub fn load_csv(path: impl AsRef<Path>, label_column: Option<&str>) -> Result<DataMatrix> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|source| Error::Csv {
            path: path.to_path_buf(),
            source,
        })?;

    let mut records = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|source| Error::Csv {
            path: path.to_path_buf(),
            source,
        })?;
        records.push(rec);
    }
    if records.is_empty() {
        return Err(Error::EmptyDataset);
    }

    // Header iff the first row fails numeric parsing in some cell.
    let has_header = records[0]
        .iter()
        .any(|cell| !is_missing(cell) && cell.trim().parse::<f64>().is_err());

    let label_idx = match label_column {
        Some(name) => {
            if !has_header {
                return Err(Error::LabelWithoutHeader(name.to_string()));
            }
            let idx = records[0]
                .iter()
                .position(|h| h.trim() == name)
                .ok_or_else(|| Error::LabelColumnNotFound(name.to_string()))?;
            Some(idx)
        }
        None => None,
    };

    let data_rows = if has_header { &records[1..] } else { &records[..] };
    let mut rows: Vec<(Vec<f64>, Option<bool>)> = Vec::with_capacity(data_rows.len());
    let mut dropped_missing = 0usize;
    let mut dims = None;
    for (row_no, rec) in data_rows.iter().enumerate() {
        if rec.iter().any(is_missing) {
            dropped_missing += 1;
            continue;
        }
        let mut features = Vec::with_capacity(rec.len());
        let mut label = None;
        for (col, cell) in rec.iter().enumerate() {
            if Some(col) == label_idx {
                label = Some(parse_label(cell, row_no)?);
                continue;
            }
            let v: f64 = cell.trim().parse().map_err(|_| Error::BadCell {
                row: row_no,
                col,
                value: cell.to_string(),
            })?;
            if !v.is_finite() {
                return Err(Error::BadCell {
                    row: row_no,
                    col,
                    value: cell.to_string(),
                });
            }
            features.push(v);
        }
        match dims {
            None => dims = Some(features.len()),
            Some(d) if d != features.len() => {
                return Err(Error::BadCell {
                    row: row_no,
                    col: rec.len().saturating_sub(1),
                    value: format!("expected {d} feature cells, got {}", features.len()),
                });
            }
            _ => {}
        }
        rows.push((features, label));
    }

    // Exact-match deduplication on raw values, before standardization.
    let mut seen: HashSet<Vec<u64>> = HashSet::new();
    let mut dropped_duplicates = 0usize;
    let mut values = Vec::new();
    let mut ids = Vec::new();
    let mut labels = Vec::new();
    for (i, (features, label)) in rows.iter().enumerate() {
        let key: Vec<u64> = features.iter().map(|v| v.to_bits()).collect();
        if !seen.insert(key) {
            dropped_duplicates += 1;
            continue;
        }
        values.extend_from_slice(features);
        ids.push(i as u64);
        if let Some(l) = label {
            labels.push(*l);
        }
    }
    if ids.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let dims = dims.unwrap();
    if dims == 0 {
        return Err(Error::EmptyDataset);
    }
    let labels = if label_idx.is_some() {
        debug_assert_eq!(labels.len(), ids.len());
        Some(labels)
    } else {
        None
    };

    Ok(DataMatrix {
        values,
        dims,
        ids,
        labels,
        dropped_missing,
        dropped_duplicates,
    })
}

/// Per-column z-scoring with population variance. Columns with zero variance
/// become all-zeros.
pub fn standardize(m: &DataMatrix) -> Result<DataMatrix> {
    let n = m.n_rows();
    if n < 2 {
        return Err(Error::TooFewRows { needed: 2, got: n });
    }
    let d = m.dims;
    let mut mean = vec![0.0; d];
    for i in 0..n {
        for (j, v) in m.row(i).iter().enumerate() {
            mean[j] += v;
        }
    }
    for mj in &mut mean {
        *mj /= n as f64;
    }
    let mut var = vec![0.0; d];
    for i in 0..n {
        for (j, v) in m.row(i).iter().enumerate() {
            let dv = v - mean[j];
            var[j] += dv * dv;
        }
    }
    for vj in &mut var {
        *vj /= n as f64;
    }
    let std: Vec<f64> = var.iter().map(|v| v.sqrt()).collect();

    let mut values = Vec::with_capacity(m.values.len());
    for i in 0..n {
        for (j, v) in m.row(i).iter().enumerate() {
            if std[j] > 0.0 {
                values.push((v - mean[j]) / std[j]);
            } else {
                values.push(0.0);
            }
        }
    }
    Ok(DataMatrix {
        values,
        dims: d,
        ids: m.ids.clone(),
        labels: m.labels.clone(),
        dropped_missing: m.dropped_missing,
        dropped_duplicates: m.dropped_duplicates,
    })
}

/// Scalar "data variance": the mean of per-column population variances.
/// Equals 1 on standardized data without constant columns and reduces to the
/// textbook formula for 1-d data.
pub fn total_variance(m: &DataMatrix) -> Result<f64> {
    let n = m.n_rows();
    if n < 2 {
        return Err(Error::TooFewRows { needed: 2, got: n });
    }
    let d = m.dims;
    let mut mean = vec![0.0; d];
    for i in 0..n {
        for (j, v) in m.row(i).iter().enumerate() {
            mean[j] += v;
        }
    }
    for mj in &mut mean {
        *mj /= n as f64;
    }
    let mut acc = 0.0;
    for (j, mj) in mean.iter().enumerate() {
        let mut var = 0.0;
        for i in 0..n {
            let dv = m.row(i)[j] - mj;
            var += dv * dv;
        }
        acc += var / n as f64;
    }
    Ok(acc / d as f64)
}

/// Synthetic dirty-data benchmark: two isotropic 2-d Gaussian clusters plus
/// uniform noise over the bounding box of the cluster points. Noise points
/// are labeled outliers. Deterministic for a fixed seed.
pub fn synth_dirty(n_cluster: usize, n_noise: usize, seed: u64) -> DataMatrix {
    assert!(n_cluster >= 2, "need at least 2 cluster points");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0).unwrap();

    let centers = [(-3.0, 0.0), (3.0, 0.0)];
    let first = n_cluster - n_cluster / 2;
    let mut values = Vec::with_capacity((n_cluster + n_noise) * 2);
    let mut labels = Vec::with_capacity(n_cluster + n_noise);
    for i in 0..n_cluster {
        let (cx, cy) = if i < first { centers[0] } else { centers[1] };
        values.push(cx + normal.sample(&mut rng));
        values.push(cy + normal.sample(&mut rng));
        labels.push(false);
    }

    let (mut min_x, mut max_x) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut min_y, mut max_y) = (f64::INFINITY, f64::NEG_INFINITY);
    for p in values.chunks_exact(2) {
        min_x = min_x.min(p[0]);
        max_x = max_x.max(p[0]);
        min_y = min_y.min(p[1]);
        max_y = max_y.max(p[1]);
    }
    let ux = Uniform::new_inclusive(min_x, max_x).unwrap();
    let uy = Uniform::new_inclusive(min_y, max_y).unwrap();
    for _ in 0..n_noise {
        values.push(ux.sample(&mut rng));
        values.push(uy.sample(&mut rng));
        labels.push(true);
    }

    DataMatrix::from_parts(values, 2, Some(labels))
}
