//! Ranking-based evaluation (average precision, adjusted average precision,
//! AUROC) and the k-nearest-neighbor distance baseline.

use crate::dataset::DataMatrix;
use crate::error::{Error, Result};
use crate::losvm::ScoreMethod;

/// One scored observation before ranking.
#[derive(Debug, Clone)]
pub struct ScoredPoint {
    pub id: u64,
    pub score: f64,
    pub outlier: Option<bool>,
    pub removed_in_batch: Option<usize>,
    pub method: Option<ScoreMethod>,
}

/// One ranked entry of a [`ScoreReport`].
#[derive(Debug, Clone)]
pub struct ScoreEntry {
    pub id: u64,
    pub score: f64,
    /// 1-based rank by descending score, ties broken by lower id.
    pub rank: usize,
    pub outlier: Option<bool>,
    pub removed_in_batch: Option<usize>,
    pub method: Option<ScoreMethod>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricSummary {
    pub average_precision: f64,
    pub adjusted_average_precision: f64,
    pub auroc: f64,
}

/// Per-point outlier scores with ranks, plus evaluation metrics when both
/// classes are labeled.
#[derive(Debug, Clone)]
pub struct ScoreReport {
    pub entries: Vec<ScoreEntry>,
    pub metrics: Option<MetricSummary>,
    pub outlier_count: usize,
    pub total: usize,
}

/// Rank the points by descending score (ties broken by lower id) and attach
/// metrics when every point carries a label and both classes occur.
pub fn build_report(mut points: Vec<ScoredPoint>) -> ScoreReport {
    points.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .expect("scores must be finite")
            .then_with(|| a.id.cmp(&b.id))
    });
    let total = points.len();
    let entries: Vec<ScoreEntry> = points
        .into_iter()
        .enumerate()
        .map(|(i, p)| ScoreEntry {
            id: p.id,
            score: p.score,
            rank: i + 1,
            outlier: p.outlier,
            removed_in_batch: p.removed_in_batch,
            method: p.method,
        })
        .collect();

    let all_labeled = entries.iter().all(|e| e.outlier.is_some());
    let outlier_count = entries.iter().filter(|e| e.outlier == Some(true)).count();
    let metrics = if all_labeled && outlier_count > 0 && outlier_count < total {
        let flags: Vec<bool> = entries.iter().map(|e| e.outlier.unwrap()).collect();
        let avep = average_precision(&flags).expect("outlier present");
        let adj = adjusted_average_precision(avep, outlier_count, total).expect("both classes");
        let scores: Vec<f64> = entries.iter().map(|e| e.score).collect();
        let roc = auroc(&scores, &flags).expect("both classes");
        Some(MetricSummary {
            average_precision: avep,
            adjusted_average_precision: adj,
            auroc: roc,
        })
    } else {
        None
    };

    ScoreReport {
        entries,
        metrics,
        outlier_count,
        total,
    }
}

/// Average precision over outlier positions: `1/|O| * sum_o P@rank(o)` with
/// `P@k` the fraction of outliers among the top k. `flags` are the outlier
/// indicators in rank order (rank 1 first).
pub fn average_precision(flags: &[bool]) -> Result<f64> {
    let outliers = flags.iter().filter(|&&o| o).count();
    if outliers == 0 {
        return Err(Error::NoOutliers);
    }
    let mut hits = 0usize;
    let mut acc = 0.0;
    for (k, &flag) in flags.iter().enumerate() {
        if flag {
            hits += 1;
            acc += hits as f64 / (k + 1) as f64;
        }
    }
    Ok(acc / outliers as f64)
}

/// Chance-adjusted average precision: `(AveP - |O|/N) / (1 - |O|/N)`, so a
/// random ranking scores 0 and a perfect ranking 1.
pub fn adjusted_average_precision(avep: f64, outliers: usize, total: usize) -> Result<f64> {
    if outliers == 0 {
        return Err(Error::NoOutliers);
    }
    if outliers >= total {
        return Err(Error::SingleClass);
    }
    let expected = outliers as f64 / total as f64;
    Ok((avep - expected) / (1.0 - expected))
}

/// Probability that an outlier scores above an inlier, ties counting one
/// half. Computed as the Mann-Whitney statistic with midranks, which equals
/// the trapezoidal area under the ROC curve.
pub fn auroc(scores: &[f64], flags: &[bool]) -> Result<f64> {
    assert_eq!(scores.len(), flags.len());
    let outliers = flags.iter().filter(|&&o| o).count();
    let inliers = flags.len() - outliers;
    if outliers == 0 || inliers == 0 {
        return Err(Error::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).expect("scores must be finite"));
    // midranks over tie groups, ascending by score
    let mut rank_sum_outliers = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let midrank = (i + j + 2) as f64 / 2.0; // 1-based average rank
        for &idx in &order[i..=j] {
            if flags[idx] {
                rank_sum_outliers += midrank;
            }
        }
        i = j + 1;
    }
    let u = rank_sum_outliers - (outliers * (outliers + 1)) as f64 / 2.0;
    Ok(u / (outliers as f64 * inliers as f64))
}

/// Distance-based baseline: each point scores the Euclidean distance to its
/// k-th nearest neighbor, self excluded.
pub fn knn_baseline(m: &DataMatrix, k: usize) -> Result<ScoreReport> {
    let n = m.n_rows();
    if n <= k {
        return Err(Error::NotEnoughNeighbors { k, n });
    }
    let labels = m.labels();
    let mut points = Vec::with_capacity(n);
    let mut dists = Vec::with_capacity(n - 1);
    for i in 0..n {
        dists.clear();
        let xi = m.row(i);
        for j in 0..n {
            if j == i {
                continue;
            }
            let d: f64 = xi
                .iter()
                .zip(m.row(j))
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            dists.push(d);
        }
        let (_, kth, _) =
            dists.select_nth_unstable_by(k - 1, |a, b| a.partial_cmp(b).expect("finite distance"));
        let score = kth.sqrt();
        points.push(ScoredPoint {
            id: m.id(i),
            score,
            outlier: labels.map(|l| l[i]),
            removed_in_batch: None,
            method: None,
        });
    }
    Ok(build_report(points))
}
