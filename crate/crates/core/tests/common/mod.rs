//! Independent oracles for the acceptance suite: dense kernel arithmetic,
//! active-set enumeration for the small-instance QP, and O(N^2) rank/pair
//! counting for the ranking metrics. Nothing here goes through the library's
//! solver, cache, or metric implementations.

use losvm_core::{DataMatrix, SvmModel, Variant};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

pub fn rbf(a: &[f64], b: &[f64], gamma: f64) -> f64 {
    let dist_sq: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (-gamma * dist_sq).exp()
}

pub fn random_points(n: usize, d: usize, rng: &mut ChaCha8Rng) -> DataMatrix {
    let values: Vec<f64> = (0..n * d).map(|_| rng.random_range(-2.0..2.0)).collect();
    DataMatrix::from_parts(values, d, None)
}

/// From-scratch `K alpha - p` over the active set, with its own kernel
/// arithmetic.
pub fn dense_gradient(model: &SvmModel, data_rows: &[Vec<f64>], gamma: f64) -> Vec<f64> {
    let active = model.active_size();
    (0..active)
        .map(|j| {
            let mut g = -model.linear_term()[j];
            for i in 0..active {
                g += model.alpha()[i] * rbf(&data_rows[i], &data_rows[j], gamma);
            }
            g
        })
        .collect()
}

/// Solve `m x = rhs` by Gaussian elimination with partial pivoting.
/// Returns `None` for (near-)singular systems.
fn solve_dense(mut m: Vec<Vec<f64>>, mut rhs: Vec<f64>) -> Option<Vec<f64>> {
    let n = rhs.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&a, &b| {
            m[a][col].abs().partial_cmp(&m[b][col].abs()).unwrap()
        })?;
        if m[pivot][col].abs() < 1e-12 {
            return None;
        }
        m.swap(col, pivot);
        rhs.swap(col, pivot);
        for row in col + 1..n {
            let f = m[row][col] / m[col][col];
            if f == 0.0 {
                continue;
            }
            #[allow(clippy::needless_range_loop)]
            for k in col..n {
                m[row][k] -= f * m[col][k];
            }
            rhs[row] -= f * rhs[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = rhs[row];
        for k in row + 1..n {
            acc -= m[row][k] * x[k];
        }
        x[row] = acc / m[row][row];
    }
    Some(x)
}

/// Global minimum of the variant objective over the simplex
/// (`sum alpha = 1`, `0 <= alpha <= 1`, i.e. C = 1) by enumerating every
/// support subset and solving its stationarity system. The objective is
/// `q * alpha' K alpha - p' alpha` with `(q, p) = (1/2, 0)` for the
/// one-class SVM and `(1, diag K)` for SVDD.
pub fn brute_force_qp(points: &[Vec<f64>], gamma: f64, variant: Variant) -> f64 {
    let n = points.len();
    assert!(n <= 12, "enumeration oracle is exponential in n");
    let k: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| rbf(&points[i], &points[j], gamma)).collect())
        .collect();
    let (q, p): (f64, Vec<f64>) = match variant {
        Variant::Ocsvm => (0.5, vec![0.0; n]),
        Variant::Svdd => (1.0, (0..n).map(|i| k[i][i]).collect()),
    };
    let objective = |alpha: &[f64]| -> f64 {
        let mut quad = 0.0;
        for i in 0..n {
            for j in 0..n {
                quad += alpha[i] * alpha[j] * k[i][j];
            }
        }
        q * quad - alpha.iter().zip(&p).map(|(a, pi)| a * pi).sum::<f64>()
    };

    let mut best = f64::INFINITY;
    for mask in 1u32..(1 << n) {
        let subset: Vec<usize> = (0..n).filter(|&i| mask & (1 << i) != 0).collect();
        let m = subset.len();
        // stationarity on the subset: 2q K_S a + lambda 1 = p_S, 1' a = 1
        let mut sys = vec![vec![0.0; m + 1]; m + 1];
        let mut rhs = vec![0.0; m + 1];
        for (r, &i) in subset.iter().enumerate() {
            for (c, &j) in subset.iter().enumerate() {
                sys[r][c] = 2.0 * q * k[i][j];
            }
            sys[r][m] = 1.0;
            rhs[r] = p[i];
        }
        for cell in sys[m].iter_mut().take(m) {
            *cell = 1.0;
        }
        rhs[m] = 1.0;
        let Some(sol) = solve_dense(sys, rhs) else { continue };
        if sol[..m].iter().any(|&a| !(-1e-10..=1.0 + 1e-10).contains(&a)) {
            continue;
        }
        let mut alpha = vec![0.0; n];
        for (r, &i) in subset.iter().enumerate() {
            alpha[i] = sol[r];
        }
        best = best.min(objective(&alpha));
    }
    best
}

/// O(N^2) rank-counting average precision: rank by descending score, ties
/// broken by lower id.
pub fn avep_brute(scores: &[f64], ids: &[u64], flags: &[bool]) -> f64 {
    let n = scores.len();
    let rank = |i: usize| -> usize {
        1 + (0..n)
            .filter(|&j| scores[j] > scores[i] || (scores[j] == scores[i] && ids[j] < ids[i]))
            .count()
    };
    let outliers: Vec<usize> = (0..n).filter(|&i| flags[i]).collect();
    let mut acc = 0.0;
    for &o in &outliers {
        let ro = rank(o);
        let hits = outliers.iter().filter(|&&p| rank(p) <= ro).count();
        acc += hits as f64 / ro as f64;
    }
    acc / outliers.len() as f64
}

/// O(N^2) pair-counting AUROC with half credit for ties.
pub fn auroc_brute(scores: &[f64], flags: &[bool]) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..scores.len() {
        if !flags[i] {
            continue;
        }
        for j in 0..scores.len() {
            if flags[j] {
                continue;
            }
            den += 1.0;
            if scores[i] > scores[j] {
                num += 1.0;
            } else if scores[i] == scores[j] {
                num += 0.5;
            }
        }
    }
    num / den
}
