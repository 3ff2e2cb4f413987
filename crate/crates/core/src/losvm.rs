//! Leave-out scoring of support vectors via warm-start retraining, the
//! non-support-vector shortcut, and the repeated batchwise removal loop.
//!
//! A point with `alpha = 0` can be scored against the existing model: leaving
//! it out does not change the optimum. A support vector is scored by
//! swapping it behind the active set, handing its multiplier to an awakened
//! non-support vector, patching the gradient, re-running the solver from the
//! warm state, and scoring against the retrained boundary; afterwards the
//! solver state is restored bitwise. Removal proceeds in `b` batches of
//! `R/b` points, each batch removing the currently worst-scoring support
//! vectors and re-converging once.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};
use std::time::Instant;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernel::KernelContext;
use crate::metrics::{build_report, ScoreReport, ScoredPoint};
use crate::solver::{
    decision_score_index, objective, optimize, train, update_gradient, SvmModel, Variant,
};

/// How a leave-out score was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScoreMethod {
    /// Scored against the initial model; valid for points with `alpha = 0`.
    InitialModel,
    /// Scored against a warm-start retrained model with the point left out.
    WarmRetrain,
}

impl ScoreMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            ScoreMethod::InitialModel => "initial-model",
            ScoreMethod::WarmRetrain => "warm-retrain",
        }
    }
}

/// Result of one leave-out evaluation.
#[derive(Debug, Clone)]
pub struct LeaveOutOutcome {
    pub score: f64,
    pub method: ScoreMethod,
    /// Solver pair updates spent on the warm retrain (0 on the shortcut path).
    pub pair_updates: u64,
    /// Variant objective of the retrained model, when one was trained.
    pub retrained_objective: Option<f64>,
}

/// Leave-out outlier score of the active point `t`.
pub fn leave_out_score(model: &mut SvmModel, ctx: &mut KernelContext, t: usize) -> Result<f64> {
    leave_out_eval(model, ctx, t).map(|o| o.score)
}

/// Leave-out evaluation of the active point `t`. Non-support vectors take
/// the shortcut through the existing model; support vectors go through the
/// warm-start retrain. The model and context are unchanged on return.
pub fn leave_out_eval(
    model: &mut SvmModel,
    ctx: &mut KernelContext,
    t: usize,
) -> Result<LeaveOutOutcome> {
    if t >= model.active_size() {
        return Err(Error::IndexOutOfRange {
            index: t,
            active: model.active_size(),
        });
    }
    if !model.converged() {
        return Err(Error::NotConverged);
    }
    if model.alpha()[t] == 0.0 {
        let score = decision_score_index(model, ctx, t)?;
        return Ok(LeaveOutOutcome {
            score,
            method: ScoreMethod::InitialModel,
            pair_updates: 0,
            retrained_objective: None,
        });
    }
    leave_out_eval_retrained(model, ctx, t)
}

/// Leave-out evaluation that always performs the swap/shrink/retrain cycle,
/// regardless of `alpha_t`. Used by diagnostics and verification; for a
/// non-support vector the retrain converges in zero pair updates and the
/// objective is unchanged.
pub fn leave_out_eval_retrained(
    model: &mut SvmModel,
    ctx: &mut KernelContext,
    t: usize,
) -> Result<LeaveOutOutcome> {
    if t >= model.active_size() {
        return Err(Error::IndexOutOfRange {
            index: t,
            active: model.active_size(),
        });
    }
    if !model.converged() {
        return Err(Error::NotConverged);
    }
    let snap = model.snapshot();
    let last = swap_out(model, ctx, t)?;

    let result = (|| {
        redistribute_alpha(model, ctx, last)?;
        let pair_updates = optimize(model, ctx)?;
        let score = decision_score_index(model, ctx, last)?;
        let obj = objective(model, ctx);
        Ok((score, pair_updates, obj))
    })();

    ctx.set_active_size(last + 1);
    swap_point(model, ctx, t, last);
    model.restore(&snap);

    let (score, pair_updates, obj) = result?;
    Ok(LeaveOutOutcome {
        score,
        method: ScoreMethod::WarmRetrain,
        pair_updates,
        retrained_objective: Some(obj),
    })
}

/// Hand the multiplier of the swapped-out point `t` (at or beyond the active
/// boundary) back to the active set. The full weight goes to the
/// lowest-index non-support vector, which is always able to take it; when
/// every active point is a support vector, the weight is spread greedily
/// over the headroom in increasing-alpha order. The gradient is patched
/// incrementally and the multiplier sum over the active set returns to one.
pub fn redistribute_alpha(model: &mut SvmModel, ctx: &mut KernelContext, t: usize) -> Result<()> {
    let active = model.active_size();
    assert!(t >= active, "point {t} must be swapped out of the active range");
    let a_t = model.alpha()[t];
    if a_t == 0.0 {
        return Ok(());
    }
    let c = model.c();

    if let Some(j) = (0..active).find(|&j| model.alpha()[j] == 0.0) {
        model.alpha_mut()[j] = a_t;
        model.alpha_mut()[t] = 0.0;
        update_gradient(model, ctx, j, t, 0.0, a_t, a_t, 0.0);
        return Ok(());
    }

    // all-support-vector fallback
    let available: f64 = (0..active).map(|j| (c - model.alpha()[j]).max(0.0)).sum();
    if available < a_t - 1e-12 {
        return Err(Error::NoHeadroom {
            needed: a_t,
            available,
        });
    }
    let mut order: Vec<usize> = (0..active).collect();
    order.sort_by(|&a, &b| {
        model.alpha()[a]
            .partial_cmp(&model.alpha()[b])
            .expect("finite alpha")
            .then_with(|| a.cmp(&b))
    });
    model.alpha_mut()[t] = 0.0;
    let mut remaining = a_t;
    let mut cleared = false;
    for j in order {
        if remaining == 0.0 {
            break;
        }
        let old = model.alpha()[j];
        if old >= c {
            continue;
        }
        let headroom = c - old;
        let new = if headroom < remaining {
            remaining -= headroom;
            c
        } else {
            let new = (old + remaining).min(c);
            remaining = 0.0;
            new
        };
        model.alpha_mut()[j] = new;
        let (old_t, new_t) = if cleared { (0.0, 0.0) } else { (a_t, 0.0) };
        cleared = true;
        update_gradient(model, ctx, j, t, old, new, old_t, new_t);
    }
    debug_assert!(remaining.abs() <= 1e-9);
    Ok(())
}

fn swap_point(model: &mut SvmModel, ctx: &mut KernelContext, i: usize, j: usize) {
    if i == j {
        return;
    }
    model.swap_entries(i, j);
    ctx.swap(i, j);
}

/// Swap the active point `t` to the end of the active range and shrink the
/// active size of model and context by one. Returns the point's new index,
/// just beyond the active boundary. The model needs
/// [`redistribute_alpha`] and a solver pass before it can score again.
pub fn swap_out(model: &mut SvmModel, ctx: &mut KernelContext, t: usize) -> Result<usize> {
    let active = model.active_size();
    if t >= active {
        return Err(Error::IndexOutOfRange { index: t, active });
    }
    let last = active - 1;
    swap_point(model, ctx, t, last);
    model.set_active_size(last);
    ctx.set_active_size(last);
    Ok(last)
}

/// Ordered record of the removals performed by [`run_losvm`].
#[derive(Debug, Clone, Serialize)]
pub struct RemovalTrace {
    /// Requested total number of removals (R).
    pub total_requested: usize,
    /// Requested number of batches (b).
    pub batch_count: usize,
    /// Removals actually performed.
    pub removed_total: usize,
    /// True when a round ran out of support vectors and the run stopped
    /// before removing all R points.
    pub early_stopped: bool,
    pub initial_train_pair_updates: u64,
    pub initial_eval_pair_updates: u64,
    pub final_eval_pair_updates: u64,
    pub batches: Vec<BatchRecord>,
}

impl RemovalTrace {
    /// Total solver pair updates spent across the whole run.
    pub fn total_pair_updates(&self) -> u64 {
        self.initial_train_pair_updates
            + self.initial_eval_pair_updates
            + self.final_eval_pair_updates
            + self
                .batches
                .iter()
                .map(|b| b.eval_pair_updates + b.solver_pair_updates)
                .sum::<u64>()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BatchRecord {
    pub batch: usize,
    pub removed: Vec<RemovedPoint>,
    /// Pair updates spent on leave-out evaluations in this round (0 for the
    /// first batch, which reuses the initial evaluation pass).
    pub eval_pair_updates: u64,
    /// Pair updates of the re-convergence after the batch removal.
    pub solver_pair_updates: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_time_ms: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RemovedPoint {
    pub id: u64,
    pub score: f64,
    pub batch: usize,
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Record per-batch wall time in the trace. Off by default so output
    /// files stay byte-identical across runs.
    pub collect_timings: bool,
}

/// Removability order: higher score first, ties broken by lower id.
#[derive(PartialEq)]
struct Candidate {
    score: f64,
    id: u64,
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.score
            .partial_cmp(&other.score)
            .expect("finite score")
            .then_with(|| other.id.cmp(&self.id))
    }
}

/// Fixed-size heap of the `k` worst (most removable) candidates.
fn worst_k(candidates: Vec<(u64, f64)>, k: usize) -> Vec<(u64, f64)> {
    let mut heap: BinaryHeap<std::cmp::Reverse<Candidate>> = BinaryHeap::with_capacity(k + 1);
    for (id, score) in candidates {
        heap.push(std::cmp::Reverse(Candidate { score, id }));
        if heap.len() > k {
            heap.pop();
        }
    }
    let mut out: Vec<(u64, f64)> = heap
        .into_iter()
        .map(|std::cmp::Reverse(c)| (c.id, c.score))
        .collect();
    out.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .expect("finite score")
            .then_with(|| a.0.cmp(&b.0))
    });
    out
}

struct Record {
    score: f64,
    method: ScoreMethod,
    removed_in_batch: Option<usize>,
    outlier: Option<bool>,
}

/// Train, leave-out score, and iteratively remove the most outlying support
/// vectors in `b` batches of `R/b` points. With `R = 0` the result is plain
/// leave-one-out scoring. Survivors are scored against the final model with
/// leave-out semantics; removed points keep the score from the round that
/// removed them.
pub fn run_losvm(
    ctx: &mut KernelContext,
    variant: Variant,
    c: f64,
    eps: f64,
    r: usize,
    b: usize,
) -> Result<(ScoreReport, RemovalTrace)> {
    run_losvm_with(ctx, variant, c, eps, r, b, &RunOptions::default())
}

pub fn run_losvm_with(
    ctx: &mut KernelContext,
    variant: Variant,
    c: f64,
    eps: f64,
    r: usize,
    b: usize,
    options: &RunOptions,
) -> Result<(ScoreReport, RemovalTrace)> {
    let n = ctx.active_size();
    if r >= n.max(1) {
        return Err(Error::RemovalBudgetTooLarge { r, n });
    }
    if b == 0 || (r > 0 && !r.is_multiple_of(b)) {
        return Err(Error::BatchMismatch { r, b });
    }

    let mut model = train(ctx, variant, c, eps)?;
    let mut trace = RemovalTrace {
        total_requested: r,
        batch_count: b,
        removed_total: 0,
        early_stopped: false,
        initial_train_pair_updates: model.pair_updates(),
        initial_eval_pair_updates: 0,
        final_eval_pair_updates: 0,
        batches: Vec::new(),
    };

    // Initial pass: every point scored with leave-out semantics. The
    // support-vector scores seed the first removal round.
    let mut records: HashMap<u64, Record> = HashMap::with_capacity(n);
    let mut sv_scores: Vec<(u64, f64)> = Vec::new();
    for t in 0..n {
        let outcome = leave_out_eval(&mut model, ctx, t)?;
        trace.initial_eval_pair_updates += outcome.pair_updates;
        let id = ctx.id(t);
        if outcome.method == ScoreMethod::WarmRetrain {
            sv_scores.push((id, outcome.score));
        }
        records.insert(
            id,
            Record {
                score: outcome.score,
                method: outcome.method,
                removed_in_batch: None,
                outlier: ctx.label(t),
            },
        );
    }

    if r > 0 {
        let per_batch = r / b;
        let mut candidates = sv_scores;
        for batch_no in 1..=b {
            let started = options.collect_timings.then(Instant::now);
            let mut eval_updates = 0u64;
            if batch_no > 1 {
                candidates = Vec::new();
                for t in 0..model.active_size() {
                    if model.alpha()[t] == 0.0 {
                        continue;
                    }
                    let outcome = leave_out_eval(&mut model, ctx, t)?;
                    eval_updates += outcome.pair_updates;
                    candidates.push((ctx.id(t), outcome.score));
                }
            }
            let exhausted = candidates.len() < per_batch;
            let selected = worst_k(std::mem::take(&mut candidates), per_batch);

            for &(id, score) in &selected {
                let idx = (0..model.active_size())
                    .find(|&i| ctx.id(i) == id)
                    .expect("selected id is active");
                let last = swap_out(&mut model, ctx, idx)?;
                redistribute_alpha(&mut model, ctx, last)?;
                let rec = records.get_mut(&id).expect("selected id is recorded");
                rec.score = score;
                rec.removed_in_batch = Some(batch_no);
            }
            let solver_updates = optimize(&mut model, ctx)?;
            trace.removed_total += selected.len();
            trace.batches.push(BatchRecord {
                batch: batch_no,
                removed: selected
                    .into_iter()
                    .map(|(id, score)| RemovedPoint {
                        id,
                        score,
                        batch: batch_no,
                    })
                    .collect(),
                eval_pair_updates: eval_updates,
                solver_pair_updates: solver_updates,
                wall_time_ms: started.map(|t0| t0.elapsed().as_secs_f64() * 1e3),
            });
            if exhausted {
                trace.early_stopped = true;
                break;
            }
        }

        // Final scores of the survivors against the last model.
        for t in 0..model.active_size() {
            let outcome = leave_out_eval(&mut model, ctx, t)?;
            trace.final_eval_pair_updates += outcome.pair_updates;
            let rec = records
                .get_mut(&ctx.id(t))
                .expect("surviving id is recorded");
            rec.score = outcome.score;
            rec.method = outcome.method;
        }
    }

    let mut points: Vec<ScoredPoint> = records
        .into_iter()
        .map(|(id, rec)| ScoredPoint {
            id,
            score: rec.score,
            outlier: rec.outlier,
            removed_in_batch: rec.removed_in_batch,
            method: Some(rec.method),
        })
        .collect();
    points.sort_by_key(|p| p.id);
    Ok((build_report(points), trace))
}
