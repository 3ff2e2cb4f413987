//! Unified dual solver for one-class SVM and SVDD: most-violating-pair SMO
//! with incrementally maintained gradients.
//!
//! Both variants minimize `F(alpha) = alpha' Q alpha - p' alpha` over the
//! feasible set `0 <= alpha_i <= C`, `sum(alpha) = 1`, with `Q = K` and a
//! variant-specific linear term: `p = 0` for the one-class SVM, `p = diag(K)`
//! for SVDD. The solver works on the gradient `G = K alpha - p`, selecting
//! the pair `(argmax_{alpha>0} G, argmin_{alpha<C} G)` and transferring mass
//! between the two until the KKT gap falls below the tolerance. The one-class
//! SVM's one-half factor rescales the objective without changing the argmin,
//! so one code path serves both; reported objective values follow each
//! variant's own formula.

use crate::error::{Error, Result};
use crate::kernel::KernelContext;

/// Default pair-update budget per solver run.
pub const DEFAULT_MAX_ITER: u64 = 10_000_000;

/// Default convergence tolerance on the KKT gap.
pub const DEFAULT_EPS: f64 = 1e-4;

/// Curvature floor guarding the division in the pair update when
/// `Q_ii + Q_kk - 2 Q_ik` is numerically zero.
pub const CURVATURE_FLOOR: f64 = 1e-12;

/// Which one-class formulation the model solves.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    /// Hyperplane separating the data from the origin in feature space.
    Ocsvm,
    /// Minimal enclosing ball in feature space.
    Svdd,
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Variant::Ocsvm => write!(f, "ocsvm"),
            Variant::Svdd => write!(f, "svdd"),
        }
    }
}

/// Solver state: multipliers, maintained gradient, box bound, and the
/// converged decision quantities (bias for one-class SVM, squared radius and
/// center norm for SVDD).
#[derive(Debug, Clone)]
pub struct SvmModel {
    variant: Variant,
    c: f64,
    eps: f64,
    alpha: Vec<f64>,
    gradient: Vec<f64>,
    linear: Vec<f64>,
    active_size: usize,
    converged: bool,
    bias: f64,
    radius_sq: f64,
    center_sq: f64,
    pair_updates: u64,
}

impl SvmModel {
    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn active_size(&self) -> usize {
        self.active_size
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    /// Maintained gradient `K alpha - p` over the active prefix.
    pub fn gradient(&self) -> &[f64] {
        &self.gradient
    }

    /// Linear term `p` of the dual objective: all zeros for the one-class
    /// SVM, `K(x_i, x_i)` for SVDD (the all-ones vector under RBF).
    pub fn linear_term(&self) -> &[f64] {
        &self.linear
    }

    pub fn converged(&self) -> bool {
        self.converged
    }

    /// Hyperplane offset (one-class SVM only).
    pub fn bias(&self) -> f64 {
        self.bias
    }

    /// Squared ball radius (SVDD only).
    pub fn radius_sq(&self) -> f64 {
        self.radius_sq
    }

    /// `alpha' K alpha`, the squared feature-space norm of the SVDD center.
    pub fn center_sq(&self) -> f64 {
        self.center_sq
    }

    /// Cumulative pair updates over the model's lifetime.
    pub fn pair_updates(&self) -> u64 {
        self.pair_updates
    }

    /// Active indices with `alpha_i > 0`.
    pub fn sv_indices(&self) -> Vec<usize> {
        (0..self.active_size).filter(|&i| self.alpha[i] > 0.0).collect()
    }

    pub fn sv_count(&self) -> usize {
        self.alpha[..self.active_size].iter().filter(|&&a| a > 0.0).count()
    }

    pub(crate) fn swap_entries(&mut self, i: usize, j: usize) {
        self.alpha.swap(i, j);
        self.gradient.swap(i, j);
        self.linear.swap(i, j);
    }

    pub(crate) fn set_active_size(&mut self, active: usize) {
        debug_assert!(active <= self.alpha.len());
        self.active_size = active;
        self.converged = false;
    }

    pub(crate) fn alpha_mut(&mut self) -> &mut [f64] {
        self.converged = false;
        &mut self.alpha
    }

    pub(crate) fn snapshot(&self) -> ModelSnapshot {
        ModelSnapshot {
            alpha: self.alpha.clone(),
            gradient: self.gradient.clone(),
            linear: self.linear.clone(),
            active_size: self.active_size,
            converged: self.converged,
            bias: self.bias,
            radius_sq: self.radius_sq,
            center_sq: self.center_sq,
        }
    }

    pub(crate) fn restore(&mut self, snap: &ModelSnapshot) {
        self.alpha.copy_from_slice(&snap.alpha);
        self.gradient.copy_from_slice(&snap.gradient);
        self.linear.copy_from_slice(&snap.linear);
        self.active_size = snap.active_size;
        self.converged = snap.converged;
        self.bias = snap.bias;
        self.radius_sq = snap.radius_sq;
        self.center_sq = snap.center_sq;
    }
}

/// Saved solver state for snapshot/restore around transient retraining.
#[derive(Debug, Clone)]
pub(crate) struct ModelSnapshot {
    alpha: Vec<f64>,
    gradient: Vec<f64>,
    linear: Vec<f64>,
    active_size: usize,
    converged: bool,
    bias: f64,
    radius_sq: f64,
    center_sq: f64,
}

/// Train a model on the context's active set from a cold (uniform) start.
pub fn train(ctx: &mut KernelContext, variant: Variant, c: f64, eps: f64) -> Result<SvmModel> {
    train_with_max_iter(ctx, variant, c, eps, DEFAULT_MAX_ITER)
}

pub fn train_with_max_iter(
    ctx: &mut KernelContext,
    variant: Variant,
    c: f64,
    eps: f64,
    max_iter: u64,
) -> Result<SvmModel> {
    let mut model = init_model(ctx, variant, c, eps)?;
    optimize_with_max_iter(&mut model, ctx, max_iter)?;
    Ok(model)
}

/// Feasible cold-start state: uniform multipliers over the active set with a
/// freshly computed gradient, not yet optimized. [`train`] is `init_model`
/// followed by [`optimize`].
pub fn init_model(
    ctx: &mut KernelContext,
    variant: Variant,
    c: f64,
    eps: f64,
) -> Result<SvmModel> {
    let active = ctx.active_size();
    if active == 0 {
        return Err(Error::EmptyDataset);
    }
    if eps <= 0.0 {
        return Err(Error::BadTolerance(eps));
    }
    let product = c * active as f64;
    if product < 1.0 - 1e-12 {
        return Err(Error::InfeasibleBox { product });
    }
    let n = ctx.len();
    let linear: Vec<f64> = match variant {
        Variant::Ocsvm => vec![0.0; n],
        Variant::Svdd => (0..n).map(|i| ctx.eval(i, i)).collect(),
    };
    let mut model = SvmModel {
        variant,
        c,
        eps,
        alpha: vec![0.0; n],
        gradient: vec![0.0; n],
        linear,
        active_size: active,
        converged: false,
        bias: 0.0,
        radius_sq: 0.0,
        center_sq: 0.0,
        pair_updates: 0,
    };
    let init = 1.0 / active as f64;
    for a in &mut model.alpha[..active] {
        *a = init;
    }
    recompute_gradient(&mut model, ctx);
    Ok(model)
}

/// Recompute `G = K alpha - p` from scratch over the active set.
pub(crate) fn recompute_gradient(model: &mut SvmModel, ctx: &mut KernelContext) {
    let active = model.active_size;
    for j in 0..active {
        model.gradient[j] = -model.linear[j];
    }
    for i in 0..active {
        let a = model.alpha[i];
        if a == 0.0 {
            continue;
        }
        let row = ctx.row(i);
        for (g, k) in model.gradient[..active].iter_mut().zip(row) {
            *g += a * k;
        }
    }
}

/// Run pair updates until the KKT gap falls below the model's tolerance,
/// then recompute the decision quantities.
pub fn optimize(model: &mut SvmModel, ctx: &mut KernelContext) -> Result<u64> {
    optimize_with_max_iter(model, ctx, DEFAULT_MAX_ITER)
}

pub fn optimize_with_max_iter(
    model: &mut SvmModel,
    ctx: &mut KernelContext,
    max_iter: u64,
) -> Result<u64> {
    debug_assert_eq!(model.active_size, ctx.active_size());
    let mut steps = 0u64;
    let mut best_gap = f64::INFINITY;
    loop {
        let (pair, gap) = violating_pair_and_gap(model);
        best_gap = best_gap.min(gap);
        let Some((i, k)) = pair else { break };
        if steps >= max_iter {
            return Err(Error::DidNotConverge {
                max_iter,
                gap: best_gap,
            });
        }
        smo_step(model, ctx, i, k);
        steps += 1;
    }
    finalize(model);
    Ok(steps)
}

fn violating_pair_and_gap(model: &SvmModel) -> (Option<(usize, usize)>, f64) {
    let mut max_g = f64::NEG_INFINITY;
    let mut min_g = f64::INFINITY;
    let mut up: Option<usize> = None;
    let mut down: Option<usize> = None;
    for idx in 0..model.active_size {
        let g = model.gradient[idx];
        if model.alpha[idx] > 0.0 && g > max_g {
            max_g = g;
            up = Some(idx);
        }
        if model.alpha[idx] < model.c && g < min_g {
            min_g = g;
            down = Some(idx);
        }
    }
    let gap = max_g - min_g;
    match (up, down) {
        (Some(i), Some(k)) if gap > model.eps => (Some((i, k)), gap),
        _ => (None, gap),
    }
}

/// Most violating pair: `(argmax_{alpha>0} G, argmin_{alpha<C} G)`, ties
/// broken by lowest index. Returns `None` when the KKT gap is within the
/// model's tolerance.
pub fn select_violating_pair(model: &SvmModel) -> Option<(usize, usize)> {
    violating_pair_and_gap(model).0
}

/// KKT gap `max_{alpha>0} G - min_{alpha<C} G`.
pub fn kkt_gap(model: &SvmModel) -> f64 {
    violating_pair_and_gap(model).1
}

/// One SMO pair update: transfer mass from `i` to `k`, clipped so both stay
/// in `[0, C]`, preserving `sum(alpha)` and keeping the gradient current.
pub fn smo_step(model: &mut SvmModel, ctx: &mut KernelContext, i: usize, k: usize) {
    debug_assert!(i < model.active_size && k < model.active_size);
    if i == k {
        return;
    }
    let ai = model.alpha[i];
    let ak = model.alpha[k];
    let curvature = ctx.eval(i, i) + ctx.eval(k, k) - 2.0 * ctx.eval(i, k);
    let mut delta = (model.gradient[i] - model.gradient[k]) / curvature.max(CURVATURE_FLOOR);
    if !delta.is_finite() || delta <= 0.0 {
        return;
    }
    delta = delta.min(ai).min(model.c - ak);
    if delta <= 0.0 {
        // both endpoints at their bounds
        return;
    }
    let sum = ai + ak;
    let (new_i, new_k) = if delta >= ai {
        (0.0, sum)
    } else if delta >= model.c - ak {
        ((sum - model.c).max(0.0), model.c)
    } else {
        let ni = ai - delta;
        (ni, sum - ni)
    };
    model.alpha[i] = new_i;
    model.alpha[k] = new_k;
    model.converged = false;
    model.pair_updates += 1;
    update_gradient(model, ctx, i, k, ai, new_i, ak, new_k);
}

/// Patch the maintained gradient after the multipliers of `i` and `k`
/// changed: `G_j += K_ij (new_i - old_i) + K_kj (new_k - old_k)` for every
/// active `j`. Indices may lie beyond the active prefix (a swapped-out
/// point); only active gradient entries are touched.
#[allow(clippy::too_many_arguments)]
pub fn update_gradient(
    model: &mut SvmModel,
    ctx: &mut KernelContext,
    i: usize,
    k: usize,
    old_i: f64,
    new_i: f64,
    old_k: f64,
    new_k: f64,
) {
    let active = model.active_size;
    let di = new_i - old_i;
    if di != 0.0 {
        let row = ctx.row(i);
        for (g, kv) in model.gradient[..active].iter_mut().zip(row) {
            *g += di * kv;
        }
    }
    let dk = new_k - old_k;
    if dk != 0.0 {
        let row = ctx.row(k);
        for (g, kv) in model.gradient[..active].iter_mut().zip(row) {
            *g += dk * kv;
        }
    }
}

/// Recompute bias / radius from the converged state. Free support vectors
/// (0 < alpha < C) sit on the decision boundary; averaging over all of them
/// is numerically steadier than picking one. Without free support vectors
/// the boundary is bracketed by the bound points and the midpoint is used.
fn finalize(model: &mut SvmModel) {
    let active = model.active_size;
    match model.variant {
        Variant::Ocsvm => {
            let mut free_sum = 0.0;
            let mut free_count = 0usize;
            let mut from_upper_bound = f64::NEG_INFINITY;
            let mut from_zero = f64::INFINITY;
            for idx in 0..active {
                let s = model.gradient[idx] + model.linear[idx];
                let a = model.alpha[idx];
                if a > 0.0 && a < model.c {
                    free_sum += s;
                    free_count += 1;
                } else if a == 0.0 {
                    from_zero = from_zero.min(s);
                } else {
                    from_upper_bound = from_upper_bound.max(s);
                }
            }
            model.bias = if free_count > 0 {
                free_sum / free_count as f64
            } else if from_upper_bound.is_finite() && from_zero.is_finite() {
                0.5 * (from_upper_bound + from_zero)
            } else if from_upper_bound.is_finite() {
                from_upper_bound
            } else {
                from_zero
            };
            model.center_sq = 0.0;
            model.radius_sq = 0.0;
        }
        Variant::Svdd => {
            let mut csq = 0.0;
            for idx in 0..active {
                let a = model.alpha[idx];
                if a > 0.0 {
                    csq += a * (model.gradient[idx] + model.linear[idx]);
                }
            }
            model.center_sq = csq;
            let mut free_sum = 0.0;
            let mut free_count = 0usize;
            let mut inside_max = f64::NEG_INFINITY;
            let mut outside_min = f64::INFINITY;
            for idx in 0..active {
                let s = model.gradient[idx] + model.linear[idx];
                let dist_sq = model.linear[idx] - 2.0 * s + csq;
                let a = model.alpha[idx];
                if a > 0.0 && a < model.c {
                    free_sum += dist_sq;
                    free_count += 1;
                } else if a == 0.0 {
                    inside_max = inside_max.max(dist_sq);
                } else {
                    outside_min = outside_min.min(dist_sq);
                }
            }
            model.radius_sq = if free_count > 0 {
                free_sum / free_count as f64
            } else if inside_max.is_finite() && outside_min.is_finite() {
                0.5 * (inside_max + outside_min)
            } else if outside_min.is_finite() {
                outside_min
            } else {
                inside_max
            };
            model.bias = 0.0;
        }
    }
    model.converged = true;
    debug_assert!({
        let sum: f64 = model.alpha[..active].iter().sum();
        (sum - 1.0).abs() <= 1e-9
    });
}

/// Outlierness of the stored point at internal index `t` (which may lie just
/// beyond the active prefix, e.g. a left-out point). Larger is more
/// outlying; positive means outside the decision boundary.
pub fn decision_score_index(model: &SvmModel, ctx: &mut KernelContext, t: usize) -> Result<f64> {
    if !model.converged {
        return Err(Error::NotConverged);
    }
    if t >= ctx.len() {
        return Err(Error::IndexOutOfRange {
            index: t,
            active: ctx.len(),
        });
    }
    let active = model.active_size;
    let mut s = 0.0;
    {
        let row = ctx.row(t);
        for (a, kv) in model.alpha[..active].iter().zip(row) {
            if *a > 0.0 {
                s += a * kv;
            }
        }
    }
    Ok(match model.variant {
        Variant::Ocsvm => model.bias - s,
        Variant::Svdd => ctx.eval(t, t) - 2.0 * s + model.center_sq - model.radius_sq,
    })
}

/// Outlierness of an external point.
pub fn decision_score(model: &SvmModel, ctx: &KernelContext, x: &[f64]) -> Result<f64> {
    if !model.converged {
        return Err(Error::NotConverged);
    }
    let mut s = 0.0;
    for i in 0..model.active_size {
        let a = model.alpha[i];
        if a > 0.0 {
            s += a * ctx.eval_external(i, x);
        }
    }
    Ok(match model.variant {
        Variant::Ocsvm => model.bias - s,
        Variant::Svdd => {
            ctx.kind().eval_self(x) - 2.0 * s + model.center_sq - model.radius_sq
        }
    })
}

/// Variant objective computed from scratch over the support vectors:
/// `0.5 alpha' K alpha` for the one-class SVM,
/// `alpha' K alpha - sum alpha_i K(x_i, x_i)` for SVDD.
pub fn objective(model: &SvmModel, ctx: &KernelContext) -> f64 {
    let svs = model.sv_indices();
    let mut quad = 0.0;
    for &i in &svs {
        let mut acc = 0.0;
        for &j in &svs {
            acc += model.alpha[j] * ctx.eval(i, j);
        }
        quad += model.alpha[i] * acc;
    }
    match model.variant {
        Variant::Ocsvm => 0.5 * quad,
        Variant::Svdd => {
            let lin: f64 = svs.iter().map(|&i| model.alpha[i] * model.linear[i]).sum();
            quad - lin
        }
    }
}
