//! Linearized ADMM for `min L(w) + R(w) + H(z)  s.t.  w = G(z)`.
//!
//! Each iteration takes one proximal-gradient step in `z`, then one in `w`
//! (or minimizes exactly over `w`), then a dual ascent step with a
//! diminishing step size that keeps the multipliers bounded:
//!
//! ```text
//! z+     = prox_{beta H}(z - beta grad_z L_rho(w, z, lambda))
//! w+     = prox_{alpha R}(w - alpha grad_w L_rho(w, z+, lambda))
//! sigma+ = min(sigma0, sigma0 / (|w+ - G(z+)| t ln^2(t + 1)))
//! lambda+ = lambda + sigma+ (w+ - G(z+))
//! ```
//!
//! The multi-scale driver doubles the penalty and halves the primal steps at
//! each stage while doubling the stage length, warm-starting every stage.

mod lagrangian;

use alloc::format;
use alloc::vec::Vec;

pub use lagrangian::{
    aug_lagrangian, dual_bound, dual_bound_strict, dual_series, dual_step_size, exact_w_min, grad_w_lagrangian,
    grad_z_lagrangian, lagrangian_at, stopping_metric_from_parts,
};

use crate::error::{check_dim, Error};
use crate::generator::{Generator, GeometryEstimate};
use crate::linalg::all_finite;
use crate::loss::SmoothObjective;
use crate::prox::Regularizer;
use crate::{Clock, Vector};

/// How the `w` block is updated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WStep {
    /// One proximal-gradient step.
    #[default]
    Linearized,
    /// Exact minimization of the augmented Lagrangian (requires `R = 0`).
    Exact,
}

/// Stage schedule of the multi-scale driver: stage `k = 1..=stages` runs
/// `2^k * base_iters` iterations at penalty `2^k rho` with steps
/// `2^-k alpha`, `2^-k beta`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Multiscale {
    pub stages: usize,
    pub base_iters: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdmmConfig {
    /// Penalty weight.
    pub rho: f64,
    /// Primal step for `w`.
    pub alpha: f64,
    /// Primal step for `z`.
    pub beta: f64,
    /// Initial (and maximal) dual step.
    pub sigma0: f64,
    /// Stopping threshold on the stopping metric.
    pub tau_c: f64,
    pub max_iters: usize,
    pub w_step: WStep,
    pub multiscale: Option<Multiscale>,
}

impl AdmmConfig {
    pub fn validate(&self) -> Result<(), Error> {
        for (name, v) in [
            ("rho", self.rho),
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("sigma0", self.sigma0),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidConfig(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if !(self.tau_c >= 0.0) {
            return Err(Error::InvalidConfig(format!("tau_c must be nonnegative, got {}", self.tau_c)));
        }
        if let Some(ms) = self.multiscale {
            if self.w_step != WStep::Exact {
                return Err(Error::InvalidConfig("multi-scale schedule requires the exact w-step".into()));
            }
            if ms.stages == 0 || ms.base_iters == 0 {
                return Err(Error::InvalidConfig("multi-scale needs stages >= 1 and base_iters >= 1".into()));
            }
            if ms.stages > 30 {
                return Err(Error::InvalidConfig("multi-scale stage count too large".into()));
            }
        }
        Ok(())
    }

    /// Parameters of multi-scale stage `k` (1-based).
    pub fn stage(&self, k: usize, base_iters: usize) -> AdmmConfig {
        let scale = libm::ldexp(1.0, k as i32);
        AdmmConfig {
            rho: self.rho * scale,
            alpha: self.alpha / scale,
            beta: self.beta / scale,
            max_iters: base_iters << k,
            multiscale: None,
            ..self.clone()
        }
    }
}

/// Iterate of the solver.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmmState {
    pub w: Vector,
    pub z: Vector,
    pub lambda: Vector,
    /// Dual step used for the most recent dual update (`sigma0` initially).
    pub sigma: f64,
    /// 1-based index of the next iteration.
    pub t: usize,
}

impl AdmmState {
    pub fn new(w: Vector, z: Vector, lambda: Vector, sigma0: f64) -> Self {
        Self {
            w,
            z,
            lambda,
            sigma: sigma0,
            t: 1,
        }
    }

    /// The usual start `w0 = G(z0)`, `lambda0 = 0`.
    pub fn feasible_start<G: Generator + ?Sized>(gen: &G, z0: Vector, sigma0: f64) -> Self {
        let w0 = gen.apply(&z0);
        let d = w0.len();
        Self::new(w0, z0, Vector::zeros(d), sigma0)
    }

    fn check_finite(&self) -> Result<(), Error> {
        let iteration = self.t.saturating_sub(1);
        for (quantity, ok) in [
            ("z", all_finite(&self.z)),
            ("w", all_finite(&self.w)),
            ("lambda", all_finite(&self.lambda)),
            ("sigma", self.sigma.is_finite()),
        ] {
            if !ok {
                return Err(Error::NonFinite { quantity, iteration });
            }
        }
        Ok(())
    }
}

/// Diagnostics of one iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct IterRecord {
    /// 1-based iteration index.
    pub t: usize,
    /// `L(w) + R(w) + H(z)` at the new iterate.
    pub objective: f64,
    /// `L_rho(w, z, lambda)` at the new iterate.
    pub lagrangian: f64,
    /// `|w - G(z)|` at the new iterate.
    pub feas_gap: f64,
    pub sigma: f64,
    pub step_w: f64,
    pub step_z: f64,
    pub stop_metric: f64,
    /// `|w - w*|` when a planted solution is known.
    pub dist_w: Option<f64>,
    /// `|z - z*|` when a planted solution is known.
    pub dist_z: Option<f64>,
    pub wall_ns: u64,
    pub lambda_norm: f64,
}

/// One stage of a multi-scale run.
#[derive(Debug, Clone, PartialEq)]
pub struct StageInfo {
    /// 1-based stage index.
    pub stage: usize,
    pub rho: f64,
    pub alpha: f64,
    pub beta: f64,
    /// Index into `records` of the first iteration of the stage.
    pub first_record: usize,
    pub iters: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunTrace {
    pub records: Vec<IterRecord>,
    /// Empty for single-stage runs.
    pub stages: Vec<StageInfo>,
}

impl RunTrace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&IterRecord> {
        self.records.last()
    }

    /// Largest feasibility gap over the run; feeds the post hoc estimate of
    /// the trajectory-dependent step bound.
    pub fn max_feasibility_gap(&self) -> f64 {
        self.records.iter().map(|r| r.feas_gap).fold(0.0, f64::max)
    }

    pub fn lagrangians(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.lagrangian).collect()
    }
}

/// A run that hit a non-finite iterate; carries everything computed so far.
#[derive(Debug, Clone, PartialEq)]
pub struct RunFailure {
    pub error: Error,
    pub trace: RunTrace,
    /// Last finite state.
    pub state: AdmmState,
}

impl core::fmt::Display for RunFailure {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "{} (after {} recorded iterations)", self.error, self.trace.len())
    }
}

impl core::error::Error for RunFailure {}

/// The problem data shared by all iterations.
pub struct Problem<'a, L: ?Sized, G: ?Sized> {
    pub loss: &'a L,
    pub gen: &'a G,
    /// Non-smooth term on `w`.
    pub r: &'a Regularizer,
    /// Non-smooth term on `z`.
    pub h: &'a Regularizer,
    /// Planted `(w*, z*)`, used only for trace distances.
    pub planted: Option<(&'a Vector, &'a Vector)>,
}

impl<L: ?Sized, G: ?Sized> Clone for Problem<'_, L, G> {
    fn clone(&self) -> Self {
        *self
    }
}

impl<L: ?Sized, G: ?Sized> Copy for Problem<'_, L, G> {}

impl<'a, L, G> Problem<'a, L, G>
where
    L: SmoothObjective + ?Sized,
    G: Generator + ?Sized,
{
    pub fn new(loss: &'a L, gen: &'a G, r: &'a Regularizer, h: &'a Regularizer) -> Self {
        Self {
            loss,
            gen,
            r,
            h,
            planted: None,
        }
    }

    pub fn with_planted(mut self, w_star: &'a Vector, z_star: &'a Vector) -> Self {
        self.planted = Some((w_star, z_star));
        self
    }

    /// `L(w) + R(w) + H(z)`.
    pub fn objective(&self, w: &Vector, z: &Vector) -> f64 {
        self.loss.value(w) + self.r.evaluate(w) + self.h.evaluate(z)
    }

    pub fn validate(&self, state: &AdmmState) -> Result<(), Error> {
        let d = self.gen.output_dim();
        let s = self.gen.input_dim();
        check_dim("loss dimension", d, self.loss.dim())?;
        check_dim("w", d, state.w.len())?;
        check_dim("z", s, state.z.len())?;
        check_dim("lambda", d, state.lambda.len())?;
        self.r.validate(d)?;
        self.h.validate(s)?;
        if let Some((w_star, z_star)) = self.planted {
            check_dim("planted w", d, w_star.len())?;
            check_dim("planted z", s, z_star.len())?;
        }
        if state.t == 0 {
            return Err(Error::InvalidConfig("iteration counter is 1-based".into()));
        }
        state.check_finite()
    }
}

/// `|z+ - z|^2 / alpha + |w+ - w|^2 / beta + sigma_t |w - G(z)|^2`.
pub fn stopping_metric<G: Generator + ?Sized>(
    gen: &G,
    prev: &AdmmState,
    next: &AdmmState,
    cfg: &AdmmConfig,
) -> f64 {
    let prev_gap = (&prev.w - gen.apply(&prev.z)).norm();
    stopping_metric_from_parts(
        (&next.z - &prev.z).norm(),
        (&next.w - &prev.w).norm(),
        prev.sigma,
        prev_gap,
        cfg.alpha,
        cfg.beta,
    )
}

/// One iteration: `z`-update at `(w_t, z_t, lambda_t)`, `w`-update at
/// `(w_t, z_{t+1}, lambda_t)`, then the dual step.
pub fn admm_step<L, G>(
    problem: &Problem<'_, L, G>,
    cfg: &AdmmConfig,
    state: &AdmmState,
) -> Result<(AdmmState, IterRecord), Error>
where
    L: SmoothObjective + ?Sized,
    G: Generator + ?Sized,
{
    let Problem { loss, gen, r, h, .. } = *problem;
    let t = state.t;
    let rho = cfg.rho;

    let (g_prev, tape) = gen.record(&state.z);
    let residual_prev = &state.w - &g_prev;
    let grad_z = -gen.pullback(&tape, &(&state.lambda + &residual_prev * rho));
    let z = h.prox(cfg.beta, &(&state.z - grad_z * cfg.beta));
    if !all_finite(&z) {
        return Err(Error::NonFinite { quantity: "z", iteration: t });
    }

    let g = gen.apply(&z);
    let w = match cfg.w_step {
        WStep::Linearized => {
            let grad_w = lagrangian::grad_w_at(loss, &g, &state.w, &state.lambda, rho);
            r.prox(cfg.alpha, &(&state.w - grad_w * cfg.alpha))
        }
        WStep::Exact => exact_w_min(loss, &g, &state.lambda, rho, r)?,
    };
    if !all_finite(&w) {
        return Err(Error::NonFinite { quantity: "w", iteration: t });
    }

    let residual = &w - &g;
    let feas_gap = residual.norm();
    let sigma = dual_step_size(cfg.sigma0, feas_gap, t);
    let lambda = &state.lambda + &residual * sigma;
    if !all_finite(&lambda) || !sigma.is_finite() {
        return Err(Error::NonFinite { quantity: "lambda", iteration: t });
    }

    let step_w = (&w - &state.w).norm();
    let step_z = (&z - &state.z).norm();
    let stop_metric = stopping_metric_from_parts(
        step_z,
        step_w,
        state.sigma,
        residual_prev.norm(),
        cfg.alpha,
        cfg.beta,
    );
    let loss_w = loss.value(&w);
    let lagrangian = loss_w + residual.dot(&lambda) + 0.5 * rho * feas_gap * feas_gap;
    let objective = loss_w + r.evaluate(&w) + h.evaluate(&z);
    if !lagrangian.is_finite() {
        return Err(Error::NonFinite { quantity: "lagrangian", iteration: t });
    }
    let (dist_w, dist_z) = match problem.planted {
        Some((w_star, z_star)) => (Some((&w - w_star).norm()), Some((&z - z_star).norm())),
        None => (None, None),
    };
    let record = IterRecord {
        t,
        objective,
        lagrangian,
        feas_gap,
        sigma,
        step_w,
        step_z,
        stop_metric,
        dist_w,
        dist_z,
        wall_ns: 0,
        lambda_norm: lambda.norm(),
    };
    let next = AdmmState {
        w,
        z,
        lambda,
        sigma,
        t: t + 1,
    };
    Ok((next, record))
}

/// Runs up to `cfg.max_iters` iterations, stopping early once the stopping
/// metric drops to `cfg.tau_c`. Records are appended to `trace`.
fn iterate<L, G, C>(
    problem: &Problem<'_, L, G>,
    cfg: &AdmmConfig,
    mut state: AdmmState,
    trace: &mut RunTrace,
    clock: &C,
    start_ns: u64,
) -> Result<AdmmState, RunFailure>
where
    L: SmoothObjective + ?Sized,
    G: Generator + ?Sized,
    C: Clock + ?Sized,
{
    for _ in 0..cfg.max_iters {
        match admm_step(problem, cfg, &state) {
            Ok((next, mut record)) => {
                record.wall_ns = clock.now_ns().saturating_sub(start_ns);
                let stop = record.stop_metric <= cfg.tau_c;
                trace.records.push(record);
                state = next;
                if stop {
                    break;
                }
            }
            Err(error) => {
                return Err(RunFailure {
                    error,
                    trace: core::mem::take(trace),
                    state,
                })
            }
        }
    }
    Ok(state)
}

fn fail(error: Error, state: AdmmState) -> RunFailure {
    RunFailure {
        error,
        trace: RunTrace::default(),
        state,
    }
}

/// Single-scale run (linearized or exact `w`-step). `cfg.multiscale` must be
/// unset; see [`solve`] for dispatch.
pub fn run<L, G, C>(
    problem: &Problem<'_, L, G>,
    cfg: &AdmmConfig,
    init: AdmmState,
    clock: &C,
) -> Result<(AdmmState, RunTrace), RunFailure>
where
    L: SmoothObjective + ?Sized,
    G: Generator + ?Sized,
    C: Clock + ?Sized,
{
    if let Err(e) = cfg.validate().and_then(|_| problem.validate(&init)) {
        return Err(fail(e, init));
    }
    if cfg.multiscale.is_some() {
        return Err(fail(
            Error::InvalidConfig("multi-scale config passed to the single-scale driver".into()),
            init,
        ));
    }
    if cfg.w_step == WStep::Exact && !problem.r.is_zero() {
        return Err(fail(Error::UnsupportedRegularizer, init));
    }
    let mut trace = RunTrace::default();
    let start = clock.now_ns();
    let state = iterate(problem, cfg, init, &mut trace, clock, start)?;
    Ok((state, trace))
}

/// Multi-scale run: stage `k` uses `(2^k rho, 2^-k alpha, 2^-k beta)` for
/// `2^k n` iterations, continuing from the previous stage's `(w, z, lambda,
/// sigma)` and the global iteration counter.
pub fn run_multiscale<L, G, C>(
    problem: &Problem<'_, L, G>,
    cfg: &AdmmConfig,
    init: AdmmState,
    clock: &C,
) -> Result<(AdmmState, RunTrace), RunFailure>
where
    L: SmoothObjective + ?Sized,
    G: Generator + ?Sized,
    C: Clock + ?Sized,
{
    if let Err(e) = cfg.validate().and_then(|_| problem.validate(&init)) {
        return Err(fail(e, init));
    }
    let Some(ms) = cfg.multiscale else {
        return Err(fail(Error::InvalidConfig("multi-scale schedule missing".into()), init));
    };
    if !problem.r.is_zero() {
        return Err(fail(Error::UnsupportedRegularizer, init));
    }
    let mut trace = RunTrace::default();
    let start = clock.now_ns();
    let mut state = init;
    for k in 1..=ms.stages {
        let stage_cfg = cfg.stage(k, ms.base_iters);
        let first_record = trace.len();
        state = iterate(problem, &stage_cfg, state, &mut trace, clock, start)?;
        trace.stages.push(StageInfo {
            stage: k,
            rho: stage_cfg.rho,
            alpha: stage_cfg.alpha,
            beta: stage_cfg.beta,
            first_record,
            iters: trace.len() - first_record,
        });
    }
    Ok((state, trace))
}

/// Dispatches to [`run_multiscale`] when a schedule is configured.
pub fn solve<L, G, C>(
    problem: &Problem<'_, L, G>,
    cfg: &AdmmConfig,
    init: AdmmState,
    clock: &C,
) -> Result<(AdmmState, RunTrace), RunFailure>
where
    L: SmoothObjective + ?Sized,
    G: Generator + ?Sized,
    C: Clock + ?Sized,
{
    if cfg.multiscale.is_some() {
        run_multiscale(problem, cfg, init, clock)
    } else {
        run(problem, cfg, init, clock)
    }
}

/// Step sizes for the well-conditioned regime `mu_L >> rho`,
/// `iota_G^2 >> nu_G`. Advisory only; constants are suppressed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSuggestion {
    /// `1 / nu_L`.
    pub alpha: f64,
    /// `1 / (rho kappa_G^2)`.
    pub beta: f64,
    /// `rho nu_G / kappa_G^2`.
    pub sigma0_low: f64,
    /// `rho min(mu_L^2 / nu_L^2, iota_G^4 / kappa_G^4)`.
    pub sigma0_high: f64,
    /// Predicted contraction `min(mu_L / nu_L, iota_G^2 / kappa_G^2)`;
    /// `None` when the loss is only restricted strongly convex.
    pub eta: Option<f64>,
}

pub fn suggest_steps(mu_l: f64, nu_l: f64, geometry: &GeometryEstimate, rho: f64) -> StepSuggestion {
    let kappa2 = geometry.kappa_hat * geometry.kappa_hat;
    let iso = geometry.iota_hat * geometry.iota_hat / kappa2;
    let cond = mu_l / nu_l;
    let restricted = !(mu_l > 1e-12 * nu_l);
    StepSuggestion {
        alpha: 1.0 / nu_l,
        beta: 1.0 / (rho * kappa2),
        sigma0_low: rho * geometry.nu_g_hat / kappa2,
        sigma0_high: rho * (cond * cond).min(iso * iso),
        eta: (!restricted).then(|| cond.min(iso)),
    }
}
