//! Constant-step gradient descent on `h(z) = L(G(z))`, the baseline the
//! ADMM solvers are compared against, and its one-step relation to the
//! exact-`w` ADMM iteration.

use alloc::format;
use alloc::vec::Vec;

use crate::admm::{grad_z_lagrangian, AdmmState, IterRecord, Problem, RunFailure, RunTrace};
use crate::error::{check_dim, Error};
use crate::generator::Generator;
use crate::linalg::all_finite;
use crate::loss::SmoothObjective;
use crate::{Clock, Vector};

#[derive(Debug, Clone, PartialEq)]
pub struct GdConfig {
    pub step: f64,
    pub max_iters: usize,
    /// Stop once `|grad h(z)| <= grad_tol`.
    pub grad_tol: f64,
}

impl GdConfig {
    pub fn validate(&self) -> Result<(), Error> {
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(Error::InvalidConfig(format!("gd step must be positive, got {}", self.step)));
        }
        if !(self.grad_tol >= 0.0) {
            return Err(Error::InvalidConfig(format!("grad_tol must be nonnegative, got {}", self.grad_tol)));
        }
        Ok(())
    }
}

/// `grad h(z) = DG(z)^T grad L(G(z))`: one forward and one backward pass.
pub fn grad_h<L, G>(loss: &L, gen: &G, z: &Vector) -> Vector
where
    L: SmoothObjective + ?Sized,
    G: Generator + ?Sized,
{
    let (g, tape) = gen.record(z);
    gen.pullback(&tape, &loss.grad(&g))
}

/// `h(z)` and `grad h(z)` from a single forward pass.
fn value_and_grad<L, G>(loss: &L, gen: &G, z: &Vector) -> (Vector, f64, Vector)
where
    L: SmoothObjective + ?Sized,
    G: Generator + ?Sized,
{
    let (g, tape) = gen.record(z);
    let grad = gen.pullback(&tape, &loss.grad(&g));
    let value = loss.value(&g);
    (g, value, grad)
}

/// Gradient descent `z+ = z - step grad h(z)`.
///
/// Only the smooth loss drives the iteration; `R` and `H` of the problem are
/// evaluated for the reported objective but never optimized. Trace rows use
/// `w = G(z)`, so the feasibility gap is zero and the Lagrangian equals the
/// loss. The `stop_metric` column holds `|grad h|` at the new iterate and
/// `sigma` is zero.
pub fn run_gd<L, G, C>(
    problem: &Problem<'_, L, G>,
    cfg: &GdConfig,
    z0: Vector,
    clock: &C,
) -> Result<(Vector, RunTrace), RunFailure>
where
    L: SmoothObjective + ?Sized,
    G: Generator + ?Sized,
    C: Clock + ?Sized,
{
    let Problem { loss, gen, r, h, .. } = *problem;
    let d = gen.output_dim();
    let as_state = |z: Vector| {
        let w = gen.apply(&z);
        AdmmState::new(w, z, Vector::zeros(d), 0.0)
    };
    let check = cfg
        .validate()
        .and_then(|_| check_dim("z", gen.input_dim(), z0.len()))
        .and_then(|_| check_dim("loss dimension", d, loss.dim()))
        .and_then(|_| r.validate(d))
        .and_then(|_| h.validate(gen.input_dim()));
    if let Err(error) = check {
        let state = if z0.len() == gen.input_dim() {
            as_state(z0)
        } else {
            AdmmState::new(Vector::zeros(d), z0, Vector::zeros(d), 0.0)
        };
        return Err(RunFailure {
            error,
            trace: RunTrace::default(),
            state,
        });
    }

    let start = clock.now_ns();
    let mut trace = RunTrace::default();
    let mut z = z0;
    let (_, _, mut grad) = value_and_grad(loss, gen, &z);
    if grad.norm() <= cfg.grad_tol {
        return Ok((z, trace));
    }
    for t in 1..=cfg.max_iters {
        let z_next = &z - &grad * cfg.step;
        let (w, value, grad_next) = value_and_grad(loss, gen, &z_next);
        if !all_finite(&z_next) || !all_finite(&w) || !value.is_finite() || !all_finite(&grad_next) {
            return Err(RunFailure {
                error: Error::NonFinite {
                    quantity: if all_finite(&z_next) { "w" } else { "z" },
                    iteration: t,
                },
                trace,
                state: as_state(z),
            });
        }
        let grad_norm = grad_next.norm();
        let (dist_w, dist_z) = match problem.planted {
            Some((w_star, z_star)) => (Some((&w - w_star).norm()), Some((&z_next - z_star).norm())),
            None => (None, None),
        };
        let w_prev = gen.apply(&z);
        trace.records.push(IterRecord {
            t,
            objective: value + r.evaluate(&w) + h.evaluate(&z_next),
            lagrangian: value,
            feas_gap: 0.0,
            sigma: 0.0,
            step_w: (&w - w_prev).norm(),
            step_z: (&z_next - &z).norm(),
            stop_metric: grad_norm,
            dist_w,
            dist_z,
            wall_ns: clock.now_ns().saturating_sub(start),
            lambda_norm: 0.0,
        });
        z = z_next;
        grad = grad_next;
        if grad_norm <= cfg.grad_tol {
            break;
        }
    }
    Ok((z, trace))
}

/// Upper bound `beta (sigma_t kappa_G + nu_L) |w_t - G(z_t)|` on the distance
/// between one exact-`w` ADMM `z`-step and one GD step of size `beta`.
pub fn gd_admm_discrepancy(beta: f64, sigma_t: f64, kappa_g: f64, nu_l: f64, feas_gap: f64) -> f64 {
    beta * (sigma_t * kappa_g + nu_l) * feas_gap
}

/// Actual and bounded one-step discrepancy at an exact-`w` ADMM state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Discrepancy {
    /// `|z_admm - z_gd|`.
    pub actual: f64,
    /// [`gd_admm_discrepancy`] at the state.
    pub bound: f64,
    pub feas_gap: f64,
}

/// Takes one `z`-step of exact-`w` ADMM (with `H = 0`) and one GD step of the
/// same size from `state.z` and compares them.
///
/// `state` must come out of an exact-`w` step, so that `w_t` minimizes the
/// augmented Lagrangian at `(z_t, lambda_{t-1})` and `state.sigma` is the
/// dual step that produced `lambda_t`.
pub fn discrepancy_check<L, G>(
    loss: &L,
    gen: &G,
    state: &AdmmState,
    rho: f64,
    beta: f64,
    kappa_g: f64,
) -> Discrepancy
where
    L: SmoothObjective + ?Sized,
    G: Generator + ?Sized,
{
    let z_admm = &state.z - grad_z_lagrangian(gen, &state.w, &state.z, &state.lambda, rho) * beta;
    let z_gd = &state.z - grad_h(loss, gen, &state.z) * beta;
    let feas_gap = (&state.w - gen.apply(&state.z)).norm();
    let (_, nu_l) = loss.constants();
    Discrepancy {
        actual: (z_admm - z_gd).norm(),
        bound: gd_admm_discrepancy(beta, state.sigma, kappa_g, nu_l, feas_gap),
        feas_gap,
    }
}

/// `n` points spaced evenly in log scale over `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => alloc::vec![lo],
        _ => {
            let (a, b) = (libm::log(lo), libm::log(hi));
            (0..n)
                .map(|i| libm::exp(a + (b - a) * i as f64 / (n - 1) as f64))
                .collect()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GdTuning {
    pub best_step: f64,
    /// `(step, mean final objective)`; diverged runs score `+inf`.
    pub scores: Vec<(f64, f64)>,
}

/// Grid search over step sizes: each step runs GD for `budget` iterations
/// from every start in `starts`, and the step with the lowest mean final
/// objective wins. Ties go to the smaller step.
pub fn tune_gd<L, G>(
    problem: &Problem<'_, L, G>,
    starts: &[Vector],
    steps: &[f64],
    budget: usize,
) -> Result<GdTuning, Error>
where
    L: SmoothObjective + ?Sized,
    G: Generator + ?Sized,
{
    if steps.is_empty() || starts.is_empty() {
        return Err(Error::InvalidConfig("tuning needs at least one step and one start".into()));
    }
    let mut scores = Vec::with_capacity(steps.len());
    for &step in steps {
        let cfg = GdConfig {
            step,
            max_iters: budget,
            grad_tol: 0.0,
        };
        cfg.validate()?;
        let mut total = 0.0;
        for z0 in starts {
            match run_gd(problem, &cfg, z0.clone(), &crate::NoClock) {
                Ok((z, _)) => {
                    let w = problem.gen.apply(&z);
                    total += problem.objective(&w, &z);
                }
                Err(f) if matches!(f.error, Error::NonFinite { .. }) => total = f64::INFINITY,
                Err(f) => return Err(f.error),
            }
        }
        let mean = total / starts.len() as f64;
        scores.push((step, if mean.is_finite() { mean } else { f64::INFINITY }));
    }
    let best_step = scores
        .iter()
        .fold((f64::NAN, f64::INFINITY), |best, &(s, v)| if v < best.1 || best.0.is_nan() { (s, v) } else { best })
        .0;
    Ok(GdTuning { best_step, scores })
}
