//! The augmented Lagrangian
//!
//! ```text
//! L_rho(w, z, lambda) = L(w) + <w - G(z), lambda> + rho/2 |w - G(z)|^2
//! ```
//!
//! and the pieces of one ADMM iteration built from it. The non-smooth terms
//! `R` and `H` are deliberately absent; they only enter through prox steps.

use crate::error::Error;
use crate::generator::Generator;
use crate::loss::SmoothObjective;
use crate::prox::Regularizer;
use crate::Vector;

/// `L_rho` given the generator output `g = G(z)`.
pub fn lagrangian_at<L: SmoothObjective + ?Sized>(
    loss: &L,
    g: &Vector,
    w: &Vector,
    lambda: &Vector,
    rho: f64,
) -> f64 {
    let residual = w - g;
    loss.value(w) + residual.dot(lambda) + 0.5 * rho * residual.norm_squared()
}

pub fn aug_lagrangian<L, G>(loss: &L, gen: &G, w: &Vector, z: &Vector, lambda: &Vector, rho: f64) -> f64
where
    L: SmoothObjective + ?Sized,
    G: Generator + ?Sized,
{
    lagrangian_at(loss, &gen.apply(z), w, lambda, rho)
}

/// `grad_w L_rho = grad L(w) + lambda + rho (w - G(z))`.
pub fn grad_w_lagrangian<L, G>(
    loss: &L,
    gen: &G,
    w: &Vector,
    z: &Vector,
    lambda: &Vector,
    rho: f64,
) -> Vector
where
    L: SmoothObjective + ?Sized,
    G: Generator + ?Sized,
{
    grad_w_at(loss, &gen.apply(z), w, lambda, rho)
}

pub(crate) fn grad_w_at<L: SmoothObjective + ?Sized>(
    loss: &L,
    g: &Vector,
    w: &Vector,
    lambda: &Vector,
    rho: f64,
) -> Vector {
    loss.grad(w) + lambda + (w - g) * rho
}

/// `grad_z L_rho = -DG(z)^T (lambda + rho (w - G(z)))`, one forward and one
/// backward pass through the generator.
pub fn grad_z_lagrangian<G: Generator + ?Sized>(
    gen: &G,
    w: &Vector,
    z: &Vector,
    lambda: &Vector,
    rho: f64,
) -> Vector {
    let (g, tape) = gen.record(z);
    -gen.pullback(&tape, &(lambda + (w - g) * rho))
}

/// Diminishing dual step `min(sigma0, sigma0 / (gap * t * ln^2(t + 1)))`.
///
/// `t` is 1-based. A vanishing denominator reads as `+inf`, so the step is
/// clamped at `sigma0`.
pub fn dual_step_size(sigma0: f64, feasibility_gap: f64, t: usize) -> f64 {
    debug_assert!(t >= 1);
    let tf = t as f64;
    let log = libm::log(tf + 1.0);
    let denom = feasibility_gap * tf * log * log;
    if denom < 1e-300 {
        sigma0
    } else {
        sigma0.min(sigma0 / denom)
    }
}

/// Sum of the dual step bound `sum_{i=1}^{n} 1 / (i ln^2(i + 1))`.
pub fn dual_series(n: usize) -> f64 {
    (1..=n)
        .map(|i| {
            let l = libm::log(i as f64 + 1.0);
            1.0 / (i as f64 * l * l)
        })
        .sum()
}

/// Bound on `|lambda_t|` after `t` dual updates:
/// `|lambda_0| + sigma0 (1 + sum_{i=1}^{t-1} 1 / (i ln^2(i + 1)))`.
pub fn dual_bound(lambda0_norm: f64, sigma0: f64, t: usize) -> f64 {
    if t == 0 {
        return lambda0_norm;
    }
    lambda0_norm + sigma0 * (1.0 + dual_series(t - 1))
}

/// `|lambda_0| + sigma0 sum_{i=1}^{t} 1 / (i ln^2(i + 1))`, which holds for
/// every step-size sequence produced by [`dual_step_size`].
///
/// [`dual_bound`] is tighter from `t = 2` on but at `t = 1` it additionally
/// needs the first feasibility gap to be at most 1.
pub fn dual_bound_strict(lambda0_norm: f64, sigma0: f64, t: usize) -> f64 {
    lambda0_norm + sigma0 * dual_series(t)
}

/// `|dz|^2 / alpha + |dw|^2 / beta + sigma_t |w_t - G(z_t)|^2`.
pub fn stopping_metric_from_parts(
    step_z: f64,
    step_w: f64,
    sigma_t: f64,
    prev_gap: f64,
    alpha: f64,
    beta: f64,
) -> f64 {
    step_z * step_z / alpha + step_w * step_w / beta + sigma_t * prev_gap * prev_gap
}

/// Exact minimizer of `L_rho(., z, lambda)` given `g = G(z)`. Only defined
/// when the `w` block carries no non-smooth term.
pub fn exact_w_min<L: SmoothObjective + ?Sized>(
    loss: &L,
    g: &Vector,
    lambda: &Vector,
    rho: f64,
    r: &Regularizer,
) -> Result<Vector, Error> {
    if !r.is_zero() {
        return Err(Error::UnsupportedRegularizer);
    }
    loss.exact_w_min(g, lambda, rho)
}
