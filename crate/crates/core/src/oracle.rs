//! Independent reference computations used to check the solvers.
//!
//! Everything here is deliberately naive: brute-force enumeration, finite
//! differences and dense factorizations. Only compiled for tests or with the
//! `oracles` feature.

use alloc::vec::Vec;

use crate::prox::Regularizer;
use crate::{Matrix, Vector};

/// Central finite-difference gradient of a scalar function.
pub fn fd_gradient(f: impl Fn(&Vector) -> f64, x: &Vector, h: f64) -> Vector {
    Vector::from_fn(x.len(), |i, _| {
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[i] += h;
        xm[i] -= h;
        (f(&xp) - f(&xm)) / (2.0 * h)
    })
}

/// Central finite-difference Jacobian of a vector function.
pub fn fd_jacobian(f: impl Fn(&Vector) -> Vector, x: &Vector, h: f64) -> Matrix {
    let m = f(x).len();
    let mut jac = Matrix::zeros(m, x.len());
    for j in 0..x.len() {
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[j] += h;
        xm[j] -= h;
        let col = (f(&xp) - f(&xm)) / (2.0 * h);
        jac.set_column(j, &col);
    }
    jac
}

/// Projection onto the l1 ball by enumerating every support and sign
/// pattern of the active face. Exponential in the dimension; keep it small.
pub fn brute_force_l1_projection(v: &Vector, radius: f64) -> Vector {
    let n = v.len();
    if v.lp_norm(1) <= radius {
        return v.clone();
    }
    let mut best = Vector::zeros(n);
    let mut best_dist = v.norm();
    let mut pattern = alloc::vec![0i8; n];
    // Each coordinate is off (0), positive (1) or negative (-1).
    loop {
        let support: Vec<usize> = (0..n).filter(|&i| pattern[i] != 0).collect();
        if !support.is_empty() {
            let k = support.len() as f64;
            let dot: f64 = support.iter().map(|&i| pattern[i] as f64 * v[i]).sum();
            let shift = (dot - radius) / k;
            let mut x = Vector::zeros(n);
            let mut ok = true;
            for &i in &support {
                let s = pattern[i] as f64;
                x[i] = v[i] - shift * s;
                if s * x[i] < 0.0 {
                    ok = false;
                }
            }
            if ok {
                let d = (v - &x).norm();
                if d < best_dist {
                    best_dist = d;
                    best = x;
                }
            }
        }
        // Next pattern in base 3.
        let mut i = 0;
        loop {
            if i == n {
                return best;
            }
            pattern[i] = match pattern[i] {
                0 => 1,
                1 => -1,
                _ => 0,
            };
            if pattern[i] != 0 {
                break;
            }
            i += 1;
        }
    }
}

/// Projection of `p` onto `{a >= 0, sum a = total}` by active-set enumeration.
fn brute_force_simplex_projection(p: &[f64], total: f64) -> Vec<f64> {
    let n = p.len();
    let mut best = alloc::vec![0.0; n];
    let mut best_dist = f64::INFINITY;
    for mask in 1u32..(1 << n) {
        let idx: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
        let sum: f64 = idx.iter().map(|&i| p[i]).sum();
        let shift = (sum - total) / idx.len() as f64;
        let mut a = alloc::vec![0.0; n];
        if idx.iter().any(|&i| p[i] - shift < -1e-15) {
            continue;
        }
        for &i in &idx {
            a[i] = (p[i] - shift).max(0.0);
        }
        let d: f64 = (0..n).map(|i| (p[i] - a[i]) * (p[i] - a[i])).sum();
        if d < best_dist {
            best_dist = d;
            best = a;
        }
    }
    best
}

/// Distance from `(v - x) / t` to the subdifferential of `reg` at `x`.
///
/// Zero exactly when `x = prox(t, v)`. Each kind uses its explicit
/// subdifferential formula; returns `+inf` when `x` is outside the domain.
pub fn subgradient_residual(reg: &Regularizer, t: f64, v: &Vector, x: &Vector) -> f64 {
    let q = (v - x) / t;
    match reg {
        Regularizer::Zero => q.norm(),
        Regularizer::L1 { weight } => {
            let w = *weight;
            let r: f64 = q
                .iter()
                .zip(x.iter())
                .map(|(qi, xi)| {
                    let e = if *xi == 0.0 {
                        (qi.abs() - w).max(0.0)
                    } else {
                        qi - w * xi.signum()
                    };
                    e * e
                })
                .sum();
            libm::sqrt(r)
        }
        Regularizer::LInf { weight, center } => {
            let w = *weight;
            let y = match center {
                Some(c) => x - c,
                None => x.clone(),
            };
            let m = y.amax();
            if w == 0.0 {
                return q.norm();
            }
            if m <= 1e-14 {
                // Subdifferential is the l1 ball of radius w.
                let p = brute_force_l1_projection(&q, w);
                return (q - p).norm();
            }
            let tol = 1e-12 * m.max(1.0);
            let mut residual = 0.0;
            // Active coordinates carry s_i a_i with a on the simplex of mass w.
            let mut active = Vec::new();
            for i in 0..y.len() {
                if y[i].abs() >= m - tol {
                    active.push(q[i] * y[i].signum());
                } else {
                    residual += q[i] * q[i];
                }
            }
            let a = brute_force_simplex_projection(&active, w);
            for (p, ak) in active.iter().zip(&a) {
                residual += (p - ak) * (p - ak);
            }
            libm::sqrt(residual)
        }
        Regularizer::IndicatorBall { center, radius } => {
            let d = x - center;
            let n = d.norm();
            if n > radius * (1.0 + 1e-12) {
                f64::INFINITY
            } else if n < radius * (1.0 - 1e-12) {
                q.norm()
            } else {
                let normal = d / n;
                let mu = q.dot(&normal).max(0.0);
                (q - normal * mu).norm()
            }
        }
        Regularizer::IndicatorBox { lo, hi } => {
            let mut r = 0.0;
            for i in 0..x.len() {
                let (l, h, xi, qi) = (lo[i], hi[i], x[i], q[i]);
                if xi < l || xi > h {
                    return f64::INFINITY;
                }
                let e = if l == h {
                    0.0
                } else if xi == h {
                    (-qi).max(0.0)
                } else if xi == l {
                    qi.max(0.0)
                } else {
                    qi
                };
                r += e * e;
            }
            libm::sqrt(r)
        }
    }
}

/// Solves a symmetric positive definite system by Cholesky.
pub fn dense_spd_solve(a: &Matrix, b: &Vector) -> Vector {
    a.clone()
        .cholesky()
        .expect("matrix is not positive definite")
        .solve(b)
}

/// Extreme eigenvalues of a symmetric positive semidefinite matrix by power
/// iteration on `M` and on `lambda_max I - M`.
pub fn power_iteration_extremes(m: &Matrix, iters: usize) -> (f64, f64) {
    let n = m.nrows();
    let power = |mat: &Matrix| {
        let mut x = Vector::from_fn(n, |i, _| 1.0 + 0.1 * i as f64);
        x /= x.norm();
        let mut lambda = 0.0;
        for _ in 0..iters {
            let y = mat * &x;
            lambda = x.dot(&y);
            let ny = y.norm();
            if ny == 0.0 {
                return 0.0;
            }
            x = y / ny;
        }
        lambda
    };
    let top = power(m);
    let shifted = Matrix::identity(n, n) * top - m;
    let bottom = top - power(&shifted);
    (bottom, top)
}
