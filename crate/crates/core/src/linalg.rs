use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::{Matrix, Vector};

pub(crate) fn all_finite(v: &Vector) -> bool {
    v.iter().all(|x| x.is_finite())
}

/// Uniform draw from the closed Euclidean ball of `radius` in `R^dim`.
pub(crate) fn sample_ball<R: Rng + ?Sized>(rng: &mut R, dim: usize, radius: f64) -> Vector {
    loop {
        let dir = Vector::from_fn(dim, |_, _| StandardNormal.sample(rng));
        let n = dir.norm();
        if n < 1e-300 {
            continue;
        }
        let u: f64 = rng.random();
        let r = radius * libm::pow(u, 1.0 / dim as f64);
        return dir * (r / n);
    }
}

/// Singular values in descending order.
pub(crate) fn singular_values(m: &Matrix) -> Vector {
    let mut sv = m.clone().svd(false, false).singular_values;
    sv.as_mut_slice().sort_by(|a, b| b.total_cmp(a));
    sv
}
