//! Sampling estimators for the near-isometry constants `iota_G <= kappa_G`
//! and the smoothness constant `nu_G` of a generator.
//!
//! The estimates are sample extremes over pairs drawn uniformly from the
//! latent ball, not certified bounds.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{FeedforwardGenerator, Generator};
use crate::error::Error;
use crate::linalg::sample_ball;
use crate::Vector;

/// Pairs closer than this are redrawn.
const MIN_PAIR_DISTANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeometryEstimate {
    /// Smallest observed `|G(z') - G(z)| / |z' - z|`.
    pub iota_hat: f64,
    /// Largest observed `|G(z') - G(z)| / |z' - z|`.
    pub kappa_hat: f64,
    /// Largest observed `2 |G(z') - G(z) - DG(z)(z' - z)| / |z' - z|^2`.
    pub nu_g_hat: f64,
    pub n_samples: usize,
    pub domain_radius: f64,
}

/// Streaming estimator: pairs are drawn from one seeded stream, so
/// extending the sampler only ever adds pairs to those already seen.
pub struct GeometrySampler<'a> {
    gen: &'a FeedforwardGenerator,
    rng: ChaCha8Rng,
    iota: f64,
    kappa: f64,
    nu: f64,
    n: usize,
}

impl<'a> GeometrySampler<'a> {
    pub fn new(gen: &'a FeedforwardGenerator, seed: u64) -> Self {
        Self {
            gen,
            rng: ChaCha8Rng::seed_from_u64(seed),
            iota: f64::INFINITY,
            kappa: 0.0,
            nu: 0.0,
            n: 0,
        }
    }

    /// Draws one pair `(z, z')` from the latent ball.
    pub fn draw_pair(&mut self) -> (Vector, Vector) {
        let s = self.gen.input_dim();
        let r = self.gen.domain_radius();
        loop {
            let z = sample_ball(&mut self.rng, s, r);
            let zp = sample_ball(&mut self.rng, s, r);
            if (&zp - &z).norm() >= MIN_PAIR_DISTANCE {
                return (z, zp);
            }
        }
    }

    pub fn extend(&mut self, n_pairs: usize) {
        for _ in 0..n_pairs {
            let (z, zp) = self.draw_pair();
            let (gz, tape) = self.gen.record(&z);
            let gzp = self.gen.apply(&zp);
            let dz = &zp - &z;
            let dist = dz.norm();
            let dg = &gzp - &gz;
            let ratio = dg.norm() / dist;
            let remainder = (dg - self.gen.push_forward(&tape, &dz)).norm();
            let curvature = 2.0 * remainder / (dist * dist);
            self.iota = self.iota.min(ratio);
            self.kappa = self.kappa.max(ratio);
            self.nu = self.nu.max(curvature);
            self.n += 1;
        }
    }

    pub fn estimate(&self) -> GeometryEstimate {
        GeometryEstimate {
            iota_hat: self.iota,
            kappa_hat: self.kappa,
            nu_g_hat: self.nu,
            n_samples: self.n,
            domain_radius: self.gen.domain_radius(),
        }
    }
}

/// Estimates the geometric constants of `gen` from `n_pairs` random pairs in
/// its latent ball. Deterministic given `rng_seed`.
pub fn estimate_geometry(
    gen: &FeedforwardGenerator,
    n_pairs: usize,
    rng_seed: u64,
) -> Result<GeometryEstimate, Error> {
    if n_pairs < 2 {
        return Err(Error::InvalidConfig(alloc::format!(
            "geometry estimation needs at least 2 pairs, got {n_pairs}"
        )));
    }
    let mut sampler = GeometrySampler::new(gen, rng_seed);
    sampler.extend(n_pairs);
    Ok(sampler.estimate())
}

/// Adds i.i.d. uniform `(-magnitude, magnitude)` noise to every weight entry.
/// Biases are left alone.
pub fn perturb_weights(
    gen: &FeedforwardGenerator,
    magnitude: f64,
    rng_seed: u64,
) -> Result<FeedforwardGenerator, Error> {
    if !(magnitude > 0.0 && magnitude.is_finite()) {
        return Err(Error::InvalidConfig(alloc::format!(
            "perturbation magnitude must be positive, got {magnitude}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut out = gen.clone();
    for layer in &mut out.layers {
        for w in layer.weights.iter_mut() {
            *w += rng.random_range(-magnitude..magnitude);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator::{Activation, Architecture, Layer};
    use crate::Matrix;
    use alloc::vec;

    fn orthonormal(d: usize, s: usize) -> Matrix {
        let m = Matrix::from_fn(d, s, |i, j| libm::sin((i * 7 + j * 3 + 1) as f64));
        m.qr().q().columns(0, s).into_owned()
    }

    #[test]
    fn orthonormal_linear_is_isometry() {
        let gen = FeedforwardGenerator::linear(orthonormal(5, 3), 2.0).unwrap();
        let est = estimate_geometry(&gen, 500, 11).unwrap();
        assert!((est.iota_hat - 1.0).abs() < 1e-9);
        assert!((est.kappa_hat - 1.0).abs() < 1e-9);
        assert!(est.nu_g_hat <= 1e-9);
        assert_eq!(est.n_samples, 500);
    }

    #[test]
    fn scaled_identity() {
        let gen = FeedforwardGenerator::linear(Matrix::identity(3, 3) * 2.0, 1.0).unwrap();
        let est = estimate_geometry(&gen, 200, 4).unwrap();
        assert!((est.iota_hat - 2.0).abs() < 1e-9);
        assert!((est.kappa_hat - 2.0).abs() < 1e-9);
    }

    #[test]
    fn too_few_pairs() {
        let gen = FeedforwardGenerator::linear(Matrix::identity(2, 2), 1.0).unwrap();
        assert!(estimate_geometry(&gen, 1, 0).is_err());
    }

    #[test]
    fn perturbation_is_deterministic_and_leaves_original() {
        let arch = Architecture {
            input_dim: 2,
            layers: vec![(3, Activation::Tanh, true)],
            domain_radius: 1.0,
        };
        let gen = FeedforwardGenerator::seeded_uniform(&arch, 9).unwrap();
        let before = gen.clone();
        let a = perturb_weights(&gen, 0.1, 5).unwrap();
        let b = perturb_weights(&gen, 0.1, 5).unwrap();
        assert_eq!(a, b);
        assert_eq!(gen, before);
        assert_ne!(a, gen);
        assert_eq!(a.layers()[0].bias, gen.layers()[0].bias);
        assert!(perturb_weights(&gen, 0.0, 5).is_err());
    }

    #[test]
    fn perturbation_repairs_duplicated_column() {
        let w = Matrix::from_row_slice(3, 2, &[1.0, 1.0, 0.5, 0.5, -2.0, -2.0]);
        let gen = FeedforwardGenerator::new_without_rank_check(
            2,
            vec![Layer::new(w, None, Activation::Identity)],
            1.0,
        )
        .unwrap();
        assert!(gen.min_singular_values()[0] < 1e-12);
        let fixed = perturb_weights(&gen, 1e-6, 1).unwrap();
        assert!(fixed.min_singular_values()[0] > 0.0);
        assert!(FeedforwardGenerator::new(2, fixed.layers().to_vec(), 1.0).is_ok());
    }
}
