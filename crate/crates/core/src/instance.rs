//! Planted synthetic instances: draw `z*` in the latent ball, set
//! `w* = G(z*)` and build the loss from (possibly noisy) observations of `w*`.

use alloc::format;
use alloc::string::String;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::admm::Problem;
use crate::error::Error;
use crate::generator::{Activation, Architecture, FeedforwardGenerator, Generator};
use crate::linalg::sample_ball;
use crate::loss::{SmoothLoss, SmoothObjective};
use crate::prox::Regularizer;
use crate::{Matrix, Vector};

/// Default weight of the smooth part in l_inf denoising.
pub const DEFAULT_GAMMA: f64 = 1e-2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProblemKind {
    /// `L = 1/2 |w - w_obs|^2`, `R = 0`.
    DenoiseL2,
    /// `L = gamma |w - w_obs|^2`, `R = |w - w_obs|_inf`.
    DenoiseLinf,
    /// `L = 1/2 |A w - b|^2` with Gaussian `A`, `R = 0`.
    CompressiveSensing,
}

impl ProblemKind {
    pub fn name(self) -> &'static str {
        match self {
            ProblemKind::DenoiseL2 => "denoise_l2",
            ProblemKind::DenoiseLinf => "denoise_linf",
            ProblemKind::CompressiveSensing => "compressive_sensing",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "denoise_l2" => Some(ProblemKind::DenoiseL2),
            "denoise_linf" => Some(ProblemKind::DenoiseLinf),
            "compressive_sensing" => Some(ProblemKind::CompressiveSensing),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InstanceSpec {
    pub kind: ProblemKind,
    /// Standard deviation of the Gaussian observation noise.
    pub noise_level: f64,
    /// `m / d` for compressive sensing, in `(0, 1]`.
    pub measurement_ratio: f64,
    /// Weight of the smooth term for l_inf denoising.
    pub gamma: f64,
}

impl InstanceSpec {
    pub fn new(kind: ProblemKind) -> Self {
        Self {
            kind,
            noise_level: 0.0,
            measurement_ratio: 1.0,
            gamma: DEFAULT_GAMMA,
        }
    }

    pub fn validate(&self) -> Result<(), Error> {
        if !(self.noise_level >= 0.0 && self.noise_level.is_finite()) {
            return Err(Error::InvalidInstance(format!(
                "noise_level must be nonnegative, got {}",
                self.noise_level
            )));
        }
        if !(self.measurement_ratio > 0.0 && self.measurement_ratio <= 1.0) {
            return Err(Error::InvalidInstance(format!(
                "measurement_ratio must lie in (0, 1], got {}",
                self.measurement_ratio
            )));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::InvalidInstance(format!("gamma must be positive, got {}", self.gamma)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlantedInstance {
    pub kind: ProblemKind,
    pub gen: FeedforwardGenerator,
    pub z_star: Vector,
    /// `G(z*)`, bit-for-bit.
    pub w_star: Vector,
    /// Denoising target or measurements `b`.
    pub observation: Vector,
    /// Measurement matrix for compressive sensing.
    pub matrix: Option<Matrix>,
    pub loss: SmoothLoss,
    pub r: Regularizer,
    pub h: Regularizer,
    pub noise_level: f64,
    pub measurement_ratio: f64,
}

/// Builds a planted instance; deterministic in `seed`.
pub fn build_instance(
    spec: &InstanceSpec,
    gen: FeedforwardGenerator,
    seed: u64,
) -> Result<PlantedInstance, Error> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z_star = sample_ball(&mut rng, gen.input_dim(), gen.domain_radius());
    let w_star = gen.apply(&z_star);
    let d = w_star.len();
    let noise = |rng: &mut ChaCha8Rng, n: usize| -> Vector {
        if spec.noise_level == 0.0 {
            Vector::zeros(n)
        } else {
            let dist = Normal::new(0.0, spec.noise_level).expect("finite nonnegative std");
            Vector::from_fn(n, |_, _| dist.sample(rng))
        }
    };

    let (observation, matrix, loss, r) = match spec.kind {
        ProblemKind::DenoiseL2 => {
            let obs = &w_star + noise(&mut rng, d);
            let loss = SmoothLoss::quadratic_denoise(obs.clone());
            (obs, None, loss, Regularizer::Zero)
        }
        ProblemKind::DenoiseLinf => {
            let obs = &w_star + noise(&mut rng, d);
            let loss = SmoothLoss::quad_plus_linf(obs.clone(), spec.gamma)?;
            let r = Regularizer::LInf {
                weight: 1.0,
                center: Some(obs.clone()),
            };
            (obs, None, loss, r)
        }
        ProblemKind::CompressiveSensing => {
            let m = measurement_count(spec.measurement_ratio, d);
            let scale = 1.0 / libm::sqrt(m as f64);
            let a = Matrix::from_fn(m, d, |_, _| {
                let x: f64 = StandardNormal.sample(&mut rng);
                x * scale
            });
            let b = &a * &w_star + noise(&mut rng, m);
            let loss = SmoothLoss::least_squares(a.clone(), b.clone())?;
            (b, Some(a), loss, Regularizer::Zero)
        }
    };
    Ok(PlantedInstance {
        kind: spec.kind,
        gen,
        z_star,
        w_star,
        observation,
        matrix,
        loss,
        r,
        h: Regularizer::Zero,
        noise_level: spec.noise_level,
        measurement_ratio: spec.measurement_ratio,
    })
}

/// A latent code drawn uniformly from the generator's domain ball.
pub fn random_latent(gen: &FeedforwardGenerator, seed: u64) -> Vector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_ball(&mut rng, gen.input_dim(), gen.domain_radius())
}

/// `m = ceil(ratio d)`, at least one.
pub fn measurement_count(ratio: f64, d: usize) -> usize {
    (libm::ceil(ratio * d as f64) as usize).clamp(1, d)
}

impl PlantedInstance {
    pub fn problem(&self) -> Problem<'_, SmoothLoss, FeedforwardGenerator> {
        Problem::new(&self.loss, &self.gen, &self.r, &self.h).with_planted(&self.w_star, &self.z_star)
    }

    /// `L(w*) + R(w*) + H(z*)`; zero for noiseless instances.
    pub fn planted_objective(&self) -> f64 {
        self.loss.value(&self.w_star) + self.r.evaluate(&self.w_star) + self.h.evaluate(&self.z_star)
    }

    /// A starting latent drawn uniformly from the latent ball.
    pub fn random_start(&self, seed: u64) -> Vector {
        random_latent(&self.gen, seed)
    }

    pub fn describe(&self) -> String {
        format!(
            "{} s={} d={} noise={} ratio={}",
            self.kind.name(),
            self.gen.input_dim(),
            self.gen.output_dim(),
            self.noise_level,
            self.measurement_ratio
        )
    }
}

/// Architecture of the reference generator: ELU layers 2 -> 4 -> 8 with
/// biases on the unit latent ball.
pub fn reference_architecture() -> Architecture {
    Architecture {
        input_dim: 2,
        layers: alloc::vec![(4, Activation::elu(), true), (8, Activation::elu(), true)],
        domain_radius: 1.0,
    }
}

/// The reference generator, seed 0.
pub fn reference_generator() -> FeedforwardGenerator {
    FeedforwardGenerator::seeded_uniform(&reference_architecture(), 0)
        .expect("reference generator is injective")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::power_iteration_extremes;

    #[test]
    fn noiseless_denoising_is_optimal_at_planted_point() {
        for kind in [ProblemKind::DenoiseL2, ProblemKind::DenoiseLinf, ProblemKind::CompressiveSensing] {
            let mut spec = InstanceSpec::new(kind);
            spec.measurement_ratio = 0.5;
            let inst = build_instance(&spec, reference_generator(), 7).unwrap();
            assert_eq!(inst.w_star, inst.gen.apply(&inst.z_star));
            assert!(inst.planted_objective().abs() <= 1e-12, "{kind:?}");
            assert!(inst.z_star.norm() <= inst.gen.domain_radius());
        }
    }

    #[test]
    fn square_measurements_are_strongly_convex() {
        let mut spec = InstanceSpec::new(ProblemKind::CompressiveSensing);
        spec.measurement_ratio = 1.0;
        let inst = build_instance(&spec, reference_generator(), 3).unwrap();
        let a = inst.matrix.as_ref().unwrap();
        assert_eq!(a.nrows(), 8);
        let (mu, nu) = inst.loss.constants();
        let (lo, hi) = power_iteration_extremes(&a.tr_mul(a), 5000);
        assert!(mu > 0.0);
        assert!((mu - lo).abs() <= 1e-6 * hi && (nu - hi).abs() <= 1e-8 * hi);
    }

    #[test]
    fn half_ratio_is_restricted() {
        let mut spec = InstanceSpec::new(ProblemKind::CompressiveSensing);
        spec.measurement_ratio = 0.5;
        let inst = build_instance(&spec, reference_generator(), 3).unwrap();
        assert_eq!(inst.matrix.as_ref().unwrap().nrows(), 4);
        assert!(inst.loss.is_restricted());
    }

    #[test]
    fn seeded_builds_are_identical() {
        let mut spec = InstanceSpec::new(ProblemKind::DenoiseL2);
        spec.noise_level = 0.1;
        let a = build_instance(&spec, reference_generator(), 11).unwrap();
        let b = build_instance(&spec, reference_generator(), 11).unwrap();
        assert_eq!(a, b);
        let c = build_instance(&spec, reference_generator(), 12).unwrap();
        assert_ne!(a.z_star, c.z_star);
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let mut spec = InstanceSpec::new(ProblemKind::CompressiveSensing);
        spec.measurement_ratio = 0.0;
        assert!(build_instance(&spec, reference_generator(), 0).is_err());
        spec.measurement_ratio = 0.5;
        spec.noise_level = -1.0;
        assert!(build_instance(&spec, reference_generator(), 0).is_err());
    }

    #[test]
    fn kind_names_round_trip() {
        for kind in [ProblemKind::DenoiseL2, ProblemKind::DenoiseLinf, ProblemKind::CompressiveSensing] {
            assert_eq!(ProblemKind::from_name(kind.name()), Some(kind));
        }
    }
}
