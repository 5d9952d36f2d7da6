//! Run configuration files.
//!
//! ```toml
//! [problem]
//! kind = "denoise_l2"          # denoise_l2 | denoise_linf | compressive_sensing
//! noise_level = 0.0
//! ratio = 1.0                  # m / d for compressive sensing
//! gamma = 0.01                 # smooth weight for denoise_linf
//! seed = 0
//! # observation_file = "y.txt" # use real data instead of a planted instance
//! # matrix_file = "A.txt"      # compressive sensing only
//! # regularizer = { kind = "l1", weight = 0.1 }
//! # latent_regularizer = { kind = "ball", radius = 1.0 }
//!
//! [generator]
//! file = "reference_generator.toml"
//! geometry_pairs = 2000
//! geometry_seed = 0
//!
//! [algorithm]
//! algo = "admm"                # gd | admm | eadmm
//! rho = 0.1
//! # alpha, beta, sigma0, gd_step default to the suggested steps
//! tau_c = 0.0
//! max_iters = 300
//! init_seed = 1
//! # multiscale_stages = 8      # used by eadmm only
//! # multiscale_base = 20
//!
//! [output]
//! dir = "out"
//! timing = false
//! reference_factor = 10
//! ```
//!
//! Relative paths are resolved against the directory of the config file.

use std::path::{Path, PathBuf};

use genprior_core::admm::suggest_steps;
use genprior_core::instance::DEFAULT_GAMMA;
use genprior_core::{
    AdmmConfig, GdConfig, GeometryEstimate, Multiscale, ProblemKind, Regularizer, Vector, WStep,
};
use serde::Deserialize;

use crate::error::AppError;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemSection,
    pub generator: GeneratorSection,
    pub algorithm: AlgorithmSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSection {
    pub kind: String,
    #[serde(default)]
    pub noise_level: f64,
    #[serde(default = "one")]
    pub ratio: f64,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default)]
    pub seed: u64,
    pub observation_file: Option<PathBuf>,
    pub matrix_file: Option<PathBuf>,
    /// Overrides the problem kind's default `R`.
    pub regularizer: Option<RegularizerSpec>,
    /// `H`; zero when absent.
    pub latent_regularizer: Option<RegularizerSpec>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RegularizerSpec {
    Zero,
    L1 {
        weight: f64,
    },
    Linf {
        weight: f64,
        center: Option<Vec<f64>>,
    },
    Ball {
        radius: f64,
        center: Option<Vec<f64>>,
    },
    Box {
        lo: Vec<f64>,
        hi: Vec<f64>,
    },
}

impl RegularizerSpec {
    pub fn build(&self, dim: usize) -> Result<Regularizer, AppError> {
        let vec = |v: &Vec<f64>| Vector::from_column_slice(v);
        let r = match self {
            RegularizerSpec::Zero => Regularizer::Zero,
            RegularizerSpec::L1 { weight } => Regularizer::L1 { weight: *weight },
            RegularizerSpec::Linf { weight, center } => Regularizer::LInf {
                weight: *weight,
                center: center.as_ref().map(vec),
            },
            RegularizerSpec::Ball { radius, center } => Regularizer::IndicatorBall {
                center: center.as_ref().map_or_else(|| Vector::zeros(dim), vec),
                radius: *radius,
            },
            RegularizerSpec::Box { lo, hi } => Regularizer::IndicatorBox { lo: vec(lo), hi: vec(hi) },
        };
        r.validate(dim)?;
        Ok(r)
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSection {
    pub file: PathBuf,
    #[serde(default = "default_pairs")]
    pub geometry_pairs: usize,
    #[serde(default)]
    pub geometry_seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algo {
    Gd,
    Admm,
    Eadmm,
}

impl Algo {
    pub const ALL: [Algo; 3] = [Algo::Gd, Algo::Admm, Algo::Eadmm];

    pub fn name(self) -> &'static str {
        match self {
            Algo::Gd => "gd",
            Algo::Admm => "admm",
            Algo::Eadmm => "eadmm",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Algo::ALL.into_iter().find(|a| a.name() == name)
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgorithmSection {
    #[serde(default = "default_algo")]
    pub algo: String,
    pub rho: f64,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub sigma0: Option<f64>,
    #[serde(default)]
    pub tau_c: f64,
    pub max_iters: usize,
    pub multiscale_stages: Option<usize>,
    pub multiscale_base: Option<usize>,
    pub gd_step: Option<f64>,
    #[serde(default)]
    pub grad_tol: f64,
    #[serde(default)]
    pub init_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    /// Record wall-clock times. Off by default so traces are reproducible.
    #[serde(default)]
    pub timing: bool,
    /// Length of the reference run used for rate fits, as a multiple of the
    /// main run.
    #[serde(default = "default_reference_factor")]
    pub reference_factor: usize,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: default_dir(),
            timing: false,
            reference_factor: default_reference_factor(),
        }
    }
}

fn one() -> f64 {
    1.0
}
fn default_gamma() -> f64 {
    DEFAULT_GAMMA
}
fn default_pairs() -> usize {
    2000
}
fn default_algo() -> String {
    "admm".into()
}
fn default_dir() -> PathBuf {
    PathBuf::from("out")
}
fn default_reference_factor() -> usize {
    10
}

/// Solver settings with every default filled in.
#[derive(Debug, Clone, PartialEq)]
pub struct Resolved {
    pub admm: AdmmConfig,
    pub gd: GdConfig,
}

impl RunConfig {
    pub fn from_str(text: &str, base_dir: &Path) -> Result<Self, AppError> {
        let mut cfg: RunConfig =
            toml::from_str(text).map_err(|e| AppError::config(format!("run config: {e}")))?;
        cfg.resolve_paths(base_dir);
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, AppError> {
        let text = crate::format::read(path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_str(&text, base)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.generator.file);
        fix(&mut self.output.dir);
        if let Some(p) = self.problem.observation_file.as_mut() {
            fix(p);
        }
        if let Some(p) = self.problem.matrix_file.as_mut() {
            fix(p);
        }
    }

    fn check(&self) -> Result<(), AppError> {
        let kind = self.kind()?;
        self.algo()?;
        if self.problem.matrix_file.is_some() != (kind == ProblemKind::CompressiveSensing && self.problem.observation_file.is_some()) {
            return Err(AppError::config(
                "`matrix_file` is required exactly when compressive sensing reads `observation_file`",
            ));
        }
        if self.generator.geometry_pairs < 2 {
            return Err(AppError::config("`geometry_pairs` must be at least 2"));
        }
        if self.output.reference_factor < 1 {
            return Err(AppError::config("`reference_factor` must be at least 1"));
        }
        let a = &self.algorithm;
        match (a.multiscale_stages, a.multiscale_base) {
            (None, None) => {}
            (Some(_), Some(_)) => {}
            _ => return Err(AppError::config("set both `multiscale_stages` and `multiscale_base`, or neither")),
        }
        Ok(())
    }

    pub fn kind(&self) -> Result<ProblemKind, AppError> {
        ProblemKind::from_name(&self.problem.kind)
            .ok_or_else(|| AppError::config(format!("unknown problem kind `{}`", self.problem.kind)))
    }

    pub fn algo(&self) -> Result<Algo, AppError> {
        Algo::from_name(&self.algorithm.algo)
            .ok_or_else(|| AppError::config(format!("unknown algo `{}`", self.algorithm.algo)))
    }

    /// Fills in unset step sizes for penalty `rho`:
    /// `alpha = 1/(nu_L + rho)`, `beta = 1/(rho kappa^2)`, `sigma0` the smaller
    /// end of the suggested range, `gd_step = 1/(nu_L kappa^2)`.
    pub fn resolve(
        &self,
        algo: Algo,
        rho: f64,
        constants: (f64, f64),
        geometry: &GeometryEstimate,
    ) -> Resolved {
        let a = &self.algorithm;
        let (mu_l, nu_l) = constants;
        let s = suggest_steps(mu_l, nu_l, geometry, rho);
        let kappa2 = geometry.kappa_hat * geometry.kappa_hat;
        let multiscale = match (a.multiscale_stages, a.multiscale_base) {
            (Some(stages), Some(base_iters)) if algo == Algo::Eadmm => Some(Multiscale { stages, base_iters }),
            _ => None,
        };
        let admm = AdmmConfig {
            rho,
            alpha: a.alpha.unwrap_or(1.0 / (nu_l + rho)),
            beta: a.beta.unwrap_or(s.beta),
            sigma0: a.sigma0.unwrap_or(s.sigma0_low.min(s.sigma0_high)),
            tau_c: a.tau_c,
            max_iters: a.max_iters,
            w_step: if algo == Algo::Eadmm { WStep::Exact } else { WStep::Linearized },
            multiscale,
        };
        let gd = GdConfig {
            step: a.gd_step.unwrap_or(1.0 / (nu_l * kappa2)),
            max_iters: a.max_iters,
            grad_tol: a.grad_tol,
        };
        Resolved { admm, gd }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[problem]
kind = "denoise_l2"
[generator]
file = "gen.toml"
[algorithm]
rho = 0.5
max_iters = 10
"#;

    #[test]
    fn defaults_and_relative_paths() {
        let cfg = RunConfig::from_str(MINIMAL, Path::new("/cfg")).unwrap();
        assert_eq!(cfg.generator.file, PathBuf::from("/cfg/gen.toml"));
        assert_eq!(cfg.output.dir, PathBuf::from("/cfg/out"));
        assert_eq!(cfg.algo().unwrap(), Algo::Admm);
        assert_eq!(cfg.problem.gamma, DEFAULT_GAMMA);
        assert!(!cfg.output.timing);
    }

    #[test]
    fn unknown_keys_are_errors() {
        let text = MINIMAL.replace("rho = 0.5", "rho = 0.5\nrhoo = 1.0");
        assert!(RunConfig::from_str(&text, Path::new(".")).is_err());
        let text = format!("{MINIMAL}\n[extra]\nx = 1\n");
        assert!(RunConfig::from_str(&text, Path::new(".")).is_err());
    }

    #[test]
    fn regularizer_specs() {
        let text = MINIMAL.replace(
            "kind = \"denoise_l2\"",
            "kind = \"denoise_l2\"\nregularizer = { kind = \"l1\", weight = 0.1 }\nlatent_regularizer = { kind = \"ball\", radius = 2.0 }",
        );
        let cfg = RunConfig::from_str(&text, Path::new(".")).unwrap();
        assert_eq!(cfg.problem.regularizer.as_ref().unwrap().build(3).unwrap(), Regularizer::L1 { weight: 0.1 });
        assert_eq!(
            cfg.problem.latent_regularizer.as_ref().unwrap().build(2).unwrap(),
            Regularizer::IndicatorBall { center: Vector::zeros(2), radius: 2.0 }
        );
        let bad = MINIMAL.replace("kind = \"denoise_l2\"", "kind = \"denoise_l2\"\nregularizer = { kind = \"l1\", weigth = 0.1 }");
        assert!(RunConfig::from_str(&bad, Path::new(".")).is_err());
        let neg = RegularizerSpec::L1 { weight: -1.0 };
        assert!(neg.build(2).is_err());
    }

    #[test]
    fn bad_names_and_schedules_are_rejected() {
        let text = MINIMAL.replace("denoise_l2", "deblur");
        assert!(RunConfig::from_str(&text, Path::new(".")).is_err());
        let text = MINIMAL.replace("rho = 0.5", "rho = 0.5\nalgo = \"newton\"");
        assert!(RunConfig::from_str(&text, Path::new(".")).is_err());
        let text = MINIMAL.replace("rho = 0.5", "rho = 0.5\nmultiscale_stages = 3");
        assert!(RunConfig::from_str(&text, Path::new(".")).is_err());
        let text = text.replace("rho = 0.5", "rho = 0.5\nmultiscale_base = 5");
        let cfg = RunConfig::from_str(&text, Path::new(".")).unwrap();
        assert!(cfg.resolve(Algo::Admm, 0.5, (1.0, 1.0), &unit_geometry()).admm.multiscale.is_none());
        assert!(cfg.resolve(Algo::Eadmm, 0.5, (1.0, 1.0), &unit_geometry()).admm.multiscale.is_some());
    }

    fn unit_geometry() -> GeometryEstimate {
        GeometryEstimate {
            iota_hat: 1.0,
            kappa_hat: 1.0,
            nu_g_hat: 0.0,
            n_samples: 2,
            domain_radius: 1.0,
        }
    }

    #[test]
    fn resolve_fills_suggested_steps() {
        let cfg = RunConfig::from_str(MINIMAL, Path::new(".")).unwrap();
        let geometry = GeometryEstimate {
            iota_hat: 0.5,
            kappa_hat: 2.0,
            nu_g_hat: 1.0,
            n_samples: 10,
            domain_radius: 1.0,
        };
        let r = cfg.resolve(Algo::Admm, 0.5, (1.0, 1.0), &geometry);
        assert_eq!(r.admm.alpha, 1.0 / 1.5);
        assert_eq!(r.admm.beta, 1.0 / (0.5 * 4.0));
        // low end 0.5 * 1 / 4, high end 0.5 * min(1, 1/256)
        assert_eq!(r.admm.sigma0, 0.5 / 256.0);
        assert_eq!(r.gd.step, 0.25);
        assert_eq!(r.admm.w_step, WStep::Linearized);
        assert_eq!(cfg.resolve(Algo::Eadmm, 0.5, (1.0, 1.0), &geometry).admm.w_step, WStep::Exact);
    }
}
