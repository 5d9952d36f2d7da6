//! Builds problems from run configs and drives the solvers.

use std::time::Instant;

use genprior_core::admm::{self, AdmmState};
use genprior_core::gd::{run_gd, tune_gd, GdTuning};
use genprior_core::generator::estimate_geometry;
use genprior_core::instance::{build_instance, random_latent};
use genprior_core::rate::{fit_rate, plateau_of, tail_mean};
use genprior_core::{
    Clock, FeedforwardGenerator, GeometryEstimate, Generator, InstanceSpec, NoClock, Problem,
    ProblemKind, Regularizer, RunTrace, SmoothLoss, SmoothObjective, Vector,
};

use crate::config::{Algo, Resolved, RunConfig};
use crate::error::AppError;
use crate::format::{load_generator, load_matrix, load_vector};
use crate::sweep::par_map;
use crate::trace_csv::SummaryRow;

/// Wall clock measured from construction.
#[derive(Debug, Clone, Copy)]
pub struct StdClock {
    origin: Instant,
}

impl StdClock {
    pub fn new() -> Self {
        Self { origin: Instant::now() }
    }
}

impl Default for StdClock {
    fn default() -> Self {
        Self::new()
    }
}

impl Clock for StdClock {
    fn now_ns(&self) -> u64 {
        self.origin.elapsed().as_nanos() as u64
    }
}

/// Everything a run needs: problem data, geometry estimate and, for planted
/// instances, the known solution.
#[derive(Debug, Clone)]
pub struct Setup {
    pub kind: ProblemKind,
    pub gen: FeedforwardGenerator,
    pub loss: SmoothLoss,
    pub r: Regularizer,
    pub h: Regularizer,
    /// `(w*, z*)`.
    pub planted: Option<(Vector, Vector)>,
    pub geometry: GeometryEstimate,
}

impl Setup {
    pub fn from_config(cfg: &RunConfig) -> Result<Self, AppError> {
        let gen = load_generator(&cfg.generator.file)?;
        Self::with_generator(cfg, gen)
    }

    pub fn with_generator(cfg: &RunConfig, gen: FeedforwardGenerator) -> Result<Self, AppError> {
        let p = &cfg.problem;
        let kind = cfg.kind()?;
        let geometry = estimate_geometry(&gen, cfg.generator.geometry_pairs, cfg.generator.geometry_seed)?;
        let d = gen.output_dim();
        let (loss, default_r, planted) = match &p.observation_file {
            Some(path) => {
                let obs = load_vector(path)?;
                let (loss, r) = match kind {
                    ProblemKind::DenoiseL2 => {
                        check_len("observation", d, obs.len())?;
                        (SmoothLoss::quadratic_denoise(obs), Regularizer::Zero)
                    }
                    ProblemKind::DenoiseLinf => {
                        check_len("observation", d, obs.len())?;
                        let r = Regularizer::LInf { weight: 1.0, center: Some(obs.clone()) };
                        (SmoothLoss::quad_plus_linf(obs, p.gamma)?, r)
                    }
                    ProblemKind::CompressiveSensing => {
                        let path = p.matrix_file.as_ref().expect("checked at load");
                        let a = load_matrix(path)?;
                        check_len("measurement matrix columns", d, a.ncols())?;
                        (SmoothLoss::least_squares(a, obs)?, Regularizer::Zero)
                    }
                };
                (loss, r, None)
            }
            None => {
                let spec = InstanceSpec {
                    kind,
                    noise_level: p.noise_level,
                    measurement_ratio: p.ratio,
                    gamma: p.gamma,
                };
                let inst = build_instance(&spec, gen.clone(), p.seed)?;
                (inst.loss, inst.r, Some((inst.w_star, inst.z_star)))
            }
        };
        let r = match &p.regularizer {
            Some(spec) => spec.build(d)?,
            None => default_r,
        };
        let h = match &p.latent_regularizer {
            Some(spec) => spec.build(gen.input_dim())?,
            None => Regularizer::Zero,
        };
        Ok(Self { kind, gen, loss, r, h, planted, geometry })
    }

    pub fn problem(&self) -> Problem<'_, SmoothLoss, FeedforwardGenerator> {
        let p = Problem::new(&self.loss, &self.gen, &self.r, &self.h);
        match &self.planted {
            Some((w, z)) => p.with_planted(w, z),
            None => p,
        }
    }

    /// Starting latent for `init_seed`.
    pub fn start(&self, seed: u64) -> Vector {
        random_latent(&self.gen, seed)
    }

    pub fn resolve(&self, cfg: &RunConfig, algo: Algo, rho: f64) -> Resolved {
        cfg.resolve(algo, rho, self.loss.constants(), &self.geometry)
    }
}

fn check_len(what: &str, expected: usize, found: usize) -> Result<(), AppError> {
    if expected == found {
        Ok(())
    } else {
        Err(AppError::config(format!("{what}: expected length {expected}, found {found}")))
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub algo: Algo,
    pub trace: RunTrace,
    pub w: Vector,
    pub z: Vector,
}

/// A failed run with the rows recorded before the failure.
#[derive(Debug)]
pub struct RunError {
    pub error: AppError,
    pub trace: RunTrace,
}

impl From<AppError> for RunError {
    fn from(error: AppError) -> Self {
        Self { error, trace: RunTrace::default() }
    }
}

/// Runs one algorithm from latent `z0`. ADMM variants start feasible:
/// `w0 = G(z0)`, `lambda0 = 0`.
pub fn run_algorithm(
    setup: &Setup,
    algo: Algo,
    resolved: &Resolved,
    z0: Vector,
    clock: &dyn Clock,
) -> Result<RunOutput, RunError> {
    let problem = setup.problem();
    let result = match algo {
        Algo::Gd => run_gd(&problem, &resolved.gd, z0, clock).map(|(z, trace)| {
            let w = setup.gen.apply(&z);
            (w, z, trace)
        }),
        Algo::Admm | Algo::Eadmm => {
            let init = AdmmState::feasible_start(&setup.gen, z0, resolved.admm.sigma0);
            admm::solve(&problem, &resolved.admm, init, clock).map(|(s, trace)| (s.w, s.z, trace))
        }
    };
    match result {
        Ok((w, z, trace)) => Ok(RunOutput { algo, trace, w, z }),
        Err(f) => Err(RunError { error: f.error.into(), trace: f.trace }),
    }
}

/// Runs one algorithm with the settings of `cfg`.
pub fn run_from_config(setup: &Setup, cfg: &RunConfig, algo: Algo) -> Result<RunOutput, RunError> {
    let resolved = setup.resolve(cfg, algo, cfg.algorithm.rho);
    let z0 = setup.start(cfg.algorithm.init_seed);
    if cfg.output.timing {
        run_algorithm(setup, algo, &resolved, z0, &StdClock::new())
    } else {
        run_algorithm(setup, algo, &resolved, z0, &NoClock)
    }
}

/// Same settings with the iteration budget multiplied by `factor`.
fn lengthened(resolved: &Resolved, factor: usize) -> Resolved {
    let mut long = resolved.clone();
    long.gd.max_iters = long.gd.max_iters.saturating_mul(factor);
    long.admm.max_iters = long.admm.max_iters.saturating_mul(factor);
    if let Some(ms) = long.admm.multiscale.as_mut() {
        ms.base_iters = ms.base_iters.saturating_mul(factor);
    }
    long
}

/// Summary row for a finished run. The rate fit uses the best Lagrangian of
/// a reference run `reference_factor` times longer; it is left blank when the
/// trace admits no fit.
pub fn summarize(setup: &Setup, cfg: &RunConfig, out: &RunOutput) -> SummaryRow {
    let last = out.trace.last();
    let problem = setup.problem();
    let final_obj = last.map_or_else(|| problem.objective(&out.w, &out.z), |r| r.objective);
    let final_gap = last.map_or_else(|| (&out.w - setup.gen.apply(&out.z)).norm(), |r| r.feas_gap);
    let resolved = setup.resolve(cfg, out.algo, cfg.algorithm.rho);
    let long = lengthened(&resolved, cfg.output.reference_factor);
    let z0 = setup.start(cfg.algorithm.init_seed);
    let fit = run_algorithm(setup, out.algo, &long, z0, &NoClock)
        .ok()
        .and_then(|reference| {
            let best = reference
                .trace
                .lagrangians()
                .into_iter()
                .chain(out.trace.lagrangians())
                .fold(f64::INFINITY, f64::min);
            fit_rate(&out.trace, best).ok()
        });
    SummaryRow {
        algo: out.algo.name().to_string(),
        final_obj,
        final_gap,
        iters: out.trace.len(),
        wall_ns: last.map_or(0, |r| r.wall_ns),
        eta_hat: fit.map(|f| f.eta_hat),
        plateau: fit.map(|f| f.plateau),
    }
}

/// Result of [`compare`]: one entry per algorithm that ran, plus notes on
/// algorithms that were skipped.
#[derive(Debug)]
pub struct Comparison {
    pub runs: Vec<(RunOutput, SummaryRow)>,
    pub skipped: Vec<String>,
}

/// Runs gd, admm and eadmm on the same instance from the same start.
/// `eadmm` is skipped when `R != 0`.
pub fn compare(setup: &Setup, cfg: &RunConfig) -> Result<Comparison, RunError> {
    let mut runs = Vec::new();
    let mut skipped = Vec::new();
    for algo in Algo::ALL {
        if algo == Algo::Eadmm && !setup.r.is_zero() {
            skipped.push("skipping eadmm: exact w-minimization needs R = 0".to_string());
            continue;
        }
        let out = run_from_config(setup, cfg, algo)?;
        let summary = summarize(setup, cfg, &out);
        runs.push((out, summary));
    }
    Ok(Comparison { runs, skipped })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlateauRow {
    pub rho: f64,
    /// Mean over seeds of the tail-mean feasibility gap.
    pub gap_plateau: f64,
    /// Mean over seeds of the tail-min `|w - w*|`; `None` without a planted solution.
    pub error_plateau: Option<f64>,
    pub runs: usize,
}

/// One run of a plateau sweep.
#[derive(Debug)]
pub struct SweepRun {
    pub rho: f64,
    pub seed: u64,
    pub result: Result<RunOutput, RunError>,
}

/// Runs the configured ADMM variant at every `rho` from every start seed.
/// Step sizes left unset in the config are re-derived for each `rho`. Runs
/// come back ordered by `rho`, then seed.
pub fn sweep_runs(
    setup: &Setup,
    cfg: &RunConfig,
    rhos: &[f64],
    seeds: &[u64],
    workers: usize,
) -> Result<Vec<SweepRun>, AppError> {
    if rhos.len() < 2 {
        return Err(AppError::config("plateau sweep needs at least two rho values"));
    }
    if seeds.is_empty() {
        return Err(AppError::config("plateau sweep needs at least one seed"));
    }
    if let Some(bad) = rhos.iter().find(|r| !(**r > 0.0 && r.is_finite())) {
        return Err(AppError::config(format!("rho must be positive, got {bad}")));
    }
    let algo = cfg.algo()?;
    if algo == Algo::Gd {
        return Err(AppError::config("plateau sweep needs algo = \"admm\" or \"eadmm\""));
    }
    if cfg.algorithm.max_iters == 0 && algo == Algo::Admm {
        return Err(AppError::config("plateau sweep needs max_iters > 0"));
    }
    let jobs: Vec<(f64, u64)> = rhos.iter().flat_map(|&r| seeds.iter().map(move |&s| (r, s))).collect();
    Ok(par_map(&jobs, workers, |&(rho, seed)| {
        let resolved = setup.resolve(cfg, algo, rho);
        let result = run_algorithm(setup, algo, &resolved, setup.start(seed), &NoClock);
        SweepRun { rho, seed, result }
    }))
}

/// Plateau table from [`sweep_runs`] output: per `rho`, the seed-averaged
/// tail mean of the feasibility gap and tail minimum of `|w - w*|`.
pub fn plateau_table(runs: &[SweepRun]) -> Result<Vec<PlateauRow>, AppError> {
    let mut table: Vec<PlateauRow> = Vec::new();
    let mut errs: Vec<Option<f64>> = Vec::new();
    for run in runs {
        let out = run.result.as_ref().map_err(AppError::from_run)?;
        if out.trace.is_empty() {
            return Err(AppError::config("plateau sweep produced an empty trace"));
        }
        let gaps: Vec<f64> = out.trace.records.iter().map(|r| r.feas_gap).collect();
        let dists: Option<Vec<f64>> = out.trace.records.iter().map(|r| r.dist_w).collect();
        if table.last().is_none_or(|row| row.rho != run.rho) {
            table.push(PlateauRow { rho: run.rho, gap_plateau: 0.0, error_plateau: None, runs: 0 });
            errs.push(Some(0.0));
        }
        let row = table.last_mut().expect("pushed above");
        let err = errs.last_mut().expect("pushed above");
        row.gap_plateau += tail_mean(&gaps);
        row.runs += 1;
        *err = match (*err, dists) {
            (Some(acc), Some(d)) => Some(acc + plateau_of(&d)),
            _ => None,
        };
    }
    for (row, err) in table.iter_mut().zip(errs) {
        let n = row.runs as f64;
        row.gap_plateau /= n;
        row.error_plateau = err.map(|e| e / n);
    }
    Ok(table)
}

/// [`sweep_runs`] followed by [`plateau_table`].
pub fn plateau_vs_rho(
    setup: &Setup,
    cfg: &RunConfig,
    rhos: &[f64],
    seeds: &[u64],
    workers: usize,
) -> Result<Vec<PlateauRow>, AppError> {
    plateau_table(&sweep_runs(setup, cfg, rhos, seeds, workers)?)
}

pub fn plateau_table_to_string(rows: &[PlateauRow]) -> String {
    let mut out = String::from("rho,gap_plateau,error_plateau,runs\n");
    for r in rows {
        let err = r.error_plateau.map_or(String::new(), |e| format!("{e:?}"));
        out.push_str(&format!("{:?},{:?},{},{}\n", r.rho, r.gap_plateau, err, r.runs));
    }
    out
}

/// Grid search for the GD step on the configured instance, starting from
/// `n_starts` latent codes seeded from `init_seed` upward.
pub fn tune(
    setup: &Setup,
    cfg: &RunConfig,
    steps: &[f64],
    budget: usize,
    n_starts: usize,
) -> Result<GdTuning, AppError> {
    let starts: Vec<Vector> = (0..n_starts as u64).map(|k| setup.start(cfg.algorithm.init_seed + k)).collect();
    Ok(tune_gd(&setup.problem(), &starts, steps, budget)?)
}

impl AppError {
    pub(crate) fn from_run(e: &RunError) -> AppError {
        match &e.error {
            AppError::Numerical(c) => AppError::Numerical(c.clone()),
            other => AppError::config(other.to_string()),
        }
    }
}
