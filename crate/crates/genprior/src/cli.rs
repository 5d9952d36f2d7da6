//! Command-line interface. [`main_with`] is the whole program minus process
//! plumbing, so tests can drive it in-process.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use genprior_core::admm::suggest_steps;
use genprior_core::gd::log_grid;
use genprior_core::generator::estimate_geometry;
use genprior_core::SmoothObjective;

use crate::config::{Algo, RunConfig};
use crate::driver::{self, Setup};
use crate::error::{AppError, EXIT_CONFIG, EXIT_OK};
use crate::format::{load_generator, write};
use crate::sweep::workers_from_env;
use crate::trace_csv::{save_trace, summary_to_string};

#[derive(Debug, Parser)]
#[command(name = "genprior", version, about = "ADMM and gradient descent for inverse problems with a generative prior")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one algorithm and write its trace CSV.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `algorithm.algo`.
        #[arg(long)]
        algo: Option<String>,
        /// Trace path; defaults to `<output.dir>/trace_<algo>.csv`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run gd, admm and eadmm on one instance; write traces and summary.csv.
    Compare {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `output.dir`.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Print geometry estimates and suggested step sizes as key=value lines.
    EstimateGeometry {
        #[arg(long, conflicts_with = "generator", required_unless_present = "generator")]
        config: Option<PathBuf>,
        #[arg(long)]
        generator: Option<PathBuf>,
        #[arg(long)]
        pairs: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Penalty used for the suggestions; defaults to `algorithm.rho`, or 1.
        #[arg(long)]
        rho: Option<f64>,
        /// Loss constants when only a generator is given.
        #[arg(long, default_value_t = 1.0)]
        mu_l: f64,
        #[arg(long, default_value_t = 1.0)]
        nu_l: f64,
    },
    /// Feasibility-gap and error plateaus across penalty weights.
    PlateauSweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_delimiter = ',', default_values_t = [1.0, 2.0, 4.0, 8.0])]
        rhos: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_values_t = [0, 1, 2, 3, 4])]
        seeds: Vec<u64>,
        /// Defaults to `<output.dir>/plateau.csv`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Grid search for the gradient-descent step size.
    TuneGd {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 1e-3)]
        lo: f64,
        #[arg(long, default_value_t = 1e3)]
        hi: f64,
        #[arg(long, default_value_t = 13)]
        points: usize,
        /// Iterations per run; defaults to `algorithm.max_iters`.
        #[arg(long)]
        budget: Option<usize>,
        #[arg(long, default_value_t = 5)]
        starts: usize,
        /// Defaults to `<output.dir>/tune_gd.csv`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Parses `args` (program name first), runs the command and returns the exit
/// code. Errors go to `err` as one machine-readable line.
pub fn main_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(out, "{e}");
                return EXIT_OK;
            }
            let _ = write!(err, "{e}");
            let msg = e.kind().to_string();
            let _ = writeln!(err, "{}", AppError::config(format!("usage: {msg}")).machine_line());
            return EXIT_CONFIG;
        }
    };
    match execute(cli.command, out, err) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "{}", e.machine_line());
            e.exit_code()
        }
    }
}

fn io_err(e: std::io::Error) -> AppError {
    AppError::io(Path::new("<stdout>"), e)
}

fn execute(cmd: Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), AppError> {
    match cmd {
        Command::Run { config, algo, out: path } => {
            let cfg = RunConfig::load(&config)?;
            let algo = match algo {
                Some(name) => Algo::from_name(&name).ok_or_else(|| AppError::config(format!("unknown algo `{name}`")))?,
                None => cfg.algo()?,
            };
            let setup = Setup::from_config(&cfg)?;
            let path = path.unwrap_or_else(|| cfg.output.dir.join(format!("trace_{}.csv", algo.name())));
            match driver::run_from_config(&setup, &cfg, algo) {
                Ok(run) => {
                    save_trace(&path, &run.trace)?;
                    writeln!(out, "algo={} iters={} trace={}", algo.name(), run.trace.len(), path.display()).map_err(io_err)?;
                    Ok(())
                }
                Err(failure) => {
                    save_trace(&path, &failure.trace)?;
                    Err(failure.error)
                }
            }
        }
        Command::Compare { config, out_dir } => {
            let cfg = RunConfig::load(&config)?;
            let dir = out_dir.unwrap_or_else(|| cfg.output.dir.clone());
            let setup = Setup::from_config(&cfg)?;
            let cmp = driver::compare(&setup, &cfg).map_err(|f| f.error)?;
            for note in &cmp.skipped {
                writeln!(err, "{note}").map_err(io_err)?;
            }
            for (run, _) in &cmp.runs {
                save_trace(&dir.join(format!("trace_{}.csv", run.algo.name())), &run.trace)?;
            }
            let rows: Vec<_> = cmp.runs.into_iter().map(|(_, s)| s).collect();
            let summary = summary_to_string(&rows);
            write(&dir.join("summary.csv"), &summary)?;
            out.write_all(summary.as_bytes()).map_err(io_err)?;
            Ok(())
        }
        Command::EstimateGeometry { config, generator, pairs, seed, rho, mu_l, nu_l } => {
            let (gen, pairs, seed, rho, (mu_l, nu_l)) = match (&config, &generator) {
                (Some(path), _) => {
                    let cfg = RunConfig::load(path)?;
                    let setup_free_gen = load_generator(&cfg.generator.file)?;
                    let setup = Setup::with_generator(&cfg, setup_free_gen.clone())?;
                    (
                        setup_free_gen,
                        pairs.unwrap_or(cfg.generator.geometry_pairs),
                        seed.unwrap_or(cfg.generator.geometry_seed),
                        rho.unwrap_or(cfg.algorithm.rho),
                        setup.loss.constants(),
                    )
                }
                (None, Some(path)) => (load_generator(path)?, pairs.unwrap_or(2000), seed.unwrap_or(0), rho.unwrap_or(1.0), (mu_l, nu_l)),
                (None, None) => unreachable!("clap requires one of the two"),
            };
            let g = estimate_geometry(&gen, pairs, seed)?;
            let s = suggest_steps(mu_l, nu_l, &g, rho);
            let lines = [
                ("iota_hat", format!("{:?}", g.iota_hat)),
                ("kappa_hat", format!("{:?}", g.kappa_hat)),
                ("nu_g_hat", format!("{:?}", g.nu_g_hat)),
                ("n_samples", g.n_samples.to_string()),
                ("domain_radius", format!("{:?}", g.domain_radius)),
                ("mu_l", format!("{mu_l:?}")),
                ("nu_l", format!("{nu_l:?}")),
                ("rho", format!("{rho:?}")),
                ("alpha", format!("{:?}", s.alpha)),
                ("beta", format!("{:?}", s.beta)),
                ("sigma0_low", format!("{:?}", s.sigma0_low)),
                ("sigma0_high", format!("{:?}", s.sigma0_high)),
                ("eta", s.eta.map_or("none".to_string(), |e| format!("{e:?}"))),
            ];
            for (k, v) in lines {
                writeln!(out, "{k}={v}").map_err(io_err)?;
            }
            Ok(())
        }
        Command::PlateauSweep { config, rhos, seeds, out: path } => {
            let cfg = RunConfig::load(&config)?;
            let setup = Setup::from_config(&cfg)?;
            let table = driver::plateau_vs_rho(&setup, &cfg, &rhos, &seeds, workers_from_env())?;
            let text = driver::plateau_table_to_string(&table);
            write(&path.unwrap_or_else(|| cfg.output.dir.join("plateau.csv")), &text)?;
            out.write_all(text.as_bytes()).map_err(io_err)?;
            Ok(())
        }
        Command::TuneGd { config, lo, hi, points, budget, starts, out: path } => {
            if !(lo > 0.0 && hi >= lo && points >= 1 && starts >= 1) {
                return Err(AppError::config("tune-gd needs 0 < lo <= hi, points >= 1 and starts >= 1"));
            }
            let cfg = RunConfig::load(&config)?;
            let setup = Setup::from_config(&cfg)?;
            let steps = log_grid(lo, hi, points);
            let tuning = driver::tune(&setup, &cfg, &steps, budget.unwrap_or(cfg.algorithm.max_iters), starts)?;
            let mut text = String::from("step,score\n");
            for (step, score) in &tuning.scores {
                text.push_str(&format!("{step:?},{score:?}\n"));
            }
            write(&path.unwrap_or_else(|| cfg.output.dir.join("tune_gd.csv")), &text)?;
            writeln!(out, "best_step={:?}", tuning.best_step).map_err(io_err)?;
            Ok(())
        }
    }
}
