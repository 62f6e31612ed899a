use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use edeepc::datagen;
use edeepc::error::Error;
use edeepc::experiment::{
    evaluate, evaluation_seeds, excitation_report, generate_dataset, parse_retention, run_seeds, write_mode_results,
    ExperimentConfig, Mode, PolicyFactory,
};
use edeepc::learn::{self, TrainStatus};
use log::info;

/// Economic DeePC with a learned output lifting.
#[derive(Debug, Parser)]
#[command(name = "edeepc", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate the plant open loop and write a split dataset.
    GenerateData {
        #[arg(long)]
        config: PathBuf,
        /// Dataset CSV; metadata goes next to it. Default `out/<case>/dataset.csv`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides the excitation seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Train the lifting network, cost head and reconstruction matrix.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Model checkpoint; the loss history goes next to it. Default `out/<case>/model.json`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides the training seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Compare 100 analytic gradient coordinates against finite differences.
        #[arg(long)]
        grad_check: bool,
    },
    /// Run repeated closed loops of one method.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_parser = parse_mode)]
        mode: Mode,
        /// Dataset whose Hankel trajectory the controller uses.
        #[arg(long)]
        data: Option<PathBuf>,
        /// Trained model, needed by the economic modes.
        #[arg(long)]
        model: Option<PathBuf>,
        /// Number of runs.
        #[arg(long)]
        seeds: Option<usize>,
        /// First disturbance seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Retention of the reduced mode: `auto`, a rank, or `tol:<x>`.
        #[arg(long)]
        reduced_rank: Option<String>,
        /// Result directory. Default `out/<case>/results/<mode>`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Summarize result directories into the method × data-size table.
    Evaluate {
        /// Directories written by `simulate`.
        #[arg(required = true)]
        results: Vec<PathBuf>,
        #[arg(long, default_value = "out/summary")]
        out: PathBuf,
    },
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    Mode::parse(s).ok_or_else(|| format!("unknown mode '{s}' (expected econ, econ-reduced, constant or tracking)"))
}

/// Exit 1 for bad input (config, files, dimensions), 2 for failures while
/// running (solver, divergence, I/O).
fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(
            Error::Config(_)
            | Error::Parse { .. }
            | Error::Schema(_)
            | Error::Dimension(_)
            | Error::Shape(_)
            | Error::Domain(_)
            | Error::Rank { .. },
        ) => 1,
        _ => 2,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn load_config(path: &Path) -> anyhow::Result<ExperimentConfig> {
    Ok(ExperimentConfig::load(path)?)
}

fn case_dir(cfg: &ExperimentConfig) -> PathBuf {
    Path::new("out").join(&cfg.name)
}

fn ensure_parent(path: &Path) -> anyhow::Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::Io {
            path: parent.to_path_buf(),
            source: e,
        })?;
    }
    Ok(())
}

fn run(cmd: Command) -> anyhow::Result<()> {
    match cmd {
        Command::GenerateData { config, out, seed } => {
            let mut cfg = load_config(&config)?;
            if let Some(s) = seed {
                cfg.data.excitation_seed = s;
            }
            let out = out.unwrap_or_else(|| case_dir(&cfg).join("dataset.csv"));
            let ds = generate_dataset(&cfg).with_context(|| format!("generating data for {}", config.display()))?;
            ensure_parent(&out)?;
            datagen::save(&ds, &out)?;
            let pe = excitation_report(&cfg, &ds)?;
            let [tr, va, te] = ds.split_counts();
            println!("wrote {} ({} Hankel samples, {tr}/{va}/{te} train/val/test windows)", out.display(), ds.hankel.len());
            println!(
                "persistent excitation of order {}: {} (rank {} of {})",
                cfg.window_len() + cfg.plant.n_y()?,
                if pe.exciting { "yes" } else { "no" },
                pe.rank,
                pe.required
            );
            Ok(())
        }
        Command::Train {
            config,
            data,
            out,
            seed,
            grad_check,
        } => {
            let mut cfg = load_config(&config)?;
            if let Some(s) = seed {
                cfg.training.seed = s;
            }
            let out = out.unwrap_or_else(|| case_dir(&cfg).join("model.json"));
            let ds = datagen::load(&data)?;
            let prepared = learn::prepare(&ds, &cfg.training)?;
            let outcome = learn::train(&prepared, &cfg.training)?;
            ensure_parent(&out)?;
            learn::save_model(&outcome.model, &out)?;
            let history = out.with_extension("history.csv");
            learn::write_history(&history, &outcome.history)?;
            if let TrainStatus::Diverged { epoch, detail } = &outcome.status {
                return Err(Error::TrainingDiverged {
                    epoch: *epoch,
                    detail: format!("{detail}; last good checkpoint saved to {}", out.display()),
                }
                .into());
            }
            if let Some(last) = outcome.history.last() {
                println!(
                    "epoch {}: train {:.6e}, val {:.6e} (econ {:.3e}, recon {:.3e}, linear {:.3e}); best epoch {}",
                    last.epoch, last.train, last.val, last.val_e, last.val_re, last.val_linear, outcome.best_epoch
                );
            }
            println!("wrote {} and {}", out.display(), history.display());
            if grad_check {
                let report = learn::gradient_check(&outcome.model, &prepared.hankel, &prepared.train, cfg.training.alpha, 100, cfg.training.seed)?;
                let worst = report.max_rel_err();
                println!("gradient check: {} coordinates, max relative error {worst:.3e}", report.probes.len());
                if worst > 1e-3 {
                    anyhow::bail!(Error::Solver(format!("gradient check failed: max relative error {worst:.3e} > 1e-3")));
                }
            }
            Ok(())
        }
        Command::Simulate {
            config,
            mode,
            data,
            model,
            seeds,
            seed,
            reduced_rank,
            out,
        } => {
            let mut cfg = load_config(&config)?;
            if let Some(n) = seeds {
                if n == 0 {
                    return Err(Error::Config("--seeds must be positive".into()).into());
                }
                cfg.evaluation.seeds = n;
            }
            if let Some(s) = seed {
                cfg.evaluation.seed_base = s;
            }
            let rank = reduced_rank.as_deref().map(parse_retention).transpose()?;
            let model = match (mode.needs_model(), model) {
                (true, Some(p)) => Some(learn::load_model(&p, Some(cfg.training.n_z))?),
                (true, None) => return Err(Error::Config(format!("mode '{}' needs --model", mode.as_str())).into()),
                (false, _) => None,
            };
            let ds = match data {
                Some(p) => Some(datagen::load(&p)?),
                None if mode == Mode::Constant => None,
                None => return Err(Error::Config(format!("mode '{}' needs --data", mode.as_str())).into()),
            };
            let factory = PolicyFactory::new(&cfg, mode, model.as_ref(), ds.as_ref().map(|d| &d.hankel), rank)?;
            let out = out.unwrap_or_else(|| case_dir(&cfg).join("results").join(mode.as_str()));
            let seeds = evaluation_seeds(&cfg);
            info!("{} / {}: {} runs of {} steps", cfg.name, mode.as_str(), seeds.len(), cfg.evaluation.steps);
            let manifest = write_mode_results(&out, &cfg, mode, run_seeds(&cfg, &factory, &seeds))?;
            println!(
                "wrote {} result files and aggregate.csv to {}{}",
                manifest.seeds.len(),
                out.display(),
                if manifest.missing_seeds.is_empty() {
                    String::new()
                } else {
                    format!(" (failed seeds: {:?})", manifest.missing_seeds)
                }
            );
            Ok(())
        }
        Command::Evaluate { results, out } => {
            let summary = evaluate(&results, &out)?;
            print!("{}", summary.table_markdown());
            println!("wrote summary.json, table.csv and table.md to {}", out.display());
            Ok(())
        }
    }
}
