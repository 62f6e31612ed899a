use std::fs;
use std::path::{Path, PathBuf};

use log::{info, warn};
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::config::{ExperimentConfig, Mode, PlantConfig};
use super::report::{step_statistics, write_aggregate, RunManifest};
use crate::controller::{
    closed_loop, lifted_blocks, ConstantPolicy, EconDeepc, OrderMode, Policy, SimResult, TrackingDeepc, TrackingSpec,
};
use crate::datagen::{self, Dataset, GenerateSpec};
use crate::error::{Error, Result};
use crate::learn::{self, LiftingModel, TrainOutcome};
use crate::plant::{CstrPlant, CstrProcess, CstrState, DisturbanceSource, LtiPlant, LtiSystem, Plant};
use crate::trajkit::{build_hankel, is_persistently_exciting, partition_hankel, ExcitationReport, HankelBlocks, Retention, Trajectory};

/// Builds the configured plant at its initial state. Disturbances are drawn
/// only when the plant has a noise model and `noise_seed` is given.
pub fn make_plant(cfg: &PlantConfig, noise_seed: Option<u64>) -> Result<Box<dyn Plant>> {
    match cfg {
        PlantConfig::Cstr(c) => {
            let process = CstrProcess::new(c.params.clone(), c.input_bounds.clone(), c.dt, c.substeps)?;
            let dist = match (&c.noise, noise_seed) {
                (Some(n), Some(seed)) => Some(DisturbanceSource::new(n, seed)?),
                _ => None,
            };
            Ok(Box::new(CstrPlant::new(process, CstrState::from_array(c.initial_state), dist)))
        }
        PlantConfig::Lti(l) => {
            let system = match l.system.explicit_matrices()? {
                Some((a, b, c)) => {
                    let d = DMatrix::zeros(c.nrows(), b.ncols());
                    LtiSystem::new(a, b, c, d)?
                }
                None => {
                    let (n_x, n_u, n_y) = l.system.dims()?;
                    let seed = match l.system {
                        super::config::LtiSystemSpec::Random { seed, .. } => seed,
                        _ => unreachable!("explicit systems handled above"),
                    };
                    LtiSystem::random_controllable(n_x, n_u, n_y, &mut ChaCha8Rng::seed_from_u64(seed))
                }
            };
            let x0 = DVector::from_column_slice(&l.x0);
            Ok(Box::new(LtiPlant::new(
                system,
                x0,
                l.input_bounds.clone(),
                l.cost_weights.clone(),
                l.cost_target.clone(),
                l.dt,
            )?))
        }
    }
}

/// Open-loop data for the case, already split into train/val/test windows.
pub fn generate_dataset(cfg: &ExperimentConfig) -> Result<Dataset> {
    let d = &cfg.data;
    let noise = match &cfg.plant {
        PlantConfig::Cstr(c) => c.noise.clone(),
        PlantConfig::Lti(_) => None,
    };
    let noise_seed = noise.as_ref().map(|_| d.noise_seed);
    let mut plant = make_plant(&cfg.plant, noise_seed)?;
    let spec = GenerateSpec {
        t_hankel: d.t_hankel,
        n_window_samples: d.n_window_samples,
        window_len: cfg.window_len(),
        excitation_seed: d.excitation_seed,
        plant_label: cfg.plant.label().into(),
        noise,
        noise_seed,
    };
    let ds = datagen::generate(plant.as_mut(), &spec)?;
    datagen::split(ds, cfg.split_ratio()?, d.split_seed)
}

/// Persistent excitation of the Hankel inputs of order `L + n_y`, the order
/// the fundamental lemma asks for when the state is measured.
pub fn excitation_report(cfg: &ExperimentConfig, ds: &Dataset) -> Result<ExcitationReport> {
    is_persistently_exciting(ds.hankel.inputs(), cfg.window_len() + cfg.plant.n_y()?)
}

pub fn train_model(cfg: &ExperimentConfig, ds: &Dataset) -> Result<TrainOutcome> {
    let data = learn::prepare(ds, &cfg.training)?;
    learn::train(&data, &cfg.training)
}

/// Everything a policy needs that is shared between seeds.
pub struct PolicyFactory {
    cfg: ExperimentConfig,
    mode: Mode,
    model: Option<LiftingModel>,
    blocks: Option<HankelBlocks>,
    order: OrderMode,
}

impl PolicyFactory {
    /// `rank` overrides the configured retention of the reduced mode.
    /// `hankel` may be absent only for the constant mode.
    pub fn new(cfg: &ExperimentConfig, mode: Mode, model: Option<&LiftingModel>, hankel: Option<&Trajectory>, rank: Option<Retention>) -> Result<Self> {
        let c = &cfg.controller;
        let need_hankel = || hankel.ok_or_else(|| Error::Config(format!("mode '{}' needs the Hankel data", mode.as_str())));
        let (blocks, order, model) = match mode {
            Mode::Econ | Mode::EconReduced => {
                let model = model.ok_or_else(|| Error::Config(format!("mode '{}' needs a trained model", mode.as_str())))?;
                let hankel = need_hankel()?;
                let blocks = lifted_blocks(model, hankel.inputs(), hankel.outputs(), c.t_ini, c.n_p)?;
                let order = if mode == Mode::Econ {
                    OrderMode::Full
                } else {
                    OrderMode::Reduced(rank.unwrap_or(c.reduced_rank.0))
                };
                (Some(blocks), order, Some(model.clone()))
            }
            Mode::Tracking => {
                let depth = c.t_ini + c.n_p;
                let hankel = need_hankel()?;
                let blocks = partition_hankel(
                    &build_hankel(hankel.inputs(), depth)?,
                    &build_hankel(hankel.outputs(), depth)?,
                    c.t_ini,
                    c.n_p,
                )?;
                (Some(blocks), OrderMode::Full, None)
            }
            Mode::Constant => (None, OrderMode::Full, None),
        };
        let factory = Self {
            cfg: cfg.clone(),
            mode,
            model,
            blocks,
            order,
        };
        // Surfaces configuration errors (such as an unattainable rank) once
        // instead of once per seed.
        factory.build()?;
        Ok(factory)
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn build(&self) -> Result<Box<dyn Policy>> {
        let cfg = &self.cfg;
        let c = &cfg.controller;
        match self.mode {
            Mode::Constant => Ok(Box::new(ConstantPolicy::new(cfg.baseline_input(), c.t_ini))),
            Mode::Econ | Mode::EconReduced => {
                let model = self.model.clone().expect("econ factory holds a model");
                let blocks = self.blocks.as_ref().expect("econ factory holds blocks");
                Ok(Box::new(EconDeepc::from_blocks(model, blocks, cfg.controller_config(self.order)?)?))
            }
            Mode::Tracking => {
                let t = c.tracking.as_ref().ok_or_else(|| Error::Config("tracking mode needs a tracking section".into()))?;
                let bounds = cfg.plant.input_bounds().clone();
                let diag = |v: &[f64]| DMatrix::from_diagonal(&DVector::from_column_slice(v));
                let u_ref = t.u_ref.as_ref().map_or_else(|| bounds.midpoint(), |u| DVector::from_column_slice(u));
                let mut spec = TrackingSpec::constant(&diag(&t.q_diag), &diag(&t.r_diag), &DVector::from_column_slice(&t.y_ref), &u_ref, c.n_p);
                spec.lambda_g = t.lambda_g;
                spec.input_bounds = Some(bounds.clone());
                let blocks = self.blocks.clone().expect("tracking factory holds blocks");
                Ok(Box::new(TrackingDeepc::new(blocks, spec, bounds, c.qp.clone())?))
            }
        }
    }
}

/// One closed-loop run: disturbances seeded by `seed`, warmup at the
/// baseline input.
pub fn run_seed(cfg: &ExperimentConfig, factory: &PolicyFactory, seed: u64) -> Result<SimResult> {
    let mut plant = make_plant(&cfg.plant, Some(seed))?;
    let mut policy = factory.build()?;
    closed_loop(plant.as_mut(), policy.as_mut(), cfg.evaluation.steps, &cfg.baseline_input(), seed)
}

/// Runs `seeds` in parallel; results come back in seed order.
pub fn run_seeds(cfg: &ExperimentConfig, factory: &PolicyFactory, seeds: &[u64]) -> Vec<(u64, Result<SimResult>)> {
    seeds.par_iter().map(|&s| (s, run_seed(cfg, factory, s))).collect()
}

/// The configured disturbance seeds `seed_base .. seed_base + seeds`.
pub fn evaluation_seeds(cfg: &ExperimentConfig) -> Vec<u64> {
    let e = &cfg.evaluation;
    (0..e.seeds as u64).map(|i| e.seed_base + i).collect()
}

/// Per-seed result files `seed_<k>.csv`, the per-step aggregate
/// `aggregate.csv`, and the manifest `run.json`. Failed seeds are logged and
/// listed as missing.
pub fn write_mode_results(
    dir: &Path,
    cfg: &ExperimentConfig,
    mode: Mode,
    runs: Vec<(u64, Result<SimResult>)>,
) -> Result<RunManifest> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut ok = Vec::new();
    let mut missing = Vec::new();
    for (seed, r) in runs {
        match r {
            Ok(sim) => ok.push(sim),
            Err(e) => {
                warn!("{} / {} seed {seed} failed: {e}", cfg.name, mode.as_str());
                missing.push(seed);
            }
        }
    }
    for sim in &ok {
        sim.write_csv(&dir.join(seed_file(sim.seed)))?;
    }
    let profits: Vec<Vec<f64>> = ok.iter().map(SimResult::profits).collect();
    if !profits.is_empty() {
        write_aggregate(&dir.join("aggregate.csv"), &step_statistics(&profits)?, cfg.plant_dt())?;
    }
    let manifest = RunManifest {
        case: cfg.name.clone(),
        n_samples: cfg.n_samples(),
        mode,
        steps: cfg.evaluation.steps,
        dt: cfg.plant_dt(),
        seeds: ok.iter().map(|s| s.seed).collect(),
        missing_seeds: missing,
    };
    manifest.save(&dir.join("run.json"))?;
    if ok.is_empty() {
        return Err(Error::Solver(format!("every seed of {} / {} failed", cfg.name, mode.as_str())));
    }
    Ok(manifest)
}

pub fn seed_file(seed: u64) -> String {
    format!("seed_{seed}.csv")
}

impl ExperimentConfig {
    pub fn plant_dt(&self) -> f64 {
        match &self.plant {
            PlantConfig::Cstr(c) => c.dt,
            PlantConfig::Lti(l) => l.dt,
        }
    }
}

/// Files written by [`run_case`].
#[derive(Debug, Clone)]
pub struct CaseArtifacts {
    pub dataset: PathBuf,
    pub model: Option<PathBuf>,
    pub history: Option<PathBuf>,
    /// One result directory per evaluated mode.
    pub results: Vec<PathBuf>,
    pub train: Option<TrainOutcome>,
}

/// Full pipeline for one case under `out/<name>/`: data, training (when a
/// mode needs it), and every configured mode over every seed.
pub fn run_case(cfg: &ExperimentConfig, out: &Path) -> Result<CaseArtifacts> {
    cfg.validate()?;
    let root = out.join(&cfg.name);
    fs::create_dir_all(&root).map_err(|e| Error::io(&root, e))?;
    fs::write(root.join("config.toml"), cfg.to_toml_string()?).map_err(|e| Error::io(root.join("config.toml"), e))?;

    let ds = generate_dataset(cfg)?;
    let dataset = root.join("dataset.csv");
    datagen::save(&ds, &dataset)?;
    info!("{}: {} Hankel samples, {:?} windows (train/val/test)", cfg.name, ds.hankel.len(), ds.split_counts());

    let (model, history, train) = if cfg.evaluation.modes.iter().any(|m| m.needs_model()) {
        let outcome = train_model(cfg, &ds)?;
        let mp = root.join("model.json");
        let hp = root.join("history.csv");
        learn::save_model(&outcome.model, &mp)?;
        learn::write_history(&hp, &outcome.history)?;
        info!("{}: trained {} epochs, best epoch {}", cfg.name, outcome.history.len(), outcome.best_epoch);
        (Some(mp), Some(hp), Some(outcome))
    } else {
        (None, None, None)
    };

    let seeds = evaluation_seeds(cfg);
    let mut results = Vec::new();
    for &mode in &cfg.evaluation.modes {
        let factory = PolicyFactory::new(cfg, mode, train.as_ref().map(|t| &t.model), Some(&ds.hankel), None)?;
        let runs = run_seeds(cfg, &factory, &seeds);
        let dir = root.join("results").join(mode.as_str());
        write_mode_results(&dir, cfg, mode, runs)?;
        info!("{}: {} done", cfg.name, mode.as_str());
        results.push(dir);
    }
    Ok(CaseArtifacts {
        dataset,
        model,
        history,
        results,
        train,
    })
}
