//! Experiment orchestration: one TOML file per case drives data generation,
//! training, repeated closed-loop runs and the cross-case summary.
//!
//! Result directories hold `seed_<k>.csv` per run, `aggregate.csv` with the
//! per-step mean and standard deviation, and `run.json` naming the case and
//! method. [`evaluate`] reads any set of them back into the method ×
//! data-size grid.

mod config;
mod pipeline;
mod report;

pub use config::{
    parse_retention, parse_split_ratio, ControllerSection, CstrPlantConfig, DataConfig, EvaluationConfig, ExperimentConfig,
    LtiPlantConfig, LtiSystemSpec, Mode, PlantConfig, RankSpec, TrackingSection,
};
pub use pipeline::{
    evaluation_seeds, excitation_report, generate_dataset, make_plant, run_case, run_seed, run_seeds, seed_file, train_model,
    write_mode_results, CaseArtifacts, PolicyFactory,
};
pub use report::{
    evaluate, mean_std, read_aggregate, step_statistics, summarize_dir, write_aggregate, EvaluationSummary, ModeSummary,
    RunManifest, SeedProfit, StepStats,
};
