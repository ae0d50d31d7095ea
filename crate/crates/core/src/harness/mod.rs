//! Experiment drivers: synthetic cases, metrics, bootstrap validation,
//! hyperparameter tuning and repeated k-fold evaluation.

pub mod bootstrap;
pub mod kfold;
pub mod metrics;
pub mod synth;
pub mod tune;

pub use bootstrap::{bootstrap_validate, fit_recipe, BootstrapEstimate, FittedModel, ModelRecipe};
pub use kfold::{
    fold_indices, kfold_run, train_fold, EngineSummary, Experiment, ExperimentReport, FoldResult, FoldStore,
    KfoldOutcome, Pipeline,
};
pub use metrics::{change_rmse, improv_advin, rmse};
pub use synth::{case_definition, generate_synthetic_case, CaseName, Oracle, SyntheticCase};
pub use tune::{ga_grid, grid_search, linspace_step, logspace, pso_grid, random_search, FnnSpace, Trial, TuneOutcome};
