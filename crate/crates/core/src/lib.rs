//! Bayesian evaluation of study-level surrogate endpoints.
//!
//! The crate fits three models to pairs of treatment effects (surrogate and
//! final outcome) collected from randomized trials grouped into treatment
//! classes:
//!
//! * the standard bivariate model, fitted separately per class;
//! * a hierarchical model with fully exchangeable intercepts and slopes;
//! * a hierarchical model whose slopes are only partially exchangeable,
//!   through a two-component mixture prior.
//!
//! On top of the samplers sit the surrogacy criteria ([`surrogacy`]),
//! leave-one-study-out prediction ([`crossval`]), chain diagnostics
//! ([`diagnostics`]) and a simulation harness ([`simulation`]) that
//! regenerates datasets from known truths and scores the models.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod crossval;
pub mod data;
pub mod diagnostics;
pub mod draws;
pub mod error;
pub mod par;
pub mod randkit;
pub mod samplers;
pub mod simulation;
pub mod stats;
pub mod surrogacy;
pub mod validation;

pub use crossval::{loo_predict, loo_sweep, LooOptions, PredictionResult, SweepTarget, Target};
pub use data::{load_dataset, validate, write_dataset, Dataset, McmcConfig, PriorSpec, StudyRecord};
pub use diagnostics::{diagnostics_report, mcmc_error, ChainDiagnostics};
pub use draws::PosteriorDraws;
pub use error::{Error, Result};
pub use randkit::RngStream;
pub use samplers::{
    fit_fex, fit_model, fit_pex, fit_standard, fit_subgroup, mixture_weight_conditional, FitOptions, FitResult,
    ModelKind,
};
pub use simulation::{build_scenario, generate_replication, run_study, PerformanceReport, ScenarioSpec};
pub use surrogacy::{credible_interval, evaluate_surrogacy, savage_dickey_bf, SurrogacyVerdict};
