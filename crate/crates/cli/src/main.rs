//! `surrex`: fit surrogate-endpoint models, cross-validate predictions and
//! run simulation studies from the command line.
//!
//! Exit codes: 0 success, 2 invalid input, 3 sampler failure.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use surrex::crossval::IntervalMethod;
use surrex::samplers::PsiPrior;
use surrex::simulation::build_scenario;
use surrex::{McmcConfig, PriorSpec, Target};

use crate::commands::{execute, load_spec, parse_model};
use crate::manifest::{Invocation, RunManifest};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] surrex::Error),
    #[error("{0}")]
    Input(String),
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Core(e.into())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(e.into())
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) if !e.is_input_error() => 3,
            _ => 2,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "surrex", version, about = "Bayesian evaluation of surrogate endpoints across treatment classes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit a model and evaluate the surrogacy criteria per class.
    Fit(FitArgs),
    /// Leave-one-study-out prediction of the final-outcome effect.
    Crossval(CrossvalArgs),
    /// Run the simulation study for one or more scenarios.
    Simulate(SimulateArgs),
    /// Write one replicate dataset and its true effects.
    Generate(GenerateArgs),
    /// Re-run a command from its manifest.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModelArg {
    Standard,
    Fex,
    Pex,
}

impl ModelArg {
    fn label(self) -> &'static str {
        match self {
            ModelArg::Standard => "standard",
            ModelArg::Fex => "fex",
            ModelArg::Pex => "pex",
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum PsiPriorArg {
    /// Half-normal with scale --psi-bf-scale (needed for Bayes factors).
    Bf,
    /// Half-normal with scale --b.
    Vague,
}

#[derive(Debug, Args)]
struct Mcmc {
    /// Retained iterations after burn-in.
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    burnin: Option<usize>,
    #[arg(long, default_value_t = 1)]
    thin: usize,
    /// Overridden by the SURREX_SEED environment variable.
    #[arg(long, default_value_t = McmcConfig::default().seed)]
    seed: u64,
    /// 50,000 iterations after 20,000 burn-in (and 1,000 replications for simulate).
    #[arg(long)]
    full_scale: bool,
}

impl Mcmc {
    fn config(&self) -> Result<McmcConfig, CliError> {
        let seed = match std::env::var("SURREX_SEED") {
            Ok(s) => s
                .trim()
                .parse()
                .map_err(|_| CliError::Input(format!("SURREX_SEED={s:?} is not an unsigned integer")))?,
            Err(_) => self.seed,
        };
        let base = if self.full_scale {
            McmcConfig::full_scale(seed)
        } else {
            McmcConfig::desk(seed)
        };
        let cfg = McmcConfig {
            n_iter: self.iters.unwrap_or(base.n_iter),
            n_burnin: self.burnin.unwrap_or(base.n_burnin),
            thin: self.thin,
            seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
struct Priors {
    /// SD of the vague normal priors.
    #[arg(long, default_value_t = PriorSpec::default().a)]
    a: f64,
    /// Scale of the half-normal priors on psi and xi, and SD of the
    /// non-exchangeable slope component.
    #[arg(long, default_value_t = PriorSpec::default().b)]
    b: f64,
    /// Half-normal scale of psi used with Bayes factors.
    #[arg(long, default_value_t = PriorSpec::default().psi_bf_scale)]
    psi_bf_scale: f64,
}

impl Priors {
    fn spec(&self) -> Result<PriorSpec, CliError> {
        let p = PriorSpec {
            a: self.a,
            b: self.b,
            psi_bf_scale: self.psi_bf_scale,
        };
        p.validate()?;
        Ok(p)
    }
}

#[derive(Debug, Args)]
struct ModelChoice {
    #[arg(long, value_enum)]
    model: ModelArg,
    /// Prior exchangeability probabilities for P-EX: one value for every
    /// class or one per class.
    #[arg(long, value_delimiter = ',', default_value = "0.5")]
    pi: Vec<f64>,
    #[arg(long, value_enum, default_value = "bf")]
    psi_prior: PsiPriorArg,
}

impl ModelChoice {
    fn psi_prior(&self) -> PsiPrior {
        match self.psi_prior {
            PsiPriorArg::Bf => PsiPrior::BayesFactor,
            PsiPriorArg::Vague => PsiPrior::Vague,
        }
    }
}

#[derive(Debug, Args)]
struct FitArgs {
    #[arg(long)]
    data: PathBuf,
    #[command(flatten)]
    model: ModelChoice,
    #[arg(long, default_value_t = 0.95)]
    level: f64,
    #[command(flatten)]
    mcmc: Mcmc,
    #[command(flatten)]
    priors: Priors,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum TargetArg {
    Observed,
    True,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum IntervalArg {
    Normal,
    Empirical,
}

#[derive(Debug, Args)]
struct CrossvalArgs {
    #[arg(long)]
    data: PathBuf,
    #[command(flatten)]
    model: ModelChoice,
    #[arg(long, value_enum, default_value = "observed")]
    target: TargetArg,
    /// CSV with study_id and mu2 columns (as written by `generate`).
    #[arg(long)]
    truth: Option<PathBuf>,
    /// predictions.csv of an earlier sweep; adds per-fold width ratios.
    #[arg(long)]
    baseline: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "normal")]
    interval: IntervalArg,
    #[arg(long, default_value_t = 0.95)]
    level: f64,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    #[command(flatten)]
    mcmc: Mcmc,
    #[command(flatten)]
    priors: Priors,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ScenarioChoice {
    /// Built-in scenario(s): 1..9, comma separated, or `all`.
    #[arg(long, conflicts_with = "spec")]
    scenario: Option<String>,
    /// JSON scenario description.
    #[arg(long)]
    spec: Option<PathBuf>,
}

impl ScenarioChoice {
    fn specs(&self) -> Result<Vec<surrex::ScenarioSpec>, CliError> {
        match (&self.scenario, &self.spec) {
            (_, Some(path)) => Ok(vec![load_spec(&path_string(path))?]),
            (Some(s), None) if s == "all" => (1..=9).map(|i| Ok(build_scenario(i)?)).collect(),
            (Some(s), None) => s
                .split(',')
                .map(|t| {
                    let i: u8 = t
                        .trim()
                        .parse()
                        .map_err(|_| CliError::Input(format!("bad scenario {t:?}")))?;
                    Ok(build_scenario(i)?)
                })
                .collect(),
            (None, None) => Err(CliError::Input("one of --scenario or --spec is required".into())),
        }
    }
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[command(flatten)]
    scenario: ScenarioChoice,
    /// Replications per scenario [default: 200, or 1000 with --full-scale].
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long, value_delimiter = ',', default_value = "standard,fex,pex")]
    models: Vec<String>,
    /// Prior exchangeability probability(ies) for P-EX.
    #[arg(long, value_delimiter = ',', default_value = "0.5")]
    pi: Vec<f64>,
    /// Skip the leave-one-out prediction part of the study.
    #[arg(long)]
    no_crossval: bool,
    #[arg(long, default_value_t = 0.95)]
    level: f64,
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    #[command(flatten)]
    mcmc: Mcmc,
    #[command(flatten)]
    priors: Priors,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct GenerateArgs {
    #[command(flatten)]
    scenario: ScenarioChoice,
    /// Replication index; matches replication `rep` of `simulate` with the same seed.
    #[arg(long, default_value_t = 0)]
    rep: usize,
    #[arg(long, default_value_t = McmcConfig::default().seed)]
    seed: u64,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ReplayArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    jobs: usize,
}

fn path_string(p: &std::path::Path) -> String {
    std::fs::canonicalize(p)
        .unwrap_or_else(|_| p.to_path_buf())
        .to_string_lossy()
        .into_owned()
}

fn check_level(level: f64) -> Result<f64, CliError> {
    if level > 0.0 && level < 1.0 {
        Ok(level)
    } else {
        Err(CliError::Input(format!("--level must lie in (0, 1), got {level}")))
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Fit(a) => {
            let model = parse_model(a.model.model.label(), &a.model.pi)?;
            let inv = Invocation::Fit {
                data: path_string(&a.data),
                model,
                level: check_level(a.level)?,
                psi_prior: a.model.psi_prior(),
            };
            execute(inv, a.priors.spec()?, a.mcmc.config()?, 1, &a.out, None)?;
        }
        Command::Crossval(a) => {
            let target = match a.target {
                TargetArg::Observed => Target::Observed,
                TargetArg::True => Target::True,
            };
            if matches!(target, Target::True) && a.truth.is_none() {
                return Err(CliError::Input("--target true requires --truth".into()));
            }
            let inv = Invocation::Crossval {
                data: path_string(&a.data),
                model: parse_model(a.model.model.label(), &a.model.pi)?,
                target,
                truth: a.truth.as_deref().map(path_string),
                baseline: a.baseline.as_deref().map(path_string),
                level: check_level(a.level)?,
                interval: match a.interval {
                    IntervalArg::Normal => IntervalMethod::Normal,
                    IntervalArg::Empirical => IntervalMethod::Empirical,
                },
                psi_prior: a.model.psi_prior(),
            };
            execute(inv, a.priors.spec()?, a.mcmc.config()?, a.jobs, &a.out, None)?;
        }
        Command::Simulate(a) => {
            for m in &a.models {
                parse_model(m, &a.pi)?;
            }
            let reps = a.reps.unwrap_or(if a.mcmc.full_scale { 1000 } else { 200 });
            let inv = Invocation::Simulate {
                scenarios: a.scenario.specs()?,
                reps,
                models: a.models.clone(),
                pi: a.pi.clone(),
                crossval: !a.no_crossval,
                level: check_level(a.level)?,
            };
            execute(inv, a.priors.spec()?, a.mcmc.config()?, a.jobs, &a.out, None)?;
        }
        Command::Generate(a) => {
            let mut specs = a.scenario.specs()?;
            if specs.len() != 1 {
                return Err(CliError::Input("generate takes exactly one scenario".into()));
            }
            let seed = match std::env::var("SURREX_SEED") {
                Ok(s) => s
                    .trim()
                    .parse()
                    .map_err(|_| CliError::Input(format!("SURREX_SEED={s:?} is not an unsigned integer")))?,
                Err(_) => a.seed,
            };
            let inv = Invocation::Generate {
                scenario: specs.remove(0),
                rep: a.rep,
            };
            execute(inv, PriorSpec::default(), McmcConfig::desk(seed), 1, &a.out, None)?;
        }
        Command::Replay(a) => {
            let m = RunManifest::load(&a.manifest)?;
            eprintln!("replaying {} ({})", m.invocation.name(), m.manifest_hash);
            let again = execute(m.invocation, m.priors, m.config, a.jobs, &a.out, Some(&m.inputs))?;
            debug_assert_eq!(again.manifest_hash, m.manifest_hash);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_separate_input_from_sampler_failures() {
        assert_eq!(CliError::Core(surrex::Error::Sampler("x".into())).exit_code(), 3);
        assert_eq!(CliError::Core(surrex::Error::Config("x".into())).exit_code(), 2);
        assert_eq!(CliError::Input("x".into()).exit_code(), 2);
    }

    #[test]
    fn arguments_parse() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
