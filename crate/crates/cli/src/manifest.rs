use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use surrex::crossval::IntervalMethod;
use surrex::samplers::PsiPrior;
use surrex::simulation::{ScenarioSpec, MAX_FAILURE_FRACTION, STATIONARITY_Z};
use surrex::{diagnostics, surrogacy, McmcConfig, ModelKind, PriorSpec, Target};

use crate::CliError;

/// Everything that determines a command's outputs, apart from the priors
/// and chain settings recorded next to it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "lowercase")]
pub enum Invocation {
    Fit {
        data: String,
        model: ModelKind,
        level: f64,
        psi_prior: PsiPrior,
    },
    Crossval {
        data: String,
        model: ModelKind,
        target: Target,
        truth: Option<String>,
        baseline: Option<String>,
        level: f64,
        interval: IntervalMethod,
        psi_prior: PsiPrior,
    },
    Simulate {
        scenarios: Vec<ScenarioSpec>,
        reps: usize,
        models: Vec<String>,
        pi: Vec<f64>,
        crossval: bool,
        level: f64,
    },
    Generate {
        scenario: ScenarioSpec,
        rep: usize,
    },
}

impl Invocation {
    pub fn name(&self) -> &'static str {
        match self {
            Invocation::Fit { .. } => "fit",
            Invocation::Crossval { .. } => "crossval",
            Invocation::Simulate { .. } => "simulate",
            Invocation::Generate { .. } => "generate",
        }
    }
}

/// Digest of an input file; datasets use their canonical fingerprint.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputDigest {
    pub role: String,
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constants {
    pub bf_threshold: f64,
    pub min_ci_draws: usize,
    pub min_verdict_draws: usize,
    pub rhat_flag: f64,
    pub ess_flag: f64,
    pub min_chain: usize,
    pub mce_estimator: String,
    pub ess_estimator: String,
    pub bf_density_estimator: String,
    pub quantile_rule: String,
    pub stationarity_z: f64,
    pub max_failure_fraction: f64,
    pub psi_sampler: String,
    pub rng: String,
}

impl Default for Constants {
    fn default() -> Self {
        Self {
            bf_threshold: surrogacy::BF_THRESHOLD,
            min_ci_draws: surrogacy::MIN_CI_DRAWS,
            min_verdict_draws: surrogacy::MIN_VERDICT_DRAWS,
            rhat_flag: diagnostics::RHAT_FLAG,
            ess_flag: diagnostics::ESS_FLAG,
            min_chain: diagnostics::MIN_CHAIN,
            mce_estimator: "batch means, floor(sqrt(n)) batches".into(),
            ess_estimator: "initial positive sequence, capped at 1.05 n".into(),
            bf_density_estimator: "reflected gaussian kde at 0, silverman bandwidth".into(),
            quantile_rule: "type 7".into(),
            stationarity_z: STATIONARITY_Z,
            max_failure_fraction: MAX_FAILURE_FRACTION,
            psi_sampler: "stepping-out slice, width 1".into(),
            rng: "chacha8, splitmix64 stream derivation".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub software_version: String,
    pub invocation: Invocation,
    pub priors: PriorSpec,
    pub config: McmcConfig,
    pub inputs: Vec<InputDigest>,
    pub constants: Constants,
    pub manifest_hash: String,
    /// Not part of the hash.
    pub wall_clock_seconds: f64,
}

#[derive(Serialize)]
struct Hashed<'a> {
    software_version: &'a str,
    invocation: &'a Invocation,
    priors: &'a PriorSpec,
    config: &'a McmcConfig,
    inputs: &'a [InputDigest],
    constants: &'a Constants,
}

impl RunManifest {
    pub fn new(invocation: Invocation, priors: PriorSpec, config: McmcConfig, inputs: Vec<InputDigest>) -> Self {
        let mut m = Self {
            software_version: env!("CARGO_PKG_VERSION").to_string(),
            invocation,
            priors,
            config,
            inputs,
            constants: Constants::default(),
            manifest_hash: String::new(),
            wall_clock_seconds: 0.0,
        };
        m.manifest_hash = m.compute_hash();
        m
    }

    pub fn compute_hash(&self) -> String {
        let body = serde_json::to_vec(&Hashed {
            software_version: &self.software_version,
            invocation: &self.invocation,
            priors: &self.priors,
            config: &self.config,
            inputs: &self.inputs,
            constants: &self.constants,
        })
        .expect("manifest serializes");
        hex::encode(Sha256::digest(body))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        let m: RunManifest =
            serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        if m.compute_hash() != m.manifest_hash {
            return Err(CliError::Input(format!(
                "{}: manifest_hash does not match its contents",
                path.display()
            )));
        }
        Ok(m)
    }
}

pub fn file_digest(role: &str, path: &str) -> Result<InputDigest, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::Input(format!("{path}: {e}")))?;
    Ok(InputDigest {
        role: role.into(),
        path: path.into(),
        sha256: hex::encode(Sha256::digest(bytes)),
    })
}
