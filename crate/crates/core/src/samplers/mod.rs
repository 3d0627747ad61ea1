//! Gibbs samplers for the standard surrogate model (fitted per class) and
//! its fully and partially exchangeable hierarchical extensions.
//!
//! All three share the within-study bivariate normal likelihood and the
//! linear between-study relationship `mu2 | mu1 ~ N(lambda0 + lambda1 mu1, psi^2)`.
//! They differ only in the priors on the per-class `(lambda0, lambda1)`:
//!
//! * standard: independent `N(0, a^2)` priors per class;
//! * F-EX: `lambda0_j ~ N(beta0, xi0^2)`, `lambda1_j ~ N(beta1, xi1^2)`;
//! * P-EX: as F-EX for intercepts, while each slope is exchangeable
//!   (`p_j = 1`) or follows `N(0, b^2)` (`p_j = 0`), `p_j ~ Bernoulli(pi_j)`.
//!
//! With every `p_j = 0` the P-EX slopes use only the vague component, but
//! the intercepts stay exchangeable, so the model is not literally the
//! per-class standard fit.

mod engine;

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, McmcConfig, PriorSpec};
use crate::draws::PosteriorDraws;
use crate::error::{Error, Result};
use crate::randkit::RngStream;

pub use engine::mixture_weight_unchecked;

/// Which surrogate model to fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ModelKind {
    /// Daniels-Hughes model, fitted separately per class (subgroup analysis).
    Standard,
    /// Fully exchangeable intercepts and slopes.
    #[serde(rename = "fex")]
    FEx,
    /// Partially exchangeable slopes with fixed prior mixture probabilities.
    #[serde(rename = "pex")]
    PEx { pi: Vec<f64> },
}

impl ModelKind {
    /// P-EX with the same prior weight for every class.
    pub fn pex_uniform(n_classes: usize, pi: f64) -> Self {
        ModelKind::PEx {
            pi: vec![pi; n_classes],
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            ModelKind::Standard => "standard",
            ModelKind::FEx => "fex",
            ModelKind::PEx { .. } => "pex",
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let ModelKind::PEx { pi } = self {
            if let Some(bad) = pi.iter().find(|p| !(0.0..=1.0).contains(*p)) {
                return Err(Error::Config(format!("mixture probability {bad} outside [0, 1]")));
            }
        }
        Ok(())
    }
}

/// Prior used for the per-class conditional SD `psi_j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum PsiPrior {
    /// Half-normal with scale `psi_bf_scale`; required for Bayes factors.
    #[default]
    BayesFactor,
    /// Half-normal with scale `b`.
    Vague,
}

/// Which latent effects to keep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Recording {
    #[default]
    All,
    /// Per-class and hyper-parameters only.
    Parameters,
    /// Parameters plus `mu2` of one study (by dataset index).
    Mu2Of(usize),
}

/// Hyper-parameters of the hierarchical models.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyper {
    pub beta0: f64,
    pub beta1: f64,
    pub xi0: f64,
    pub xi1: f64,
}

/// Conditioning overrides used by validation runs; all off by default.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Overrides {
    /// Drop every likelihood term so the chain samples the prior.
    pub ignore_likelihood: bool,
    /// Hold every `psi_j` at this value (0 allowed).
    pub fixed_psi: Option<f64>,
    /// Hold every class's `(lambda0, lambda1)` at this pair.
    pub fixed_lambda: Option<(f64, f64)>,
    /// Hold `beta0, beta1, xi0, xi1`.
    pub fixed_hyper: Option<Hyper>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    pub psi_prior: PsiPrior,
    /// Study (dataset index) whose final-outcome estimate is withheld.
    pub holdout: Option<usize>,
    pub record: Recording,
    pub slice_width: f64,
    pub overrides: Overrides,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            psi_prior: PsiPrior::BayesFactor,
            holdout: None,
            record: Recording::All,
            slice_width: 1.0,
            overrides: Overrides::default(),
        }
    }
}

/// Output of one sampler run.
#[derive(Debug, Clone)]
pub struct FitResult {
    pub draws: PosteriorDraws,
    pub model: ModelKind,
    pub priors: PriorSpec,
    pub config: McmcConfig,
    pub psi_prior_scale: f64,
    pub fingerprint: String,
    pub classes: Vec<String>,
    pub class_sizes: Vec<usize>,
    pub warnings: Vec<String>,
}

fn check_inputs(data: &Dataset, priors: &PriorSpec, cfg: &McmcConfig) -> Result<()> {
    priors.validate()?;
    cfg.validate()?;
    if let Some(v) = crate::data::validate(data).first() {
        return Err(Error::InvalidData(v.to_string()));
    }
    Ok(())
}

fn run(
    data: &Dataset,
    model: ModelKind,
    priors: PriorSpec,
    cfg: McmcConfig,
    rng: &mut RngStream,
    opts: &FitOptions,
) -> Result<FitResult> {
    model.validate()?;
    if let Some(h) = opts.holdout {
        if h >= data.n_studies() {
            return Err(Error::Unknown(format!("holdout index {h}")));
        }
    }
    let draws = engine::Engine::new(data, &model, priors, opts)?.run(data, &cfg, rng)?;
    Ok(FitResult {
        draws,
        model,
        priors,
        config: cfg,
        psi_prior_scale: match opts.psi_prior {
            PsiPrior::BayesFactor => priors.psi_bf_scale,
            PsiPrior::Vague => priors.b,
        },
        fingerprint: data.fingerprint(),
        classes: data.classes().to_vec(),
        class_sizes: data.class_sizes(),
        warnings: Vec::new(),
    })
}

fn small_class_warning(class: &str, n: usize) -> String {
    format!("class {class} has {n} studies; surrogacy criteria from the standard model need at least 3")
}

/// Standard model on a single-class dataset.
pub fn fit_standard(
    data: &Dataset,
    priors: PriorSpec,
    cfg: McmcConfig,
    rng: &mut RngStream,
    opts: &FitOptions,
) -> Result<FitResult> {
    check_inputs(data, &priors, &cfg)?;
    if data.n_classes() != 1 {
        return Err(Error::Config(format!(
            "standard model expects one class, got {}; use fit_subgroup",
            data.n_classes()
        )));
    }
    let mut fit = run(data, ModelKind::Standard, priors, cfg, rng, opts)?;
    if data.n_studies() < 3 {
        fit.warnings.push(small_class_warning(&data.classes()[0], data.n_studies()));
    }
    Ok(fit)
}

/// Standard model fitted independently to every class (subgroup analysis).
///
/// Each class runs on its own stream forked from `rng`.
pub fn fit_subgroup(
    data: &Dataset,
    priors: PriorSpec,
    cfg: McmcConfig,
    rng: &mut RngStream,
    opts: &FitOptions,
) -> Result<FitResult> {
    check_inputs(data, &priors, &cfg)?;
    let base = rng.next_u64();
    let class_of = data.class_of_studies();
    let mut draws = PosteriorDraws::new();
    let mut warnings = Vec::new();
    for j in 0..data.n_classes() {
        let sub = data.restrict_to_class(j)?;
        let mut sub_opts = opts.clone();
        // translate dataset-level study indices to the class subset
        let local = |global: usize| -> Option<usize> {
            (class_of[global] == j).then(|| class_of[..global].iter().filter(|&&c| c == j).count())
        };
        sub_opts.holdout = opts.holdout.and_then(local);
        sub_opts.record = match opts.record {
            Recording::Mu2Of(i) => match local(i) {
                Some(k) => Recording::Mu2Of(k),
                None => Recording::Parameters,
            },
            r => r,
        };
        let mut sub_rng = RngStream::new(base, j as u64);
        let fit = fit_standard(&sub, priors, cfg, &mut sub_rng, &sub_opts)?;
        draws.merge(fit.draws)?;
        warnings.extend(fit.warnings);
    }
    Ok(FitResult {
        draws: reorder_like_dataset(draws, data),
        model: ModelKind::Standard,
        priors,
        config: cfg,
        psi_prior_scale: match opts.psi_prior {
            PsiPrior::BayesFactor => priors.psi_bf_scale,
            PsiPrior::Vague => priors.b,
        },
        fingerprint: data.fingerprint(),
        classes: data.classes().to_vec(),
        class_sizes: data.class_sizes(),
        warnings,
    })
}

/// Moves latent-effect chains after all class parameters, in study order.
fn reorder_like_dataset(draws: PosteriorDraws, data: &Dataset) -> PosteriorDraws {
    use crate::draws::names;
    let mut out = PosteriorDraws::new();
    for c in data.classes() {
        for n in [names::lambda0(c), names::lambda1(c), names::psi(c)] {
            if let Some(ch) = draws.get(&n) {
                out.insert(n, ch.to_vec()).expect("equal lengths");
            }
        }
    }
    for s in data.studies() {
        for n in [names::mu1(&s.study_id), names::mu2(&s.study_id)] {
            if let Some(ch) = draws.get(&n) {
                out.insert(n, ch.to_vec()).expect("equal lengths");
            }
        }
    }
    out
}

fn require_multiclass(data: &Dataset) -> Result<()> {
    if data.n_classes() < 2 {
        return Err(Error::Config(
            "hierarchical models need at least 2 classes; use the standard model for a single class"
                .into(),
        ));
    }
    Ok(())
}

/// Fully exchangeable hierarchical model.
pub fn fit_fex(
    data: &Dataset,
    priors: PriorSpec,
    cfg: McmcConfig,
    rng: &mut RngStream,
    opts: &FitOptions,
) -> Result<FitResult> {
    check_inputs(data, &priors, &cfg)?;
    require_multiclass(data)?;
    run(data, ModelKind::FEx, priors, cfg, rng, opts)
}

/// Partially exchangeable hierarchical model with fixed `pi_j`.
pub fn fit_pex(
    data: &Dataset,
    priors: PriorSpec,
    cfg: McmcConfig,
    rng: &mut RngStream,
    pi: &[f64],
    opts: &FitOptions,
) -> Result<FitResult> {
    check_inputs(data, &priors, &cfg)?;
    require_multiclass(data)?;
    run(data, ModelKind::PEx { pi: pi.to_vec() }, priors, cfg, rng, opts)
}

/// Dispatches on `model`; `Standard` means subgroup analysis over all classes.
pub fn fit_model(
    data: &Dataset,
    model: &ModelKind,
    priors: PriorSpec,
    cfg: McmcConfig,
    rng: &mut RngStream,
    opts: &FitOptions,
) -> Result<FitResult> {
    match model {
        ModelKind::Standard => fit_subgroup(data, priors, cfg, rng, opts),
        ModelKind::FEx => fit_fex(data, priors, cfg, rng, opts),
        ModelKind::PEx { pi } => fit_pex(data, priors, cfg, rng, pi, opts),
    }
}

/// Full-conditional probability that class `j`'s slope is in the
/// exchangeable component.
pub fn mixture_weight_conditional(lambda1j: f64, beta1: f64, xi1: f64, b: f64, pi_j: f64) -> Result<f64> {
    if !(xi1 > 0.0) || !(b > 0.0) {
        return Err(Error::Domain(format!("scales must be > 0, got xi1={xi1}, b={b}")));
    }
    if !(0.0..=1.0).contains(&pi_j) {
        return Err(Error::Domain(format!("pi_j must lie in [0, 1], got {pi_j}")));
    }
    Ok(mixture_weight_unchecked(lambda1j, beta1, xi1, b, pi_j))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn mixture_weight_examples() {
        assert_eq!(mixture_weight_conditional(0.3, 0.1, 0.2, 10.0, 0.0).unwrap(), 0.0);
        assert_eq!(mixture_weight_conditional(0.3, 0.1, 0.2, 10.0, 1.0).unwrap(), 1.0);
        // equal densities: xi1 = b and beta1 = 0
        assert_abs_diff_eq!(
            mixture_weight_conditional(0.7, 0.0, 10.0, 10.0, 0.5).unwrap(),
            0.5,
            epsilon = 1e-12
        );
        // phi(.5; .5, .1^2) = 3.989423, phi(.5; 0, 10^2) = 0.0398444
        let ex = 1.0 / (0.1 * (2.0 * std::f64::consts::PI).sqrt());
        let nex = (-0.5 * (0.05f64).powi(2)).exp() / (10.0 * (2.0 * std::f64::consts::PI).sqrt());
        let expected = ex / (ex + nex);
        let w = mixture_weight_conditional(0.5, 0.5, 0.1, 10.0, 0.5).unwrap();
        assert_abs_diff_eq!(w, expected, epsilon = 1e-12);
        assert_abs_diff_eq!(w, 0.99011, epsilon = 1e-5);
    }

    #[test]
    fn mixture_weight_domain() {
        assert!(mixture_weight_conditional(0.0, 0.0, 0.0, 1.0, 0.5).is_err());
        assert!(mixture_weight_conditional(0.0, 0.0, 1.0, -1.0, 0.5).is_err());
        assert!(mixture_weight_conditional(0.0, 0.0, 1.0, 1.0, 1.5).is_err());
    }

    #[test]
    fn model_kind_validation_and_serde() {
        assert!(ModelKind::PEx { pi: vec![0.5, 1.2] }.validate().is_err());
        let s = serde_json::to_string(&ModelKind::pex_uniform(2, 0.5)).unwrap();
        assert_eq!(s, r#"{"kind":"pex","pi":[0.5,0.5]}"#);
        let back: ModelKind = serde_json::from_str(&s).unwrap();
        assert_eq!(back.label(), "pex");
    }
}
