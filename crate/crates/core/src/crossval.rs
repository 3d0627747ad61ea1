//! Leave-one-study-out prediction of the treatment effect on the final
//! outcome from the effect on the surrogate.
//!
//! The held-out study keeps its surrogate estimate: its likelihood reduces
//! to `Y1 ~ N(mu1, se1^2)` and its `mu2` is informed only through the
//! class regression line.

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, McmcConfig, PriorSpec};
use crate::diagnostics::mcmc_error;
use crate::draws::names;
use crate::error::{Error, Result};
use crate::par;
use crate::randkit::{std_normal_quantile, RngStream};
use crate::samplers::{fit_model, fit_standard, FitOptions, ModelKind, Recording};
use crate::stats;
use crate::surrogacy::Interval;

/// Stream tag for cross-validation folds.
const FOLD_TAG: u64 = 0xC0_55;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Target {
    /// Compare the observed `Y2` against the observation-scale interval.
    #[default]
    Observed,
    /// Compare a known true `mu2` against the interval for the true effect.
    True,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum IntervalMethod {
    /// mean +/- z * sd
    #[default]
    Normal,
    /// Empirical quantiles of the `mu2` draws (plus sampling noise for the
    /// observation-scale interval).
    Empirical,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LooOptions {
    pub level: f64,
    pub method: IntervalMethod,
    pub fit: FitOptionsLite,
}

/// Subset of [`FitOptions`] that makes sense for a cross-validation refit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptionsLite {
    pub psi_prior: crate::samplers::PsiPrior,
    pub slice_width: f64,
    pub overrides: crate::samplers::Overrides,
}

impl Default for FitOptionsLite {
    fn default() -> Self {
        let d = FitOptions::default();
        Self {
            psi_prior: d.psi_prior,
            slice_width: d.slice_width,
            overrides: d.overrides,
        }
    }
}

impl Default for LooOptions {
    fn default() -> Self {
        Self {
            level: 0.95,
            method: IntervalMethod::Normal,
            fit: FitOptionsLite::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionResult {
    pub study_id: String,
    pub class_id: String,
    pub y1: f64,
    pub y2: f64,
    pub predicted_mean: f64,
    pub predictive_sd_true: f64,
    pub predictive_sd_observed: f64,
    pub interval_true: Interval,
    pub interval_observed: Interval,
    pub target: Target,
    pub target_value: f64,
    pub contains_target: bool,
    pub abs_error: f64,
    /// Batch-means Monte Carlo error of the predicted mean.
    pub mce: f64,
}

impl PredictionResult {
    /// Interval matching the comparison target.
    pub fn target_interval(&self) -> Interval {
        match self.target {
            Target::Observed => self.interval_observed,
            Target::True => self.interval_true,
        }
    }
}

/// Refits `model` without the final-outcome estimate of `holdout`.
#[allow(clippy::too_many_arguments)]
pub fn loo_predict(
    data: &Dataset,
    model: &ModelKind,
    priors: PriorSpec,
    cfg: McmcConfig,
    holdout: &str,
    target: Target,
    true_value: Option<f64>,
    opts: &LooOptions,
) -> Result<PredictionResult> {
    let idx = data
        .study_index(holdout)
        .ok_or_else(|| Error::Unknown(format!("study_id {holdout:?}")))?;
    if target == Target::True && true_value.is_none() {
        return Err(Error::Config(format!(
            "target=true requires a true value for study {holdout:?}"
        )));
    }
    let study = &data.studies()[idx];
    let mut rng = RngStream::derived(cfg.seed, &[FOLD_TAG, idx as u64]);
    let mut fit_opts = FitOptions {
        psi_prior: opts.fit.psi_prior,
        slice_width: opts.fit.slice_width,
        overrides: opts.fit.overrides,
        ..FitOptions::default()
    };

    let fit = match model {
        ModelKind::Standard => {
            // other classes carry no information about this study
            let class = data.class_index(&study.class_id).expect("known class");
            let sub = data.restrict_to_class(class)?;
            let local = sub.study_index(holdout).expect("study in its class");
            fit_opts.holdout = Some(local);
            fit_opts.record = Recording::Mu2Of(local);
            fit_standard(&sub, priors, cfg, &mut rng, &fit_opts)?
        }
        _ => {
            fit_opts.holdout = Some(idx);
            fit_opts.record = Recording::Mu2Of(idx);
            fit_model(data, model, priors, cfg, &mut rng, &fit_opts)?
        }
    };
    let mu2 = fit.draws.require(&names::mu2(holdout))?;
    summarize_prediction(study, mu2, target, true_value, opts, &mut rng)
}

fn summarize_prediction(
    study: &crate::data::StudyRecord,
    mu2: &[f64],
    target: Target,
    true_value: Option<f64>,
    opts: &LooOptions,
    rng: &mut RngStream,
) -> Result<PredictionResult> {
    let mean = stats::mean(mu2);
    let sd_true = stats::sd(mu2);
    let sd_obs = (study.se2 * study.se2 + sd_true * sd_true).sqrt();
    let (interval_true, interval_observed) = match opts.method {
        IntervalMethod::Normal => {
            let z = std_normal_quantile(1.0 - 0.5 * (1.0 - opts.level));
            (
                Interval {
                    lo: mean - z * sd_true,
                    hi: mean + z * sd_true,
                },
                Interval {
                    lo: mean - z * sd_obs,
                    hi: mean + z * sd_obs,
                },
            )
        }
        IntervalMethod::Empirical => {
            let noisy: Vec<f64> = mu2.iter().map(|m| m + study.se2 * rng.std_normal()).collect();
            (
                crate::surrogacy::credible_interval(mu2, opts.level)?,
                crate::surrogacy::credible_interval(&noisy, opts.level)?,
            )
        }
    };
    let target_value = match target {
        Target::Observed => study.y2,
        Target::True => true_value.expect("checked by caller"),
    };
    let interval = match target {
        Target::Observed => interval_observed,
        Target::True => interval_true,
    };
    Ok(PredictionResult {
        study_id: study.study_id.clone(),
        class_id: study.class_id.clone(),
        y1: study.y1,
        y2: study.y2,
        predicted_mean: mean,
        predictive_sd_true: sd_true,
        predictive_sd_observed: sd_obs,
        interval_true,
        interval_observed,
        target,
        target_value,
        contains_target: interval.contains(target_value),
        abs_error: (mean - target_value).abs(),
        mce: mcmc_error(mu2).unwrap_or(f64::NAN),
    })
}

/// What each fold's prediction is compared against.
#[derive(Debug, Clone, PartialEq)]
pub enum SweepTarget {
    Observed,
    /// True `mu2` for every study, in dataset order.
    True(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub n_folds: usize,
    pub containment: f64,
    pub median_abs_error: f64,
    /// Median of per-study interval-width ratios against the baseline sweep.
    pub median_width_ratio: Option<f64>,
    pub mean_width_ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub model: String,
    pub folds: Vec<PredictionResult>,
}

impl SweepResult {
    /// Per-fold width ratio `self / baseline`, matched by study id.
    pub fn width_ratios(&self, baseline: &[PredictionResult]) -> Vec<Option<f64>> {
        self.folds
            .iter()
            .map(|f| {
                baseline
                    .iter()
                    .find(|b| b.study_id == f.study_id)
                    .map(|b| f.target_interval().width() / b.target_interval().width())
            })
            .collect()
    }

    pub fn summary(&self, baseline: Option<&[PredictionResult]>) -> SweepSummary {
        let n = self.folds.len();
        let contained = self.folds.iter().filter(|f| f.contains_target).count();
        let errors: Vec<f64> = self.folds.iter().map(|f| f.abs_error).collect();
        let ratios: Option<Vec<f64>> = baseline.map(|b| self.width_ratios(b).into_iter().flatten().collect());
        SweepSummary {
            n_folds: n,
            containment: contained as f64 / n as f64,
            median_abs_error: stats::median(&errors),
            median_width_ratio: ratios.as_ref().filter(|r| !r.is_empty()).map(|r| stats::median(r)),
            mean_width_ratio: ratios.as_ref().filter(|r| !r.is_empty()).map(|r| stats::mean(r)),
        }
    }
}

/// Runs [`loo_predict`] for every study, folds in parallel up to `jobs`.
pub fn loo_sweep(
    data: &Dataset,
    model: &ModelKind,
    priors: PriorSpec,
    cfg: McmcConfig,
    target: &SweepTarget,
    opts: &LooOptions,
    jobs: usize,
) -> Result<SweepResult> {
    let (tgt, truths) = match target {
        SweepTarget::Observed => (Target::Observed, None),
        SweepTarget::True(t) => {
            if t.len() != data.n_studies() {
                return Err(Error::Config(format!(
                    "expected {} true values, got {}",
                    data.n_studies(),
                    t.len()
                )));
            }
            (Target::True, Some(t))
        }
    };
    let folds = par::map_indexed(data.n_studies(), jobs, |i| {
        let s = &data.studies()[i];
        loo_predict(
            data,
            model,
            priors,
            cfg,
            &s.study_id,
            tgt,
            truths.map(|t| t[i]),
            opts,
        )
    });
    Ok(SweepResult {
        model: model.label().to_string(),
        folds: folds.into_iter().collect::<Result<_>>()?,
    })
}
