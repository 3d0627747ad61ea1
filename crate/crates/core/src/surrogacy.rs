//! Surrogacy criteria per class: zero inside the intercept interval, zero
//! outside the slope interval, and a Savage-Dickey Bayes factor above 3.3
//! in favour of a vanishing conditional variance.

use serde::{Deserialize, Serialize};

use crate::draws::names;
use crate::error::{Error, Result};
use crate::randkit::half_normal_density_at_zero;
use crate::samplers::{FitResult, ModelKind};
use crate::stats;

/// Bayes factor above which the conditional-variance criterion passes.
pub const BF_THRESHOLD: f64 = 3.3;
pub const MIN_CI_DRAWS: usize = 100;
/// Verdicts need at least this many retained draws.
pub const MIN_VERDICT_DRAWS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }
}

/// Equal-tailed credible interval using type-7 quantiles.
pub fn credible_interval(chain: &[f64], level: f64) -> Result<Interval> {
    if chain.len() < MIN_CI_DRAWS {
        return Err(Error::ShortChain {
            needed: MIN_CI_DRAWS,
            got: chain.len(),
        });
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Domain(format!("level must lie in (0, 1), got {level}")));
    }
    let sorted = stats::sorted(chain);
    let tail = 0.5 * (1.0 - level);
    Ok(Interval {
        lo: stats::quantile_sorted(&sorted, tail),
        hi: stats::quantile_sorted(&sorted, 1.0 - tail),
    })
}

/// Density at zero of a non-negative sample, by Gaussian KDE with the
/// sample reflected about zero and Silverman's bandwidth.
pub fn density_at_zero(draws: &[f64]) -> Result<f64> {
    if draws.is_empty() {
        return Err(Error::ShortChain { needed: 1, got: 0 });
    }
    let n = draws.len() as f64;
    let sorted = stats::sorted(draws);
    let sd = stats::sd(draws);
    let iqr = stats::quantile_sorted(&sorted, 0.75) - stats::quantile_sorted(&sorted, 0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    let h = 0.9 * spread * n.powf(-0.2);
    if !(h > 0.0) {
        return Ok(if sorted[0] == 0.0 { f64::INFINITY } else { 0.0 });
    }
    let norm = 1.0 / (n * h * (2.0 * std::f64::consts::PI).sqrt());
    let k: f64 = draws.iter().map(|&x| (-0.5 * (x / h).powi(2)).exp()).sum();
    Ok(2.0 * norm * k)
}

/// Savage-Dickey Bayes factor for `psi = 0`: posterior density at zero over
/// the half-normal prior density at zero.
pub fn savage_dickey_bf(psi_chain: &[f64], prior_scale: f64) -> Result<f64> {
    if !(prior_scale > 0.0) {
        return Err(Error::Domain(format!("prior scale must be > 0, got {prior_scale}")));
    }
    if let Some(bad) = psi_chain.iter().find(|v| !(**v >= 0.0)) {
        return Err(Error::Domain(format!("psi draws must be >= 0, found {bad}")));
    }
    Ok(density_at_zero(psi_chain)? / half_normal_density_at_zero(prior_scale))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassVerdict {
    pub class_id: String,
    pub ci_lambda0: Interval,
    pub ci_lambda1: Interval,
    pub lambda0_mean: f64,
    pub lambda1_mean: f64,
    /// Posterior median of `psi^2`.
    pub psi2_median: f64,
    pub bf_psi: f64,
    pub criterion_intercept: bool,
    pub criterion_slope: bool,
    pub criterion_variance: bool,
    pub strong: bool,
    /// Posterior mean of the mixture indicator (P-EX only).
    pub mixture_weight: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefusedClass {
    pub class_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogacyVerdict {
    pub level: f64,
    pub bf_threshold: f64,
    pub psi_prior_scale: f64,
    pub classes: Vec<ClassVerdict>,
    /// Classes the standard model declines to judge (fewer than 3 studies).
    pub refused: Vec<RefusedClass>,
}

impl SurrogacyVerdict {
    pub fn class(&self, class_id: &str) -> Option<&ClassVerdict> {
        self.classes.iter().find(|c| c.class_id == class_id)
    }
}

/// Verdict from already-computed per-class quantities.
pub fn classify(
    class_id: &str,
    lambda0: &[f64],
    lambda1: &[f64],
    psi: &[f64],
    psi_prior_scale: f64,
    level: f64,
) -> Result<ClassVerdict> {
    let ci0 = credible_interval(lambda0, level)?;
    let ci1 = credible_interval(lambda1, level)?;
    let bf = savage_dickey_bf(psi, psi_prior_scale)?;
    let psi2: Vec<f64> = psi.iter().map(|p| p * p).collect();
    let ci = ci0.contains(0.0);
    let cs = !ci1.contains(0.0);
    let cv = bf > BF_THRESHOLD;
    Ok(ClassVerdict {
        class_id: class_id.to_string(),
        ci_lambda0: ci0,
        ci_lambda1: ci1,
        lambda0_mean: stats::mean(lambda0),
        lambda1_mean: stats::mean(lambda1),
        psi2_median: stats::median(&psi2),
        bf_psi: bf,
        criterion_intercept: ci,
        criterion_slope: cs,
        criterion_variance: cv,
        strong: ci && cs && cv,
        mixture_weight: None,
    })
}

pub fn evaluate_surrogacy(fit: &FitResult, level: f64) -> Result<SurrogacyVerdict> {
    let n = fit.draws.len().unwrap_or(0);
    if n < MIN_VERDICT_DRAWS {
        return Err(Error::ShortChain {
            needed: MIN_VERDICT_DRAWS,
            got: n,
        });
    }
    let mut classes = Vec::new();
    let mut refused = Vec::new();
    for (j, class) in fit.classes.iter().enumerate() {
        if matches!(fit.model, ModelKind::Standard) && fit.class_sizes[j] < 3 {
            refused.push(RefusedClass {
                class_id: class.clone(),
                reason: format!("{} studies; at least 3 required", fit.class_sizes[j]),
            });
            continue;
        }
        let mut v = classify(
            class,
            fit.draws.require(&names::lambda0(class))?,
            fit.draws.require(&names::lambda1(class))?,
            fit.draws.require(&names::psi(class))?,
            fit.psi_prior_scale,
            level,
        )?;
        if let Some(p) = fit.draws.get(&names::p(class)) {
            v.mixture_weight = Some(stats::mean(p));
        }
        classes.push(v);
    }
    Ok(SurrogacyVerdict {
        level,
        bf_threshold: BF_THRESHOLD,
        psi_prior_scale: fit.psi_prior_scale,
        classes,
        refused,
    })
}
