//! Simulation study: generate replicate datasets from a scenario, fit every
//! requested model, and aggregate coverage, bias, RMSE, interval-width
//! ratios against subgroup analysis, Monte Carlo error and the frequency of
//! strong-surrogacy verdicts.
//!
//! Replications run in parallel on independent streams and are reduced in
//! replication order, so a report depends only on `(spec, n_reps, seed)`.

pub mod reference;
mod scenario;

use std::io::Write;

use serde::{Deserialize, Serialize};

pub use scenario::{
    build_scenario, class_label, generate_replication, ClassParams, ScenarioSpec, SizeSet, TruthRecord,
};

use crate::crossval::{loo_sweep, LooOptions, SweepTarget};
use crate::data::{McmcConfig, PriorSpec};
use crate::diagnostics::mcmc_error;
use crate::draws::names;
use crate::error::{Error, Result};
use crate::par;
use crate::randkit::{stream_id_for, RngStream};
use crate::samplers::{fit_model, FitOptions, ModelKind, Recording};
use crate::stats;
use crate::surrogacy::{evaluate_surrogacy, SurrogacyVerdict};

/// Fraction of failed replications above which a study aborts.
pub const MAX_FAILURE_FRACTION: f64 = 0.01;
/// Split-chain stationarity threshold, in combined Monte Carlo errors.
pub const STATIONARITY_Z: f64 = 4.0;

#[derive(Debug, Clone, PartialEq)]
pub struct StudyOptions {
    /// Worker threads; 0 uses every core.
    pub jobs: usize,
    /// Run leave-one-study-out prediction against the true effects.
    pub crossval: bool,
    pub level: f64,
    pub loo: LooOptions,
}

impl Default for StudyOptions {
    fn default() -> Self {
        Self {
            jobs: 0,
            crossval: true,
            level: 0.95,
            loo: LooOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionPerformance {
    pub coverage_mu2: f64,
    pub abs_bias_mu2: f64,
    pub rmse_mu2: f64,
    pub width_ratio_mu2: Option<f64>,
    pub mce_max_mu2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelPerformance {
    pub model: String,
    pub coverage_lambda1: f64,
    pub abs_bias_lambda1: f64,
    pub rmse_lambda1: f64,
    /// Mean over replications and classes of the CrI width relative to
    /// subgroup analysis on the same replication.
    pub width_ratio_lambda1: Option<f64>,
    /// Mean over replications of the largest per-class MCE of the slope.
    pub mce_max_lambda1: f64,
    pub prob_strong: Vec<f64>,
    pub prob_strong_mean: f64,
    /// Mean posterior weight of the exchangeable component (P-EX).
    pub mixture_weights: Option<Vec<f64>>,
    /// Slope chains whose half-chain means differ by more than
    /// four combined MC errors.
    pub stationarity_violations: usize,
    pub monitored_chains: usize,
    pub prediction: Option<PredictionPerformance>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerformanceReport {
    pub scenario: String,
    pub spec: ScenarioSpec,
    pub n_reps: usize,
    pub n_failed: usize,
    pub n_retried: usize,
    pub priors: PriorSpec,
    pub config: McmcConfig,
    pub models: Vec<ModelPerformance>,
}

impl PerformanceReport {
    pub fn model(&self, label: &str) -> Option<&ModelPerformance> {
        self.models.iter().find(|m| m.model == label)
    }
}

#[derive(Debug, Clone)]
struct FoldOutcome {
    class: usize,
    covered: bool,
    width: f64,
    error: f64,
    mce: f64,
}

#[derive(Debug, Clone)]
struct ModelRep {
    slope_mean: Vec<f64>,
    slope_width: Vec<f64>,
    slope_covered: Vec<bool>,
    slope_mce: Vec<f64>,
    strong: Vec<bool>,
    weights: Option<Vec<f64>>,
    stationarity_violations: usize,
    folds: Option<Vec<FoldOutcome>>,
}

#[derive(Debug, Clone)]
struct RepOutcome {
    models: Vec<ModelRep>,
    truth_lambda1: Vec<f64>,
    retried: bool,
}

const DATA_TAG: u64 = 0;
const FIT_TAG: u64 = 1;
const LOO_TAG: u64 = 2;

fn stationarity_violation(chain: &[f64]) -> bool {
    let half = chain.len() / 2;
    let (a, b) = (&chain[..half], &chain[half..2 * half]);
    match (mcmc_error(a), mcmc_error(b)) {
        (Ok(ea), Ok(eb)) => {
            let se = (ea * ea + eb * eb).sqrt();
            (stats::mean(a) - stats::mean(b)).abs() > STATIONARITY_Z * se
        }
        _ => false,
    }
}

#[allow(clippy::too_many_arguments)]
fn model_rep(
    data: &crate::data::Dataset,
    truth: &TruthRecord,
    model: &ModelKind,
    priors: PriorSpec,
    cfg: McmcConfig,
    rng: &mut RngStream,
    loo_seed: u64,
    opts: &StudyOptions,
) -> Result<ModelRep> {
    let fit_opts = FitOptions {
        record: Recording::Parameters,
        ..FitOptions::default()
    };
    let fit = fit_model(data, model, priors, cfg, rng, &fit_opts)?;
    let verdict: SurrogacyVerdict = evaluate_surrogacy(&fit, opts.level)?;
    let mut rep = ModelRep {
        slope_mean: Vec::new(),
        slope_width: Vec::new(),
        slope_covered: Vec::new(),
        slope_mce: Vec::new(),
        strong: Vec::new(),
        weights: matches!(model, ModelKind::PEx { .. }).then(Vec::new),
        stationarity_violations: 0,
        folds: None,
    };
    for (j, class) in data.classes().iter().enumerate() {
        let chain = fit.draws.require(&names::lambda1(class))?;
        let ci = crate::surrogacy::credible_interval(chain, opts.level)?;
        rep.slope_mean.push(stats::mean(chain));
        rep.slope_width.push(ci.width());
        rep.slope_covered.push(ci.contains(truth.lambda1[j]));
        rep.slope_mce.push(mcmc_error(chain)?);
        rep.strong.push(verdict.class(class).map(|v| v.strong).unwrap_or(false));
        if stationarity_violation(chain) {
            rep.stationarity_violations += 1;
        }
        if let Some(w) = rep.weights.as_mut() {
            w.push(fit.draws.mean(&names::p(class))?);
        }
    }
    if opts.crossval {
        let loo_cfg = McmcConfig { seed: loo_seed, ..cfg };
        let sweep = loo_sweep(
            data,
            model,
            priors,
            loo_cfg,
            &SweepTarget::True(truth.mu2.clone()),
            &opts.loo,
            opts.jobs,
        )?;
        let class_of = data.class_of_studies();
        rep.folds = Some(
            sweep
                .folds
                .iter()
                .zip(class_of)
                .map(|(f, class)| FoldOutcome {
                    class,
                    covered: f.contains_target,
                    width: f.interval_true.width(),
                    error: f.predicted_mean - f.target_value,
                    mce: f.mce,
                })
                .collect(),
        );
    }
    Ok(rep)
}

/// Dataset and truths of replication `rep` of a study seeded with `seed`.
pub fn replication_data(spec: &ScenarioSpec, seed: u64, rep: usize) -> Result<(crate::data::Dataset, TruthRecord)> {
    generate_replication(spec, &mut RngStream::derived(seed, &[rep as u64, DATA_TAG]))
}

fn run_replication(
    spec: &ScenarioSpec,
    rep: usize,
    models: &[ModelKind],
    priors: PriorSpec,
    cfg: McmcConfig,
    opts: &StudyOptions,
) -> Result<RepOutcome> {
    let r = rep as u64;
    let (data, truth) = replication_data(spec, cfg.seed, rep)?;
    let mut last_err = None;
    for attempt in 0..2u64 {
        let out: Result<Vec<ModelRep>> = models
            .iter()
            .enumerate()
            .map(|(k, m)| {
                let k = k as u64;
                let mut rng = RngStream::derived(cfg.seed, &[r, FIT_TAG, k, attempt]);
                let loo_seed = stream_id_for(&[cfg.seed, r, LOO_TAG, k, attempt]);
                model_rep(&data, &truth, m, priors, cfg, &mut rng, loo_seed, opts)
            })
            .collect();
        match out {
            Ok(models) => {
                return Ok(RepOutcome {
                    models,
                    truth_lambda1: truth.lambda1.clone(),
                    retried: attempt > 0,
                })
            }
            Err(e) => last_err = Some(e),
        }
    }
    Err(last_err.expect("two attempts made"))
}

/// Runs the full study for one scenario.
pub fn run_study(
    spec: &ScenarioSpec,
    n_reps: usize,
    models: &[ModelKind],
    priors: PriorSpec,
    cfg: McmcConfig,
    opts: &StudyOptions,
) -> Result<PerformanceReport> {
    if n_reps == 0 {
        return Err(Error::Config("n_reps must be >= 1".into()));
    }
    if models.is_empty() {
        return Err(Error::Config("at least one model is required".into()));
    }
    spec.validate()?;
    priors.validate()?;
    cfg.validate()?;
    let n_classes = spec.classes.len();
    for m in models {
        m.validate()?;
        if let ModelKind::PEx { pi } = m {
            if pi.len() != n_classes {
                return Err(Error::Config(format!(
                    "P-EX needs {n_classes} mixture probabilities, got {}",
                    pi.len()
                )));
            }
        }
    }

    let outcomes = par::map_indexed(n_reps, opts.jobs, |r| {
        run_replication(spec, r, models, priors, cfg, opts)
    });
    let n_failed = outcomes.iter().filter(|o| o.is_err()).count();
    if n_failed as f64 > MAX_FAILURE_FRACTION * n_reps as f64 {
        let first = outcomes.into_iter().find_map(|o| o.err()).expect("a failure");
        return Err(Error::Sampler(format!(
            "{n_failed} of {n_reps} replications failed; first error: {first}"
        )));
    }
    let ok: Vec<RepOutcome> = outcomes.into_iter().filter_map(|o| o.ok()).collect();
    let n_retried = ok.iter().filter(|o| o.retried).count();
    let baseline = models.iter().position(|m| matches!(m, ModelKind::Standard));

    let performances = models
        .iter()
        .enumerate()
        .map(|(k, m)| aggregate(&ok, k, m, baseline, n_classes))
        .collect();

    Ok(PerformanceReport {
        scenario: spec.label(),
        spec: spec.clone(),
        n_reps,
        n_failed,
        n_retried,
        priors,
        config: cfg,
        models: performances,
    })
}

fn aggregate(
    reps: &[RepOutcome],
    k: usize,
    model: &ModelKind,
    baseline: Option<usize>,
    n_classes: usize,
) -> ModelPerformance {
    let n = reps.len() as f64;
    let mut cover = 0.0;
    let mut abs = 0.0;
    let mut sq = 0.0;
    let mut mce = 0.0;
    let mut strong = vec![0.0; n_classes];
    let mut weights = vec![0.0; n_classes];
    let mut ratio_sum = 0.0;
    let mut ratio_n = 0usize;
    let mut violations = 0;
    let per_class = n * n_classes as f64;
    let is_baseline = baseline == Some(k);

    for rep in reps {
        let m = &rep.models[k];
        for j in 0..n_classes {
            let err = m.slope_mean[j] - rep.truth_lambda1[j];
            abs += err.abs();
            sq += err * err;
            if m.slope_covered[j] {
                cover += 1.0;
            }
            if m.strong[j] {
                strong[j] += 1.0 / n;
            }
            if let Some(w) = &m.weights {
                weights[j] += w[j] / n;
            }
            if let (Some(b), false) = (baseline, is_baseline) {
                ratio_sum += m.slope_width[j] / rep.models[b].slope_width[j];
                ratio_n += 1;
            }
        }
        mce += m.slope_mce.iter().cloned().fold(0.0, f64::max) / n;
        violations += m.stationarity_violations;
    }

    let prediction = reps
        .first()
        .and_then(|r| r.models[k].folds.as_ref())
        .map(|_| aggregate_prediction(reps, k, baseline, n_classes));

    ModelPerformance {
        model: model.label().to_string(),
        coverage_lambda1: cover / per_class,
        abs_bias_lambda1: abs / per_class,
        rmse_lambda1: (sq / per_class).sqrt(),
        width_ratio_lambda1: (ratio_n > 0).then(|| ratio_sum / ratio_n as f64),
        mce_max_lambda1: mce,
        prob_strong_mean: stats::mean(&strong),
        prob_strong: strong,
        mixture_weights: matches!(model, ModelKind::PEx { .. }).then_some(weights),
        stationarity_violations: violations,
        monitored_chains: reps.len() * n_classes,
        prediction,
    }
}

fn aggregate_prediction(
    reps: &[RepOutcome],
    k: usize,
    baseline: Option<usize>,
    n_classes: usize,
) -> PredictionPerformance {
    let n = reps.len() as f64;
    let mut coverage = 0.0;
    let mut abs = 0.0;
    let mut sq = 0.0;
    let mut n_folds = 0.0;
    let mut mce = 0.0;
    let mut ratio_sum = 0.0;
    let mut ratio_n = 0usize;
    let is_baseline = baseline == Some(k);
    for rep in reps {
        let folds = rep.models[k].folds.as_ref().expect("crossval ran for every replication");
        let mut hits = vec![0.0; n_classes];
        let mut counts = vec![0.0; n_classes];
        for (i, f) in folds.iter().enumerate() {
            counts[f.class] += 1.0;
            if f.covered {
                hits[f.class] += 1.0;
            }
            abs += f.error.abs();
            sq += f.error * f.error;
            n_folds += 1.0;
            if let (Some(b), false) = (baseline, is_baseline) {
                let base = &rep.models[b].folds.as_ref().expect("baseline crossval")[i];
                ratio_sum += f.width / base.width;
                ratio_n += 1;
            }
        }
        let class_cov: Vec<f64> = hits
            .iter()
            .zip(&counts)
            .filter(|(_, c)| **c > 0.0)
            .map(|(h, c)| h / c)
            .collect();
        coverage += stats::mean(&class_cov) / n;
        mce += folds.iter().map(|f| f.mce).fold(0.0, f64::max) / n;
    }
    PredictionPerformance {
        coverage_mu2: coverage,
        abs_bias_mu2: abs / n_folds,
        rmse_mu2: (sq / n_folds).sqrt(),
        width_ratio_mu2: (ratio_n > 0).then(|| ratio_sum / ratio_n as f64),
        mce_max_mu2: mce,
    }
}

/// One line of the long-format report table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub scenario: String,
    pub model: String,
    pub measure: String,
    pub value: f64,
    pub paper_value: Option<f64>,
}

/// Flattens a report to `(scenario, model, measure)` rows with published
/// values alongside where they exist.
pub fn report_rows(report: &PerformanceReport) -> Vec<ReportRow> {
    let idx = report.spec.index;
    let mut rows = Vec::new();
    for m in &report.models {
        let slope = idx.and_then(|i| reference::slope_row(i, &m.model));
        let pred = idx.and_then(|i| reference::prediction_row(i, &m.model));
        let class_strong = idx.and_then(|i| reference::class_prob_strong(i, &m.model));
        let weights = idx.and_then(reference::mixture_weights);
        let mut push = |measure: String, value: f64, paper: Option<f64>| {
            rows.push(ReportRow {
                scenario: report.scenario.clone(),
                model: m.model.clone(),
                measure,
                value,
                paper_value: paper,
            })
        };
        push("coverage_lambda1".into(), m.coverage_lambda1, slope.map(|s| s.coverage));
        push("abs_bias_lambda1".into(), m.abs_bias_lambda1, slope.map(|s| s.abs_bias));
        push("rmse_lambda1".into(), m.rmse_lambda1, slope.map(|s| s.rmse));
        if let Some(w) = m.width_ratio_lambda1 {
            push("width_ratio_lambda1".into(), w, slope.and_then(|s| s.width_ratio));
        }
        push("mce_max_lambda1".into(), m.mce_max_lambda1, slope.map(|s| s.mce));
        push("prob_strong_mean".into(), m.prob_strong_mean, slope.and_then(|s| s.prob_strong));
        for (j, p) in m.prob_strong.iter().enumerate() {
            push(format!("prob_strong[{}]", class_label(j)), *p, class_strong.map(|c| c[j]));
        }
        if let Some(ws) = &m.mixture_weights {
            for (j, w) in ws.iter().enumerate() {
                push(format!("mixture_weight[{}]", class_label(j)), *w, weights.map(|c| c[j]));
            }
        }
        push(
            "stationarity_violations".into(),
            m.stationarity_violations as f64,
            None,
        );
        if let Some(p) = &m.prediction {
            push("coverage_mu2".into(), p.coverage_mu2, pred.map(|s| s.coverage));
            push("abs_bias_mu2".into(), p.abs_bias_mu2, pred.map(|s| s.abs_bias));
            push("rmse_mu2".into(), p.rmse_mu2, pred.map(|s| s.rmse));
            if let Some(w) = p.width_ratio_mu2 {
                push("width_ratio_mu2".into(), w, pred.and_then(|s| s.width_ratio));
            }
            push("mce_max_mu2".into(), p.mce_max_mu2, pred.map(|s| s.mce));
        }
    }
    rows
}

/// Writes report rows as CSV with a trailing `manifest_hash` column.
pub fn write_report_csv<W: Write>(reports: &[PerformanceReport], manifest_hash: &str, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["scenario", "model", "measure", "value", "paper_value", "manifest_hash"])?;
    for report in reports {
        for row in report_rows(report) {
            w.write_record([
                row.scenario,
                row.model,
                row.measure,
                format_value(row.value),
                row.paper_value.map(format_value).unwrap_or_default(),
                manifest_hash.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn format_value(v: f64) -> String {
    format!("{v:.6}")
}
