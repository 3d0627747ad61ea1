use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use serde::Serialize;

use surrex::crossval::{FitOptionsLite, SweepSummary};
use surrex::samplers::FitOptions;
use surrex::simulation::{replication_data, report_rows, write_report_csv, ScenarioSpec, StudyOptions};
use surrex::{
    diagnostics_report, evaluate_surrogacy, fit_model, load_dataset, loo_sweep, run_study, Dataset, LooOptions,
    McmcConfig, ModelKind, PriorSpec, RngStream, SweepTarget, Target,
};

use crate::manifest::{file_digest, InputDigest, Invocation, RunManifest};
use crate::CliError;

/// Executes an invocation, writing every output and the manifest into `out`.
/// With `expected` set (replay), the inputs must match the recorded digests.
pub fn execute(
    invocation: Invocation,
    priors: PriorSpec,
    config: McmcConfig,
    jobs: usize,
    out: &Path,
    expected: Option<&[InputDigest]>,
) -> Result<RunManifest, CliError> {
    let start = Instant::now();
    priors.validate()?;
    config.validate()?;
    fs::create_dir_all(out).map_err(|e| CliError::Input(format!("{}: {e}", out.display())))?;
    let inputs = Inputs::load(&invocation)?;
    if let Some(exp) = expected {
        if exp != inputs.digests.as_slice() {
            return Err(CliError::Input(
                "inputs differ from those recorded in the manifest".into(),
            ));
        }
    }
    let mut manifest = RunManifest::new(invocation.clone(), priors, config, inputs.digests.clone());
    let hash = manifest.manifest_hash.clone();

    match &invocation {
        Invocation::Fit {
            model,
            level,
            psi_prior,
            ..
        } => {
            let data = inputs.data.as_ref().expect("fit loads data");
            let model = broadcast_pi(model, data.n_classes())?;
            let opts = FitOptions {
                psi_prior: *psi_prior,
                ..FitOptions::default()
            };
            let mut rng = RngStream::new(config.seed, 0);
            let fit = fit_model(data, &model, priors, config, &mut rng, &opts)?;
            let verdict = evaluate_surrogacy(&fit, *level)?;
            let diags = diagnostics_report(&fit);

            let mut w = csv::Writer::from_writer(create(out, "posterior_summary.csv")?);
            w.write_record(["parameter", "mean", "sd", "q2.5", "q50", "q97.5", "manifest_hash"])?;
            for s in fit.draws.summarize() {
                w.write_record([
                    s.parameter,
                    s.mean.to_string(),
                    s.sd.to_string(),
                    s.q025.to_string(),
                    s.q50.to_string(),
                    s.q975.to_string(),
                    hash.clone(),
                ])?;
            }
            w.flush()?;

            write_json(
                out,
                "verdict.json",
                &serde_json::json!({
                    "manifest_hash": hash,
                    "model": fit.model,
                    "classes": fit.classes,
                    "class_sizes": fit.class_sizes,
                    "verdict": verdict,
                    "warnings": fit.warnings,
                }),
            )?;
            let flagged = diags.iter().filter(|d| d.flagged).count();
            write_json(
                out,
                "diagnostics.json",
                &serde_json::json!({
                    "manifest_hash": hash,
                    "n_parameters": diags.len(),
                    "n_flagged": flagged,
                    "parameters": diags,
                }),
            )?;
            for w in &fit.warnings {
                eprintln!("warning: {w}");
            }
            for c in &verdict.classes {
                println!(
                    "{}: lambda1 {:.3} [{:.3}, {:.3}], BF(psi=0) {:.2}, strong={}",
                    c.class_id, c.lambda1_mean, c.ci_lambda1.lo, c.ci_lambda1.hi, c.bf_psi, c.strong
                );
            }
            for r in &verdict.refused {
                println!("{}: no verdict ({})", r.class_id, r.reason);
            }
            if flagged > 0 {
                eprintln!("warning: {flagged} chains flagged by split-Rhat/ESS checks");
            }
        }
        Invocation::Crossval {
            model,
            target,
            level,
            interval,
            psi_prior,
            ..
        } => {
            let data = inputs.data.as_ref().expect("crossval loads data");
            let model = broadcast_pi(model, data.n_classes())?;
            let sweep_target = match target {
                Target::Observed => SweepTarget::Observed,
                Target::True => {
                    let truth = inputs.truth.as_ref().ok_or_else(|| {
                        CliError::Input("--target true requires --truth".into())
                    })?;
                    SweepTarget::True(
                        data.studies()
                            .iter()
                            .map(|s| {
                                truth.get(&s.study_id).copied().ok_or_else(|| {
                                    CliError::Input(format!("truth file lacks study {:?}", s.study_id))
                                })
                            })
                            .collect::<Result<_, _>>()?,
                    )
                }
            };
            let opts = LooOptions {
                level: *level,
                method: *interval,
                fit: FitOptionsLite {
                    psi_prior: *psi_prior,
                    ..FitOptionsLite::default()
                },
            };
            let sweep = loo_sweep(data, &model, priors, config, &sweep_target, &opts, jobs)?;
            let ratios: Vec<Option<f64>> = sweep
                .folds
                .iter()
                .map(|f| {
                    inputs
                        .baseline
                        .as_ref()
                        .and_then(|b| b.get(&f.study_id))
                        .map(|w| f.target_interval().width() / w)
                })
                .collect();

            let mut w = csv::Writer::from_writer(create(out, "predictions.csv")?);
            w.write_record([
                "study_id",
                "class_id",
                "y1",
                "y2",
                "predicted_mean",
                "predictive_sd_true",
                "predictive_sd_observed",
                "lower",
                "upper",
                "width",
                "target",
                "target_value",
                "contains_target",
                "abs_error",
                "mce",
                "width_ratio",
                "manifest_hash",
            ])?;
            for (f, r) in sweep.folds.iter().zip(&ratios) {
                let iv = f.target_interval();
                w.write_record([
                    f.study_id.clone(),
                    f.class_id.clone(),
                    f.y1.to_string(),
                    f.y2.to_string(),
                    f.predicted_mean.to_string(),
                    f.predictive_sd_true.to_string(),
                    f.predictive_sd_observed.to_string(),
                    iv.lo.to_string(),
                    iv.hi.to_string(),
                    iv.width().to_string(),
                    target_label(f.target).into(),
                    f.target_value.to_string(),
                    f.contains_target.to_string(),
                    f.abs_error.to_string(),
                    f.mce.to_string(),
                    r.map(|x| x.to_string()).unwrap_or_default(),
                    hash.clone(),
                ])?;
            }
            w.flush()?;

            let mut summary: SweepSummary = sweep.summary(None);
            let present: Vec<f64> = ratios.iter().flatten().copied().collect();
            if !present.is_empty() {
                summary.median_width_ratio = Some(surrex::stats::median(&present));
                summary.mean_width_ratio = Some(surrex::stats::mean(&present));
            }
            write_json(
                out,
                "crossval_summary.json",
                &serde_json::json!({
                    "manifest_hash": hash,
                    "model": model.label(),
                    "target": target,
                    "level": level,
                    "summary": summary,
                }),
            )?;
            println!(
                "{} folds: containment {:.3}, median |error| {:.4}{}",
                summary.n_folds,
                summary.containment,
                summary.median_abs_error,
                summary
                    .median_width_ratio
                    .map(|r| format!(", median width ratio {r:.3}"))
                    .unwrap_or_default()
            );
        }
        Invocation::Simulate {
            scenarios,
            reps,
            models,
            pi,
            crossval,
            level,
        } => {
            let opts = StudyOptions {
                jobs,
                crossval: *crossval,
                level: *level,
                loo: LooOptions {
                    level: *level,
                    ..LooOptions::default()
                },
            };
            let mut reports = Vec::new();
            for spec in scenarios {
                let kinds = model_kinds(models, pi, spec.classes.len())?;
                let report = run_study(spec, *reps, &kinds, priors, config, &opts)?;
                eprintln!(
                    "{}: {} replications, {} retried, {} failed",
                    report.scenario, report.n_reps, report.n_retried, report.n_failed
                );
                reports.push(report);
            }
            let mut f = create(out, "report.csv")?;
            write_report_csv(&reports, &hash, &mut f)?;
            f.flush()?;
            write_json(
                out,
                "report.json",
                &serde_json::json!({
                    "manifest_hash": hash,
                    "reports": reports,
                }),
            )?;
            println!("{:<10} {:<9} {:<26} {:>9} {:>9}", "scenario", "model", "measure", "value", "paper");
            for r in &reports {
                for row in report_rows(r) {
                    println!(
                        "{:<10} {:<9} {:<26} {:>9.4} {:>9}",
                        row.scenario,
                        row.model,
                        row.measure,
                        row.value,
                        row.paper_value.map(|v| format!("{v:.3}")).unwrap_or_else(|| "-".into())
                    );
                }
            }
        }
        Invocation::Generate { scenario, rep } => {
            let (data, truth) = replication_data(scenario, config.seed, *rep)?;
            surrex::data::write_dataset_tagged(&data, create(out, "data.csv")?, Some(("manifest_hash", &hash)))?;
            let mut w = csv::Writer::from_writer(create(out, "truth.csv")?);
            w.write_record(["study_id", "class_id", "mu1", "mu2", "lambda0", "lambda1", "manifest_hash"])?;
            let class_of = data.class_of_studies();
            for (i, s) in data.studies().iter().enumerate() {
                let j = class_of[i];
                w.write_record([
                    s.study_id.clone(),
                    s.class_id.clone(),
                    truth.mu1[i].to_string(),
                    truth.mu2[i].to_string(),
                    truth.lambda0[j].to_string(),
                    truth.lambda1[j].to_string(),
                    hash.clone(),
                ])?;
            }
            w.flush()?;
            println!("{} studies in {} classes", data.n_studies(), data.n_classes());
        }
    }

    manifest.wall_clock_seconds = start.elapsed().as_secs_f64();
    write_json(out, "manifest.json", &manifest)?;
    Ok(manifest)
}

struct Inputs {
    data: Option<Dataset>,
    truth: Option<HashMap<String, f64>>,
    baseline: Option<HashMap<String, f64>>,
    digests: Vec<InputDigest>,
}

impl Inputs {
    fn load(inv: &Invocation) -> Result<Self, CliError> {
        let mut inputs = Inputs {
            data: None,
            truth: None,
            baseline: None,
            digests: Vec::new(),
        };
        let (data, truth, baseline) = match inv {
            Invocation::Fit { data, .. } => (Some(data), None, None),
            Invocation::Crossval {
                data, truth, baseline, ..
            } => (Some(data), truth.as_ref(), baseline.as_ref()),
            _ => (None, None, None),
        };
        if let Some(path) = data {
            let ds = load_dataset(path).map_err(|e| match e {
                surrex::Error::Io(io) => CliError::Input(format!("{path}: {io}")),
                other => CliError::Core(other),
            })?;
            inputs.digests.push(InputDigest {
                role: "data".into(),
                path: path.clone(),
                sha256: ds.fingerprint(),
            });
            inputs.data = Some(ds);
        }
        if let Some(path) = truth {
            inputs.digests.push(file_digest("truth", path)?);
            inputs.truth = Some(read_column(path, "mu2")?);
        }
        if let Some(path) = baseline {
            inputs.digests.push(file_digest("baseline", path)?);
            inputs.baseline = Some(read_column(path, "width")?);
        }
        Ok(inputs)
    }
}

/// Reads `study_id -> column` from a CSV with a header row.
fn read_column(path: &str, column: &str) -> Result<HashMap<String, f64>, CliError> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| CliError::Input(format!("{path}: {e}")))?;
    let headers = rdr.headers()?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::Input(format!("{path}: missing column {name:?}")))
    };
    let (id, col) = (find("study_id")?, find(column)?);
    let mut map = HashMap::new();
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let raw = rec.get(col).unwrap_or("");
        let v: f64 = raw.parse().map_err(|_| {
            CliError::Input(format!("{path}: row {}, column {column}: cannot parse {raw:?}", r + 1))
        })?;
        map.insert(rec.get(id).unwrap_or("").to_string(), v);
    }
    Ok(map)
}

/// A single mixture probability applies to every class.
fn broadcast_pi(model: &ModelKind, n_classes: usize) -> Result<ModelKind, CliError> {
    match model {
        ModelKind::PEx { pi } if pi.len() == 1 => Ok(ModelKind::pex_uniform(n_classes, pi[0])),
        ModelKind::PEx { pi } if pi.len() != n_classes => Err(CliError::Input(format!(
            "--pi has {} values for {n_classes} classes",
            pi.len()
        ))),
        other => Ok(other.clone()),
    }
}

pub fn parse_model(label: &str, pi: &[f64]) -> Result<ModelKind, CliError> {
    let m = match label {
        "standard" => ModelKind::Standard,
        "fex" => ModelKind::FEx,
        "pex" => ModelKind::PEx { pi: pi.to_vec() },
        other => {
            return Err(CliError::Input(format!(
                "unknown model {other:?} (expected standard, fex or pex)"
            )))
        }
    };
    m.validate()?;
    Ok(m)
}

fn model_kinds(labels: &[String], pi: &[f64], n_classes: usize) -> Result<Vec<ModelKind>, CliError> {
    labels
        .iter()
        .map(|l| broadcast_pi(&parse_model(l, pi)?, n_classes))
        .collect()
}

fn target_label(t: Target) -> &'static str {
    match t {
        Target::Observed => "observed",
        Target::True => "true",
    }
}

fn create(dir: &Path, name: &str) -> Result<fs::File, CliError> {
    let path = dir.join(name);
    fs::File::create(&path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<(), CliError> {
    let mut f = create(dir, name)?;
    let mut text = serde_json::to_string_pretty(value).map_err(surrex::Error::from)?;
    text.push('\n');
    f.write_all(text.as_bytes()).map_err(surrex::Error::from)?;
    Ok(())
}

/// Loads a scenario description from JSON.
pub fn load_spec(path: &str) -> Result<ScenarioSpec, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Input(format!("{path}: {e}")))?;
    let spec: ScenarioSpec = serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{path}: {e}")))?;
    spec.validate()?;
    Ok(spec)
}
