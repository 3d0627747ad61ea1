use surrex::crossval::IntervalMethod;
use surrex::samplers::Overrides;
use surrex::{
    build_scenario, generate_replication, loo_predict, loo_sweep, Dataset, Error, LooOptions, McmcConfig,
    ModelKind, PriorSpec, RngStream, StudyRecord, SweepTarget, Target,
};

fn study(id: &str, class: &str, y1: f64, y2: f64, se1: f64, se2: f64) -> StudyRecord {
    StudyRecord {
        study_id: id.into(),
        class_id: class.into(),
        y1,
        se1,
        y2,
        se2,
        rho_w: 0.0,
    }
}

fn cfg(seed: u64) -> McmcConfig {
    McmcConfig {
        n_iter: 20_000,
        n_burnin: 2_000,
        seed,
        thin: 1,
    }
}

#[test]
fn prediction_under_fixed_line_matches_closed_form() {
    let data = Dataset::new(vec![
        study("a", "c", 0.1, 0.2, 0.1, 0.1),
        study("b", "c", 0.4, 0.3, 0.1, 0.1),
        study("h", "c", 0.3, 9.9, 0.2, 0.1),
    ])
    .unwrap();
    let (l0, l1, psi) = (0.05, 0.8, 0.1);
    let mut opts = LooOptions::default();
    opts.fit.overrides = Overrides {
        fixed_psi: Some(psi),
        fixed_lambda: Some((l0, l1)),
        ..Overrides::default()
    };
    let r = loo_predict(
        &data,
        &ModelKind::Standard,
        PriorSpec::default(),
        cfg(1),
        "h",
        Target::Observed,
        None,
        &opts,
    )
    .unwrap();
    // mu1 | y1 ~ N(y1, se1^2) under a vague prior; mu2 = l0 + l1 mu1 + N(0, psi^2)
    let mean = l0 + l1 * 0.3;
    let sd = (psi * psi + l1 * l1 * 0.2 * 0.2).sqrt();
    assert!((r.predicted_mean - mean).abs() < 0.005, "{}", r.predicted_mean);
    assert!((r.predictive_sd_true / sd - 1.0).abs() < 0.02, "{}", r.predictive_sd_true);
    assert!((r.predictive_sd_observed - (sd * sd + 0.01).sqrt()).abs() < 0.005);
    assert!(!r.contains_target);
    assert_eq!(r.target_value, 9.9);
}

#[test]
fn exact_line_is_reproduced() {
    let pts = [(0.1, 0.3), (0.5, 1.1), (0.9, 1.9), (0.3, 0.7)];
    let data = Dataset::new(
        pts.iter()
            .enumerate()
            .map(|(i, &(x, y))| study(&format!("s{i}"), "c", x, y, 1e-4, 1e-4))
            .collect(),
    )
    .unwrap();
    let mut opts = LooOptions::default();
    opts.fit.overrides.fixed_psi = Some(0.0);
    let r = loo_predict(
        &data,
        &ModelKind::Standard,
        PriorSpec::default(),
        cfg(2),
        "s3",
        Target::Observed,
        None,
        &opts,
    )
    .unwrap();
    assert!((r.predicted_mean - 0.7).abs() < 1e-3);
    assert!(r.contains_target);
}

fn scenario_data(index: u8) -> (Dataset, Vec<f64>) {
    let (d, t) = generate_replication(&build_scenario(index).unwrap(), &mut RngStream::new(31, 0)).unwrap();
    (d, t.mu2)
}

#[test]
fn sweep_has_one_fold_per_study_and_self_ratio_one() {
    let (data, truth) = scenario_data(3);
    let c = McmcConfig {
        n_iter: 2_000,
        n_burnin: 500,
        seed: 3,
        thin: 1,
    };
    let sweep = loo_sweep(
        &data,
        &ModelKind::FEx,
        PriorSpec::default(),
        c,
        &SweepTarget::True(truth),
        &LooOptions::default(),
        0,
    )
    .unwrap();
    assert_eq!(sweep.folds.len(), data.n_studies());
    for (f, s) in sweep.folds.iter().zip(data.studies()) {
        assert_eq!(f.study_id, s.study_id);
        assert_eq!(f.target, Target::True);
        assert!(f.interval_true.lo <= f.interval_true.hi);
        assert!(f.interval_true.width() < f.interval_observed.width());
    }
    let summary = sweep.summary(Some(&sweep.folds));
    assert_eq!(summary.n_folds, data.n_studies());
    assert_eq!(summary.median_width_ratio, Some(1.0));
    assert!(summary.containment > 0.7);
}

#[test]
fn sweep_does_not_depend_on_thread_count() {
    let (data, _) = scenario_data(3);
    let c = McmcConfig {
        n_iter: 500,
        n_burnin: 100,
        seed: 4,
        thin: 1,
    };
    let run = |jobs| {
        loo_sweep(
            &data,
            &ModelKind::Standard,
            PriorSpec::default(),
            c,
            &SweepTarget::Observed,
            &LooOptions::default(),
            jobs,
        )
        .unwrap()
    };
    assert_eq!(run(1), run(0));
}

#[test]
fn empirical_intervals_are_available() {
    let (data, _) = scenario_data(3);
    let opts = LooOptions {
        method: IntervalMethod::Empirical,
        ..LooOptions::default()
    };
    let r = loo_predict(
        &data,
        &ModelKind::FEx,
        PriorSpec::default(),
        McmcConfig::desk(5),
        &data.studies()[0].study_id,
        Target::Observed,
        None,
        &opts,
    )
    .unwrap();
    assert!(r.interval_true.contains(r.predicted_mean));
    assert!(r.interval_observed.width() > r.interval_true.width());
}

#[test]
fn bad_requests_are_rejected() {
    let (data, truth) = scenario_data(3);
    let p = PriorSpec::default();
    let err = loo_predict(&data, &ModelKind::FEx, p, cfg(6), "nope", Target::Observed, None, &LooOptions::default());
    assert!(matches!(err, Err(Error::Unknown(_))));
    let id = &data.studies()[0].study_id;
    let err = loo_predict(&data, &ModelKind::FEx, p, cfg(6), id, Target::True, None, &LooOptions::default());
    assert!(matches!(err, Err(Error::Config(_))));
    let short = SweepTarget::True(truth[..3].to_vec());
    let err = loo_sweep(&data, &ModelKind::FEx, p, cfg(6), &short, &LooOptions::default(), 1);
    assert!(matches!(err, Err(Error::Config(_))));
}
