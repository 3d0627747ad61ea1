use criterion::{criterion_group, criterion_main, Criterion};

use surrex::simulation::StudyOptions;
use surrex::{build_scenario, run_study, McmcConfig, ModelKind, PriorSpec};

fn replications(c: &mut Criterion) {
    let spec = build_scenario(3).unwrap();
    let models = [ModelKind::Standard, ModelKind::FEx, ModelKind::pex_uniform(5, 0.5)];
    let cfg = McmcConfig {
        n_iter: 2_000,
        n_burnin: 500,
        seed: 1,
        thin: 1,
    };
    let mut group = c.benchmark_group("scenario3_8reps");
    group.sample_size(10);
    for (label, jobs) in [("sequential", 1), ("parallel", 0)] {
        let opts = StudyOptions {
            jobs,
            crossval: false,
            ..StudyOptions::default()
        };
        group.bench_function(label, |b| {
            b.iter(|| run_study(&spec, 8, &models, PriorSpec::default(), cfg, &opts).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, replications);
criterion_main!(benches);
