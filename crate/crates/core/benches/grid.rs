use criterion::{criterion_group, criterion_main, Criterion};

use sleepclass::classic::{train, ClassicKind, TrainConfig};
use sleepclass::dataio::MODERATE_NOISE;
use sleepclass::exec::Execution;
use sleepclass::harness::{run_benchmark, ClassifierId, ClassifierSpec, RunConfig};
use sleepclass::tensor::{rand_uniform, Rng};

fn grid_config(execution: Execution) -> RunConfig {
    let mut cfg = RunConfig::fixtures(7, MODERATE_NOISE, 2);
    cfg.execution = execution;
    // keep the CNN rows short so one iteration stays well under a second
    for c in &mut cfg.classifiers {
        c.cnn.epochs = 40;
    }
    cfg
}

fn bench_grid(c: &mut Criterion) {
    let mut group = c.benchmark_group("grid");
    group.sample_size(10);
    for (label, exec) in [
        ("serial", Execution::Serial),
        ("parallel", Execution::Parallel),
    ] {
        let cfg = grid_config(exec);
        group.bench_function(label, |b| b.iter(|| run_benchmark(&cfg).unwrap()));
    }
    group.finish();
}

fn bench_knn_predict(c: &mut Criterion) {
    let mut rng = Rng::new(3);
    let x = rand_uniform(&mut rng, &[2000, 8], -1.0, 1.0).unwrap();
    let y: Vec<u8> = x.rows().map(|r| u8::from(r[0] > 0.0)).collect();
    let model = train(
        ClassicKind::Knn,
        &x,
        &y,
        &TrainConfig {
            k: 10,
            ..Default::default()
        },
    )
    .unwrap();
    let queries = rand_uniform(&mut rng, &[2000, 8], -1.0, 1.0).unwrap();
    let mut group = c.benchmark_group("knn_predict_2000x2000");
    group.sample_size(10);
    for (label, exec) in [
        ("serial", Execution::Serial),
        ("parallel", Execution::Parallel),
    ] {
        group.bench_function(label, |b| {
            b.iter(|| model.predict_with(&queries, exec).unwrap())
        });
    }
    group.finish();
}

fn bench_cnn_cell(c: &mut Criterion) {
    let mut cfg = RunConfig::fixtures(1, MODERATE_NOISE, 1);
    cfg.classifiers = vec![ClassifierSpec::new(ClassifierId::Conv1d2)];
    cfg.execution = Execution::Serial;
    let mut group = c.benchmark_group("cnn_cells");
    group.sample_size(10);
    group.bench_function("conv1d_2_x3_datasets_300_epochs", |b| {
        b.iter(|| run_benchmark(&cfg).unwrap())
    });
    group.finish();
}

criterion_group!(benches, bench_grid, bench_knn_predict, bench_cnn_cell);
criterion_main!(benches);
