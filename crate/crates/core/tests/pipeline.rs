use sleepclass::convnet::{build_cnn, predict_cnn, train_cnn, CnnTrainConfig, Variant};
use sleepclass::dataio::{DatasetId, MODERATE_NOISE};
use sleepclass::exec::Execution;
use sleepclass::harness::{
    aggregate, emit_table1, emit_table2, parse_cells_json, run_and_write, run_benchmark,
    ClassifierId, ClassifierSpec, ReportFormat, RunConfig,
};
use sleepclass::metrics::{evaluate, Metric};
use sleepclass::persist::{self, Model};
use sleepclass::preprocess::split_50_50;
use sleepclass::tensor::Rng;

fn small_config(seed: u64) -> RunConfig {
    let mut cfg = RunConfig::fixtures(seed, MODERATE_NOISE, 2);
    for c in &mut cfg.classifiers {
        c.cnn.epochs = 30;
    }
    cfg
}

#[test]
fn grid_is_reproducible_across_execution_modes() {
    let mut cfg = small_config(3);
    let a = run_benchmark(&cfg).unwrap();
    cfg.execution = Execution::Serial;
    let b = run_benchmark(&cfg).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.len(), 3 * ClassifierId::ALL.len());
    // cells come back in (dataset, classifier) config order
    for (i, c) in a.iter().enumerate() {
        assert_eq!(c.dataset, DatasetId::ALL[i / 8]);
        assert_eq!(c.classifier, ClassifierId::ALL[i % 8]);
    }
}

#[test]
fn a_failing_cell_leaves_the_others_alone() {
    let cfg = small_config(5);
    let baseline = run_benchmark(&cfg).unwrap();

    let mut broken = cfg.clone();
    let mut bad = ClassifierSpec::new(ClassifierId::Dt);
    bad.name = Some("dt_broken".into());
    bad.train.max_depth = 0;
    broken.classifiers.push(bad);
    let cells = run_benchmark(&broken).unwrap();

    let (healthy, failed): (Vec<_>, Vec<_>) = cells.iter().cloned().partition(|c| c.is_ok());
    assert_eq!(failed.len(), 3);
    assert!(failed
        .iter()
        .all(|c| c.name == "dt_broken" && c.reports.is_empty()));
    assert_eq!(healthy, baseline);

    // the tables still render, with the failure spelled out
    let t2 = emit_table2(&cells, ReportFormat::Markdown).unwrap();
    assert!(t2.contains("failed"));
    assert!(emit_table1(&healthy, ReportFormat::Markdown).is_ok());
}

#[test]
fn cell_summaries_agree_with_their_repeats() {
    for cell in run_benchmark(&small_config(7)).unwrap() {
        assert_eq!(cell.reports.len(), 2);
        let (mean, std) = aggregate(&cell.reports);
        for m in Metric::TABLE_ORDER {
            let values: Vec<f64> = cell.reports.iter().map(|r| r.get(m)).collect();
            let mu = values.iter().sum::<f64>() / 2.0;
            let sd = ((values[0] - mu).powi(2) + (values[1] - mu).powi(2)).sqrt();
            assert!((cell.mean[&m] - mu).abs() <= 1e-12, "{} {m:?}", cell.name);
            assert!((cell.std[&m] - sd).abs() <= 1e-12, "{} {m:?}", cell.name);
            assert_eq!(cell.mean[&m], mean[&m]);
            assert_eq!(cell.std[&m], std[&m]);
            assert!((0.0..=1.0).contains(&cell.mean[&m]));
        }
        let is_cnn = matches!(
            cell.classifier,
            ClassifierId::Conv1d1 | ClassifierId::Conv1d2
        );
        assert_eq!(cell.loss_histories.len(), if is_cnn { 2 } else { 0 });
    }
}

#[test]
fn saved_models_reproduce_their_test_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_config(9);
    cfg.datasets.retain(|d| d.id == DatasetId::SleepCycle);
    cfg.output_dir = dir.path().to_path_buf();
    cfg.save_models = true;
    let summary = run_and_write(&cfg).unwrap();
    let data = cfg.datasets[0].load().unwrap();
    for cell in &summary.cells {
        for (r, expected) in cell.reports.iter().enumerate() {
            let path = dir
                .path()
                .join("models")
                .join(format!("{}__r{r}.json", cell.stem()));
            let model = persist::load(&path).unwrap();
            let split = split_50_50(&data, &mut Rng::new(cfg.seed + r as u64))
                .unwrap()
                .normalized(cfg.normalization)
                .unwrap();
            let predicted = match &model {
                Model::Classic(m) => m.predict(&split.test.features).unwrap(),
                Model::Cnn(m) => predict_cnn(m, &split.test.features).unwrap(),
            };
            assert_eq!(
                &evaluate(&predicted, &split.test.labels).unwrap(),
                expected,
                "{}",
                cell.name
            );
        }
    }
}

#[test]
fn written_reports_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_config(11);
    cfg.output_dir = dir.path().to_path_buf();
    let summary = run_and_write(&cfg).unwrap();
    for name in [
        "table1.md",
        "table2.md",
        "table1.csv",
        "table2.csv",
        "table1.json",
        "table2.json",
        "cells.json",
    ] {
        assert!(dir.path().join(name).is_file(), "{name}");
    }
    let text = std::fs::read_to_string(dir.path().join("cells.json")).unwrap();
    assert_eq!(parse_cells_json(&text).unwrap(), summary.cells);
    let text = std::fs::read_to_string(dir.path().join("table2.json")).unwrap();
    assert_eq!(parse_cells_json(&text).unwrap(), summary.cells);

    let loss = std::fs::read_to_string(
        dir.path()
            .join("loss")
            .join("sleep_study__conv1d_1__r0.csv"),
    )
    .unwrap();
    let mut lines = loss.lines();
    assert_eq!(lines.next(), Some("epoch,loss"));
    assert_eq!(lines.count(), 30);
}

#[test]
fn cnn_fits_a_noiseless_fixture() {
    let cfg = RunConfig::fixtures(0, 0.0, 1);
    let data = cfg.datasets[0].load().unwrap();
    let split = split_50_50(&data, &mut Rng::new(0))
        .unwrap()
        .normalized(cfg.normalization)
        .unwrap();
    for variant in [Variant::Conv1d1, Variant::Conv1d2] {
        let cc = CnnTrainConfig::default();
        let init = build_cnn(variant, split.train.d(), &cc, &mut Rng::new(1)).unwrap();
        let model = train_cnn(init, &split.train.features, &split.train.labels, &cc).unwrap();
        let predicted = predict_cnn(&model, &split.train.features).unwrap();
        let ac = evaluate(&predicted, &split.train.labels).unwrap().ac;
        assert!(ac >= 0.95, "{variant:?} train accuracy {ac}");
    }
}

#[test]
fn shipped_config_is_the_default_grid() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/benchmark.toml");
    let cfg = RunConfig::load(path).unwrap();
    let mut expected = RunConfig::fixtures(0, MODERATE_NOISE, 5);
    expected.output_dir = cfg.output_dir.clone();
    assert!(cfg.output_dir.ends_with("configs/bench-out"));
    assert_eq!(cfg, expected);
}
