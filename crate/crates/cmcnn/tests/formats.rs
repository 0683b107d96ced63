use std::fs;

use cmcnn::checkpoint::{Checkpoint, CHECKPOINT_VERSION};
use cmcnn::cifar::{
    load_batch_file, load_cifar10, write_batch_file, ARCHIVE_SUBDIR, TEST_FILE, TRAIN_FILES,
};
use cmcnn::core::compensatory::alpha;
use cmcnn::core::data::{encode_cifar_records, CIFAR_BATCH_BYTES, CIFAR_RECORD_BYTES};
use cmcnn::core::{build_model, ArchSpec, Genome, LabeledImageSet, Tensor4};
use cmcnn::report::{build_report, render_csv, render_text};
use cmcnn::results::{timing_free, ResultsFile};
use cmcnn::Error;

/// A batch of 10000 records whose pixel bytes are a function of position.
fn patterned_batch(salt: u8) -> LabeledImageSet {
    let n = 10_000;
    let pixels = CIFAR_RECORD_BYTES - 1;
    let mut images = Vec::with_capacity(n * pixels);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        labels.push((i * 7 + salt as usize) % 10);
        images.extend((0..pixels).map(|p| ((i + 3 * p + salt as usize) % 256) as f32 / 255.0));
    }
    let images = Tensor4::from_vec([n, 3, 32, 32], images).unwrap();
    LabeledImageSet::new(images, labels, 10).unwrap()
}

#[test]
fn batch_file_round_trips_byte_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join(TEST_FILE);
    let set = patterned_batch(5);
    write_batch_file(&path, &set).unwrap();
    let bytes = fs::read(&path).unwrap();
    assert_eq!(bytes.len(), CIFAR_BATCH_BYTES);
    assert_eq!(bytes[0], 5);
    assert_eq!(bytes[1], 5);
    assert_eq!(bytes[CIFAR_RECORD_BYTES], 12 % 10);

    let back = load_batch_file(&path).unwrap();
    assert_eq!(back.labels(), set.labels());
    assert_eq!(encode_cifar_records(&back).unwrap(), bytes);
}

#[test]
fn truncated_or_missing_files_fail_closed() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join(TEST_FILE);
    write_batch_file(&path, &patterned_batch(0)).unwrap();
    let mut bytes = fs::read(&path).unwrap();
    bytes.truncate(bytes.len() - 1);
    fs::write(&path, &bytes).unwrap();
    let err = load_batch_file(&path).unwrap_err().to_string();
    assert!(err.contains(TEST_FILE), "{err}");

    bytes.truncate(CIFAR_RECORD_BYTES);
    bytes[0] = 10;
    fs::write(&path, &bytes).unwrap();
    assert!(load_batch_file(&path).is_err());

    let err = load_cifar10(dir.path()).unwrap_err().to_string();
    assert!(err.contains(TRAIN_FILES[0]), "{err}");
}

#[test]
fn archive_subdirectory_is_found() {
    let dir = tempfile::tempdir().unwrap();
    let nested = dir.path().join(ARCHIVE_SUBDIR);
    fs::create_dir(&nested).unwrap();
    write_batch_file(&nested.join(TEST_FILE), &patterned_batch(1)).unwrap();
    // Only the test batch exists, so the load must fail on the first training file
    // inside the nested directory.
    let err = load_cifar10(dir.path()).unwrap_err().to_string();
    assert!(
        err.contains(ARCHIVE_SUBDIR) && err.contains(TRAIN_FILES[0]),
        "{err}"
    );
}

#[test]
fn write_batch_file_rejects_wrong_record_counts() {
    let dir = tempfile::tempdir().unwrap();
    let set = patterned_batch(0).slice(0..10);
    assert!(write_batch_file(&dir.path().join("x.bin"), &set).is_err());
}

#[test]
fn checkpoint_round_trip_preserves_predictions() {
    let dir = tempfile::tempdir().unwrap();
    let arch = ArchSpec {
        input_shape: (3, 8, 8),
        ..ArchSpec::cifar(3)
    };
    let genome: Genome = "ELU-TANH-SIG".parse().unwrap();
    let model = build_model::<f32>(&arch, &genome, 17).unwrap();
    let path = dir.path().join("m.json");
    Checkpoint::from_model(&model).save(&path).unwrap();
    let loaded = Checkpoint::load(&path).unwrap().into_model().unwrap();
    assert_eq!(loaded.params(), model.params());
    assert_eq!(loaded.genome(), model.genome());
    let batch =
        Tensor4::from_vec([1, 3, 8, 8], (0..192).map(|i| (i as f32).sin()).collect()).unwrap();
    assert_eq!(
        loaded.forward(&batch).unwrap().data,
        model.forward(&batch).unwrap().data
    );
}

#[test]
fn checkpoint_with_other_version_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let model = build_model::<f32>(
        &ArchSpec {
            input_shape: (3, 4, 4),
            ..ArchSpec::cifar(2)
        },
        &"RELU-ELU".parse().unwrap(),
        0,
    )
    .unwrap();
    let path = dir.path().join("m.json");
    Checkpoint::from_model(&model).save(&path).unwrap();
    let text = fs::read_to_string(&path).unwrap();
    let bumped = text.replacen(
        &format!("\"version\":{CHECKPOINT_VERSION}"),
        &format!("\"version\":{}", CHECKPOINT_VERSION + 1),
        1,
    );
    assert_ne!(bumped, text);
    fs::write(&path, bumped).unwrap();
    match Checkpoint::load(&path) {
        Err(Error::Version { what, .. }) => assert_eq!(what, "version"),
        other => panic!("expected a version error, got {other:?}"),
    }
    fs::write(
        &path,
        text.replacen("cmcnn-checkpoint", "something-else", 1),
    )
    .unwrap();
    assert!(matches!(
        Checkpoint::load(&path),
        Err(Error::Version { what: "format", .. })
    ));

    // Parameter count must match the architecture.
    let mut ck = Checkpoint::from_model(&model);
    ck.params.pop();
    assert!(ck.into_model().is_err());
}

fn surrogate_results(dir: &std::path::Path, jobs: usize) -> ResultsFile {
    let mut cfg = cmcnn::config::ExperimentConfig::default();
    cfg.search.evaluator = cmcnn::config::EvaluatorKind::Surrogate;
    cfg.search.generations = 8;
    cfg.search.seed = 3;
    cfg.search.jobs = jobs;
    cfg.output.out = dir.to_path_buf();
    cmcnn::commands::run_search(
        &cfg,
        &[
            cmcnn::core::compensatory::SearchMode::Genetic,
            cmcnn::core::compensatory::SearchMode::Random,
        ],
        "search",
    )
    .unwrap()
}

#[test]
fn results_file_is_stable_through_save_and_load() {
    let dir = tempfile::tempdir().unwrap();
    let results = surrogate_results(dir.path(), 1);
    let path = dir.path().join("results.json");
    let first = fs::read_to_string(&path).unwrap();
    let loaded = ResultsFile::load(&path).unwrap();
    assert_eq!(loaded, results);
    assert_eq!(loaded.to_json().unwrap(), first);
    assert!(loaded.complete);
    assert!(!dir.path().join(cmcnn::commands::INCOMPLETE_MARKER).exists());

    fs::write(&path, first.replacen("cmcnn-results", "cmcnn-other", 1)).unwrap();
    assert!(ResultsFile::load(&path).is_err());
}

#[test]
fn surrogate_search_is_independent_of_thread_count() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    surrogate_results(a.path(), 1);
    surrogate_results(b.path(), 4);
    let read = |d: &tempfile::TempDir| fs::read_to_string(d.path().join("results.json")).unwrap();
    assert_eq!(
        timing_free(&read(&a)).unwrap(),
        timing_free(&read(&b)).unwrap()
    );
}

#[test]
fn report_fitness_rows_recompute_from_f1_and_size() {
    let dir = tempfile::tempdir().unwrap();
    let results = surrogate_results(dir.path(), 1);
    let report = build_report(std::slice::from_ref(&results), None).unwrap();
    let t = &report.comparison;
    assert_eq!(t.models.len(), 8);
    assert_eq!(&t.models[..2], ["CM4_GA", "CM4"]);
    assert_eq!(t.models.last().unwrap(), "M10");
    let row = |label: &str| t.rows.iter().find(|r| r.metric.label() == label).unwrap();
    for (i, id) in t.models.iter().enumerate() {
        let arch = results
            .columns()
            .map(|(_, a)| a)
            .find(|a| &a.model_id == id)
            .unwrap();
        let s = arch.n_conv_layers as f64 / 10.0;
        let f = row("F1_train").cells[i].value;
        assert_eq!(f, arch.best.f1_train);
        let expected = 0.7 * f + 0.3 * (1.0 - s);
        assert!((row("Fit_train").cells[i].value - expected).abs() < 1e-12);
        assert_eq!(row("Fit_train").cells[i].value, alpha(f, s, 0.7).unwrap());
    }
    for r in &t.rows {
        let max = r.cells.iter().map(|c| c.value).fold(f64::MIN, f64::max);
        for c in &r.cells {
            assert_eq!(c.best, c.value == max);
        }
    }
    let text = render_text(&report);
    assert!(
        text.contains("Model Size (KB)")
            && text.contains("Best compensatory model (genetic search)")
    );
    let csv = render_csv(&report).unwrap();
    assert!(csv.starts_with("table,metric,model,value,best\n"));
    assert_eq!(
        csv.lines().filter(|l| l.starts_with("comparison,")).count(),
        4 * 8
    );
}

#[test]
fn report_rejects_unknown_models() {
    let dir = tempfile::tempdir().unwrap();
    let results = surrogate_results(dir.path(), 1);
    let err = build_report(&[results], Some(&["CM5_GA".to_string()])).unwrap_err();
    assert!(err.to_string().contains("CM5_GA"), "{err}");
}
