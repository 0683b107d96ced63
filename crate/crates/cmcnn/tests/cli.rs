use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use cmcnn::checkpoint::Checkpoint;
use cmcnn::commands::{
    CHECKPOINT_DIR, ENUMERATION_FILE, GENERATIONS_FILE, INCOMPLETE_MARKER, RESULTS_FILE,
};
use cmcnn::results::ResultsFile;

fn cmcnn(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cmcnn"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("CMCNN_DATA_DIR")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn surrogate_search_writes_every_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = cmcnn(
        &[
            "search",
            "--evaluator",
            "surrogate",
            "--with-baseline",
            "--seed",
            "4",
        ],
        &out,
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("Model comparisons (w = 0.7"), "{text}");
    assert!(
        text.contains("Best compensatory model (random selection)"),
        "{text}"
    );
    for name in [
        RESULTS_FILE,
        GENERATIONS_FILE,
        "tables.txt",
        "tables.csv",
        "tables.json",
    ] {
        assert!(out.join(name).exists(), "missing {name}");
    }
    assert!(!out.join(INCOMPLETE_MARKER).exists());
    assert!(!out.join(CHECKPOINT_DIR).exists());

    let results = ResultsFile::load(&out.join(RESULTS_FILE)).unwrap();
    assert_eq!(results.runs.len(), 2);
    // RELU-only genomes score 1 on the surrogate, so the smallest model wins.
    assert_eq!(results.runs[0].winner.model_id, "CM4_GA");

    // 4 architectures x 2 modes x 6 rounds, plus the header.
    let log = fs::read_to_string(out.join(GENERATIONS_FILE)).unwrap();
    assert_eq!(log.lines().count(), 1 + 4 * 2 * 6);
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("exp.toml");
    fs::write(
        &config,
        "search.evaluator = \"surrogate\"\nsearch.arch_grid = [2, 3]\nsearch.reference_m = 3\nsearch.w = 0.9\n",
    )
    .unwrap();
    let out = dir.path().join("run");
    let o = cmcnn(
        &[
            "--config",
            config.to_str().unwrap(),
            "baseline",
            "--w",
            "0.5",
        ],
        &out,
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let results = ResultsFile::load(&out.join(RESULTS_FILE)).unwrap();
    assert_eq!(results.command, "baseline");
    assert_eq!(results.experiment.w, 0.5);
    assert_eq!(results.experiment.arch_grid, vec![2, 3]);
    let ids: Vec<_> = results
        .columns()
        .map(|(_, a)| a.model_id.as_str())
        .collect();
    assert_eq!(ids, ["CM2", "M3"]);
}

#[test]
fn enumerate_prints_the_space_and_refuses_huge_ones() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("enum");
    let o = cmcnn(&["enumerate", "--n", "4", "--evaluator", "surrogate"], &out);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(
        text.starts_with("256 genomes (252 multi-function, 4 single-function)\n"),
        "{text}"
    );
    assert!(text.contains("RELU-RELU-RELU-RELU"));
    let listing = fs::read_to_string(out.join(ENUMERATION_FILE)).unwrap();
    assert_eq!(listing.lines().count(), 257);
    assert!(listing
        .lines()
        .nth(1)
        .unwrap()
        .starts_with("1,RELU-RELU-RELU-RELU,1,"));

    let o = cmcnn(
        &["enumerate", "--n", "10", "--evaluator", "surrogate"],
        &out,
    );
    assert!(!o.status.success());
    let err = stderr(&o);
    assert!(err.contains("1048576") && err.contains("65536"), "{err}");
}

#[test]
fn report_merges_runs_and_selects_models() {
    let dir = tempfile::tempdir().unwrap();
    let ga = dir.path().join("ga");
    let rnd = dir.path().join("rnd");
    assert!(cmcnn(&["search", "--evaluator", "surrogate"], &ga)
        .status
        .success());
    assert!(cmcnn(&["baseline", "--evaluator", "surrogate"], &rnd)
        .status
        .success());
    let merged = dir.path().join("merged");
    let o = Command::new(env!("CARGO_BIN_EXE_cmcnn"))
        .args(["report", "--models", "CM4_GA,CM4,M10", "--out"])
        .arg(&merged)
        .arg(ga.join(RESULTS_FILE))
        .arg(rnd.join(RESULTS_FILE))
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let header = stdout(&o).lines().nth(1).unwrap().to_string();
    let cols: Vec<&str> = header.split_whitespace().skip(1).collect();
    assert_eq!(cols, ["CM4_GA", "CM4", "M10"]);
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(merged.join("tables.json")).unwrap()).unwrap();
    assert_eq!(json["format"], "cmcnn-tables");
    assert_eq!(json["comparison"].as_array().unwrap().len(), 12);
    assert_eq!(json["winners"].as_array().unwrap().len(), 2);

    // The same file twice holds duplicate model ids.
    let o = Command::new(env!("CARGO_BIN_EXE_cmcnn"))
        .args(["report"])
        .arg(ga.join(RESULTS_FILE))
        .arg(ga.join(RESULTS_FILE))
        .output()
        .unwrap();
    assert!(!o.status.success());
}

#[test]
fn missing_cifar_directory_fails_and_leaves_the_marker() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = cmcnn(&["search"], &out);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("CMCNN_DATA_DIR"), "{}", stderr(&o));
    assert!(out.join(INCOMPLETE_MARKER).exists());
    assert!(!out.join(RESULTS_FILE).exists());

    let o = cmcnn(
        &["search", "--data-dir", dir.path().to_str().unwrap()],
        &out,
    );
    assert!(!o.status.success());
    assert!(stderr(&o).contains("data_batch_1.bin"), "{}", stderr(&o));
}

const SMALL_SYNTHETIC: &str = r#"
data.source = "synthetic"
data.n_train = 60
data.n_test = 30
data.synthetic_classes = 3
data.synthetic_side = 8
search.arch_grid = [2, 4]
search.reference_m = 4
search.base_channels = 4
search.generations = 1
train.epochs = 3
train.batch_size = 10
"#;

#[test]
fn synthetic_cnn_search_trains_and_checkpoints() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("exp.toml");
    fs::write(&config, SMALL_SYNTHETIC).unwrap();
    let run = |jobs: &str, name: &str| {
        let out = dir.path().join(name);
        let o = cmcnn(
            &[
                "--config",
                config.to_str().unwrap(),
                "search",
                "--jobs",
                jobs,
            ],
            &out,
        );
        assert!(o.status.success(), "{}", stderr(&o));
        out
    };
    let one = run("1", "one");
    let results = ResultsFile::load(&one.join(RESULTS_FILE)).unwrap();
    for (_, arch) in results.columns() {
        assert_eq!(arch.evaluations, 8);
        assert_eq!(arch.failures, 0);
        assert!(arch.best.f1_train > 0.0 && arch.best.f1_train <= 1.0);
        assert!(arch.mean_t_train_seconds > 0.0);
        let path = one.join(arch.checkpoint.as_ref().unwrap());
        let model = Checkpoint::load(&path).unwrap().into_model().unwrap();
        assert_eq!(model.genome(), &arch.best.genome);
        assert_eq!(model.param_bytes(), arch.param_bytes);
    }

    let four = run("4", "four");
    let read = |d: &Path| fs::read_to_string(d.join(RESULTS_FILE)).unwrap();
    assert_eq!(
        cmcnn::results::timing_free(&read(&one)).unwrap(),
        cmcnn::results::timing_free(&read(&four)).unwrap()
    );
}

#[test]
fn train_fits_one_genome() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("exp.toml");
    fs::write(&config, SMALL_SYNTHETIC).unwrap();
    let out = dir.path().join("train");
    let o = cmcnn(
        &[
            "--config",
            config.to_str().unwrap(),
            "train",
            "--genome",
            "RELU-TANH-ELU",
        ],
        &out,
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(
        stdout(&o).starts_with("RELU-TANH-ELU: F1_train "),
        "{}",
        stdout(&o)
    );
    let ck = Checkpoint::load(&out.join("train-RELU-TANH-ELU.json")).unwrap();
    assert_eq!(ck.arch.n_conv_layers, 3);
}
