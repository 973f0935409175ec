use std::fs;
use std::path::Path;
use std::time::Instant;

use dsner::commands::{
    cmd_evaluate, cmd_generate, cmd_report, cmd_train, ConfigFile, CHECKPOINT_FILE, RUN_RESULT_FILE,
};

fn config(dir: &Path, text: &str) -> ConfigFile {
    with_overrides(dir, text, &[])
}

fn with_overrides(dir: &Path, text: &str, overrides: &[String]) -> ConfigFile {
    let path = dir.join("exp.toml");
    fs::write(&path, text).unwrap();
    ConfigFile::load(&path, overrides).unwrap()
}

const SMOKE: &str = r#"
seed = 3
lr = 0.003
warmup_steps = 10
epochs = 2
pretrain_epochs = 2
embedding_dim = 8
net1_hidden = 12
net2_hidden = 8
sigma_co = 0.5
sigma_ua = 0.02
gen_train_sentences = 50
gen_dev_sentences = 20
gen_test_sentences = 20
"#;

#[test]
fn generate_writes_splits_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "data_dir = \"a\"\ngen_train_sentences = 1500\n");
    let summary = cmd_generate(&cfg).unwrap();
    assert_eq!(
        (
            summary.train_sentences,
            summary.dev_sentences,
            summary.test_sentences
        ),
        (1500, 300, 300)
    );
    assert!(summary.noise.gold_mentions >= 1000);
    assert!(
        (summary.noise.incomplete_rate - 0.3).abs() <= 0.03,
        "{:?}",
        summary.noise
    );

    let again = ConfigFile {
        data_dir: dir.path().join("b"),
        ..cfg
    };
    cmd_generate(&again).unwrap();
    for file in [
        "train.conll",
        "train.gold.conll",
        "dev.conll",
        "test.conll",
        "gazetteer.tsv",
        "summary.json",
    ] {
        let a = fs::read(dir.path().join("a").join(file)).unwrap();
        let b = fs::read(dir.path().join("b").join(file)).unwrap();
        assert!(!a.is_empty(), "{file} is empty");
        assert_eq!(a, b, "{file} differs");
    }
}

#[test]
fn smoke_training_is_fast_deterministic_and_consistent() {
    let dir = tempfile::tempdir().unwrap();
    let generated = config(dir.path(), &format!("{SMOKE}data_dir = \"data\"\n"));
    cmd_generate(&generated).unwrap();
    let text = format!(
        "{SMOKE}train_path = \"data/train.conll\"\ntrain_gold_path = \"data/train.gold.conll\"\n\
         dev_path = \"data/dev.conll\"\ntest_path = \"data/test.conll\"\n"
    );

    let start = Instant::now();
    let first = cmd_train(&ConfigFile {
        output_dir: dir.path().join("r1"),
        ..config(dir.path(), &text)
    })
    .unwrap();
    assert!(start.elapsed().as_secs_f64() < 30.0);
    cmd_train(&ConfigFile {
        output_dir: dir.path().join("r2"),
        ..config(dir.path(), &text)
    })
    .unwrap();
    let read = |run: &str| fs::read(dir.path().join(run).join(RUN_RESULT_FILE)).unwrap();
    assert_eq!(read("r1"), read("r2"));
    assert_eq!(first.epochs.len(), 2);
    assert!(first.noise.is_some());

    let eval = cmd_evaluate(
        dir.path().join("r1").join(CHECKPOINT_FILE),
        dir.path().join("data/test.conll"),
    )
    .unwrap();
    assert_eq!(eval.metrics, first.test);
    assert_eq!(eval.sentences, 20);
}

#[test]
fn in_memory_corpus_matches_generated_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = with_overrides(
        dir.path(),
        &format!("{SMOKE}data_dir = \"data\"\n"),
        &["epochs=1".into()],
    );
    cmd_generate(&cfg).unwrap();
    let data = cfg.load_data().unwrap();
    let tagset = cfg.experiment.tagset().unwrap();
    let from_disk = dsner::corpus::read_conll(dir.path().join("data/test.conll"), &tagset).unwrap();
    assert_eq!(data.test.labels(), from_disk.labels());
    let result = cmd_train(&ConfigFile {
        output_dir: dir.path().join("run"),
        ..cfg
    })
    .unwrap();
    assert!(result.generator.is_some());
}

#[test]
fn report_has_one_row_per_noise_ratio() {
    let dir = tempfile::tempdir().unwrap();
    let mut runs = Vec::new();
    let mut results = Vec::new();
    for k in (10..=90).rev().step_by(10) {
        let overrides = [
            "epochs=1",
            "pretrain_epochs=1",
            "gen_train_sentences=30",
            "gen_ds_source=noise",
            &format!("gen_noise_ratio={k}"),
            &format!("output_dir=k{k}"),
        ]
        .map(String::from);
        let cfg = with_overrides(dir.path(), SMOKE, &overrides);
        results.push((k, cmd_train(&cfg).unwrap()));
        runs.push(cfg.output_dir);
    }
    let out = dir.path().join("report.csv");
    let rows = cmd_report(&runs, &out).unwrap();
    assert_eq!(rows.len(), 9);
    let ks: Vec<f64> = rows.iter().map(|r| r.noise_ratio.unwrap()).collect();
    assert_eq!(ks, (1..=9).map(|k| k as f64 * 10.0).collect::<Vec<_>>());

    let mut reader = csv::Reader::from_path(&out).unwrap();
    let headers = reader.headers().unwrap().clone();
    let col = |name: &str| headers.iter().position(|h| h == name).unwrap();
    let (k_col, f1_col) = (col("noise_ratio"), col("test_f1"));
    let mut lines = 0;
    for record in reader.records() {
        let record = record.unwrap();
        let k: f64 = record[k_col].parse().unwrap();
        let f1: f64 = record[f1_col].parse().unwrap();
        let (_, result) = results.iter().find(|(rk, _)| *rk as f64 == k).unwrap();
        assert!((f1 - result.test.f1).abs() <= 1e-9);
        lines += 1;
    }
    assert_eq!(lines, 9);
}

#[test]
fn errors_carry_file_and_key_names() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    fs::write(&path, "epochs = 2\nlearning_rate = 0.1\n").unwrap();
    let err = ConfigFile::load(&path, &[]).unwrap_err().to_string();
    assert!(
        err.contains("learning_rate") && err.contains("bad.toml"),
        "{err}"
    );

    let cfg = config(
        dir.path(),
        "train_path = \"missing.conll\"\ndev_path = \"d\"\ntest_path = \"t\"\n",
    );
    let err = cmd_train(&cfg).unwrap_err().to_string();
    assert!(err.contains("missing.conll"), "{err}");

    let cfg = config(dir.path(), "train_path = \"x.conll\"\n");
    fs::write(dir.path().join("x.conll"), "Ada B-PER\n").unwrap();
    let err = cmd_train(&cfg).unwrap_err().to_string();
    assert!(err.contains("dev_path"), "{err}");
}

#[test]
fn shipped_configs_load_and_validate() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in fs::read_dir(&root).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            let cfg = ConfigFile::load(&path, &[]).unwrap();
            cfg.validate()
                .unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            seen += 1;
        }
    }
    assert!(seen >= 3);
}
