//! End-to-end runs of the `drivestyle` binary.

mod common;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use drivestyle::eval::{ReportDocument, TRACE_HEADER};
use drivestyle::telemetry::{extract_features, load_corpus, save_corpus};
use drivestyle::{ClassifierModel, DriverClass, Feature, Label};
use tempfile::TempDir;

fn drivestyle(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_drivestyle"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = drivestyle(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn path(dir: &TempDir, name: &str) -> PathBuf {
    dir.path().join(name)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Small corpus: rows 1-3 of each class, 400 samples per run.
fn small_corpus(dir: &TempDir) -> PathBuf {
    let out = path(dir, "corpus.csv");
    ok(&[
        "gen",
        "--rows",
        "1,2,3,10,11,12",
        "--runs-per",
        "3",
        "--run-length",
        "400",
        "--seed",
        "11",
        "-o",
        s(&out),
    ]);
    out
}

#[test]
fn gen_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let a = path(&dir, "a.csv");
    let b = path(&dir, "b.csv");
    for p in [&a, &b] {
        ok(&["gen", "--run-length", "200", "--seed", "5", "-o", s(p)]);
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let runs = load_corpus(&a).unwrap();
    assert_eq!(runs.len(), 18);
    assert!(runs.iter().all(|r| r.len() == 200));

    let c = path(&dir, "c.csv");
    ok(&["gen", "--run-length", "200", "--seed", "6", "-o", s(&c)]);
    assert_ne!(fs::read(&a).unwrap(), fs::read(&c).unwrap());
}

#[test]
fn missing_required_flag_is_a_usage_error() {
    let out = drivestyle(&["gen"]);
    assert_eq!(out.status.code(), Some(2));
    let out = drivestyle(&["train", "-i", "x.csv"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bad_bandwidth_is_a_usage_error() {
    let out = drivestyle(&[
        "train",
        "-i",
        "x.csv",
        "-o",
        "m.json",
        "--bandwidth",
        "speed=-1",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_input_is_a_runtime_error() {
    let dir = TempDir::new().unwrap();
    let out = drivestyle(&[
        "train",
        "-i",
        s(&path(&dir, "nope.csv")),
        "-o",
        s(&path(&dir, "m.json")),
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn train_records_fixed_bandwidths() {
    let dir = TempDir::new().unwrap();
    let corpus = small_corpus(&dir);
    let model_path = path(&dir, "model.json");
    ok(&[
        "train",
        "-i",
        s(&corpus),
        "-o",
        s(&model_path),
        "--bandwidth",
        "speed=4.0,throttle=0.05",
    ]);
    let model = ClassifierModel::load(&model_path).unwrap();
    for class in DriverClass::ALL {
        assert_eq!(model.kde(Feature::Speed, class).bandwidth(), 4.0);
        assert_eq!(model.kde(Feature::Throttle, class).bandwidth(), 0.05);
    }
}

#[test]
fn train_auto_bandwidth_follows_rule_of_thumb() {
    let dir = TempDir::new().unwrap();
    let corpus = small_corpus(&dir);
    let model_path = path(&dir, "model.json");
    ok(&[
        "train",
        "-i",
        s(&corpus),
        "-o",
        s(&model_path),
        "--bandwidth",
        "auto",
    ]);
    let model = ClassifierModel::load(&model_path).unwrap();
    let runs = load_corpus(&corpus).unwrap();
    for class in DriverClass::ALL {
        let mut speed = Vec::new();
        let mut throttle = Vec::new();
        for run in runs.iter().filter(|r| r.class().unwrap() == class) {
            for f in extract_features(run).unwrap() {
                speed.push(f.speed);
                throttle.push(f.throttle);
            }
        }
        let want_s = common::silverman(&speed);
        let want_t = common::silverman(&throttle);
        assert!(common::rel_diff(model.kde(Feature::Speed, class).bandwidth(), want_s) < 1e-12);
        assert!(common::rel_diff(model.kde(Feature::Throttle, class).bandwidth(), want_t) < 1e-12);
    }
}

#[test]
fn train_rejects_single_class_corpus() {
    let dir = TempDir::new().unwrap();
    let corpus = path(&dir, "agg.csv");
    ok(&[
        "gen",
        "--rows",
        "1,2",
        "--run-length",
        "100",
        "-o",
        s(&corpus),
    ]);
    let out = drivestyle(&["train", "-i", s(&corpus), "-o", s(&path(&dir, "m.json"))]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("normal"));
}

#[test]
fn classify_writes_one_row_per_sample() {
    let dir = TempDir::new().unwrap();
    let corpus = small_corpus(&dir);
    let model = path(&dir, "model.json");
    ok(&["train", "-i", s(&corpus), "-o", s(&model)]);

    // strip the labels: classification must not need them
    let mut runs = load_corpus(&corpus).unwrap();
    for r in &mut runs {
        r.label = Label::Unlabeled;
    }
    let unlabeled = path(&dir, "unlabeled.csv");
    save_corpus(&runs, &unlabeled).unwrap();
    let total: usize = runs.iter().map(|r| r.len()).sum();

    for method in ["proposed", "fuzzy"] {
        let trace = path(&dir, &format!("{method}.csv"));
        ok(&[
            "classify",
            "-m",
            s(&model),
            "-i",
            s(&unlabeled),
            "-o",
            s(&trace),
            "--method",
            method,
        ]);
        let mut reader = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .from_path(&trace)
            .unwrap();
        let header: Vec<String> = reader.headers().unwrap().iter().map(String::from).collect();
        assert_eq!(header, TRACE_HEADER);
        let rows: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
        assert_eq!(rows.len(), total);
        for row in &rows {
            let level: drivestyle::StyleLevel = row[2].parse().unwrap();
            assert_eq!(row[3], *level.binary_class().as_str());
            assert_eq!(row[4].is_empty(), method == "fuzzy");
        }
    }
}

#[test]
fn fuzzy_classify_needs_no_model() {
    let dir = TempDir::new().unwrap();
    let corpus = small_corpus(&dir);
    ok(&[
        "classify",
        "-i",
        s(&corpus),
        "-o",
        s(&path(&dir, "t.csv")),
        "--method",
        "fuzzy",
    ]);
    let out = drivestyle(&["classify", "-i", s(&corpus), "-o", s(&path(&dir, "u.csv"))]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn eval_is_reproducible_and_loadable() {
    let dir = TempDir::new().unwrap();
    let corpus = path(&dir, "corpus.csv");
    ok(&[
        "gen",
        "--run-length",
        "300",
        "--seed",
        "3",
        "-o",
        s(&corpus),
    ]);
    let total: usize = load_corpus(&corpus).unwrap().iter().map(|r| r.len()).sum();

    let mut reports = Vec::new();
    for name in ["r1", "r2"] {
        let prefix = path(&dir, name);
        ok(&["eval", "-i", s(&corpus), "-o", s(&prefix), "--seed", "99"]);
        let json = fs::read(prefix.with_extension("json")).unwrap();
        let text = fs::read(prefix.with_extension("txt")).unwrap();
        let traces: Vec<Vec<u8>> = ["proposed", "fuzzy"]
            .iter()
            .map(|m| fs::read(dir.path().join(format!("{name}.{m}.traces.csv"))).unwrap())
            .collect();
        reports.push((json, text, traces));
    }
    assert_eq!(reports[0], reports[1]);

    let doc = ReportDocument::load(path(&dir, "r1.json")).unwrap();
    assert_eq!(doc.metadata.seed, 99);
    assert_eq!(doc.reports.len(), 2);
    for report in &doc.reports {
        // 4 of 9 folds validate; two runs per fold
        assert_eq!(report.runs.len(), 8);
        for class in DriverClass::ALL {
            let crr = report.average(class).unwrap();
            assert!((0.0..=1.0).contains(&crr));
        }
    }
    let validated: u64 = doc.reports[0]
        .runs
        .iter()
        .map(|r| r.level_counts.total())
        .sum();
    assert_eq!(validated as usize, total / 18 * 8);
    for m in ["proposed", "fuzzy"] {
        let trace = fs::read_to_string(dir.path().join(format!("r1.{m}.traces.csv"))).unwrap();
        let rows = trace.lines().filter(|l| !l.starts_with('#')).count() - 1;
        assert_eq!(rows as u64, validated);
    }
}

#[test]
fn config_file_supplies_defaults() {
    let dir = TempDir::new().unwrap();
    let cfg = path(&dir, "cfg.json");
    fs::write(&cfg, r#"{"seed": 5, "run_length": 200}"#).unwrap();
    let a = path(&dir, "a.csv");
    let b = path(&dir, "b.csv");
    ok(&["--config", s(&cfg), "gen", "-o", s(&a)]);
    ok(&["gen", "--run-length", "200", "--seed", "5", "-o", s(&b)]);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());

    fs::write(&cfg, r#"{"sead": 5}"#).unwrap();
    let out = drivestyle(&["--config", s(&cfg), "gen", "-o", s(&a)]);
    assert_ne!(out.status.code(), Some(0));
}
