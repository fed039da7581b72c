use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn setconv() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_setconv"));
    // keep the caller's environment from leaking into flag defaults
    for (key, _) in std::env::vars() {
        if key.starts_with("SETCONV_") {
            cmd.env_remove(key);
        }
    }
    cmd
}

fn run(args: &[&str], dir: &Path) -> Output {
    setconv().args(args).current_dir(dir).output().expect("binary runs")
}

fn ok(args: &[&str], dir: &Path) -> String {
    let out = run(args, dir);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

const SMALL: &[&str] = &["--support-size", "16", "--d-out", "8", "--hidden", "8", "--iterations", "40"];

fn synth(dir: &Path, name: &str, counts: &str, dim: &str, seed: &str) -> PathBuf {
    ok(&["synth", "--counts", counts, "--dim", dim, "--sep", "4", "--seed", seed, "--out", name], dir);
    dir.join(name)
}

fn train(dir: &Path, data: &str, model: &str, extra: &[&str]) -> String {
    let mut args = vec!["train", "--data", data, "--model-out", model, "--seed", "9"];
    args.extend_from_slice(SMALL);
    args.extend_from_slice(extra);
    ok(&args, dir)
}

#[test]
fn synth_prints_counts_and_ir_and_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let out = ok(
        &["synth", "--classes", "2", "--counts", "900,100", "--dim", "16", "--sep", "4", "--seed", "7", "--out", "a.csv"],
        dir.path(),
    );
    assert!(out.contains("counts=900,100"));
    assert!(out.contains("ir=9.00"));
    let text = fs::read_to_string(dir.path().join("a.csv")).unwrap();
    assert_eq!(text.lines().count(), 1001);
    assert!(text.starts_with("f0,f1,"));

    ok(
        &["synth", "--classes", "2", "--counts", "900,100", "--dim", "16", "--sep", "4", "--seed", "7", "--out", "b.csv"],
        dir.path(),
    );
    assert_eq!(fs::read(dir.path().join("a.csv")).unwrap(), fs::read(dir.path().join("b.csv")).unwrap());
}

#[test]
fn synth_usage_errors() {
    let dir = TempDir::new().unwrap();
    let missing = run(&["synth", "--dim", "16", "--sep", "4", "--out", "x.csv"], dir.path());
    assert_eq!(code(&missing), 2);
    let mismatch = run(
        &["synth", "--classes", "3", "--counts", "9,1", "--dim", "4", "--sep", "4", "--out", "x.csv"],
        dir.path(),
    );
    assert_eq!(code(&mismatch), 2);
    assert!(!dir.path().join("x.csv").exists());
}

#[test]
fn environment_supplies_flags() {
    let dir = TempDir::new().unwrap();
    let out = setconv()
        .args(["synth", "--dim", "4", "--sep", "3", "--out", "env.csv"])
        .env("SETCONV_COUNTS", "30,10")
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("counts=30,10"));
}

#[test]
fn train_writes_model_and_loss_log() {
    let dir = TempDir::new().unwrap();
    synth(dir.path(), "d.csv", "90,30", "4", "1");
    let out = train(dir.path(), "d.csv", "m.bin", &["--loss-log", "loss.csv"]);
    assert!(out.contains("train_rows=84 test_rows=36"), "{out}");
    assert!(out.contains("final_loss="));
    let log = fs::read_to_string(dir.path().join("loss.csv")).unwrap();
    let mut lines = log.lines();
    assert_eq!(lines.next(), Some("iteration,loss"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 40);
    for (i, row) in rows.iter().enumerate() {
        let (it, loss) = row.split_once(',').unwrap();
        assert_eq!(it.parse::<usize>().unwrap(), i);
        assert!(loss.parse::<f64>().unwrap() >= 0.0);
    }
}

#[test]
fn zero_iterations_still_give_a_usable_model() {
    let dir = TempDir::new().unwrap();
    synth(dir.path(), "d.csv", "40,20", "3", "2");
    let out = train(dir.path(), "d.csv", "m.bin", &["--iterations", "0"]);
    assert!(out.contains("final_loss=none"));
    let report = ok(&["eval", "--data", "d.csv", "--model", "m.bin"], dir.path());
    assert_eq!(report.lines().count(), 2);
}

#[test]
fn same_seed_same_bytes() {
    let dir = TempDir::new().unwrap();
    synth(dir.path(), "d.csv", "60,20", "4", "3");
    train(dir.path(), "d.csv", "a.bin", &["--loss-log", "a.csv"]);
    train(dir.path(), "d.csv", "b.bin", &["--loss-log", "b.csv"]);
    let read = |n: &str| fs::read(dir.path().join(n)).unwrap();
    assert_eq!(read("a.bin"), read("b.bin"));
    assert_eq!(read("a.csv"), read("b.csv"));
    train(dir.path(), "d.csv", "c.bin", &["--seed", "10"]);
    assert_ne!(read("a.bin"), read("c.bin"));
}

#[test]
fn binary_mode_rejects_three_classes() {
    let dir = TempDir::new().unwrap();
    synth(dir.path(), "d.csv", "40,20,20", "4", "4");
    let mut args = vec!["train", "--data", "d.csv", "--model-out", "m.bin"];
    args.extend_from_slice(SMALL);
    assert_eq!(code(&run(&args, dir.path())), 2);
}

#[test]
fn eval_reports_every_metric_per_class() {
    let dir = TempDir::new().unwrap();
    synth(dir.path(), "d.csv", "90,30", "4", "5");
    train(dir.path(), "d.csv", "m.bin", &[]);
    for split in ["train", "test", "all"] {
        let out = ok(
            &["eval", "--data", "d.csv", "--model", "m.bin", "--split", split, "--report-out", "r.csv"],
            dir.path(),
        );
        let lines: Vec<&str> = out.lines().collect();
        assert_eq!(lines.len(), 2);
        for (c, line) in lines.iter().enumerate() {
            assert!(line.starts_with(&format!("class={c} ")));
            for key in ["spec=", "sens=", "f1=", "g_mean=", "auc="] {
                assert!(line.contains(key), "{line}");
            }
        }
        let support: usize = lines
            .iter()
            .map(|l| l.split(' ').find_map(|kv| kv.strip_prefix("support=")).unwrap().parse::<usize>().unwrap())
            .sum();
        let expected = match split {
            "train" => 84,
            "test" => 36,
            _ => 120,
        };
        assert_eq!(support, expected);
        let csv = fs::read_to_string(dir.path().join("r.csv")).unwrap();
        assert_eq!(csv.lines().count(), 3);
    }
    assert!(ok(&["eval", "--data", "d.csv", "--model", "m.bin"], dir.path()).contains("role=minority"));
}

#[test]
fn eval_is_byte_stable() {
    let dir = TempDir::new().unwrap();
    synth(dir.path(), "d.csv", "50,25", "3", "6");
    train(dir.path(), "d.csv", "m.bin", &[]);
    let a = ok(&["eval", "--data", "d.csv", "--model", "m.bin", "--report-out", "a.csv"], dir.path());
    let b = ok(&["eval", "--data", "d.csv", "--model", "m.bin", "--report-out", "b.csv"], dir.path());
    assert_eq!(a, b);
    assert_eq!(fs::read(dir.path().join("a.csv")).unwrap(), fs::read(dir.path().join("b.csv")).unwrap());
}

#[test]
fn compatibility_and_data_errors_have_distinct_codes() {
    let dir = TempDir::new().unwrap();
    synth(dir.path(), "d16.csv", "40,20", "16", "7");
    synth(dir.path(), "d8.csv", "40,20", "8", "7");
    synth(dir.path(), "other.csv", "30,20", "16", "8");
    train(dir.path(), "d16.csv", "m.bin", &["--iterations", "5"]);

    let dim = run(&["eval", "--data", "d8.csv", "--model", "m.bin", "--split", "all"], dir.path());
    assert_eq!(code(&dim), 4);
    assert!(String::from_utf8_lossy(&dim.stderr).contains("16"));
    let rows = run(&["eval", "--data", "other.csv", "--model", "m.bin"], dir.path());
    assert_eq!(code(&rows), 4);
    assert!(run(&["eval", "--data", "other.csv", "--model", "m.bin", "--split", "all"], dir.path()).status.success());

    let missing = run(&["eval", "--data", "nope.csv", "--model", "m.bin"], dir.path());
    assert_eq!(code(&missing), 3);

    let bytes = fs::read(dir.path().join("m.bin")).unwrap();
    fs::write(dir.path().join("cut.bin"), &bytes[..bytes.len() / 2]).unwrap();
    assert_eq!(code(&run(&["eval", "--data", "d16.csv", "--model", "cut.bin"], dir.path())), 3);
    let mut future = bytes.clone();
    future[8..12].copy_from_slice(&99u32.to_le_bytes());
    fs::write(dir.path().join("future.bin"), future).unwrap();
    assert_eq!(code(&run(&["eval", "--data", "d16.csv", "--model", "future.bin"], dir.path())), 4);

    fs::write(dir.path().join("bad.csv"), "f0,label\n1.0,0\nx,1\n").unwrap();
    let bad = run(&["train", "--data", "bad.csv", "--model-out", "z.bin"], dir.path());
    assert_eq!(code(&bad), 3);
    assert!(String::from_utf8_lossy(&bad.stderr).contains("bad.csv:3:"));
}

fn parse_predictions(text: &str) -> Vec<(usize, Vec<f64>)> {
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("prediction,score_0"));
    lines
        .map(|l| {
            let mut cells = l.split(',');
            let label = cells.next().unwrap().parse().unwrap();
            (label, cells.map(|c| c.parse().unwrap()).collect())
        })
        .collect()
}

fn features_only(dir: &Path, labelled: &str, out: &str, rows: usize) {
    let text = fs::read_to_string(dir.join(labelled)).unwrap();
    let kept: Vec<String> = text
        .lines()
        .take(rows + 1)
        .map(|l| l.rsplit_once(',').unwrap().0.to_string())
        .collect();
    fs::write(dir.join(out), kept.join("\n") + "\n").unwrap();
}

#[test]
fn binary_predictions_are_normalized() {
    let dir = TempDir::new().unwrap();
    synth(dir.path(), "d.csv", "60,20", "4", "11");
    train(dir.path(), "d.csv", "m.bin", &[]);
    features_only(dir.path(), "d.csv", "x.csv", 10);
    ok(&["predict", "--data", "x.csv", "--model", "m.bin", "--out", "p.csv"], dir.path());
    let preds = parse_predictions(&fs::read_to_string(dir.path().join("p.csv")).unwrap());
    assert_eq!(preds.len(), 10);
    for (label, scores) in preds {
        assert_eq!(scores.len(), 2);
        assert!((scores[0] + scores[1] - 1.0).abs() <= 1e-12);
        // exact ties go to the minority class (label 1 here)
        let expected = if scores[1] >= scores[0] { 1 } else { 0 };
        assert_eq!(label, expected);
    }
    // the labelled file works too when its label column is named
    let stdout = ok(&["predict", "--data", "d.csv", "--label-col", "label", "--model", "m.bin"], dir.path());
    assert_eq!(parse_predictions(&stdout).len(), 80);
}

#[test]
fn multiclass_predictions_follow_the_argmax() {
    let dir = TempDir::new().unwrap();
    synth(dir.path(), "d.csv", "60,30,20", "4", "12");
    let out = train(dir.path(), "d.csv", "m.bin", &["--mode", "multiclass", "--loss-log", "l.csv"]);
    assert_eq!(out.matches("final_loss=").count(), 3);
    let log = fs::read_to_string(dir.path().join("l.csv")).unwrap();
    assert!(log.starts_with("head,iteration,loss\n"));
    assert_eq!(log.lines().count(), 1 + 3 * 40);

    features_only(dir.path(), "d.csv", "x.csv", 25);
    let preds = parse_predictions(&ok(&["predict", "--data", "x.csv", "--model", "m.bin"], dir.path()));
    assert_eq!(preds.len(), 25);
    for (label, scores) in preds {
        assert_eq!(scores.len(), 3);
        let mut best = 0;
        for c in 1..3 {
            if scores[c] > scores[best] {
                best = c;
            }
        }
        assert_eq!(label, best);
    }
    let report = ok(&["eval", "--data", "d.csv", "--model", "m.bin"], dir.path());
    assert_eq!(report.lines().count(), 3);
}
