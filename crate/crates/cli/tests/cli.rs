use std::collections::BTreeSet;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn hooptraj(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hooptraj")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = hooptraj(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn code(args: &[&str]) -> i32 {
    hooptraj(args).status.code().unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Small simulated dataset prepared with fast model settings.
fn prepared(tmp: &TempDir, n: &str) -> (String, String) {
    let raw = tmp.path().join("raw");
    let prep = tmp.path().join("prep");
    ok(&["simulate", "--n", n, "--seed", "4", "--out", p(&raw)]);
    ok(&["prepare", "--raw", p(&raw), "--out", p(&prep)]);
    (p(&raw).to_string(), p(&prep).to_string())
}

const FAST: [&str; 4] = ["--set", "data.distances=4,8", "--set", "enet.select_lambda=false"];

#[test]
fn help_lists_flags_with_defaults() {
    for sub in ["simulate", "ingest", "prepare", "train", "evaluate", "sweep", "sanity"] {
        let out = ok(&[sub, "--help"]);
        assert!(out.contains("--config") && out.contains("--set"), "{sub}");
    }
    let train = ok(&["train", "--help"]);
    assert!(train.contains("--train-fraction") && train.contains("[default: xyz]"));
    assert!(ok(&["simulate", "--help"]).contains("[default: data/raw]"));
}

#[test]
fn simulate_writes_distinct_ids_and_is_deterministic() {
    let tmp = TempDir::new().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    ok(&["simulate", "--n", "100", "--seed", "9", "--out", p(&a)]);
    ok(&["simulate", "--n", "100", "--seed", "9", "--out", p(&b)]);
    for f in ["tracking.csv", "labels.csv", "manifest.txt"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let ids = |f: &str| -> BTreeSet<String> {
        fs::read_to_string(a.join(f))
            .unwrap()
            .lines()
            .skip(1)
            .map(|l| l.split(',').next().unwrap().to_string())
            .collect()
    };
    assert_eq!(ids("tracking.csv").len(), 100);
    assert_eq!(ids("tracking.csv"), ids("labels.csv"));
}

#[test]
fn config_errors_exit_with_2() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("x");
    assert_eq!(code(&["--set", "rnn.hiden=3", "simulate", "--n", "5", "--out", p(&out)]), 2);
    assert_eq!(code(&["--set", "rnn.dropout_rate=2", "simulate", "--n", "5", "--out", p(&out)]), 2);
    let cfg = tmp.path().join("bad.conf");
    fs::write(&cfg, "gbm.n_trees = many\n").unwrap();
    assert_eq!(code(&["--config", p(&cfg), "simulate", "--n", "5", "--out", p(&out)]), 2);
    assert_eq!(code(&["train", "--model", "svm"]), 2);
}

#[test]
fn missing_inputs_exit_with_3() {
    let tmp = TempDir::new().unwrap();
    let missing = tmp.path().join("nothing");
    assert_eq!(code(&["prepare", "--raw", p(&missing), "--out", p(&tmp.path().join("o"))]), 3);
}

#[test]
fn rnn_with_full_features_is_a_config_error() {
    let tmp = TempDir::new().unwrap();
    let (_, prep) = prepared(&tmp, "300");
    let out = tmp.path().join("runs");
    assert_eq!(code(&["train", "--model", "rnn", "--features", "full", "--data", &prep, "--out", p(&out)]), 2);
}

#[test]
fn locked_output_directory_is_refused() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("busy");
    fs::create_dir_all(&out).unwrap();
    fs::write(out.join(".hooptraj.lock"), "").unwrap();
    assert_eq!(code(&["simulate", "--n", "5", "--out", p(&out)]), 2);
}

#[test]
fn train_and_evaluate_are_reproducible() {
    let tmp = TempDir::new().unwrap();
    let (_, prep) = prepared(&tmp, "1500");
    let (r1, r2) = (tmp.path().join("r1"), tmp.path().join("r2"));
    for r in [&r1, &r2] {
        let mut args = FAST.to_vec();
        args.extend(["train", "--model", "gbm", "--features", "full", "--data", &prep, "--out", p(r)]);
        ok(&args);
    }
    let ckpt = "gbm_full.ckpt";
    assert_eq!(fs::read(r1.join(ckpt)).unwrap(), fs::read(r2.join(ckpt)).unwrap());

    let log = fs::read_to_string(r1.join("gbm_full_8ft.log.csv")).unwrap();
    let losses: Vec<f64> = log.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert_eq!(losses.len(), 51);
    assert!(losses.windows(2).all(|w| w[1] <= w[0]));

    let (e1, e2) = (tmp.path().join("e1"), tmp.path().join("e2"));
    for e in [&e1, &e2] {
        let mut args = FAST.to_vec();
        let c = r1.join(ckpt);
        args.extend(["evaluate", "--checkpoint", p(&c), "--data", &prep, "--out", p(e)]);
        ok(&args);
    }
    for f in ["report.csv", "report.md", "report_plot.csv"] {
        assert_eq!(fs::read(e1.join(f)).unwrap(), fs::read(e2.join(f)).unwrap(), "{f}");
    }
    let csv = fs::read_to_string(e1.join("report.csv")).unwrap();
    assert!(csv.lines().nth(1).unwrap() == "model,features,distance_ft,auc,n_eval");
}

#[test]
fn constant_score_checkpoint_scores_one_half() {
    let tmp = TempDir::new().unwrap();
    let (_, prep) = prepared(&tmp, "1000");
    let runs = tmp.path().join("runs");
    let mut args = FAST.to_vec();
    args.extend(["train", "--model", "gbm", "--features", "xyz", "--data", &prep, "--out", p(&runs)]);
    ok(&args);
    // Dropping every tree leaves only the prior log-odds.
    let ckpt = runs.join("gbm_xyz.ckpt");
    let text = fs::read_to_string(&ckpt).unwrap();
    let stripped: String = text.lines().filter(|l| !l.starts_with("tree = ")).map(|l| format!("{l}\n")).collect();
    let dummy = tmp.path().join("dummy.ckpt");
    fs::write(&dummy, stripped).unwrap();
    let eval = tmp.path().join("eval");
    let mut args = FAST.to_vec();
    args.extend(["evaluate", "--checkpoint", p(&dummy), "--data", &prep, "--out", p(&eval)]);
    ok(&args);
    let csv = fs::read_to_string(eval.join("report.csv")).unwrap();
    let aucs: Vec<&str> = csv.lines().skip(2).map(|l| l.split(',').nth(3).unwrap()).collect();
    assert_eq!(aucs, vec!["0.5", "0.5"]);
}

#[test]
fn sanity_subcommand_runs() {
    let out = ok(&["sanity", "--task", "sine", "--steps", "5"]);
    assert!(out.contains("held-out MSE"));
}
