use std::path::Path;
use std::process::{Command, Output};

fn physadv(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_physadv"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = physadv(dir, args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn files_with(dir: &Path, prefix: &str, ext: &str) -> Vec<String> {
    let mut names: Vec<String> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.starts_with(prefix) && n.ends_with(ext))
        .collect();
    names.sort();
    names
}

#[test]
fn synth_train_test_finetune_evaluate() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    ok(dir, &["synth", "--case", "lift-balance", "--n", "300", "--seed", "1"]);
    let fast = ["--set", "train.epochs=10", "--set", "search.population=6", "--set", "search.iterations=4"];
    let with = |cmd: &str, extra: &[&str]| {
        let mut v = vec![cmd];
        v.extend_from_slice(&fast);
        v.extend_from_slice(extra);
        ok(dir, &v)
    };
    with("train", &[]);
    let stdout = with("test", &["--engine", "pso", "--engine", "rs"]);
    assert!(stdout.contains("%ValIn") && stdout.contains("%DupIn") && stdout.contains("#AdvIn"));
    let out = dir.join("out");
    assert_eq!(files_with(&out, "ax-pso-", ".jsonl").len(), 1);
    assert_eq!(files_with(&out, "ax-rs-", ".jsonl").len(), 1);

    let stats = files_with(&out, "stats-pso-rs-", ".json");
    assert_eq!(stats.len(), 1);
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join(&stats[0])).unwrap()).unwrap();
    let campaigns = report["campaigns"].as_array().unwrap();
    assert_eq!(campaigns.len(), 2);
    // equal budgets
    assert_eq!(campaigns[0]["generated"], campaigns[1]["generated"]);
    for c in campaigns {
        for key in ["val_in_pct", "dup_in_pct", "adv_in"] {
            assert!(c.get(key).is_some(), "{key}");
        }
    }

    with("finetune", &["--engine", "pso"]);
    assert_eq!(files_with(&out, "model-ft-pso-", ".json").len(), 1);
    let stdout = with("evaluate", &["--engine", "pso"]);
    assert!(stdout.contains("%Improv"));
    let csv = files_with(&out, "evaluate-pso-", ".csv");
    let text = std::fs::read_to_string(out.join(&csv[0])).unwrap();
    assert!(text.starts_with("SYS,ALG,G,dataset,metric,value"));
}

#[test]
fn unknown_rule_feature_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    ok(dir, &["synth", "--case", "lift-balance", "--n", "50"]);
    let rules = dir.join("lift-balance-rules.toml");
    let text = std::fs::read_to_string(&rules).unwrap().replacen("\"ACWT\"", "\"MASS\"", 1);
    std::fs::write(&rules, text).unwrap();
    let out = physadv(dir, &["train"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("r0") && err.contains("MASS"), "{err}");
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    assert_eq!(physadv(dir, &["frobnicate"]).status.code(), Some(1));
    assert_eq!(physadv(dir, &["train"]).status.code(), Some(1), "missing config");
    ok(dir, &["synth", "--case", "heat-balance", "--n", "40"]);
    assert_eq!(physadv(dir, &["train", "--set", "kfold.k=1"]).status.code(), Some(1));
    assert_eq!(physadv(dir, &["finetune", "--beta", "0.5"]).status.code(), Some(1));
    // no checkpoint yet
    assert_eq!(physadv(dir, &["test"]).status.code(), Some(2));
}

#[test]
fn kfold_is_reproducible_across_thread_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    ok(dir, &["synth", "--case", "lift-balance", "--n", "40", "--seed", "3"]);
    let args = |jobs: &'static str| {
        vec![
            "--jobs", jobs, "kfold", "--set", "kfold.k=2", "--set", "kfold.runs=1", "--set", "train.epochs=3",
            "--set", "search.population=4", "--set", "search.iterations=2", "--engine", "ga",
        ]
    };
    ok(dir, &args("1"));
    let out = dir.join("out");
    let report = files_with(&out, "kfold-", ".json");
    assert_eq!(report.len(), 1);
    let first = std::fs::read(out.join(&report[0])).unwrap();
    ok(dir, &args("3"));
    assert_eq!(std::fs::read(out.join(&report[0])).unwrap(), first);
}
