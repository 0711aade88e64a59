use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn forensic(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_forensic"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn synth(dir: &Path) -> std::path::PathBuf {
    let out = dir.join("statements.csv");
    let o = forensic(&[
        "synth",
        "--industry",
        "trade",
        "--n-per-class",
        "50",
        "--separation",
        "2",
        "--informative",
        "IVSA,TLTA",
        "--seed",
        "9",
        "--out",
        p(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    out
}

fn write_config(dir: &Path) -> std::path::PathBuf {
    let cfg = dir.join("cfg.toml");
    fs::write(
        &cfg,
        "seed = 5\ncv_k = 5\n\n[hyperparameters]\nn_trees = 20\nrounds = 20\n",
    )
    .unwrap();
    cfg
}

#[test]
fn synth_then_run_writes_all_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let input = synth(tmp.path());
    let out = tmp.path().join("out");
    let cfg = write_config(tmp.path());
    let o = forensic(&["run", "--config", p(&cfg), p(&input), "--out-dir", p(&out)]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    for f in ["manifest.json", "observations.csv", "rejections.csv"] {
        assert!(out.join(f).exists(), "{f}");
    }
    for f in [
        "correlation.csv",
        "evaluation.json",
        "folds.csv",
        "leaderboard.txt",
        "matching.json",
        "report.md",
        "rules.json",
        "selection.json",
        "tree.json",
    ] {
        assert!(out.join("trade").join(f).exists(), "trade/{f}");
    }
}

#[test]
fn missing_input_names_ingest_stage() {
    let tmp = tempfile::tempdir().unwrap();
    let o = forensic(&[
        "run",
        p(&tmp.path().join("absent.csv")),
        "--out-dir",
        p(&tmp.path().join("out")),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("ingest stage"));
}

#[test]
fn usage_errors_exit_one_and_help_exits_zero() {
    assert_eq!(forensic(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(forensic(&["run", "--seed", "abc"]).status.code(), Some(1));
    assert_eq!(forensic(&["--help"]).status.code(), Some(0));
}

#[test]
fn bad_config_is_a_data_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.toml");
    fs::write(&cfg, "cv_k = 1\n").unwrap();
    let o = forensic(&["run", "--config", p(&cfg), "x.csv"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("config stage"));
}

#[test]
fn repeated_runs_have_identical_manifests() {
    let tmp = tempfile::tempdir().unwrap();
    let input = synth(tmp.path());
    let cfg = write_config(tmp.path());
    let run = |name: &str| {
        let out = tmp.path().join(name);
        assert!(
            forensic(&["run", "--config", p(&cfg), p(&input), "--out-dir", p(&out)])
                .status
                .success()
        );
        fs::read(out.join("manifest.json")).unwrap()
    };
    assert_eq!(run("a"), run("b"));
}

#[test]
fn flags_override_config_and_change_hash() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path());
    let show = |extra: &[&str]| {
        let mut args = vec!["run", "--config", p(&cfg), "--print-config"];
        args.extend_from_slice(extra);
        String::from_utf8(forensic(&args).stdout).unwrap()
    };
    assert!(show(&[]).contains("seed = 5"));
    let overridden = show(&["--seed", "77", "--hard-auc"]);
    assert!(overridden.contains("seed = 77"));
    assert!(overridden.contains("hard_auc = true"));
}

#[test]
fn ratios_then_train_matches_run() {
    let tmp = tempfile::tempdir().unwrap();
    let input = synth(tmp.path());
    let cfg = write_config(tmp.path());
    let obs = tmp.path().join("obs.csv");
    assert!(forensic(&["ratios", p(&input), "--out", p(&obs)])
        .status
        .success());
    let trained = tmp.path().join("trained");
    let o = forensic(&[
        "train",
        "--config",
        p(&cfg),
        "--observations",
        p(&obs),
        "--out-dir",
        p(&trained),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let full = tmp.path().join("full");
    assert!(
        forensic(&["run", "--config", p(&cfg), p(&input), "--out-dir", p(&full)])
            .status
            .success()
    );
    for f in ["evaluation.json", "rules.json", "report.md", "folds.csv"] {
        assert_eq!(
            fs::read(trained.join("trade").join(f)).unwrap(),
            fs::read(full.join("trade").join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn rules_subcommand_reads_tree() {
    let tmp = tempfile::tempdir().unwrap();
    let input = synth(tmp.path());
    let cfg = write_config(tmp.path());
    let out = tmp.path().join("out");
    assert!(
        forensic(&["run", "--config", p(&cfg), p(&input), "--out-dir", p(&out)])
            .status
            .success()
    );
    let rules_json = tmp.path().join("rules.json");
    let o = forensic(&[
        "rules",
        "--tree",
        p(&out.join("trade/tree.json")),
        "--industry",
        "trade",
        "--out",
        p(&rules_json),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(
        fs::read(&rules_json).unwrap(),
        fs::read(out.join("trade/rules.json")).unwrap()
    );
}
