use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn cslm(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cslm"))
        .current_dir(dir)
        .env("CSLM_LOG", "warn")
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const GEN: &str = "n_train = 300\nn_dev = 80\nn_test = 80\nvocab_per_pos = 4\nhomograph_rate = 0.3\n";
const SMALL: [&str; 8] = ["--hidden", "6", "--max-epochs", "2", "--set", "batch=4", "--set", "unroll=8"];

fn generated(dir: &Path, seed: &str, out: &str) -> PathBuf {
    fs::write(dir.join("gen.toml"), GEN).unwrap();
    let o = cslm(dir, &["generate", "--config", "gen.toml", "--seed", seed, "--out", out]);
    assert!(o.status.success(), "{}", stderr(&o));
    dir.join(out)
}

fn file_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap())
        .filter(|e| e.file_name() != "run.json")
        .map(|e| (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap()))
        .collect();
    v.sort();
    v
}

#[test]
fn generate_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let a = generated(tmp.path(), "7", "a");
    let b = generated(tmp.path(), "7", "b");
    assert_eq!(file_bytes(&a), file_bytes(&b));
    let c = generated(tmp.path(), "8", "c");
    assert_ne!(file_bytes(&a), file_bytes(&c));

    let ma: serde_json::Value = serde_json::from_str(&fs::read_to_string(a.join("run.json")).unwrap()).unwrap();
    assert_eq!(ma["command"], "generate");
    assert_eq!(ma["seed"], 7);
}

#[test]
fn missing_corpus_is_a_validation_error() {
    let tmp = tempfile::tempdir().unwrap();
    let o = cslm(tmp.path(), &["train", "--data", "no_such_dir"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("no_such_dir"), "{}", stderr(&o));
}

#[test]
fn usage_errors_exit_one() {
    let tmp = tempfile::tempdir().unwrap();
    let none = cslm(tmp.path(), &[]);
    assert_eq!(none.status.code(), Some(1));
    assert!(stderr(&none).contains("Usage"));
    let unknown = cslm(tmp.path(), &["train", "--no-such-flag"]);
    assert_eq!(unknown.status.code(), Some(1));
    let sub = cslm(tmp.path(), &["frobnicate"]);
    assert_eq!(sub.status.code(), Some(1));
    let bad_key = cslm(tmp.path(), &["train", "--set", "hiden=3"]);
    assert_eq!(bad_key.status.code(), Some(1));
    assert!(stderr(&bad_key).contains("hiden"));
}

#[test]
fn train_eval_analyze_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let data = generated(dir, "3", "data");
    let before = file_bytes(&data);

    let mut args = vec!["train", "--data", "data", "--out", "run"];
    args.extend(SMALL);
    let o = cslm(dir, &args);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(dir.join("run/best.ckpt").is_file());
    let metrics = fs::read_to_string(dir.join("run/metrics.jsonl")).unwrap();
    assert_eq!(metrics.lines().count(), 2);
    let train_out = stdout(&o);

    let e = cslm(dir, &["eval", "--ckpt", "run/best.ckpt", "--split", "test"]);
    assert!(e.status.success(), "{}", stderr(&e));
    let text = stdout(&e);
    let value = |label: &str| -> f64 {
        text.lines()
            .find_map(|l| l.strip_prefix(label))
            .unwrap_or_else(|| panic!("no {label} in {text}"))
            .trim()
            .parse()
            .unwrap()
    };
    let (lm, total) = (value("ppl_lm "), value("ppl_total "));
    assert!(lm > 1.0 && total > 1.0);
    // Same number as the training run's own test report.
    assert!(train_out.contains(&format!("test ppl_lm {lm:.4}")), "{train_out}");
    assert!(dir.join("run/eval-test.run.json").is_file());

    let c = cslm(
        dir,
        &["analyze", "compare", "--a", "run/best.ckpt", "--b", "run/best.ckpt", "--out", "cmp.csv"],
    );
    assert!(c.status.success(), "{}", stderr(&c));
    let csv = fs::read_to_string(dir.join("cmp.csv")).unwrap();
    assert!(csv.starts_with("utterance,position,token,target,logp_a,logp_b,delta,p_next_zh,is_switch_point"));
    assert!(csv.lines().skip(1).all(|l| l.split(',').nth(6) == Some("0.0")));

    let n = cslm(
        dir,
        &["analyze", "nextlang", "--ckpt", "run/best.ckpt", "--utterances", "0,2", "--out", "nl.csv"],
    );
    assert!(n.status.success(), "{}", stderr(&n));
    let t = cslm(dir, &["analyze", "triggers", "--split", "train", "--out", "tr.csv"]);
    assert!(t.status.success(), "{}", stderr(&t));
    assert!(fs::read_to_string(dir.join("tr.csv")).unwrap().starts_with("POS Tag,Freq,relative"));

    assert_eq!(file_bytes(&data), before, "inputs were modified");
}

#[test]
fn lm_only_checkpoint_has_no_next_lang() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    generated(dir, "4", "data");
    let mut args = vec!["train", "--out", "lm", "--mode", "lm_only"];
    args.extend(SMALL);
    assert!(cslm(dir, &args).status.success());
    let o = cslm(dir, &["analyze", "nextlang", "--ckpt", "lm/best.ckpt", "--out", "nl.csv"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("lm_only"));
}

#[test]
fn sweep_writes_table() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    generated(dir, "5", "data");
    fs::write(
        dir.join("grid.toml"),
        "hidden = [4]\nloss_weight = [0.25, 0.5]\nmodes = [\"multitask\", \"lm_only\"]\nseeds = [1]\n",
    )
    .unwrap();
    let mut args = vec!["sweep", "--grid", "grid.toml", "--out", "sweep.csv"];
    args.extend(&SMALL[2..]);
    let o = cslm(dir, &args);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(dir.join("sweep.csv")).unwrap();
    let mut lines = csv.lines();
    assert!(lines.next().unwrap().starts_with("Hidden size,p,PPL Dev,PPL Test,mode,seed"));
    assert_eq!(lines.count(), 3);
    assert!(dir.join("sweep.csv.run.json").is_file());
}

#[test]
fn stats_prints_json() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    fs::write(dir.join("w.txt"), "我 要 去 check\n").unwrap();
    fs::write(dir.join("t.txt"), "PN_zh VV_zh VV_zh VB_en\n").unwrap();
    let o = cslm(dir, &["stats", "--words", "w.txt", "--tags", "t.txt"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["n_utterances"], 1);
    assert_eq!(v["avg_switches"], 1.0);
    assert_eq!(v["avg_segment_length"], 2.0);

    fs::write(dir.join("t.txt"), "PN_zh VV_zh VV_zh\n").unwrap();
    let bad = cslm(dir, &["stats", "--words", "w.txt", "--tags", "t.txt"]);
    assert_eq!(bad.status.code(), Some(1));
    assert!(stderr(&bad).contains("w.txt:1"), "{}", stderr(&bad));
}
