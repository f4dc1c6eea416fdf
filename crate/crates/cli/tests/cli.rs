use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn polarlens(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_polarlens"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = polarlens(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

const GLOBAL: [&str; 6] = ["--work-dir", "w", "--catalogs", "data/catalogs", "--seeds", "data/seeds"];

fn with_global<'a>(args: &[&'a str]) -> Vec<&'a str> {
    GLOBAL.iter().copied().chain(args.iter().copied()).collect()
}

fn synth(dir: &Path) {
    fs::write(
        dir.join("spec.json"),
        r#"{"n_users": 240, "tweets_per_user": 14, "p_in": 0.08, "rng_seed": 5}"#,
    )
    .unwrap();
    ok(
        dir,
        &["synth", "--spec", "spec.json", "--out", "data/corpus.jsonl", "--truth", "data/truth.csv", "--world", "data"],
    );
}

#[test]
fn full_run_produces_report_bundle() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    synth(dir);
    let fast = ["--set", "lda_sweeps=60", "--set", "lda_burn_in=20", "--set", "topics=6"];
    ok(dir, &with_global(&["ingest", "--input", "data/corpus.jsonl"]));
    ok(dir, &with_global(&["score"]));
    assert!(dir.join("w/scores.csv.cutoffs.json").exists());
    ok(dir, &with_global(&["graph"]));
    ok(dir, &with_global(&["lpa"]));
    ok(dir, &with_global(&["features", "bow", "--dim", "science"]));
    ok(dir, &with_global(&[&fast[..], &["features", "lda"]].concat()));
    ok(dir, &with_global(&["features", "embed", "--vectors", "data/vectors.txt"]));
    for dim in ["science", "political", "moderacy"] {
        ok(dir, &with_global(&["train", "--dim", dim, "--kind", "embed"]));
    }
    ok(dir, &with_global(&["train", "--dim", "science", "--kind", "bow"]));
    ok(dir, &with_global(&["classify"]));
    ok(dir, &with_global(&["analyze"]));
    let out = polarlens(dir, &with_global(&["report"]));
    assert!(out.status.success());
    for f in ["heatmaps.csv", "delta_bar.csv", "activity.csv", "states.csv", "hashtags.csv", "eval.json"] {
        assert!(dir.join("w/report").join(f).exists(), "{f} missing");
    }
    // no lda model was trained, so its rows are dropped with a note
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("no lda classifier evaluations"), "{stderr}");
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    synth(dir);
    for w in ["a", "b"] {
        let g = ["--work-dir", w, "--catalogs", "data/catalogs", "--seeds", "data/seeds"];
        ok(dir, &[&g[..], &["ingest", "--input", "data/corpus.jsonl"]].concat());
        ok(dir, &[&g[..], &["score"]].concat());
        ok(dir, &[&g[..], &["graph"]].concat());
        ok(dir, &[&g[..], &["lpa"]].concat());
    }
    for f in ["users.bin", "scores.csv", "scores.csv.cutoffs.json", "graph.bin", "lpa_labels.csv", "lpa_labels.csv.eval.json"] {
        assert_eq!(fs::read(dir.join("a").join(f)).unwrap(), fs::read(dir.join("b").join(f)).unwrap(), "{f}");
    }
}

#[test]
fn train_before_score_is_a_validation_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = polarlens(tmp.path(), &["--work-dir", "w", "train", "--dim", "science"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("run `polarlens score` first"));
}

#[test]
fn report_lists_missing_inputs() {
    let tmp = tempfile::tempdir().unwrap();
    let out = polarlens(tmp.path(), &["--work-dir", "w", "report"]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("heatmaps.csv") && stderr.contains("lpa"), "{stderr}");
}

#[test]
fn bad_config_exits_with_validation_code() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("bad.conf"), "quantile = 0.9\n").unwrap();
    let out = polarlens(tmp.path(), &["--config", "bad.conf", "report"]);
    assert_eq!(out.status.code(), Some(2));
    let out = polarlens(tmp.path(), &["--set", "nonsense=1", "report"]);
    assert_eq!(out.status.code(), Some(2));
    let out = polarlens(tmp.path(), &["synth", "--spec", "missing.json", "--out", "c.jsonl", "--truth", "t.csv"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn degenerate_mixture_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("s.json"), r#"{"mixture": [0,0,0,0,0,0]}"#).unwrap();
    let out = polarlens(tmp.path(), &["synth", "--spec", "s.json", "--out", "c.jsonl", "--truth", "t.csv"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn flags_override_config_file() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    synth(dir);
    fs::write(dir.join("run.conf"), "work_dir = from_conf\nmin_domains = 50\ncatalogs = data/catalogs\n").unwrap();
    ok(dir, &["--config", "run.conf", "--work-dir", "w", "ingest", "--input", "data/corpus.jsonl"]);
    assert!(dir.join("w/users.bin").exists());
    assert!(!dir.join("from_conf").exists());
    // min_domains=50 leaves nobody eligible, --set restores a usable value
    let out = polarlens(dir, &["--config", "run.conf", "--work-dir", "w", "score"]);
    assert_eq!(out.status.code(), Some(2));
    ok(dir, &["--config", "run.conf", "--work-dir", "w", "--set", "min_domains=3", "score"]);
}
