use std::fs;
use std::path::Path;

use bench_cli::report::without_timing;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn run(args: &[&str]) -> (i32, String) {
    let mut out = Vec::new();
    let mut full = vec!["bench-cli"];
    full.extend_from_slice(args);
    let code = bench_cli::run(full, &mut out);
    (code, String::from_utf8(out).unwrap())
}

/// Two correlated blocks of four bits each.
fn write_tiny(dir: &Path, name: &str, n: usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for split in ["train", "valid", "test"] {
        let mut text = String::new();
        for _ in 0..n {
            let z = rng.random_bool(0.5);
            let row: Vec<&str> = (0..8)
                .map(|_| if rng.random_bool(if z { 0.85 } else { 0.15 }) { "1" } else { "0" })
                .collect();
            text.push_str(&row.join(","));
            text.push('\n');
        }
        fs::write(dir.join(format!("{name}.{split}.data")), text).unwrap();
    }
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(run(&["--help"]).0, 0);
    assert_eq!(run(&["no-such-command"]).0, 2);
    assert_eq!(run(&["learn"]).0, 2);
    assert_eq!(run(&["learn", "--data", "tiny", "--method", "bogus"]).0, 2);
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&["--data-dir", s(dir.path()), "learn", "--data", "no_such_set"]).0, 2);
    write_tiny(dir.path(), "tiny", 20);
    assert_eq!(run(&["--data-dir", s(dir.path()), "learn", "--data", "tiny", "--p", "1.5"]).0, 2);
    assert_eq!(run(&["--data-dir", s(dir.path()), "--threads", "0", "learn", "--data", "tiny"]).0, 2);
}

#[test]
fn data_errors_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&["--data-dir", s(dir.path()), "learn", "--data", "nltcs"]).0, 3);
    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{ not json").unwrap();
    assert_eq!(run(&["validate-model", "--model", s(&bad)]).0, 3);
    assert_eq!(run(&["validate-model", "--model", s(&dir.path().join("absent.json"))]).0, 3);
    fs::write(
        &bad,
        r#"{"schema": [{"kind": "cat", "arity": 2}], "root": 2, "nodes": [
            {"type": "leaf", "var": 0, "dist": {"kind": "multinomial", "probs": [0.5, 0.5]}},
            {"type": "leaf", "var": 0, "dist": {"kind": "multinomial", "probs": [0.5, 0.5]}},
            {"type": "prod", "children": [0, 1]}]}"#,
    )
    .unwrap();
    assert_eq!(run(&["validate-model", "--model", s(&bad)]).0, 3);
}

#[test]
fn learn_eval_sample_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    write_tiny(dir.path(), "tiny", 300);
    let model = dir.path().join("m/model.json");
    let (code, text) = run(&["--data-dir", s(dir.path()), "--out", s(&model), "learn", "--data", "tiny", "--min-instances", "20"]);
    assert_eq!(code, 0, "{text}");
    assert!(text.contains("test LL"));
    let (code, text) = run(&["validate-model", "--model", s(&model)]);
    assert_eq!(code, 0);
    assert!(text.starts_with("ok:"));
    let (code, text) = run(&["--data-dir", s(dir.path()), "eval", "--model", s(&model), "--data", "tiny"]);
    assert_eq!(code, 0);
    let ll: f64 = text.lines().nth(1).unwrap().split_whitespace().last().unwrap().parse().unwrap();
    assert!(ll.is_finite() && ll < 0.0);

    let a = run(&["--seed", "9", "sample", "--model", s(&model), "--n", "25"]);
    let b = run(&["--seed", "9", "sample", "--model", s(&model), "--n", "25"]);
    assert_eq!(a, b);
    assert_eq!(a.1.lines().count(), 25);
    assert!(a.1.lines().all(|l| l.split(',').all(|v| v == "0" || v == "1")));
    let c = run(&["--seed", "10", "sample", "--model", s(&model), "--n", "25"]);
    assert_ne!(a.1, c.1);
    assert_eq!(run(&["sample", "--model", s(&model), "--n", "0"]), (0, String::new()));
}

#[test]
fn eval_rejects_other_schema() {
    let dir = tempfile::tempdir().unwrap();
    write_tiny(dir.path(), "tiny", 50);
    fs::write(dir.path().join("other.train.data"), "0,1\n").unwrap();
    fs::write(dir.path().join("other.valid.data"), "0,1\n").unwrap();
    fs::write(dir.path().join("other.test.data"), "0,1\n").unwrap();
    let model = dir.path().join("model.json");
    assert_eq!(run(&["--data-dir", s(dir.path()), "--out", s(&model), "learn", "--data", "tiny"]).0, 0);
    assert_eq!(run(&["--data-dir", s(dir.path()), "eval", "--model", s(&model), "--data", "other"]).0, 3);
}

#[test]
fn one_row_dataset_gives_factorized_model() {
    let dir = tempfile::tempdir().unwrap();
    for split in ["train", "valid", "test"] {
        fs::write(dir.path().join(format!("one.{split}.data")), "1,0,1\n").unwrap();
    }
    let model = dir.path().join("model.json");
    for method in ["learnspn", "softlearn"] {
        let (code, text) =
            run(&["--data-dir", s(dir.path()), "--out", s(&model), "learn", "--data", "one", "--method", method]);
        assert_eq!(code, 0, "{text}");
        let (_, v) = run(&["validate-model", "--model", s(&model)]);
        assert!(v.contains("(0 sum, 1 product, 3 leaf)"), "{v}");
    }
}

#[test]
fn grid_skips_recorded_cells_unless_forced() {
    let dir = tempfile::tempdir().unwrap();
    write_tiny(dir.path(), "tiny", 120);
    let out = dir.path().join("res");
    let args = [
        "--data-dir",
        s(dir.path()),
        "--out",
        s(&out),
        "grid",
        "--data",
        "tiny",
        "--reps",
        "1",
        "--ps",
        "0.01",
        "--alphas",
        "0.1,0.01",
        "--clusterers",
        "kmeans",
    ];
    let (code, text) = run(&args);
    assert_eq!(code, 0, "{text}");
    let results = fs::read_to_string(out.join("results.tsv")).unwrap();
    let rows: Vec<&str> = results.lines().skip(2).collect();
    assert_eq!(rows.len(), 2);
    for r in &rows {
        let f: Vec<&str> = r.split('\t').collect();
        assert_eq!(f.len(), 10);
        assert_eq!(&f[..3], ["tiny", "softlearn", "kmeans"]);
        assert_eq!(f[7].parse::<f64>().unwrap(), 0.0, "one repetition has zero spread");
    }
    let plot = fs::read_to_string(out.join("plot.tsv")).unwrap();
    assert!(plot.starts_with("x\ty\tseries\n"));

    let (code, text) = run(&args);
    assert_eq!(code, 0);
    assert!(text.contains("already recorded"));
    assert_eq!(fs::read_to_string(out.join("results.tsv")).unwrap(), results);

    let mut forced = args.to_vec();
    forced.push("--force");
    assert_eq!(run(&forced).0, 0);
    assert_eq!(fs::read_to_string(out.join("results.tsv")).unwrap().lines().count(), 2 + 4);
}

#[test]
fn grid_is_thread_count_invariant() {
    let dir = tempfile::tempdir().unwrap();
    write_tiny(dir.path(), "tiny", 150);
    let table = |threads: &str| {
        let out = dir.path().join(format!("t{threads}"));
        let (code, text) = run(&[
            "--data-dir",
            s(dir.path()),
            "--seed",
            "7",
            "--threads",
            threads,
            "--out",
            s(&out),
            "grid",
            "--data",
            "tiny",
            "--reps",
            "3",
            "--ps",
            "0.01,0.001",
            "--alphas",
            "0.1",
            "--min-instances",
            "20",
        ]);
        assert_eq!(code, 0, "{text}");
        without_timing(&fs::read_to_string(out.join("results.tsv")).unwrap())
    };
    let one = table("1");
    assert_eq!(one.lines().count(), 2 + 4);
    assert_eq!(one, table("4"));
}

#[test]
fn toy_example_writes_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("toy");
    let (code, text) = run(&["--out", s(&out), "toy-example", "--n-per-component", "300", "--adversarial"]);
    assert_eq!(code, 0, "{text}");
    assert!(text.contains("learnspn") && text.contains("softlearn"));
    let leaves = fs::read_to_string(out.join("leaves.tsv")).unwrap();
    assert!(leaves.starts_with("method\tseed\tx_mu"));
    let plot = fs::read_to_string(out.join("plot.tsv")).unwrap();
    assert!(plot.contains("points_component1") && plot.contains("softlearn_means"));
}

#[test]
fn synthetic_quality_reports_drop() {
    let dir = tempfile::tempdir().unwrap();
    write_tiny(dir.path(), "tiny", 200);
    let (code, text) = run(&["--data-dir", s(dir.path()), "synthetic-quality", "--data", "tiny", "--reps", "2"]);
    assert_eq!(code, 0, "{text}");
    let drop: f64 = text.lines().last().unwrap().split_whitespace().last().unwrap().parse().unwrap();
    assert!(drop.is_finite());
}
