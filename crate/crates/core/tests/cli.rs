use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use josh::model::{load_model, read_text_embeddings};

fn josh(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_josh")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = josh(args);
    assert!(out.status.success(), "{args:?} failed:\n{}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn synth(dir: &Path) {
    ok(&["synth", "--out", p(dir), "--docs", "400", "--doc-len", "30", "--super", "2", "--sub", "2", "--vocab-per-topic", "20"]);
}

fn train(data: &Path, out: &Path, extra: &[&str]) -> String {
    let corpus = data.join("corpus.txt");
    let tax = data.join("taxonomy.tsv");
    let mut args = vec!["train", "--corpus", p(&corpus), "--taxonomy", p(&tax), "--out", p(out), "--dim", "16", "--k", "3", "--tree-passes", "5"];
    args.extend_from_slice(extra);
    ok(&args)
}

#[test]
fn full_pipeline() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    let model = tmp.path().join("model");
    synth(&data);
    assert_eq!(fs::read_to_string(data.join("corpus.txt")).unwrap().lines().count(), 400);

    let printed = train(&data, &model, &[]);
    for f in ["model.bin", "u.txt", "v.txt", "doc.txt", "cat.txt", "meta.tsv", "topics.tsv", "topics_scored.tsv", "progress.tsv"] {
        assert!(model.join(f).is_file(), "missing {f}");
    }
    let topics = fs::read_to_string(model.join("topics.tsv")).unwrap();
    assert_eq!(printed, topics);
    // 2 supers + 4 leaves, each with K terms
    assert_eq!(topics.lines().count(), 6);
    assert!(topics.lines().all(|l| l.split('\t').count() == 4));
    let progress = fs::read_to_string(model.join("progress.tsv")).unwrap();
    // header plus epochs_per_step epochs for each of K + 1 M-steps
    assert_eq!(progress.lines().count(), 1 + 2 * 4);

    assert_eq!(ok(&["mine", "--model", p(&model)]), topics);
    let scored = ok(&["mine", "--model", p(&model), "--scored"]);
    assert_eq!(scored, fs::read_to_string(model.join("topics_scored.tsv")).unwrap());

    let labels_path = tmp.path().join("labels.tsv");
    ok(&["classify", "--model", p(&model), "--mode", "leaves", "--out", p(&labels_path)]);
    let labels = fs::read_to_string(&labels_path).unwrap();
    assert_eq!(labels.lines().count(), 400);
    assert!(labels.lines().all(|l| l.split('\t').nth(2).unwrap().parse::<f64>().is_ok()));

    let f1 = ok(&["eval-f1", "--pred", p(&labels_path), "--gold", p(&data.join("gold.tsv")), "--json"]);
    let v: serde_json::Value = serde_json::from_str(&f1).unwrap();
    assert!(v["micro_f1"].as_f64().unwrap() > 0.5, "{f1}");

    let tc = ok(&["eval-coherence", "--topics", p(&model.join("topics.tsv")), "--corpus", p(&data.join("corpus.txt"))]);
    assert!(tc.starts_with("category\tcoherence\tpairs\n"));
    assert_eq!(tc.lines().count(), 1 + 6 + 1);

    for path in [&labels_path, &model.join("topics.tsv"), &model.join("meta.tsv"), &model.join("u.txt")] {
        assert!(fs::read_to_string(path).unwrap().ends_with('\n'), "{}", path.display());
    }
}

#[test]
fn gold_against_itself_is_perfect() {
    let tmp = tempfile::tempdir().unwrap();
    synth(tmp.path());
    let gold = tmp.path().join("gold.tsv");
    let out = ok(&["eval-f1", "--pred", p(&gold), "--gold", p(&gold)]);
    assert!(out.contains("macro_f1\t1.000000\n") && out.contains("micro_f1\t1.000000\n"), "{out}");
}

#[test]
fn export_round_trips() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    let model = tmp.path().join("model");
    let export = tmp.path().join("export");
    synth(&data);
    train(&data, &model, &[]);
    ok(&["export-embeddings", "--model", p(&model), "--out", p(&export)]);
    let state = load_model(&model).unwrap();
    let (labels, rows) = read_text_embeddings(&export.join("cat.txt")).unwrap();
    assert_eq!(labels[0], "ROOT");
    assert_eq!(rows.len(), state.taxonomy.len());
    for (r, row) in rows.iter().enumerate() {
        for (a, b) in row.iter().zip(state.c.row(r)) {
            assert!((a - b).abs() <= 5e-6 * b.abs().max(1e-5), "{a} vs {b}");
        }
    }
    assert_eq!(fs::read(export.join("u.txt")).unwrap(), fs::read(model.join("u.txt")).unwrap());
}

#[test]
fn strict_mode_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    synth(&data);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    train(&data, &a, &["--seed", "7"]);
    train(&data, &b, &["--seed", "7"]);
    for f in ["topics.tsv", "model.bin"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f} differs");
    }
}

#[test]
fn validation_failures_exit_nonzero() {
    let tmp = tempfile::tempdir().unwrap();
    synth(tmp.path());
    let corpus = tmp.path().join("corpus.txt");
    let tax = tmp.path().join("taxonomy.tsv");
    let out = tmp.path().join("m");

    let k0 = josh(&["train", "--corpus", p(&corpus), "--taxonomy", p(&tax), "--out", p(&out), "--k", "0"]);
    assert!(!k0.status.success());
    assert!(String::from_utf8_lossy(&k0.stderr).contains("k must be"));
    assert!(!out.exists());

    let missing = josh(&["train", "--corpus", "/no/such/file", "--taxonomy", p(&tax), "--out", p(&out)]);
    assert!(!missing.status.success());

    let bad_tax = tmp.path().join("bad.tsv");
    fs::write(&bad_tax, "ROOT\tnot_a_word\n").unwrap();
    let r = josh(&["train", "--corpus", p(&corpus), "--taxonomy", p(&bad_tax), "--out", p(&out)]);
    assert!(!r.status.success());
    assert!(String::from_utf8_lossy(&r.stderr).contains("not_a_word"));

    assert!(!josh(&["train", "--bogus"]).status.success());
    assert!(!josh(&["mine", "--model", "/no/such/dir"]).status.success());
}
