mod common;

use std::collections::HashMap;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};
use std::sync::Arc;

use bwskit::annotation::{simulate_annotators, ResponseSet};
use bwskit::design::TupleDesign;
use bwskit::scoring::{compute_scores, ScoreTable};

fn bwskit(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bwskit"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = bwskit(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn write_items(dir: &Path, n: usize) {
    let ids: Vec<String> = (0..n).map(|i| format!("tw{i:03}")).collect();
    fs::write(dir.join("items.txt"), ids.join("\n") + "\n").unwrap();
}

#[test]
fn design_has_two_tuples_per_item() {
    let dir = tempfile::tempdir().unwrap();
    write_items(dir.path(), 100);
    let out = bwskit(dir.path(), &["design", "--items", "items.txt", "--seed", "7", "--out", "tuples.tsv"]);
    assert_eq!(out.status.code(), Some(0));
    let text = fs::read_to_string(dir.path().join("tuples.tsv")).unwrap();
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 200);
    assert!(bwskit::design::verify_design(&TupleDesign::from_tsv(&text).unwrap()).passed());
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    write_items(dir.path(), 30);
    ok(dir.path(), &["design", "--items", "items.txt", "--out", "tuples.tsv"]);
    fs::write(dir.path().join("empty.tsv"), "").unwrap();
    let out = bwskit(dir.path(), &["score", "--responses", "empty.tsv", "--tuples", "tuples.tsv"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!out.stderr.is_empty());

    let out = bwskit(dir.path(), &["score", "--bogus"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
    assert_eq!(bwskit(dir.path(), &["frobnicate"]).status.code(), Some(2));
    assert_eq!(bwskit(dir.path(), &[]).status.code(), Some(2));

    let out = bwskit(dir.path(), &["simulate", "--help"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("--accuracy"));

    // too few items for a design is a validation error
    write_items(dir.path(), 10);
    assert_eq!(bwskit(dir.path(), &["design", "--items", "items.txt"]).status.code(), Some(1));
    assert_eq!(bwskit(dir.path(), &["design", "--items", "missing.txt"]).status.code(), Some(1));
}

fn latent_file(dir: &Path, n: usize) -> HashMap<String, f64> {
    let latent: HashMap<String, f64> = (0..n).map(|i| (format!("tw{i:03}"), (i * 37 % n) as f64 / n as f64)).collect();
    let mut lines: Vec<String> = latent.iter().map(|(k, v)| format!("{k}\t{v}")).collect();
    lines.sort();
    fs::write(dir.join("latent.tsv"), lines.join("\n")).unwrap();
    latent
}

#[test]
fn simulate_then_score_matches_library() {
    let dir = tempfile::tempdir().unwrap();
    write_items(dir.path(), 60);
    let latent = latent_file(dir.path(), 60);
    ok(dir.path(), &["design", "--items", "items.txt", "--seed", "4", "--out", "tuples.tsv"]);
    ok(dir.path(), &["simulate", "--tuples", "tuples.tsv", "--latent", "latent.tsv", "--accuracy", "1.0", "--seed", "9", "--out", "r.tsv"]);
    let scored = ok(dir.path(), &["score", "--responses", "r.tsv", "--tuples", "tuples.tsv"]);
    let cli_table = ScoreTable::from_tsv(&scored).unwrap();

    let design = Arc::new(TupleDesign::load(dir.path().join("tuples.tsv")).unwrap());
    let lib = compute_scores(&simulate_annotators(Arc::clone(&design), &latent, 1.0, 3, 9).unwrap()).unwrap();
    assert_eq!(cli_table, lib);

    // perfect annotators: the extremes are always picked
    let top = latent.iter().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
    let bottom = latent.iter().min_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
    assert_eq!(cli_table.get(top).unwrap().raw, 1.0);
    assert_eq!(cli_table.get(bottom).unwrap().raw, -1.0);

    let responses = ResponseSet::load(dir.path().join("r.tsv"), design, 3).unwrap();
    assert!(responses.is_complete());
}

#[test]
fn seeded_output_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write_items(d, 40);
    latent_file(d, 40);
    common::write_corpus(d, 80, 1);
    let runs: Vec<Vec<&str>> = vec![
        vec!["design", "--items", "items.txt", "--seed", "3"],
        vec!["simulate", "--tuples", "tuples.tsv", "--latent", "latent.tsv", "--accuracy", "0.7", "--seed", "3"],
        vec!["score", "--responses", "r.tsv", "--tuples", "tuples.tsv"],
        vec!["shr", "--responses", "r.tsv", "--tuples", "tuples.tsv", "--repetitions", "20", "--seed", "3"],
        vec!["features", "--dataset", "fear.tsv", "--config", "WN+CN+WE+L", "--embeddings", "emb.txt", "--lexicon", "cues.tsv"],
        vec!["train", "--dataset", "fear.tsv", "--config", "WE+L", "--embeddings", "emb.txt", "--lexicon", "cues.tsv", "--seed", "3"],
    ];
    ok(d, &["design", "--items", "items.txt", "--seed", "3", "--out", "tuples.tsv"]);
    ok(d, &["simulate", "--tuples", "tuples.tsv", "--latent", "latent.tsv", "--accuracy", "0.7", "--seed", "3", "--out", "r.tsv"]);
    for args in &runs {
        let first = ok(d, args);
        assert!(!first.is_empty(), "{args:?}");
        assert_eq!(first, ok(d, args), "{args:?}");
    }
    let other = ok(d, &["design", "--items", "items.txt", "--seed", "4"]);
    assert_ne!(other, ok(d, &runs[0]));
}

#[test]
fn regression_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    common::write_corpus(d, 120, 2);
    let res = ["--embeddings", "emb.txt", "--lexicon", "cues.tsv"];
    let with = |args: &[&'static str]| -> Vec<&'static str> { args.iter().copied().chain(res).collect() };

    ok(d, &with(&["train", "--dataset", "joy.tsv", "--config", "WE+L", "--out", "model.tsv"]));
    let eval = ok(d, &with(&["eval", "--model", "model.tsv", "--dataset", "joy.tsv", "--config", "WE+L"]));
    let pearson: f64 = eval.lines().next().unwrap().split('\t').nth(1).unwrap().parse().unwrap();
    assert!(pearson > 0.8, "{eval}");
    let subset = ok(d, &with(&["eval", "--model", "model.tsv", "--dataset", "joy.tsv", "--config", "WE+L", "--threshold", "0.5"]));
    assert!(subset.contains("subset_threshold\t0.5"));

    let grid = ok(d, &with(&["ablate", "--dataset", "anger.tsv", "--dataset", "fear.tsv", "--config", "WN", "--config", "L:cues"]));
    let lines: Vec<&str> = grid.lines().collect();
    assert_eq!(lines[0], "config\tanger\tfear\tavg.");
    assert!(lines[1].starts_with("WN\t") && lines[2].starts_with("L:cues\t"));
    let flat = ok(d, &with(&["ablate", "--dataset", "anger.tsv", "--config", "WE", "--flat", "--threshold"]));
    assert!(flat.lines().nth(1).unwrap().ends_with("\t0.5"));

    let all = ["--dataset", "anger.tsv", "--dataset", "fear.tsv", "--dataset", "joy.tsv", "--dataset", "sadness.tsv"];
    let matrix = ok(d, &with(&[&["transfer"], &all[..], &["--config", "L"]].concat()));
    assert_eq!(matrix.lines().count(), 5);
    let pooled = ok(
        d,
        &with(&[&["transfer"], &all[..], &["--config", "L", "--pool-train", "fear,sadness", "--pool-test", "sadness"]].concat()),
    );
    assert!(pooled.starts_with("train\tfear+sadness\ntest\tsadness\npearson\t"));

    // missing lexicon resources are validation errors
    assert_eq!(bwskit(d, &["train", "--dataset", "joy.tsv", "--config", "L"]).status.code(), Some(1));
    assert_eq!(bwskit(d, &["train", "--dataset", "joy.tsv", "--config", "XYZ"]).status.code(), Some(1));
}

#[test]
fn hashtag_impact_report() {
    use bwskit::corpus::{write_dataset, Dataset, DatasetFormat, Emotion, Item, ItemKind, Partition};
    let dir = tempfile::tempdir().unwrap();
    let item = |id: String, kind, pair: Option<String>, score| Item {
        text: if kind == ItemKind::Hqt { "so scared tonight #fear" } else { "so scared tonight" }.into(),
        id,
        emotion: Emotion::Fear,
        partition: Partition::Unassigned,
        kind,
        pair_id: pair,
        gold_score: Some(score),
    };
    let mut items = Vec::new();
    for i in 0..40 {
        let drop = if i < 30 { 0.1 } else if i < 36 { -0.05 } else { 0.0 };
        items.push(item(format!("h{i}"), ItemKind::Hqt, Some(format!("n{i}")), 0.6));
        items.push(item(format!("n{i}"), ItemKind::Nqt, Some(format!("h{i}")), 0.6 - drop));
    }
    write_dataset(&Dataset::new(items).unwrap(), dir.path().join("pairs.tsv"), DatasetFormat::ScoredTsv).unwrap();
    let out = ok(dir.path(), &["hashtag-impact", "--dataset", "pairs.tsv", "--scatter", "scatter.tsv"]);
    assert!(out.contains("pair_count=40\npct_drop=75.0\npct_rise=15.0\npct_none=10.0\n"), "{out}");
    assert_eq!(fs::read_to_string(dir.path().join("scatter.tsv")).unwrap().lines().count(), 41);
}
