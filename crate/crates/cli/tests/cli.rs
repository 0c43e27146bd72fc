use std::path::Path;
use std::process::{Command, Output};

fn citeseek(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_citeseek"))
        .args(args)
        .env_remove("GEN_SERVICE_URL")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> serde_json::Value {
    let out = citeseek(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let stdout = String::from_utf8(out.stdout).unwrap();
    serde_json::from_str(stdout.lines().last().unwrap_or("null")).unwrap_or(serde_json::Value::Null)
}

fn error_line(out: &Output) -> serde_json::Value {
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    let last = stderr.lines().last().expect("an error line");
    serde_json::from_str(last).expect("error line is json")
}

fn p(dir: &Path, name: &str) -> String {
    dir.join(name).to_string_lossy().into_owned()
}

#[test]
fn full_lifecycle() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let (corpus, track, store) = (p(d, "corpus.jsonl"), p(d, "track.jsonl"), p(d, "store"));
    let (pairs, model, index) = (p(d, "pairs.jsonl"), p(d, "model.bin"), p(d, "index.bin"));
    let (groups, scorer, report) = (p(d, "groups.jsonl"), p(d, "scorer.json"), p(d, "report.json"));

    let made = ok(&["synth", "--documents", "48", "--out", &corpus, "--track", &track]);
    assert_eq!(made["documents"], 48);
    let built = ok(&["ingest", "--corpus", &corpus, "--out", &store]);
    assert!(built["passages"].as_u64().unwrap() >= 48);

    let exported = p(d, "exported.jsonl");
    ok(&["export", "--corpus", &store, "--out", &exported]);
    assert_eq!(
        std::fs::read_to_string(&exported).unwrap().lines().count(),
        std::fs::read_to_string(&corpus).unwrap().lines().count()
    );

    let generated = ok(&["genqueries", "--corpus", &store, "--mode", "fallback", "--out", &pairs]);
    assert!(generated["pairs"].as_u64().unwrap() > 0);
    let first = std::fs::read_to_string(&pairs).unwrap();
    ok(&["genqueries", "--corpus", &store, "--mode", "fallback", "--out", &pairs]);
    assert_eq!(first, std::fs::read_to_string(&pairs).unwrap(), "generation is deterministic");

    let log = p(d, "train.jsonl");
    ok(&[
        "train-retriever", "--pairs", &pairs, "--corpus", &store, "--out", &model, "--features", "4096",
        "--dim", "32", "--epochs", "1", "--log", &log,
    ]);
    assert_eq!(std::fs::read_to_string(&log).unwrap().lines().count(), 1);
    ok(&["index", "--corpus", &store, "--model", &model, "--out", &index]);
    let mined = ok(&[
        "mine", "--index", &index, "--pairs", &pairs, "--depth", "30", "--per-group", "4", "--out", &groups,
        "--corpus", &store, "--model", &model,
    ]);
    assert_eq!(mined["groups"], generated["pairs"]);
    ok(&["train-reranker", "--groups", &groups, "--out", &scorer, "--corpus", &store, "--model", &model, "--epochs", "1"]);

    let artifacts = ["--corpus", &store, "--model", &model, "--index", &index, "--scorer", &scorer];
    let mut search = vec!["search", "--query", "which work discusses the topic?", "--json"];
    search.extend(artifacts);
    let result = ok(&search);
    let papers = result["papers"].as_array().unwrap();
    assert!(!papers.is_empty());
    assert_eq!(papers[0]["rank"], 1);
    assert_eq!(result["config"]["retrieve_k"], 200);
    assert_eq!(result["config_digest"].as_str().unwrap().len(), 64);

    let mut eval = vec!["eval", "--track", &track, "--report", &report];
    eval.extend(artifacts);
    let out = citeseek(&eval);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<&str> = table.lines().skip(1).map(|l| l.split("  ").next().unwrap()).collect();
    assert_eq!(rows, ["retriever", "retriever+reranker", "full pipeline"]);
    let saved: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(saved["ks"], serde_json::json!([1, 5, 10, 20]));
    assert_eq!(saved["config_digest"].as_str().unwrap().len(), 64);

    let mut plain = vec!["eval", "--track", &track, "--report", &report, "--no-rerank", "--extractor", "off"];
    plain.extend(artifacts);
    let out = citeseek(&plain);
    assert!(out.status.success());
    assert_eq!(String::from_utf8(out.stdout).unwrap().lines().count(), 2);
}

#[test]
fn errors_are_single_json_lines() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();

    let out = citeseek(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_line(&out)["error"], "usage");

    let missing = p(d, "missing");
    let out = citeseek(&["search", "--query", "q", "--corpus", &missing, "--model", "m", "--index", "i", "--no-rerank"]);
    assert_eq!(out.status.code(), Some(1));
    let err = error_line(&out);
    assert_eq!(err["error"], "io");
    assert!(err["message"].as_str().unwrap().contains("missing"));

    let bad = p(d, "bad.jsonl");
    std::fs::write(&bad, "{\"id\": \"a\"}\nnot json\n").unwrap();
    let out = citeseek(&["ingest", "--corpus", &bad, "--out", &p(d, "store")]);
    assert_eq!(out.status.code(), Some(1));
    assert!(error_line(&out)["message"].is_string());

    let out = citeseek(&["genqueries", "--corpus", &missing, "--mode", "turbo", "--out", "x"]);
    assert_eq!(error_line(&out)["error"], "usage");
}

#[test]
fn rerank_without_scorer_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let (corpus, store, model, index) = (p(d, "c.jsonl"), p(d, "store"), p(d, "m.bin"), p(d, "i.bin"));
    ok(&["synth", "--kind", "topics", "--documents", "16", "--out", &corpus]);
    ok(&["ingest", "--corpus", &corpus, "--out", &store]);
    let pairs = p(d, "pairs.jsonl");
    ok(&["genqueries", "--corpus", &store, "--mode", "fallback", "--out", &pairs]);
    ok(&[
        "train-retriever", "--pairs", &pairs, "--corpus", &store, "--out", &model, "--features", "1024",
        "--dim", "8", "--epochs", "1",
    ]);
    ok(&["index", "--corpus", &store, "--model", &model, "--out", &index]);
    let out = citeseek(&["search", "--query", "q", "--corpus", &store, "--model", &model, "--index", &index]);
    assert_eq!(error_line(&out)["error"], "config");

    let out = citeseek(&["search", "--query", "q", "--corpus", &store, "--model", &model, "--index", &index, "--no-rerank"]);
    assert!(out.status.success());
    assert!(!out.stdout.is_empty());
}

#[test]
fn help_and_version_exit_cleanly() {
    let out = citeseek(&["--help"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for cmd in ["ingest", "genqueries", "train-retriever", "index", "mine", "train-reranker", "search", "eval"] {
        assert!(text.contains(cmd), "help lists {cmd}");
    }
    assert!(citeseek(&["--version"]).status.success());
}
