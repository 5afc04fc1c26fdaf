//! Exit codes and stage outputs of the `augbench` binary.

mod common;

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use augbench::augment::read_batch_jsonl;
use augbench::corpus::Source;
use augbench::eval::EvalReport;
use augbench_cli::manifest::RunManifest;
use augbench_cli::{EXIT_DATA, EXIT_OK, EXIT_PROVIDER, EXIT_USAGE};

use common::{path_str, write_fast_http_config, FakeServer};

fn augbench(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_augbench"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn manifest(dir: &Path, command: &str) -> RunManifest {
    let text = fs::read_to_string(dir.join(format!("manifest-{command}.json"))).unwrap();
    serde_json::from_str(&text).unwrap()
}

#[test]
fn help_succeeds_and_unknown_flags_are_usage_errors() {
    assert_eq!(code(&augbench(&["--help"])), EXIT_OK);
    assert_eq!(code(&augbench(&["augment", "--method", "dual", "--bogus"])), EXIT_USAGE);
    assert_eq!(code(&augbench(&["augment", "--method", "sideways"])), EXIT_USAGE);
    assert_eq!(code(&augbench(&["frobnicate"])), EXIT_USAGE);
}

#[test]
fn bad_configs_are_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let unknown = dir.path().join("unknown.toml");
    fs::write(&unknown, "[evaluation]\nfolds = 5\n").unwrap();
    let out = augbench(&["--config", path_str(&unknown), "balance"]);
    assert_eq!(code(&out), EXIT_USAGE, "{}", String::from_utf8_lossy(&out.stderr));

    let invalid = dir.path().join("invalid.toml");
    fs::write(&invalid, "[evaluation]\nk = 1\n").unwrap();
    assert_eq!(code(&augbench(&["--config", path_str(&invalid), "balance"])), EXIT_USAGE);

    let missing = dir.path().join("absent.toml");
    assert_eq!(code(&augbench(&["--config", path_str(&missing), "balance"])), EXIT_USAGE);

    // The http provider needs an endpoint.
    let out_dir = dir.path().join("out");
    let out = augbench(&["-o", path_str(&out_dir), "augment", "--method", "single", "--provider", "http"]);
    assert_eq!(code(&out), EXIT_USAGE);
}

#[test]
fn missing_or_malformed_data_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let absent = dir.path().join("nope.csv");
    let out = augbench(&["-o", path_str(&out_dir), "ingest", "--input", path_str(&absent)]);
    assert_eq!(code(&out), EXIT_DATA, "{}", String::from_utf8_lossy(&out.stderr));

    let broken = dir.path().join("broken.csv");
    fs::write(&broken, "id,text,label\n1,halo,maybe\n").unwrap();
    assert_eq!(code(&augbench(&["-o", path_str(&out_dir), "ingest", "--input", path_str(&broken)])), EXIT_DATA);

    let empty = dir.path().join("empty");
    assert_eq!(code(&augbench(&["-o", path_str(&empty), "report"])), EXIT_DATA);
}

#[test]
fn unreachable_provider_is_a_provider_error() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("http.toml");
    write_fast_http_config(&config);
    let server = FakeServer::start(|_, _| (503, "unavailable".into()));
    let out = augbench(&[
        "--config",
        path_str(&config),
        "-o",
        path_str(&dir.path().join("out")),
        "augment",
        "--method",
        "dual",
        "--provider",
        "http",
        "--chat-endpoint",
        &server.url,
        "--cache-mode",
        "off",
    ]);
    assert_eq!(code(&out), EXIT_PROVIDER, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(server.hits(), 3);
}

#[test]
fn replay_miss_is_a_provider_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = augbench(&[
        "-o",
        path_str(dir.path()),
        "augment",
        "--method",
        "single",
        "--provider",
        "http",
        "--chat-endpoint",
        "http://127.0.0.1:9/v1/chat/completions",
        "--cache-mode",
        "replay",
    ]);
    assert_eq!(code(&out), EXIT_PROVIDER, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn synthetic_corpus_round_trips_through_ingest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    assert_eq!(code(&augbench(&["-o", path_str(out), "synth-corpus"])), EXIT_OK);
    let csv = out.join("synthetic.csv");
    assert_eq!(code(&augbench(&["-o", path_str(out), "ingest", "--input", path_str(&csv)])), EXIT_OK);
    let composition: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("composition.json")).unwrap()).unwrap();
    let text = composition.to_string();
    assert!(text.contains("2000") && text.contains("100"), "{text}");
    let m = manifest(out, "ingest");
    assert!(m.inputs.iter().any(|f| f.path.ends_with("synthetic.csv")));
    assert!(m.artifacts.iter().any(|f| f.path.ends_with("corpus.jsonl")));
    assert_eq!(m.network_calls, 0);
}

#[test]
fn dual_augmentation_hits_its_target() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    let status = augbench(&[
        "-o",
        path_str(out),
        "--seed",
        "7",
        "augment",
        "--method",
        "dual",
        "--target",
        "306",
        "--provider",
        "mock",
    ]);
    assert_eq!(code(&status), EXIT_OK, "{}", String::from_utf8_lossy(&status.stderr));
    let batch = read_batch_jsonl(&out.join("augment-dual.jsonl")).unwrap();
    assert_eq!(batch.len(), 306);
    assert_eq!(batch.source, Source::DualClassGen);
    let m = manifest(out, "augment");
    assert_eq!(m.seeds.get("balance"), Some(&7));
    assert!(m.artifacts.iter().any(|f| f.path.ends_with("augment-dual.jsonl")));
}

#[test]
fn stages_chain_through_the_output_directory() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    let o = path_str(out);
    for method in ["backtranslation", "single", "dual"] {
        let s = augbench(&["-o", o, "augment", "--method", method]);
        assert_eq!(code(&s), EXIT_OK, "{method}: {}", String::from_utf8_lossy(&s.stderr));
    }
    let s = augbench(&["-o", o, "trainval", "--k", "3"]);
    assert_eq!(code(&s), EXIT_OK, "{}", String::from_utf8_lossy(&s.stderr));
    let report: EvalReport = serde_json::from_str(&fs::read_to_string(out.join("eval_report.json")).unwrap()).unwrap();
    assert_eq!(report.cells.len(), 16);
    assert_eq!(report.k, 3);
    let table = fs::read_to_string(out.join("model_performance.md")).unwrap();
    assert!(table.starts_with("| Dataset | Model | Accuracy | Accuracy Std | F1-Score | F1-Score Std |"));

    assert_eq!(code(&augbench(&["-o", o, "semsim"])), EXIT_OK);
    let sim: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("similarity.json")).unwrap()).unwrap();
    assert_eq!(sim.as_array().unwrap().len(), 3);

    assert_eq!(code(&augbench(&["-o", o, "report"])), EXIT_OK);
    let md = fs::read_to_string(out.join("report.md")).unwrap();
    assert!(md.contains("## Dataset Composition") && md.contains("## Model Performance"));
    assert!(md.contains("## Semantic Similarity") && !md.contains("## Figures"));
}

#[test]
fn trainval_restricted_to_selected_models() {
    let dir = tempfile::tempdir().unwrap();
    let o = path_str(dir.path());
    assert_eq!(code(&augbench(&["-o", o, "augment", "--method", "single"])), EXIT_OK);
    let s = augbench(&["-o", o, "trainval", "--models", "naive_bayes,logreg", "--cv-mode", "mixed"]);
    assert_eq!(code(&s), EXIT_OK, "{}", String::from_utf8_lossy(&s.stderr));
    let report: EvalReport =
        serde_json::from_str(&fs::read_to_string(dir.path().join("eval_report.json")).unwrap()).unwrap();
    assert_eq!(report.cells.len(), 4);
}
