use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use claqs_cli::exit;

fn claqs(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_claqs"))
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

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("run.toml");
    fs::write(&path, body).unwrap();
    path.to_string_lossy().into_owned()
}

const SYNTH: &str = r#"
[model]
qubits = 4
window = 8
layers = 2
ff_layers = 1
degree = 3
embed_dim = 8
hidden = 8
[optim]
epochs = 3
batch_size = 16
lr_max = 0.01
[data]
min_freq = 1
[data.synthetic]
size = 120
length = 8
vocab_size = 6
"#;

#[test]
fn missing_data_path_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[model]\nqubits = 4\n");
    let o = claqs(&["train", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(exit::CONFIG));
    assert!(stderr(&o).contains("data.train"), "{}", stderr(&o));
    assert!(stderr(&o).contains("data.val"));
}

#[test]
fn unknown_key_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[model]\nqbits = 4\n");
    let o = claqs(&["params", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(exit::CONFIG));
    assert!(stderr(&o).contains("qbits"));
}

#[test]
fn malformed_data_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("train.tsv"), "1\tfine\nbroken line\n").unwrap();
    fs::write(dir.path().join("val.tsv"), "0\tok\n").unwrap();
    let cfg = write_config(
        dir.path(),
        "[model]\nqubits = 2\nwindow = 4\n[data]\ntrain = \"train.tsv\"\nval = \"val.tsv\"\n",
    );
    let o = claqs(&["train", "--config", &cfg, "--out", dir.path().join("out").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(exit::DATA), "{}", stderr(&o));
    assert!(stderr(&o).contains("train.tsv:2"));
}

#[test]
fn gradcheck_default_passes_and_corruption_is_named() {
    let o = claqs(&["gradcheck"]);
    assert_eq!(o.status.code(), Some(exit::OK), "{}", stdout(&o));
    let text = stdout(&o);
    for group in ["W_E", "embeddings", "θ-ansatz", "b ", "c ", "φ", "head"] {
        assert!(text.contains(group), "missing {group} in\n{text}");
    }
    assert!(text.contains("gradcheck: PASS"));

    let o = claqs(&["gradcheck", "--corrupt", "phi"]);
    assert_eq!(o.status.code(), Some(exit::CHECK_FAILED));
    assert!(stderr(&o).contains("failed for: φ"), "{}", stderr(&o));
}

#[test]
fn oversized_configs_are_refused() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[model]\nqubits = 7\nwindow = 4\n");
    let o = claqs(&["gradcheck", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(exit::BUDGET));
    assert!(stderr(&o).contains("refused"));

    let cfg = write_config(dir.path(), "[model]\nqubits = 4\nwindow = 2\n");
    let o = claqs(&["verify", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(exit::BUDGET));

    let cfg = write_config(dir.path(), "[model]\nqubits = 3\nwindow = 2\n[verify]\nseeds = 3\n");
    let o = claqs(&["verify", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(exit::OK), "{}", stdout(&o));
}

#[test]
fn verify_default_passes() {
    let o = claqs(&["verify"]);
    assert_eq!(o.status.code(), Some(exit::OK));
    assert!(stdout(&o).contains("50 seeds"));
    assert!(stdout(&o).contains("verify: PASS"));
}

#[test]
fn params_reports_both_accountings() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[model]\nqubits = 8\nwindow = 256\ndegree = 5\nff_layers = 6\n");
    let o = claqs(&["params", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(exit::OK));
    let text = stdout(&o);
    assert!(text.contains("total                      454                 716"), "{text}");
    assert!(text.contains("published 326, complex-as-1 326"));
    assert!(text.contains("8 data + 8 LCU control"));
    let saved = fs::read_to_string(dir.path().join("params.txt")).unwrap();
    assert!(saved.contains("# resolved config"));
    assert!(saved.contains("window = 256"));
}

#[test]
fn synth_writes_splits() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("data");
    let o = claqs(&["synth", "--out", out.to_str().unwrap(), "--seed", "4"]);
    assert_eq!(o.status.code(), Some(exit::OK), "{}", stderr(&o));
    let count = |f: &str| fs::read_to_string(out.join(f)).unwrap().lines().count();
    assert_eq!((count("train.tsv"), count("val.tsv"), count("test.tsv")), (2000, 250, 250));
}

fn records(path: &Path, kind: &str) -> Vec<serde_json::Value> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap())
        .filter(|v| v["record"] == kind)
        .collect()
}

#[test]
fn train_eval_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SYNTH);
    let out = dir.path().join("run");
    let o = claqs(&["train", "--config", &cfg, "--out", out.to_str().unwrap(), "--seed", "2"]);
    assert_eq!(o.status.code(), Some(exit::OK), "{}", stderr(&o));
    let metrics = out.join("metrics.jsonl");
    assert_eq!(records(&metrics, "epoch").len(), 3);
    assert_eq!(records(&metrics, "initial").len(), 1);
    let header = &records(&metrics, "config")[0];
    assert_eq!(header["config"]["seed"], 2);
    assert_eq!(header["config"]["model"]["qubits"], 4);
    for key in ["accuracy", "precision", "recall", "macro_f1"] {
        assert!(records(&metrics, "epoch")[0]["val"][key].is_number());
        assert!(records(&metrics, "test")[0]["metrics"][key].is_number());
    }
    assert!(out.join("best.ckpt").exists() && out.join("last.ckpt").exists());
    let echoed = claqs::config::RunConfig::load(out.join("config.toml")).unwrap();
    assert_eq!(echoed.seed, 2);

    let o = claqs(&["eval", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(exit::OK), "{}", stderr(&o));
    assert!(stdout(&o).starts_with("test: accuracy"));
    let eval: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("eval.json")).unwrap()).unwrap();
    assert_eq!(eval["config"]["seed"], 2);
}

#[test]
fn rerun_with_same_seed_is_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SYNTH);
    let mut runs = Vec::new();
    for name in ["a", "b"] {
        let out = dir.path().join(name);
        let o = claqs(&["train", "--config", &cfg, "--out", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(exit::OK));
        let m = out.join("metrics.jsonl");
        runs.push((records(&m, "epoch"), records(&m, "test")));
    }
    assert_eq!(runs[0], runs[1]);
}

#[test]
fn exit_codes_are_distinct() {
    let codes = [exit::OK, exit::CONFIG, exit::DATA, exit::DIVERGENCE, exit::BUDGET, exit::CHECK_FAILED];
    for (i, a) in codes.iter().enumerate() {
        for b in &codes[i + 1..] {
            assert_ne!(a, b);
        }
    }
    use claqs::Error;
    assert_eq!(claqs_cli::exit_code(&Error::Config(vec![])), exit::CONFIG);
    assert_eq!(
        claqs_cli::exit_code(&Error::Divergence {
            step: 1,
            loss: f64::NAN,
            mean_pre_norm: 0.1
        }),
        exit::DIVERGENCE
    );
    assert_eq!(claqs_cli::exit_code(&Error::Budget("x".into())), exit::BUDGET);
    assert_eq!(claqs_cli::exit_code(&Error::Input("x".into())), exit::DATA);
}
