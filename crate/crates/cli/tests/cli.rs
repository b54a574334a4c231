use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

const SMALL: &str = r#"
[corpus]
node_count = 12
per_family = 6
template_threshold = 0.3

[model]
latent_dim = 3
embed_dim = 2
k_nn = 3
hidden = 8
batch_size = 8
epochs = 3

[inference]
ppc_draws = 20
y_grid = [-1.0, 0.0, 1.0]
band_draws = 15
generate_count = 4
mean_draws = 10
top_k = 5

[eval]
folds = 2
pca_components = 4
"#;

fn gate(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gate"))
        .args(args)
        .env_remove("GATE_CONFIG")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn ok(out: Output) {
    assert_eq!(
        code(&out),
        0,
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn small_config(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("small.toml");
    std::fs::write(&path, SMALL).unwrap();
    path
}

#[test]
fn help_and_version_exit_zero() {
    ok(gate(&["--help"]));
    ok(gate(&["--version"]));
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(code(&gate(&[])), 2);
    assert_eq!(code(&gate(&["frobnicate"])), 2);
    assert_eq!(code(&gate(&["train", "--mode", "sideways"])), 2);
}

#[test]
fn unknown_config_key_exits_three() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[model]\nlatnt_dim = 3\n").unwrap();
    let out = gate(&["--config", p(&cfg), "simulate", "--out", p(dir.path())]);
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("latnt_dim"));
}

#[test]
fn config_from_environment() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[corpus]\nnode_cnt = 3\n").unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_gate"))
        .args(["simulate", "--out", p(&dir.path().join("c"))])
        .env("GATE_CONFIG", &cfg)
        .output()
        .unwrap();
    assert_eq!(code(&out), 3);
}

#[test]
fn missing_input_exits_four() {
    let dir = TempDir::new().unwrap();
    let out = gate(&[
        "embed",
        "--model",
        p(&dir.path().join("absent.gate")),
        "--data",
        p(dir.path()),
        "--out",
        p(&dir.path().join("o")),
    ]);
    assert_eq!(code(&out), 4);
}

#[test]
fn corrupt_model_exits_four() {
    let dir = TempDir::new().unwrap();
    let model = dir.path().join("m.gate");
    std::fs::write(&model, b"GATEMODL not really").unwrap();
    let out = gate(&[
        "generate",
        "--model",
        p(&model),
        "--out",
        p(&dir.path().join("o")),
    ]);
    assert_eq!(code(&out), 4);
}

fn simulate_and_train(dir: &Path, cfg: &Path, mode: &str, name: &str) -> std::path::PathBuf {
    let data = dir.join("data");
    if !data.exists() {
        ok(gate(&["--config", p(cfg), "simulate", "--out", p(&data)]));
    }
    let out = dir.join(name);
    ok(gate(&[
        "--config",
        p(cfg),
        "train",
        "--mode",
        mode,
        "--data",
        p(&data),
        "--out",
        p(&out),
    ]));
    out
}

#[test]
fn training_is_reproducible_byte_for_byte() {
    let dir = TempDir::new().unwrap();
    let cfg = small_config(dir.path());
    let a = simulate_and_train(dir.path(), &cfg, "regate", "a");
    let b = simulate_and_train(dir.path(), &cfg, "regate", "b");
    for f in [
        "model.gate",
        "model.gate.json",
        "trace.csv",
        "distances.csv",
        "config.toml",
    ] {
        let x = std::fs::read(a.join(f)).unwrap();
        let y = std::fs::read(b.join(f)).unwrap();
        assert_eq!(x, y, "{f} differs");
    }
}

#[test]
fn rerun_from_snapshot_reproduces_outputs() {
    let dir = TempDir::new().unwrap();
    let cfg = small_config(dir.path());
    let data = dir.path().join("data");
    ok(gate(&[
        "--config",
        p(&cfg),
        "simulate",
        "--out",
        p(&data),
        "--seed",
        "7",
    ]));
    let again = dir.path().join("again");
    ok(gate(&[
        "--config",
        p(&data.join("config.toml")),
        "simulate",
        "--out",
        p(&again),
    ]));
    for f in ["samples.csv", "distances.csv", "graph_0005.csv"] {
        assert_eq!(
            std::fs::read(data.join(f)).unwrap(),
            std::fs::read(again.join(f)).unwrap()
        );
    }
    let manifest: serde_json::Value =
        serde_json::from_slice(&std::fs::read(data.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "simulate");
    assert_eq!(manifest["config"]["corpus"]["seed"], 7);
}

#[test]
fn supervised_commands_end_to_end() {
    let dir = TempDir::new().unwrap();
    let cfg = small_config(dir.path());
    let run = simulate_and_train(dir.path(), &cfg, "regate", "run");
    let model = run.join("model.gate");
    let data = dir.path().join("data");
    let c = p(&cfg);
    let sub = |name: &str| dir.path().join(name);

    ok(gate(&[
        "--config",
        c,
        "embed",
        "--model",
        p(&model),
        "--data",
        p(&data),
        "--out",
        p(&sub("embed")),
    ]));
    let codes = std::fs::read_to_string(sub("embed").join("codes.csv")).unwrap();
    assert_eq!(codes.lines().count(), 1 + 24);
    assert!(codes.starts_with("index,z0,z1,z2"));
    assert!(sub("embed").join("codes_pca.svg").exists());

    ok(gate(&[
        "--config",
        c,
        "predict",
        "--model",
        p(&model),
        "--data",
        p(&data),
        "--out",
        p(&sub("predict")),
    ]));
    let pred = std::fs::read_to_string(sub("predict").join("predictions.csv")).unwrap();
    assert_eq!(pred.lines().count(), 25);

    ok(gate(&[
        "--config",
        c,
        "generate",
        "--model",
        p(&model),
        "--out",
        p(&sub("gen")),
        "--y",
        "-0.5",
        "--mean-network",
    ]));
    assert!(sub("gen").join("graph_0003.csv").exists());
    assert!(sub("gen").join("mean_network.csv").exists());

    ok(gate(&[
        "--config",
        c,
        "ppc",
        "--model",
        p(&model),
        "--data",
        p(&data),
        "--out",
        p(&sub("ppc")),
    ]));
    assert!(sub("ppc").join("ppc.csv").exists());
    assert!(sub("ppc").join("ppc_density.svg").exists());

    ok(gate(&[
        "--config",
        c,
        "band",
        "--model",
        p(&model),
        "--out",
        p(&sub("band")),
    ]));
    let bands = std::fs::read_to_string(sub("band").join("bands.csv")).unwrap();
    assert_eq!(bands.lines().count(), 1 + 2 * 3);
    assert!(sub("band").join("band_density.svg").exists());

    ok(gate(&[
        "--config",
        c,
        "diff",
        "--model",
        p(&model),
        "--out",
        p(&sub("diff")),
        "--data",
        p(&data),
    ]));
    assert!(sub("diff").join("edge_deltas.csv").exists());
    let out = gate(&[
        "--config",
        c,
        "diff",
        "--model",
        p(&model),
        "--out",
        p(&sub("d2")),
        "--y-low",
        "0",
    ]);
    assert_eq!(code(&out), 2);

    for d in ["embed", "predict", "gen", "ppc", "band", "diff"] {
        assert!(sub(d).join("manifest.json").exists(), "{d}");
    }
}

#[test]
fn unsupervised_model_rejects_conditional_commands() {
    let dir = TempDir::new().unwrap();
    let cfg = small_config(dir.path());
    let run = simulate_and_train(dir.path(), &cfg, "gate", "run");
    let model = run.join("model.gate");
    ok(gate(&[
        "--config",
        p(&cfg),
        "generate",
        "--model",
        p(&model),
        "--out",
        p(&dir.path().join("prior")),
    ]));
    let out = gate(&[
        "--config",
        p(&cfg),
        "band",
        "--model",
        p(&model),
        "--out",
        p(&dir.path().join("b")),
    ]);
    assert_eq!(code(&out), 4);
}

#[test]
fn eval_writes_report_and_plots() {
    let dir = TempDir::new().unwrap();
    let cfg = small_config(dir.path());
    let out = dir.path().join("eval");
    ok(gate(&["--config", p(&cfg), "eval", "--out", p(&out)]));
    let report = std::fs::read_to_string(out.join("report.csv")).unwrap();
    // header plus two folds and a pooled row for each of four methods
    assert_eq!(report.lines().count(), 1 + 4 * 3);
    for m in ["regate", "s_regate", "lr_pca", "mean"] {
        assert!(out.join(format!("scatter_{m}.svg")).exists(), "{m}");
    }
}
