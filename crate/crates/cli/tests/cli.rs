//! End-to-end tests of the command-line driver: the full
//! prepare/train/sample/evaluate/report pipeline through the binary, plus
//! resume and determinism guarantees through the library API.

use std::path::{Path, PathBuf};
use std::process::Command;

use tabdiff_cli::checkpoint::Checkpoint;
use tabdiff_cli::commands;

const CONFIG: &str = r#"
[data]
schema = "toy/schema.toml"
csv = "toy/toy.csv"
clients = 3

[model]
hidden_layers = 1
hidden_width = 16
time_embed_dim = 8
timesteps = 10
beta_start = 1e-4
beta_end = 0.02

[federation]
rounds = 4
client_steps = 2
batch_size = 16
seed = 11
snapshot_every = 2
"#;

struct Workspace {
    _dir: tempfile::TempDir,
    root: PathBuf,
    config: PathBuf,
}

/// Tempdir with generated toy data and a config whose output lands in
/// `<root>/run`.
fn workspace() -> Workspace {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().to_path_buf();
    commands::toydata_cmd(300, 3, &root.join("toy")).unwrap();
    let out = root.join("run");
    let config = root.join("config.toml");
    let text = format!("{CONFIG}\n[output]\ndir = \"{}\"\n", out.display());
    std::fs::write(&config, text).unwrap();
    Workspace { _dir: dir, root, config }
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_tabdiff"))
}

fn run_ok(cmd: &mut Command) -> String {
    let out = cmd.output().unwrap();
    assert!(
        out.status.success(),
        "command failed\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn run_err(cmd: &mut Command) -> String {
    let out = cmd.output().unwrap();
    assert!(!out.status.success(), "command unexpectedly succeeded");
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn ov(items: &[&str]) -> Vec<String> {
    items.iter().map(|s| s.to_string()).collect()
}

#[test]
fn full_pipeline_through_the_binary() {
    let ws = workspace();
    let run = ws.root.join("run");

    run_ok(bin().args(["prepare", "--config"]).arg(&ws.config));
    let manifest = std::fs::read_to_string(run.join("partition.txt")).unwrap();
    assert!(manifest.contains("client 0"), "{manifest}");
    assert!(manifest.contains("dropped: 0 rows"), "{manifest}");

    run_ok(bin().args(["train", "--config"]).arg(&ws.config));
    assert!(run.join("model.ckpt").exists());
    assert!(run.join("snapshots/round_00002.ckpt").exists());
    let history = std::fs::read_to_string(run.join("history.csv")).unwrap();
    assert_eq!(history.lines().count(), 5, "header + 4 rounds:\n{history}");

    let synth = run.join("synth.csv");
    run_ok(
        bin()
            .args(["sample", "--rows", "60", "--seed", "1", "--checkpoint"])
            .arg(run.join("model.ckpt"))
            .arg("--output")
            .arg(&synth),
    );
    let text = std::fs::read_to_string(&synth).unwrap();
    assert_eq!(text.lines().count(), 61);
    assert_eq!(text.lines().next().unwrap(), "amount,balance,duration,segment,grade");

    let report = run.join("report.json");
    run_ok(
        bin()
            .args(["evaluate", "--schema"])
            .arg(ws.root.join("toy/schema.toml"))
            .arg("--real")
            .arg(ws.root.join("toy/toy.csv"))
            .arg("--synth")
            .arg(&synth)
            .arg("--output")
            .arg(&report),
    );
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    let omega = json["fidelity"]["omega"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&omega));
    // Default label column is the schema's (grade), so utility is present.
    assert!(json["utility"]["mean"].as_f64().is_some());

    let heat = run.join("heat");
    run_ok(
        bin()
            .args(["report", "--schema"])
            .arg(ws.root.join("toy/schema.toml"))
            .arg("--real")
            .arg(ws.root.join("toy/toy.csv"))
            .arg("--model")
            .arg(format!("fed={}", synth.display()))
            .arg("--output")
            .arg(&heat),
    );
    for name in ["fidelity", "coverage", "privacy"] {
        let csv = std::fs::read_to_string(heat.join(format!("{name}.csv"))).unwrap();
        assert!(csv.starts_with("model,"), "{name}: {csv}");
        assert_eq!(csv.lines().count(), 2, "{name}: one model row expected");
    }
}

#[test]
fn sampling_zero_rows_writes_header_only() {
    let ws = workspace();
    commands::train(&ws.config, &[], None, None).unwrap();
    let out = ws.root.join("empty.csv");
    commands::sample(&ws.root.join("run/model.ckpt"), 0, 0, &out).unwrap();
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(text.trim(), "amount,balance,duration,segment,grade");
}

#[test]
fn self_evaluation_hits_fixed_points_and_utility_toggle_works() {
    let ws = workspace();
    let toy = ws.root.join("toy/toy.csv");
    let schema = ws.root.join("toy/schema.toml");
    let report = ws.root.join("self.json");
    commands::evaluate_cmd(&schema, &toy, &toy, None, false, 1_000_000, Some(&report))
        .unwrap();
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(json["fidelity"]["omega"].as_f64().unwrap(), 1.0);
    assert_eq!(json["coverage"]["mean"].as_f64().unwrap(), 1.0);
    assert_eq!(json["privacy"]["median_dcr"].as_f64().unwrap(), 0.0);
    assert!(json.get("utility").is_some());

    let no_util = ws.root.join("no_util.json");
    commands::evaluate_cmd(&schema, &toy, &toy, None, true, 1_000_000, Some(&no_util))
        .unwrap();
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&no_util).unwrap()).unwrap();
    assert!(json.get("utility").is_none());
}

#[test]
fn resume_reproduces_an_uninterrupted_run_bit_for_bit() {
    let ws = workspace();
    let full_out = ws.root.join("full");
    let split_out = ws.root.join("split");

    commands::train(
        &ws.config,
        &ov(&[&format!("output.dir={}", full_out.display())]),
        None,
        None,
    )
    .unwrap();

    // Same run, interrupted after round 2 and resumed to completion.
    commands::train(
        &ws.config,
        &ov(&[
            &format!("output.dir={}", split_out.display()),
            "federation.rounds=2",
        ]),
        None,
        None,
    )
    .unwrap();
    commands::train(
        &ws.config,
        &ov(&[&format!("output.dir={}", split_out.display())]),
        Some(&split_out.join("model.ckpt")),
        None,
    )
    .unwrap();

    let a = Checkpoint::load(&full_out.join("model.ckpt")).unwrap();
    let mut b = Checkpoint::load(&split_out.join("model.ckpt")).unwrap();
    assert!(a.params.bitwise_eq(&b.params));
    assert_eq!(a.round, b.round);
    assert_eq!(a.history, b.history);
    assert_eq!(a.clients.len(), b.clients.len());
    for (ca, cb) in a.clients.iter().zip(&b.clients) {
        assert_eq!(ca.adam.step, cb.adam.step);
        assert!(ca.adam.m.iter().zip(&cb.adam.m).all(|(x, y)| x.to_bits() == y.to_bits()));
        assert!(ca.adam.v.iter().zip(&cb.adam.v).all(|(x, y)| x.to_bits() == y.to_bits()));
    }
    // Everything except the output directory in the config echo is identical
    // byte for byte.
    b.config_echo = a.config_echo.clone();
    let (mut buf_a, mut buf_b) = (Vec::new(), Vec::new());
    a.write(&mut buf_a).unwrap();
    b.write(&mut buf_b).unwrap();
    assert_eq!(buf_a, buf_b, "resumed checkpoint differs from the uninterrupted run");
    assert_eq!(
        std::fs::read_to_string(full_out.join("history.csv")).unwrap(),
        std::fs::read_to_string(split_out.join("history.csv")).unwrap()
    );
}

#[test]
fn parallel_training_matches_sequential_bitwise() {
    let ws = workspace();
    let seq_out = ws.root.join("seq");
    let par_out = ws.root.join("par");
    commands::train(
        &ws.config,
        &ov(&[&format!("output.dir={}", seq_out.display())]),
        None,
        None,
    )
    .unwrap();
    commands::train(
        &ws.config,
        &ov(&[
            &format!("output.dir={}", par_out.display()),
            "federation.parallel=true",
        ]),
        None,
        None,
    )
    .unwrap();
    let seq = Checkpoint::load(&seq_out.join("model.ckpt")).unwrap();
    let par = Checkpoint::load(&par_out.join("model.ckpt")).unwrap();
    assert!(seq.params.bitwise_eq(&par.params));
    assert_eq!(seq.history.len(), par.history.len());
    for (a, b) in seq.history.iter().zip(&par.history) {
        assert_eq!(a.aggregate_loss.to_bits(), b.aggregate_loss.to_bits());
    }
}

#[test]
fn local_baseline_produces_a_sampleable_checkpoint() {
    let ws = workspace();
    commands::train(&ws.config, &[], None, Some(1)).unwrap();
    let ckpt = ws.root.join("run/local_1.ckpt");
    assert!(ckpt.exists());
    let out = ws.root.join("local_synth.csv");
    commands::sample(&ckpt, 10, 0, &out).unwrap();
    assert_eq!(std::fs::read_to_string(&out).unwrap().lines().count(), 11);
    // Local checkpoints cannot seed a federated resume.
    let err = commands::train(&ws.config, &[], Some(&ckpt), None).unwrap_err();
    assert!(err.to_string().contains("standalone"), "{err:#}");
}

#[test]
fn failures_exit_nonzero_with_a_message() {
    let ws = workspace();

    let stderr = run_err(bin().args(["prepare", "--config", "/nonexistent/config.toml"]));
    assert!(stderr.contains("error:"), "{stderr}");

    // More clients than split-column categories: the message names the column.
    let stderr = run_err(
        bin()
            .args(["prepare", "--config"])
            .arg(&ws.config)
            .args(["--set", "data.clients=10"]),
    );
    assert!(stderr.contains("segment"), "{stderr}");

    let stderr = run_err(
        bin()
            .args(["sample", "--rows", "5", "--checkpoint", "/nonexistent.ckpt"])
            .arg("--output")
            .arg(ws.root.join("x.csv")),
    );
    assert!(stderr.contains("error:"), "{stderr}");

    // A plain file is not a checkpoint.
    let not_ckpt = ws.root.join("not_a_checkpoint");
    std::fs::write(&not_ckpt, b"hello").unwrap();
    let stderr = run_err(
        bin()
            .args(["sample", "--rows", "5", "--checkpoint"])
            .arg(&not_ckpt)
            .arg("--output")
            .arg(ws.root.join("y.csv")),
    );
    assert!(stderr.contains("error:"), "{stderr}");
}

#[test]
fn relative_data_paths_resolve_against_the_config_directory() {
    let ws = workspace();
    // Run from a different working directory than the config's.
    let elsewhere = ws.root.join("elsewhere");
    std::fs::create_dir_all(&elsewhere).unwrap();
    run_ok(
        bin()
            .current_dir(&elsewhere)
            .args(["prepare", "--config"])
            .arg(&ws.config),
    );
    assert!(Path::new(&ws.root).join("run/partition.txt").exists());
}
