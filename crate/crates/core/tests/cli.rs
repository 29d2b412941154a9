use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use pdmd::ExperimentConfig;

fn pdmd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pdmd")).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

/// A short copy of a shipped config, written into `dir`.
fn short_config(dir: &Path, horizon: usize) -> PathBuf {
    let configs = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut config = ExperimentConfig::load(configs.join("phi-identity.toml")).unwrap();
    config.instance.horizon = horizon;
    config.output.dir = dir.join("run");
    let path = dir.join("config.toml");
    std::fs::write(&path, config.to_toml()).unwrap();
    path
}

#[test]
fn run_then_replay() {
    let tmp = tempfile::tempdir().unwrap();
    let config = short_config(tmp.path(), 120);
    let cfg = config.to_str().unwrap();
    let out = pdmd(&["run", "--config", cfg]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let rounds = tmp.path().join("run/rounds.csv");
    for file in ["config.toml", "instance.trace", "graphs.txt", "rounds.csv", "series.csv", "metrics.csv", "summary.toml"] {
        assert!(tmp.path().join("run").join(file).exists(), "{file} missing");
    }
    assert_eq!(code(&pdmd(&["replay", "--trace", rounds.to_str().unwrap(), "--config", cfg])), 0);

    // perturb one decision in round 50
    let text = std::fs::read_to_string(&rounds).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let row = lines.iter().position(|l| l.starts_with("50,3,")).unwrap();
    let mut fields: Vec<String> = lines[row].split(',').map(String::from).collect();
    let x: f64 = fields[5].parse().unwrap();
    fields[5] = format!("{:?}", x + 1e-6);
    lines[row] = fields.join(",");
    std::fs::write(&rounds, lines.join("\n") + "\n").unwrap();
    let out = pdmd(&["replay", "--trace", rounds.to_str().unwrap(), "--config", cfg]);
    assert_eq!(code(&out), 5);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("round 50 agent 3"), "{err}");
}

#[test]
fn seed_override_changes_the_run() {
    let tmp = tempfile::tempdir().unwrap();
    let config = short_config(tmp.path(), 30);
    let cfg = config.to_str().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    assert_eq!(code(&pdmd(&["run", "--config", cfg, "--out", a.to_str().unwrap()])), 0);
    assert_eq!(code(&pdmd(&["run", "--config", cfg, "--seed", "9", "--out", b.to_str().unwrap()])), 0);
    let read = |d: &Path| std::fs::read(d.join("instance.trace")).unwrap();
    assert_ne!(read(&a), read(&b));
    // the other run's instance no longer matches
    let out = pdmd(&["replay", "--trace", b.join("rounds.csv").to_str().unwrap(), "--config", cfg]);
    assert_eq!(code(&out), 5);
}

#[test]
fn sweep_writes_a_table() {
    let tmp = tempfile::tempdir().unwrap();
    let config = short_config(tmp.path(), 100);
    let out = pdmd(&["sweep", "--config", config.to_str().unwrap(), "--param", "kappa", "--values", "0.3,0.7"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let table = std::fs::read_to_string(tmp.path().join("run/sweep.csv")).unwrap();
    let mut lines = table.lines();
    assert_eq!(lines.next(), Some("param,value,t,reg_dyn_per_t,violation_per_t"));
    let rows: Vec<_> = lines.collect();
    assert_eq!(rows.len(), 2);
    assert!(rows[0].starts_with("kappa,0.3,100,"));
    assert!(tmp.path().join("run/kappa-0.7/metrics.csv").exists());
}

#[test]
fn check_graph_passes_on_shipped_configs() {
    let configs = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    for entry in std::fs::read_dir(configs).unwrap() {
        let path = entry.unwrap().path();
        let out = pdmd(&["check-graph", "--config", path.to_str().unwrap()]);
        assert_eq!(code(&out), 0, "{}: {}", path.display(), String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn exit_codes_for_bad_input() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(code(&pdmd(&["run", "--config", tmp.path().join("nope.toml").to_str().unwrap()])), 3);

    let config = short_config(tmp.path(), 10);
    let text = std::fs::read_to_string(&config).unwrap();
    let typo = tmp.path().join("typo.toml");
    std::fs::write(&typo, text.replace("[network]", "[network]\nconect_probability = 0.3")).unwrap();
    assert_eq!(code(&pdmd(&["run", "--config", typo.to_str().unwrap()])), 2);

    let general = tmp.path().join("general.toml");
    std::fs::write(&general, text.replace("\"strongly-convex\"", "\"general\"")).unwrap();
    let out = pdmd(&["run", "--config", general.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("invalid config"));

    let out = pdmd(&["sweep", "--config", config.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
}
