use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_tsmom-cpd");

const UNIVERSE: &str = r#"
start_date = "2001-01-01"

[[assets]]
symbol = "UP"
seed = 1
[[assets.segments]]
length = 150
drift = 0.001
vol = 0.01
[[assets.segments]]
length = 150
drift = -0.001
vol = 0.02

[[assets]]
symbol = "DOWN"
seed = 2
[[assets.segments]]
length = 300
drift = -0.0005
vol = 0.015
"#;

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(BIN).current_dir(dir).args(args).env("RUST_LOG", "warn").output().unwrap()
}

#[test]
fn gen_data_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("u.toml"), UNIVERSE).unwrap();
    let a = run(dir.path(), &["gen-data", "--spec", "u.toml", "--output", "a.csv"]);
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    let b = run(dir.path(), &["gen-data", "--spec", "u.toml", "--output", "b.csv"]);
    assert!(b.status.success());
    let text = fs::read(dir.path().join("a.csv")).unwrap();
    assert_eq!(text, fs::read(dir.path().join("b.csv")).unwrap());
    let text = String::from_utf8(text).unwrap();
    assert!(text.starts_with("symbol,date,close\n"));
    assert_eq!(text.lines().count(), 1 + 2 * 301);
}

#[test]
fn bad_inputs_exit_nonzero_with_a_message() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.toml"), "start_date = \"2001-01-01\"\nassets = []\n").unwrap();
    let out = run(dir.path(), &["gen-data", "--spec", "bad.toml", "--output", "p.csv"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("no assets"));

    fs::write(dir.path().join("empty.toml"), "strategies = []\n").unwrap();
    let out = run(dir.path(), &["--config", "empty.toml", "backtest"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("strategy list is empty"));

    let out = run(dir.path(), &["--out", "nowhere", "cpd"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("price file not found"));
}

#[test]
fn cpd_command_is_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("u.toml"), UNIVERSE).unwrap();
    fs::write(
        dir.path().join("run.toml"),
        "synthetic_spec = \"u.toml\"\nout_dir = \"run\"\ncpd_lookbacks = [10]\ncpd_start = \"2001-11-01\"\n",
    )
    .unwrap();
    assert!(run(dir.path(), &["--config", "run.toml", "gen-data"]).status.success());
    let first = run(dir.path(), &["--config", "run.toml", "--workers", "2", "cpd"]);
    assert!(first.status.success(), "{}", String::from_utf8_lossy(&first.stderr));
    let cache = dir.path().join("run/cpd/cpd_cache.csv");
    let before = fs::read(&cache).unwrap();
    let second = run(dir.path(), &["--config", "run.toml", "cpd"]);
    assert!(String::from_utf8_lossy(&second.stdout).contains("0 new rows"));
    assert_eq!(fs::read(&cache).unwrap(), before);
}

#[test]
fn help_lists_every_subcommand() {
    let out = Command::new(BIN).arg("--help").output().unwrap();
    let text = String::from_utf8_lossy(&out.stdout);
    for cmd in ["gen-data", "cpd", "train", "backtest", "cost-sweep", "report"] {
        assert!(text.contains(cmd), "{cmd}");
    }
    for flag in ["--config", "--seed", "--workers", "--out", "--resume"] {
        assert!(text.contains(flag), "{flag}");
    }
}
