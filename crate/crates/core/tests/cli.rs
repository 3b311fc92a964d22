//! The `fedtransfer` binary: subcommands, exit codes and error output.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use fedtransfer::lkt::LktConfig;
use fedtransfer::orchestrator::ExperimentConfig;
use tempfile::tempdir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fedtransfer"))
}

fn run(args: &[&str], out_root: &Path) -> Output {
    bin().args(args).env("FEDTRANSFER_OUT", out_root).output().unwrap()
}

fn error_json(out: &Output) -> serde_json::Value {
    let text = String::from_utf8_lossy(&out.stderr);
    serde_json::from_str(text.trim()).unwrap_or_else(|e| panic!("stderr is not JSON ({e}): {text}"))
}

const SMALL: &str = r#"name = "cli"
num_seeds = 2

[dataset.synthetic]
n_overlap = 150
n_local = 300
task_features = 6
data_features = 5

[lkt]
hidden = 16
epochs = 3
finetune_epochs = 2
"#;

#[test]
fn missing_config_is_a_usage_error_naming_the_path() {
    let tmp = tempdir().unwrap();
    let out = run(&["run", "--config", "nope.toml"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    let err = error_json(&out);
    assert_eq!(err["error"], "io");
    assert_eq!(err["path"], "nope.toml");
}

#[test]
fn invalid_config_reports_line_and_exits_3() {
    let tmp = tempdir().unwrap();
    let path = tmp.path().join("bad.toml");
    fs::write(&path, "name = \"x\"\n\n[lkt]\ntau = -1.0\n").unwrap();
    let out = run(&["run", "--config", path.to_str().unwrap()], tmp.path());
    assert_eq!(out.status.code(), Some(3));
    let err = error_json(&out);
    assert_eq!(err["error"], "config");
    let msg = err["message"].as_str().unwrap();
    assert!(msg.contains("bad.toml:4:") && msg.contains("lkt.tau"), "{msg}");

    fs::write(&path, "name = \"x\"\nbogus = 1\n").unwrap();
    let out = run(&["run", "--config", path.to_str().unwrap()], tmp.path());
    assert_eq!(out.status.code(), Some(3));
    assert!(error_json(&out)["message"].as_str().unwrap().contains("bad.toml:2:"));
}

#[test]
fn usage_errors_exit_2() {
    let tmp = tempdir().unwrap();
    for args in
        [&["frobnicate"][..], &["run"], &["sweep", "--axis", "colour", "--values", "1"], &["report", "--in", "missing"]]
    {
        let out = run(args, tmp.path());
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        error_json(&out);
    }
    assert_eq!(run(&["--help"], tmp.path()).status.code(), Some(0));
}

#[test]
fn run_then_report_renders_every_condition() {
    let tmp = tempdir().unwrap();
    let cfg = tmp.path().join("small.toml");
    fs::write(&cfg, SMALL).unwrap();
    let out = run(&["run", "--config", cfg.to_str().unwrap()], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    // FEDTRANSFER_OUT/<name> is the default destination
    let dir = tmp.path().join("cli");
    assert!(dir.join("report-unitrans.json").is_file());

    let md = run(&["report", "--in", dir.to_str().unwrap()], tmp.path());
    assert!(md.status.success());
    let text = String::from_utf8(md.stdout).unwrap();
    assert!(text.starts_with("| condition | seeds | accuracy |"), "{text}");
    for c in ["local", "unitrans"] {
        let line = text.lines().find(|l| l.starts_with(&format!("| {c} |"))).unwrap();
        assert!(line.contains(" ± "), "{line}");
    }
    let csv = run(&["report", "--in", dir.to_str().unwrap(), "--format", "csv"], tmp.path());
    assert_eq!(String::from_utf8(csv.stdout).unwrap().lines().count(), 3);
    let bad = run(&["report", "--in", dir.to_str().unwrap(), "--format", "xml"], tmp.path());
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn sweep_and_generated_data() {
    let tmp = tempdir().unwrap();
    let spec = tmp.path().join("spec.toml");
    fs::write(&spec, "n_overlap = 120\nn_local = 200\ntask_features = 5\ndata_features = 4\nnum_data_parties = 2\n")
        .unwrap();
    let data = tmp.path().join("data");
    let out = run(&["gen-synthetic", "--spec", spec.to_str().unwrap(), "--out", data.to_str().unwrap()], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["task.csv", "data1.csv", "data2.csv", "experiment.toml"] {
        assert!(data.join(f).is_file(), "{f}");
    }

    let cfg = data.join("experiment.toml");
    let mut loaded = ExperimentConfig::load(&cfg).unwrap();
    loaded.num_seeds = 1;
    loaded.lkt = LktConfig { hidden: 16, epochs: 2, finetune_epochs: 2, ..Default::default() };
    fs::write(&cfg, loaded.to_toml_string().unwrap()).unwrap();
    let sweep_dir = tmp.path().join("sweep");
    let out = run(
        &[
            "sweep",
            "--config",
            cfg.to_str().unwrap(),
            "--axis",
            "num_data_hospitals",
            "--values",
            "1,2",
            "--out",
            sweep_dir.to_str().unwrap(),
        ],
        tmp.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(sweep_dir.join("num_data_hospitals-1").is_dir());
    assert!(sweep_dir.join("num_data_hospitals-2").is_dir());
    let md = run(&["report", "--in", sweep_dir.to_str().unwrap()], tmp.path());
    let text = String::from_utf8(md.stdout).unwrap();
    assert!(text.starts_with("| num_data_hospitals |"), "{text}");
    assert_eq!(text.lines().count(), 6);
}
