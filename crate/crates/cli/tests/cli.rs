use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn salsa(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_salsa"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn run_dir(out: &Path, suffix: &str) -> PathBuf {
    let mut dirs: Vec<_> = std::fs::read_dir(out)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap().to_string_lossy().ends_with(suffix))
        .collect();
    dirs.sort();
    dirs.pop().unwrap_or_else(|| panic!("no run dir ending in {suffix}"))
}

fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn train_without_autoencoder_names_the_fix() {
    let tmp = tempfile::tempdir().unwrap();
    let o = salsa(tmp.path(), &["train", "--env", "pendulum"]);
    assert_eq!(o.status.code(), Some(4));
    assert!(stderr(&o).contains("salsa train-ae --env pendulum --hd 3"), "{}", stderr(&o));
}

#[test]
fn usage_errors_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let o = salsa(tmp.path(), &["train-ae", "--env", "acrobot"]);
    assert_eq!(o.status.code(), Some(2));
    let o = salsa(tmp.path(), &["train-ae", "--env", "pendulum", "--ae.epochs=-3"]);
    assert_eq!(o.status.code(), Some(2));
    let o = salsa(tmp.path(), &["eval", "--bundle", "x.json", "--train.tau=0.1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn missing_bundle_exits_with_four() {
    let tmp = tempfile::tempdir().unwrap();
    let o = salsa(tmp.path(), &["eval", "--bundle", "does-not-exist.json"]);
    assert_eq!(o.status.code(), Some(4));
    assert!(stderr(&o).contains("salsa train"));
}

#[test]
fn missed_mse_target_exits_with_three_but_keeps_weights() {
    let tmp = tempfile::tempdir().unwrap();
    let o = salsa(
        tmp.path(),
        &["train-ae", "--env", "pendulum", "--samples", "200", "--epochs", "2"],
    );
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    let dir = run_dir(tmp.path(), "train-ae");
    assert!(dir.join("autoencoder.json").exists());
    assert_eq!(manifest(&dir)["status"], "target_missed");
}

#[test]
fn pipeline_writes_manifests_and_analyses() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path();
    let o = salsa(
        out,
        &[
            "train-ae", "--env", "pendulum", "--seed", "3", "--samples", "300", "--epochs", "3",
            "--target-mse", "1",
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let ae_dir = run_dir(out, "seed3-train-ae");
    let m = manifest(&ae_dir);
    assert_eq!(m["status"], "ok");
    assert_eq!(m["config"]["ae"]["epochs"], 3);
    assert!(m["outputs"]["autoencoder.json"].is_string());

    let o = salsa(
        out,
        &[
            "train", "--env", "pendulum", "--seed", "3", "--steps", "300",
            "--train.warmup_steps=100", "--train.eval_every", "100", "--eval-episodes", "2",
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let train_dir = run_dir(out, "seed3-train");
    let curve = std::fs::read_to_string(train_dir.join("curve.csv")).unwrap();
    assert!(curve.starts_with("episode,return,eval_return\n"));
    assert!(train_dir.join("checkpoints").read_dir().unwrap().next().is_some());
    let inputs = manifest(&train_dir)["inputs"].as_object().unwrap().clone();
    assert_eq!(inputs.len(), 1);

    let bundle = out.join("latest/bundle_pendulum_hd3.json");
    let bundle = bundle.to_str().unwrap();
    let o = salsa(out, &["rollout", "--bundle", bundle, "--mask", "0:30,150:200", "--seed", "5"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let roll = run_dir(out, "seed5-rollout");
    let csv = std::fs::read_to_string(roll.join("trajectory.csv")).unwrap();
    let mut lines = csv.lines();
    let header = lines.next().unwrap();
    assert!(header.contains("rho"), "{header}");
    assert_eq!(lines.count(), 200);
    let traj = roll.join("trajectory.json");
    let traj = traj.to_str().unwrap();

    let o = salsa(out, &["analyze", "kreiss", "--trajectory", traj, "--mode", "product"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = salsa(out, &["analyze", "floquet", "--trajectory", traj, "--window", "100:150"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let fl = run_dir(out, "analyze-floquet");
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(fl.join("floquet.json")).unwrap()).unwrap();
    assert_eq!(report["t1"], 100);
    assert_eq!(report["t2"], 150);
    let o = salsa(
        out,
        &["analyze", "contour", "--bundle", bundle, "--trajectory", traj, "--res", "6", "--every", "100"],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let frames = run_dir(out, "analyze-contour").join("contour");
    assert_eq!(frames.read_dir().unwrap().count(), 2);
    let o = salsa(out, &["analyze", "action-grid", "--bundle", bundle, "--res", "5"]);
    assert!(o.status.success(), "{}", stderr(&o));

    let o = salsa(out, &["analyze", "contour", "--bundle", bundle, "--trajectory", traj, "--dims", "0,9"]);
    assert_eq!(o.status.code(), Some(2));
}
