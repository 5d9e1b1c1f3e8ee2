use std::path::Path;
use std::process::{Command, Output};

fn asvnav(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_asvnav")).args(args).env("ASVNAV_OUT", out).output().expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const FAST_TRAINING: [&str; 8] = [
    "--set",
    "agent.warmup_steps=64",
    "--set",
    "training.eval_interval=100",
    "--set",
    "training.eval_episodes=1",
    "--set",
    "agent.batch_size=16",
];

#[test]
fn out_of_scope_agent_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = asvnav(dir.path(), &["eval", "--agent", "sac"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("out of scope"), "{}", stderr(&o));
}

#[test]
fn unknown_flag_and_agent_are_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(asvnav(dir.path(), &["eval", "--agent", "apf", "--bogus"]).status.code(), Some(1));
    assert_eq!(asvnav(dir.path(), &["eval", "--agent", "teleport"]).status.code(), Some(1));
    assert_eq!(asvnav(dir.path(), &["eval", "--agent", "dqn"]).status.code(), Some(1));
    assert_eq!(asvnav(dir.path(), &["train", "--agent", "mpc"]).status.code(), Some(1));
    assert_eq!(asvnav(dir.path(), &["--help"]).status.code(), Some(0));
}

#[test]
fn missing_config_file_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = asvnav(dir.path(), &["eval", "--agent", "apf", "--config", "/nonexistent/lab.toml"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn eval_baseline_writes_summary_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let o = asvnav(dir.path(), &["eval", "--agent", "apf", "--episodes", "2", "--only", "3 rob 0 obs", "--seed", "5"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let run = dir.path().join("eval-apf-seed5");
    let table = std::fs::read_to_string(run.join("summary.tsv")).unwrap();
    assert!(table.starts_with("controller\t3 rob 0 obs\n"));
    assert!(table.lines().nth(1).unwrap().starts_with("apf\t"));
    assert_eq!(String::from_utf8_lossy(&o.stdout), table);
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(run.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 5);
    assert_eq!(manifest["config_hash"].as_str().unwrap().len(), 64);
    assert!(run.join("metrics.tsv").exists());
}

#[test]
fn train_then_evaluate_roll_out_and_plot() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["train", "--agent", "dqn", "--steps", "200", "--seed", "3"];
    args.extend(FAST_TRAINING);
    let o = asvnav(dir.path(), &args);
    assert!(o.status.success(), "{}", stderr(&o));
    let run = dir.path().join("train-dqn-seed3");
    let ckpt = run.join("final.ckpt");
    for f in ["final.ckpt", "curve.tsv", "manifest.json"] {
        assert!(run.join(f).exists(), "{f}");
    }

    let ckpt = ckpt.to_str().unwrap();
    let o = asvnav(
        dir.path(),
        &["eval", "--agent", "dqn", "--checkpoint", ckpt, "--episodes", "1", "--only", "3 rob 0 obs"],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let o = asvnav(dir.path(), &["eval", "--agent", "iqn", "--checkpoint", ckpt, "--episodes", "1"]);
    assert_eq!(o.status.code(), Some(1));

    let o = asvnav(dir.path(), &["rollout", "--agent", "dqn", "--checkpoint", ckpt, "--seed", "4"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rollout = dir.path().join("rollout-dqn-stage1-seed4");
    assert!(std::fs::read_to_string(rollout.join("trajectory.svg")).unwrap().starts_with("<svg"));

    let curve = format!("dqn={}", run.join("curve.tsv").display());
    let traj = rollout.join("trajectory.ndjson");
    let scen = rollout.join("scenario.json");
    let o = asvnav(
        dir.path(),
        &[
            "plot-export",
            "--curve",
            &curve,
            "--trajectory",
            traj.to_str().unwrap(),
            "--scenario",
            scen.to_str().unwrap(),
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["curve_success.svg", "curve_reward.svg", "trajectory.svg"] {
        assert!(dir.path().join("plots").join(f).exists(), "{f}");
    }
}

#[test]
fn plot_export_without_inputs_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(asvnav(dir.path(), &["plot-export"]).status.code(), Some(1));
}

#[test]
fn rollouts_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let a = asvnav(dir.path(), &["rollout", "--agent", "mpc", "--seed", "9"]);
    let traj = std::fs::read(dir.path().join("rollout-mpc-stage1-seed9/trajectory.ndjson")).unwrap();
    let b = asvnav(dir.path(), &["rollout", "--agent", "mpc", "--seed", "9"]);
    assert!(a.status.success() && b.status.success());
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(traj, std::fs::read(dir.path().join("rollout-mpc-stage1-seed9/trajectory.ndjson")).unwrap());
}

#[test]
fn segment_simulated_and_file_scans() {
    let dir = tempfile::tempdir().unwrap();
    let o = asvnav(dir.path(), &["segment", "--seed", "2"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let run = dir.path().join("segment-seed2");
    let clusters: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(run.join("clusters.json")).unwrap()).unwrap();
    let count = clusters.as_array().unwrap().len();
    assert!(String::from_utf8_lossy(&o.stdout).starts_with(&format!("{count} clusters")));

    let scan = run.join("scan.json");
    let o = asvnav(dir.path(), &["segment", "--scan", scan.to_str().unwrap(), "--seed", "3"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let again = std::fs::read_to_string(dir.path().join("segment-seed3/clusters.json")).unwrap();
    assert_eq!(again, std::fs::read_to_string(run.join("clusters.json")).unwrap());

    assert_eq!(asvnav(dir.path(), &["segment", "--threshold", "-1"]).status.code(), Some(1));
}

#[test]
fn diverging_training_exits_with_code_three() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["train", "--agent", "dqn", "--steps", "400", "--set", "agent.lr_critic=1e200"];
    args.extend(FAST_TRAINING);
    let o = asvnav(dir.path(), &args);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(dir.path().join("train-dqn-seed0/diagnostic.ckpt").exists());
}
