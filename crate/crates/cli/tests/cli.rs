use std::path::Path;
use std::process::{Command, Output};

fn dsa(args: &[&str], out_root: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dsa"))
        .args(args)
        .env("DSA_OUTPUT_ROOT", out_root)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

const TINY: [&str; 16] = [
    "--set",
    "num_agents=2",
    "--set",
    "num_channels=2",
    "--set",
    "horizon=5",
    "--set",
    "hidden=4",
    "--set",
    "iterations=6",
    "--set",
    "eval_every=3",
    "--set",
    "eval_episodes=2",
    "--set",
    "seeds=[0, 1]",
];

#[test]
fn train_eval_aggregate_round_trip() {
    let root = tempfile::tempdir().unwrap();
    let mut args = vec!["train", "--set", "algorithm=iagc_ppo_dense"];
    args.extend(TINY);
    let o = dsa(&args, root.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let run_dir = root.path().join("iagc_ppo_dense_A");
    assert!(stdout(&o).contains(&format!("output: {}", run_dir.display())));
    let evals = std::fs::read_to_string(run_dir.join("seed_1/evals.csv")).unwrap();
    assert_eq!(evals.lines().count(), 3);
    assert!(evals.starts_with("seed,iteration,mean_reward,sparsity,wall_ms\n1,3,"));

    // Re-evaluating the final checkpoint with the run's protocol reproduces its last record.
    let ck = run_dir.join("seed_1/checkpoint.bin");
    let o = dsa(&["eval", "--checkpoint", ck.to_str().unwrap()], root.path());
    assert!(o.status.success());
    let printed = stdout(&o);
    let last = evals
        .lines()
        .last()
        .unwrap()
        .split(',')
        .nth(2)
        .unwrap()
        .parse::<f64>()
        .unwrap();
    let shown: f64 = printed
        .split("mean reward ")
        .nth(1)
        .and_then(|s| s.split_whitespace().next())
        .unwrap()
        .parse()
        .unwrap();
    assert!((shown - last).abs() <= 1e-5 * last.abs().max(1.0), "{printed}");

    let mut args = vec!["train", "--set", "algorithm=aloha"];
    args.extend(TINY);
    assert!(dsa(&args, root.path()).status.success());
    let summary = root.path().join("summary");
    let o = dsa(
        &[
            "aggregate",
            run_dir.to_str().unwrap(),
            root.path().join("aloha_A").to_str().unwrap(),
            "--out",
            summary.to_str().unwrap(),
        ],
        root.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let table = std::fs::read_to_string(summary.join("table.csv")).unwrap();
    assert_eq!(table.lines().count(), 3);
    assert!(
        std::fs::read_to_string(summary.join("curves.csv"))
            .unwrap()
            .lines()
            .count()
            == 5
    );
}

#[test]
fn stop_and_resume() {
    let root = tempfile::tempdir().unwrap();
    let mut args = vec!["train", "--stop-after", "3", "--set", "checkpoint_every=2"];
    args.extend(TINY);
    let o = dsa(&args, root.path());
    assert!(o.status.success());
    assert!(stdout(&o).contains("stopped"));
    let mut args = vec!["train", "--resume", "--set", "checkpoint_every=2"];
    args.extend(TINY);
    let o = dsa(&args, root.path());
    assert!(o.status.success());
    assert!(stdout(&o).contains("completed"));
}

#[test]
fn schedule_export_to_file_and_stdout() {
    let root = tempfile::tempdir().unwrap();
    let path = root.path().join("plots/schedule.csv");
    let o = dsa(&["schedule", "--out", path.to_str().unwrap()], root.path());
    assert!(o.status.success());
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().next().unwrap(), "i,linear,polynomial,harmonic");
    assert_eq!(text.lines().count(), 1002);

    let o = dsa(
        &["schedule", "--set", "prune_start=200", "--set", "iterations=1000"],
        root.path(),
    );
    assert!(o.status.success());
    let text = stdout(&o);
    let row_199: Vec<&str> = text.lines().nth(200).unwrap().split(',').collect();
    assert_eq!(row_199[0], "199");
    assert!(row_199[1..].iter().all(|v| v.parse::<f64>().unwrap() == 0.0));
}

#[test]
fn config_file_with_overrides() {
    let root = tempfile::tempdir().unwrap();
    let cfg = root.path().join("exp.toml");
    std::fs::write(&cfg, "name = \"from_file\"\nalgorithm = \"aloha\"\nsetup = \"B\"\n").unwrap();
    let mut args = vec!["train", "--config", cfg.to_str().unwrap()];
    args.extend(TINY);
    let o = dsa(&args, root.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let stored = std::fs::read_to_string(root.path().join("from_file/config.toml")).unwrap();
    assert!(stored.contains("setup = \"B\"") && stored.contains("horizon = 5"));
}

#[test]
fn invalid_input_exits_nonzero_with_diagnostic() {
    let root = tempfile::tempdir().unwrap();
    let o = dsa(&["train", "--set", "num_agents=0"], root.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("invalid configuration"));

    let o = dsa(&["train", "--set", "no_such_key=1"], root.path());
    assert_eq!(o.status.code(), Some(2));

    let missing = root.path().join("missing.bin");
    let o = dsa(&["eval", "--checkpoint", missing.to_str().unwrap()], root.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("missing.bin"));

    let garbage = root.path().join("garbage.bin");
    std::fs::write(&garbage, b"not a checkpoint").unwrap();
    let o = dsa(&["eval", "--checkpoint", garbage.to_str().unwrap()], root.path());
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("checkpoint"));

    let o = dsa(&["aggregate", root.path().join("nope").to_str().unwrap()], root.path());
    assert!(!o.status.success());

    let file = root.path().join("occupied");
    std::fs::write(&file, "x").unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_dsa"))
        .args(["train", "--out", file.to_str().unwrap()])
        .args(TINY)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
}
