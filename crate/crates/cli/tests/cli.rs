use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const QUICK: [&str; 4] = [
    "--set",
    "designer.pretrain_passes=5",
    "--set",
    "designer.n_iter=3",
];

fn fastgate(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fastgate"))
        .arg("--out")
        .arg(out)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(out: &Path, args: &[&str]) -> String {
    let o = fastgate(out, args);
    assert!(
        o.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&o.stderr)
    );
    String::from_utf8(o.stdout).unwrap()
}

fn with_quick<'a>(args: &[&'a str]) -> Vec<&'a str> {
    args.iter().copied().chain(QUICK).collect()
}

fn read(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join("seed-0").join(name)).unwrap()
}

#[test]
fn pretrain_writes_identical_checkpoints_per_seed() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for d in [&a, &b] {
        ok(d.path(), &with_quick(&["pretrain"]));
    }
    for f in [
        "x_pretrained_agent_x.json",
        "x_pretrained_agent_y.json",
        "x_pretrain_mse.csv",
    ] {
        assert_eq!(read(a.path(), f), read(b.path(), f), "{f}");
    }
    let csv = read(a.path(), "x_pretrain_mse.csv");
    let mse: Vec<f64> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(mse.len(), 5);
    assert!(mse.last().unwrap() < &mse[0]);
    let ckpt: serde_json::Value =
        serde_json::from_str(&read(a.path(), "x_pretrained_agent_x.json")).unwrap();
    assert_eq!(ckpt["schema"], "fastgate.policy.v1");
}

#[test]
fn train_logs_are_reproducible_and_resumable() {
    let (a, b, c) = (
        tempfile::tempdir().unwrap(),
        tempfile::tempdir().unwrap(),
        tempfile::tempdir().unwrap(),
    );
    for d in [&a, &b, &c] {
        ok(d.path(), &with_quick(&["pretrain"]));
    }
    ok(a.path(), &with_quick(&["train"]));
    ok(b.path(), &with_quick(&["train"]));
    let log = read(a.path(), "x_train_log.jsonl");
    assert_eq!(log.lines().count(), 3);
    for line in log.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(v["probe_fidelity"].is_number() && v.get("wall_ms").is_none());
    }
    for f in [
        "x_train_log.jsonl",
        "x_agent_x.json",
        "x_agent_y.json",
        "x_best_20seg.json",
    ] {
        assert_eq!(read(a.path(), f), read(b.path(), f), "{f}");
    }

    // Stop after two iterations, then resume to three.
    ok(
        c.path(),
        &[
            "train",
            "--set",
            "designer.pretrain_passes=5",
            "--set",
            "designer.n_iter=2",
        ],
    );
    ok(c.path(), &with_quick(&["train", "--resume"]));
    for f in ["x_train_log.jsonl", "x_agent_x.json", "x_train_state.json"] {
        assert_eq!(read(a.path(), f), read(c.path(), f), "{f}");
    }
}

#[test]
fn train_needs_pretrained_agents_unless_fresh() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(
        fastgate(d.path(), &with_quick(&["train"])).status.code(),
        Some(4)
    );
    assert_eq!(
        fastgate(d.path(), &with_quick(&["train", "--resume"]))
            .status
            .code(),
        Some(4)
    );
    ok(d.path(), &with_quick(&["train", "--fresh"]));
    assert_eq!(read(d.path(), "x_train_log.jsonl").lines().count(), 3);
}

#[test]
fn bench_synth_and_eval_after_training_both_gates() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(fastgate(d.path(), &["bench"]).status.code(), Some(4));
    for gate in ["x", "sx"] {
        ok(d.path(), &with_quick(&["pretrain", "--gate", gate]));
        ok(d.path(), &with_quick(&["train", "--gate", gate]));
    }
    let stdout = ok(d.path(), &["bench", "--shots", "2000"]);
    assert!(stdout.contains("8 rows"));
    let csv = read(d.path(), "bench.csv");
    assert_eq!(csv.lines().count(), 9);
    assert!(csv.starts_with(
        "gate,variant,n_seg,t_g_ns,fidelity_exact,fidelity_est,leakage_exact,leakage_est"
    ));
    let svg = read(d.path(), "sx_rl_10seg.svg");
    assert!(svg.starts_with("<svg") && svg.contains("dt = 0.222222 ns"));

    ok(d.path(), &["bench", "--gaussian", "--shots", "2000"]);
    let csv = read(d.path(), "bench.csv");
    assert_eq!(csv.lines().count(), 11);
    let leak = |variant: &str| -> f64 {
        csv.lines()
            .find(|l| l.starts_with(&format!("x,{variant},")))
            .unwrap()
            .split(',')
            .nth(6)
            .unwrap()
            .parse()
            .unwrap()
    };
    assert!(leak("drag") <= leak("gaussian"));

    let out = ok(
        d.path(),
        &["synth", "--segments", "10", "--mode", "sampled"],
    );
    assert!(out.contains("10 segments (sampled)"));
    let synth = read(d.path(), "x_synth_10seg_sampled.json");
    let w: serde_json::Value = serde_json::from_str(&synth).unwrap();
    assert_eq!(w["segments"].as_array().unwrap().len(), 10);

    let wf = d.path().join("seed-0").join("x_drag.json");
    let out = ok(
        d.path(),
        &[
            "eval",
            "--waveform",
            wf.to_str().unwrap(),
            "--shots",
            "5000",
        ],
    );
    let report: serde_json::Value = serde_json::from_str(out.trim()).unwrap();
    assert!(report["fidelity"].as_f64().unwrap() >= 0.999);
    assert_eq!(report["n_segments"], 20);
}

#[test]
fn exit_codes_distinguish_failures() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(
        fastgate(d.path(), &["pretrain", "--set", "designer.n_ep=7"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        fastgate(d.path(), &["pretrain", "--set", "bogus=1"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(fastgate(d.path(), &["frobnicate"]).status.code(), Some(2));
    let missing = d.path().join("none.json");
    assert_eq!(
        fastgate(d.path(), &["eval", "--waveform", missing.to_str().unwrap()])
            .status
            .code(),
        Some(4)
    );
    assert_eq!(
        fastgate(d.path(), &["synth", "--segments", "5"])
            .status
            .code(),
        Some(4)
    );
    let cfg = d.path().join("bad.toml");
    fs::write(&cfg, "seeds = [").unwrap();
    assert_eq!(
        fastgate(d.path(), &["--config", cfg.to_str().unwrap(), "pretrain"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn config_file_and_seed_flag() {
    let d = tempfile::tempdir().unwrap();
    let cfg = d.path().join("run.toml");
    fs::write(
        &cfg,
        "seeds = [0, 1]\n[designer]\npretrain_passes = 2\nn_iter = 1\n",
    )
    .unwrap();
    let c = cfg.to_str().unwrap();
    ok(d.path(), &["--config", c, "pretrain"]);
    assert!(d.path().join("seed-0/x_pretrained_agent_x.json").exists());
    assert!(d.path().join("seed-1/x_pretrained_agent_x.json").exists());
    ok(d.path(), &["--config", c, "--seed", "7", "pretrain"]);
    assert!(d.path().join("seed-7/x_pretrain_mse.csv").exists());
    assert_ne!(
        fs::read_to_string(d.path().join("seed-0/x_pretrained_agent_x.json")).unwrap(),
        fs::read_to_string(d.path().join("seed-1/x_pretrained_agent_x.json")).unwrap()
    );
}

#[test]
fn qlearn_demo_reports_agreement() {
    let d = tempfile::tempdir().unwrap();
    let out = ok(d.path(), &["qlearn-demo"]);
    assert_eq!(out.matches("argmax policies agree: true").count(), 3);
    assert!(out.contains("Q* = 10.000000"));
    for line in out.lines().filter(|l| l.starts_with("mdp")) {
        let dev: f64 = line
            .split("max |Q - Q*| = ")
            .nth(1)
            .unwrap()
            .split(',')
            .next()
            .unwrap()
            .parse()
            .unwrap();
        assert!(dev < 1e-3);
    }
}
