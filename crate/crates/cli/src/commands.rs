use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use fastgate::designer::{
    benchmark_gate, drag_reference, evaluate, pretrain as pretrain_agents, stream_rng, synthesize,
    train as train_agents, Agents, BenchRow, DesignerConfig, GateEnv, GateKind, RolloutMode,
    TrainState, Variant, STREAM_EVAL, STREAM_SYNTH,
};
use fastgate::rl::{q_learn, value_iteration, Exploration, FiniteMdp, LearningSchedule, PolicyNet};
use fastgate::sim::{self, PwcWaveform};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::svg::pulse_svg;

const DEMO_SEEDS: [u64; 3] = [101, 202, 303];

fn agent_paths(dir: &Path, gate: GateKind, stage: &str) -> [PathBuf; 2] {
    ["x", "y"].map(|a| dir.join(format!("{gate}_{stage}agent_{a}.json")))
}

fn best_path(dir: &Path, gate: GateKind, n: usize) -> PathBuf {
    dir.join(format!("{gate}_best_{n}seg.json"))
}

fn require(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|_| CliError::Missing(path.to_path_buf()))
}

/// Writes through a temporary file so an interrupted run never leaves a
/// truncated artifact behind.
fn write_atomic(path: &Path, contents: &str) -> Result<(), CliError> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn load_agents(paths: &[PathBuf; 2]) -> Result<Agents, CliError> {
    let x = PolicyNet::from_json(&require(&paths[0])?)?;
    let y = PolicyNet::from_json(&require(&paths[1])?)?;
    Ok(Agents { x, y })
}

fn save_agents(agents: &Agents, paths: &[PathBuf; 2]) -> Result<(), CliError> {
    write_atomic(&paths[0], &agents.x.to_json()?)?;
    write_atomic(&paths[1], &agents.y.to_json()?)
}

fn environment(
    config: &RunConfig,
    gate: GateKind,
    designer: &DesignerConfig,
) -> Result<GateEnv, CliError> {
    let env = GateEnv::calibrate(
        config.device.params(),
        config.readout_model()?,
        gate,
        designer,
    )?;
    Ok(env.with_drift(config.device.drift))
}

fn drag_waveform(
    config: &RunConfig,
    gate: GateKind,
    gaussian_only: bool,
) -> Result<PwcWaveform, CliError> {
    let cal = drag_reference(
        &config.device.params(),
        gate,
        config.designer.n_seg_max,
        gaussian_only,
    )?;
    cal.waveform
        .ok_or_else(|| CliError::Numeric("calibration returned no waveform".into()))
}

pub fn pretrain(config: &RunConfig, gate: GateKind) -> Result<(), CliError> {
    let drag = drag_waveform(config, gate, false)?;
    for &seed in &config.seeds {
        let designer = config.designer_for(seed);
        let dir = config.seed_dir(seed);
        fs::create_dir_all(&dir)?;
        let mut env = environment(config, gate, &designer)?;
        let mut agents = Agents::new(&designer, &env)?;
        let report = pretrain_agents(&mut agents, &drag, &mut env, &designer)?;
        save_agents(&agents, &agent_paths(&dir, gate, "pretrained_"))?;
        write_atomic(&dir.join(format!("{gate}_drag.json")), &drag.to_json()?)?;
        let mut csv = String::from("pass,mse_x,mse_y\n");
        for (i, (x, y)) in report.mse_x.iter().zip(&report.mse_y).enumerate() {
            csv.push_str(&format!("{i},{x},{y}\n"));
        }
        write_atomic(&dir.join(format!("{gate}_pretrain_mse.csv")), &csv)?;

        let mut rng = stream_rng(seed, STREAM_SYNTH);
        let greedy = synthesize(&agents, drag.len(), RolloutMode::Greedy, &mut env, &mut rng)?;
        let differ = greedy
            .segments()
            .iter()
            .zip(drag.segments())
            .filter(|(a, b)| a != b)
            .count();
        println!(
            "seed {seed}: {gate} pre-trained, final MSE x {:.3e} y {:.3e}, greedy rollout differs from DRAG on {differ}/{} segments",
            report.mse_x.last().copied().unwrap_or(f64::NAN),
            report.mse_y.last().copied().unwrap_or(f64::NAN),
            drag.len()
        );
    }
    Ok(())
}

pub fn train(
    config: &RunConfig,
    gate: GateKind,
    fresh: bool,
    resume: bool,
) -> Result<(), CliError> {
    for &seed in &config.seeds {
        let designer = config.designer_for(seed);
        let dir = config.seed_dir(seed);
        fs::create_dir_all(&dir)?;
        let mut env = environment(config, gate, &designer)?;
        let state_path = dir.join(format!("{gate}_train_state.json"));
        let log_path = dir.join(format!("{gate}_train_log.jsonl"));

        let mut state = if resume {
            TrainState::from_json(&require(&state_path)?)?
        } else if fresh {
            TrainState::new(Agents::new(&designer, &env)?, &env, &designer)
        } else {
            let agents = load_agents(&agent_paths(&dir, gate, "pretrained_"))?;
            TrainState::new(agents, &env, &designer)
        };

        // Keep exactly the log lines of the iterations the state has seen.
        let mut lines: Vec<String> = if resume {
            require(&log_path)?.lines().map(str::to_owned).collect()
        } else {
            Vec::new()
        };
        lines.truncate(state.iteration);
        let mut text = lines.join("\n");
        if !text.is_empty() {
            text.push('\n');
        }
        write_atomic(&log_path, &text)?;
        let mut log = fs::OpenOptions::new().append(true).open(&log_path)?;

        let remaining = designer.n_iter.saturating_sub(state.iteration);
        train_agents(&mut state, &mut env, &designer, remaining, |s, record| {
            let line = serde_json::to_string(record)?;
            writeln!(log, "{line}")?;
            log.flush()?;
            write_atomic(&state_path, &s.to_json()?)
                .map_err(|e| fastgate::Error::InvalidInput(e.to_string()))
        })?;

        save_agents(&state.agents(), &agent_paths(&dir, gate, ""))?;
        for (n, best) in &state.best {
            write_atomic(&best_path(&dir, gate, *n), &best.waveform.to_json()?)?;
            println!(
                "seed {seed}: {gate} best {n}-segment gate F = {:.6} L = {:.2e} (iteration {})",
                best.fidelity, best.leakage, best.iteration
            );
        }
        println!(
            "seed {seed}: {} iterations logged to {}",
            state.iteration,
            log_path.display()
        );
    }
    Ok(())
}

pub fn synth(
    config: &RunConfig,
    gate: GateKind,
    segments: usize,
    mode: RolloutMode,
) -> Result<(), CliError> {
    for &seed in &config.seeds {
        let designer = config.designer_for(seed);
        let dir = config.seed_dir(seed);
        let agents = load_agents(&agent_paths(&dir, gate, ""))?;
        let mut env = environment(config, gate, &designer)?;
        if segments == 0 || segments > env.n_seg_max() {
            return Err(CliError::Config(format!(
                "--segments must be in 1..={}",
                env.n_seg_max()
            )));
        }
        let mut rng = stream_rng(seed, STREAM_SYNTH);
        let w = synthesize(&agents, segments, mode, &mut env, &mut rng)?;
        let u = env.evolve(&w)?;
        let target = gate.target_state(env.device.levels);
        let mode_name = match mode {
            RolloutMode::Greedy => "greedy",
            RolloutMode::Sampled => "sampled",
        };
        let path = dir.join(format!("{gate}_synth_{segments}seg_{mode_name}.json"));
        write_atomic(&path, &w.to_json()?)?;
        println!(
            "seed {seed}: {gate} {segments} segments ({mode_name}) F = {:.6} L = {:.2e} -> {}",
            sim::fidelity(&u, &target),
            sim::leakage(&u),
            path.display()
        );
    }
    Ok(())
}

pub fn eval(
    config: &RunConfig,
    gate: GateKind,
    waveform: &Path,
    shots: usize,
) -> Result<(), CliError> {
    let w = PwcWaveform::from_json(&require(waveform)?)
        .map_err(|e| CliError::Config(format!("{}: {e}", waveform.display())))?;
    let seed = config.seeds[0];
    let mut env = environment(config, gate, &config.designer_for(seed))?;
    let mut rng = stream_rng(seed, STREAM_EVAL);
    let report = evaluate(&w, &mut env, gate, shots, &mut rng)?;
    println!(
        "{}",
        serde_json::json!({
            "gate": gate,
            "n_segments": report.n_segments,
            "gate_time_ns": report.gate_time_ns,
            "fidelity": report.fidelity,
            "fidelity_est": report.fidelity_est,
            "leakage": report.leakage,
            "leakage_est": report.leakage_est,
        })
    );
    Ok(())
}

pub fn bench(config: &RunConfig, gaussian: bool, shots: usize) -> Result<(), CliError> {
    for &seed in &config.seeds {
        let designer = config.designer_for(seed);
        let dir = config.seed_dir(seed);
        let mut rows: Vec<BenchRow> = Vec::new();
        for gate in [GateKind::X, GateKind::Sx] {
            let rl = designer
                .probe_segments
                .iter()
                .map(|&n| {
                    let p = best_path(&dir, gate, n);
                    PwcWaveform::from_json(&require(&p)?).map_err(CliError::from)
                })
                .collect::<Result<Vec<_>, _>>()?;
            let drag = drag_waveform(config, gate, false)?;
            let gauss = if gaussian {
                Some(drag_waveform(config, gate, true)?)
            } else {
                None
            };
            let mut env = environment(config, gate, &designer)?;
            let mut rng = stream_rng(seed, STREAM_EVAL);
            rows.extend(benchmark_gate(
                &mut env,
                &drag,
                gauss.as_ref(),
                &rl,
                shots,
                &mut rng,
            )?);
        }
        let mut csv = format!("{}\n", BenchRow::CSV_HEADER);
        for row in &rows {
            csv.push_str(&row.csv_line());
            csv.push('\n');
            let w = &row.report.waveform;
            let stem = format!("{}_{}_{}seg", row.gate, row.variant, w.len());
            let title = format!(
                "{} {} {} segments, F = {:.5}",
                row.gate,
                variant_label(row.variant),
                w.len(),
                row.report.fidelity
            );
            write_atomic(&dir.join(format!("{stem}.svg")), &pulse_svg(w, &title))?;
            write_atomic(&dir.join(format!("{stem}.csv")), &w.to_csv())?;
        }
        let path = dir.join("bench.csv");
        write_atomic(&path, &csv)?;
        print!("{csv}");
        println!("seed {seed}: {} rows -> {}", rows.len(), path.display());
    }
    Ok(())
}

fn variant_label(v: Variant) -> &'static str {
    match v {
        Variant::Drag => "DRAG",
        Variant::Gaussian => "Gaussian",
        Variant::Rl => "RL",
    }
}

pub fn qlearn_demo(steps: u64) -> Result<(), CliError> {
    let beta = 0.9;
    for seed in DEMO_SEEDS {
        let mdp = FiniteMdp::random(4, 2, beta, true, seed)?;
        let exact = value_iteration(&mdp, 1e-10)?;
        let learned = q_learn(
            &mdp,
            LearningSchedule::default(),
            Exploration::default(),
            steps,
            seed,
        );
        println!(
            "mdp {seed}: 4 states, 2 actions, beta {beta}: max |Q - Q*| = {:.3e}, argmax policies agree: {}",
            learned.max_abs_diff(&exact),
            learned.greedy_policy() == exact.greedy_policy()
        );
    }
    let single = FiniteMdp::single(1.0, beta)?;
    let exact = value_iteration(&single, 1e-12)?;
    println!(
        "1-state MDP, r = 1, beta {beta}: Q* = {:.6} (1/(1-beta) = {:.6})",
        exact.get(0, 0),
        1.0 / (1.0 - beta)
    );
    Ok(())
}
