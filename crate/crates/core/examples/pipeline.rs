//! End-to-end run on the default simulated device: DRAG calibration,
//! pre-training, training and a summary of the best greedy gates.
//!
//! Knobs come from environment variables, e.g.
//! `ITERS=200 SIGMA=per_shot cargo run --release --example pipeline`.

use std::env;
use std::time::Instant;

use fastgate::designer::{
    pretrain, stream_rng, synthesize, train, Agents, DesignerConfig, GateEnv, GateKind,
    RolloutMode, SigmaTMode, TrainState, STREAM_SYNTH,
};
use fastgate::pulse::{calibrate_drag, DragSweep};
use fastgate::readout::IqClusterModel;
use fastgate::rl::OptimizerKind;
use fastgate::sim::{TransmonParams, DEFAULT_GATE_TIME_NS};

fn var<T: std::str::FromStr>(name: &str, default: T) -> T {
    env::var(name)
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(default)
}

fn main() -> fastgate::Result<()> {
    let gate: GateKind = var("GATE", GateKind::X);
    let mut config = DesignerConfig {
        seed: var("SEED", 0),
        n_iter: var("ITERS", 200),
        learning_rate_x: var("LR_X", DesignerConfig::default().learning_rate_x),
        learning_rate_y: var("LR_Y", DesignerConfig::default().learning_rate_y),
        pretrain_passes: var("PASSES", 50),
        pretrain_learning_rate: var("PRE_LR", DesignerConfig::default().pretrain_learning_rate),
        pretrain_steps_per_pass: var("PRE_STEPS", 20),
        lambda: var("LAMBDA", DesignerConfig::default().lambda),
        ..Default::default()
    };
    if env::var("SIGMA").as_deref() == Ok("per_shot") {
        config.sigma_t_mode = SigmaTMode::PerShot;
    }
    if let Ok(c) = env::var("CLIP") {
        config.max_grad_norm = c.parse().ok();
    }
    if env::var("OPT").as_deref() == Ok("adam") {
        config.optimizer = OptimizerKind::Adam;
    }
    let params = TransmonParams::default();
    let target = gate.target_state(params.levels);
    let t0 = Instant::now();
    let drag = calibrate_drag(
        &params,
        DEFAULT_GATE_TIME_NS,
        20,
        &target,
        &DragSweep::default(),
    )?;
    let drag_w = drag
        .waveform
        .clone()
        .expect("calibration keeps its waveform");
    println!(
        "DRAG A={:.3} gamma={:.2}: F={:.6} L={:.2e} ({:?})",
        drag.params.amplitude,
        drag.params.gamma,
        drag.fidelity,
        drag.leakage,
        t0.elapsed()
    );

    let mut env = GateEnv::calibrate(params, IqClusterModel::default_for(3), gate, &config)?;
    println!("sigma_T = {:.4}", env.target.sigma_t);
    let mut agents = Agents::new(&config, &env)?;
    let t1 = Instant::now();
    let report = pretrain(&mut agents, &drag_w, &mut env, &config)?;
    println!(
        "pretrain mse x {:.3e} -> {:.3e}, y {:.3e} -> {:.3e} ({:?})",
        report.mse_x[0],
        report.mse_x.last().unwrap(),
        report.mse_y[0],
        report.mse_y.last().unwrap(),
        t1.elapsed()
    );
    let mut rng = stream_rng(config.seed, STREAM_SYNTH);
    let greedy = synthesize(&agents, 20, RolloutMode::Greedy, &mut env, &mut rng)?;
    let mismatches = greedy
        .segments()
        .iter()
        .zip(drag_w.segments())
        .filter(|(a, b)| a != b)
        .count();
    println!("greedy rollout differs from DRAG on {mismatches} segments");
    for (k, (a, b)) in greedy.segments().iter().zip(drag_w.segments()).enumerate() {
        if a != b {
            println!("  segment {k}: got {a:?}, want {b:?}");
        }
    }

    let mut state = TrainState::new(agents, &env, &config);
    let t2 = Instant::now();
    train(&mut state, &mut env, &config, config.n_iter, |_, log| {
        if log.iter % 10 == 0 {
            println!(
                "iter {:>3} rx {:.4} ry {:.5} probes {:?}",
                log.iter, log.mean_reward_x, log.mean_reward_y, log.probes
            );
        }
        Ok(())
    })?;
    println!("training took {:?}", t2.elapsed());
    for (n, b) in &state.best {
        println!(
            "best {n:>2} segments: F={:.6} L={:.2e} at iteration {}",
            b.fidelity, b.leakage, b.iteration
        );
    }
    let b20 = &state.best[&20];
    let f10 = state.best.get(&10).map_or(0.0, |b| b.fidelity);
    let parity = b20.fidelity >= drag.fidelity - 0.002 && b20.leakage <= 2.0 * drag.leakage;
    println!(
        "summary parity20={} f10={:.6} pass10={}",
        parity,
        f10,
        f10 >= 0.99
    );
    Ok(())
}
