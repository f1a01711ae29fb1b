use std::collections::BTreeMap;
use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{
    reward_x, reward_y, stream_rng, AgentStateX, AgentStateY, Agents, DesignerConfig, GateEnv,
    Measurement, STREAM_PRETRAIN, STREAM_TRAIN_BASE,
};
use crate::error::{Error, Result};
use crate::rl::{greedy_action, sample_action, Optimizer, PolicyNet, Trajectory};
use crate::sim::{self, PwcWaveform};

/// Action selection during a rollout.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RolloutMode {
    Greedy,
    Sampled,
}

impl std::str::FromStr for RolloutMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "greedy" => Ok(RolloutMode::Greedy),
            "sampled" => Ok(RolloutMode::Sampled),
            other => Err(Error::InvalidParams(format!(
                "unknown rollout mode {other}"
            ))),
        }
    }
}

fn pick<R: Rng + ?Sized>(
    net: &PolicyNet,
    state: &[f64],
    mode: RolloutMode,
    rng: &mut R,
) -> Result<usize> {
    let p = net.forward(state)?;
    Ok(match mode {
        RolloutMode::Greedy => greedy_action(&p),
        RolloutMode::Sampled => sample_action(&p, rng),
    })
}

fn state_x(m: &Measurement, k: usize) -> AgentStateX {
    AgentStateX {
        i_mean: m.iq[0],
        q_mean: m.iq[1],
        k,
    }
}

fn state_y(config_segment: bool, ux: f64, m: &Measurement, k: usize) -> AgentStateY {
    AgentStateY {
        ux,
        leak: m.leak,
        k: config_segment.then_some(k),
    }
}

fn y_segment_feature(agents: &Agents) -> bool {
    agents.y.input_dim() == 3
}

/// Rolls the agents out for `n_segments` steps from a fresh `|0>`, measuring
/// after every prefix, and returns the waveform they build.
pub fn synthesize<R: Rng + ?Sized>(
    agents: &Agents,
    n_segments: usize,
    mode: RolloutMode,
    env: &mut GateEnv,
    rng: &mut R,
) -> Result<PwcWaveform> {
    if n_segments == 0 || n_segments > env.n_seg_max() {
        return Err(Error::InvalidInput(format!(
            "segment count {n_segments} outside 1..={}",
            env.n_seg_max()
        )));
    }
    let with_k = y_segment_feature(agents);
    let mut w = env.empty_waveform();
    let mut last = env.initial;
    for k in 0..n_segments {
        let ix = pick(&agents.x, &state_x(&last, k).features(), mode, rng)?;
        let ux = env.grid_x.value(ix);
        let iy = pick(
            &agents.y,
            &state_y(with_k, ux, &last, k).features(),
            mode,
            rng,
        )?;
        w.push(ux, env.grid_y.value(iy));
        if k + 1 < n_segments {
            let u = env.evolve(&w)?;
            last = env.measure(&u, rng)?;
        }
    }
    Ok(w)
}

/// Mean pre-training loss of each agent per pass.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PretrainReport {
    pub mse_x: Vec<f64>,
    pub mse_y: Vec<f64>,
}

/// Supervised pre-training toward a reference waveform.
///
/// Every pass first measures the states the agents would see along the
/// reference pulse (all circuits run before any update), then takes
/// `pretrain_steps_per_pass` full-batch MSE steps on each network toward
/// Gaussians centred on the segment amplitudes. The reported loss of a pass is
/// the one before its first step.
pub fn pretrain(
    agents: &mut Agents,
    reference: &PwcWaveform,
    env: &mut GateEnv,
    config: &DesignerConfig,
) -> Result<PretrainReport> {
    if reference.len() > env.n_seg_max() {
        return Err(Error::InvalidWaveform(format!(
            "{} segments exceed the designer's {}",
            reference.len(),
            env.n_seg_max()
        )));
    }
    let mut rng = stream_rng(config.seed, STREAM_PRETRAIN);
    let mut opt_x = Optimizer::of_kind(config.pretrain_optimizer, config.pretrain_learning_rate);
    let mut opt_y = opt_x.clone();
    let with_k = y_segment_feature(agents);
    let prefixes = sim::evolve_prefixes(reference, &env.device)?;
    let mut report = PretrainReport::default();
    for _ in 0..config.pretrain_passes {
        let mut seen = Vec::with_capacity(reference.len());
        seen.push(env.initial);
        for u in prefixes.iter().take(reference.len().saturating_sub(1)) {
            seen.push(env.measure(u, &mut rng)?);
        }
        let mut batch_x = Vec::with_capacity(reference.len());
        let mut batch_y = Vec::with_capacity(reference.len());
        for (k, (&[ux, uy], m)) in reference.segments().iter().zip(&seen).enumerate() {
            batch_x.push((state_x(m, k).features(), ux));
            batch_y.push((state_y(with_k, ux, m, k).features(), uy));
        }
        let (mut lx, mut ly) = (0.0, 0.0);
        for step in 0..config.pretrain_steps_per_pass.max(1) {
            let a = agents
                .x
                .mse_pretrain_batch(&batch_x, config.pretrain_width, &mut opt_x)?;
            let b = agents
                .y
                .mse_pretrain_batch(&batch_y, config.pretrain_width, &mut opt_y)?;
            if step == 0 {
                (lx, ly) = (a, b);
            }
        }
        report.mse_x.push(lx);
        report.mse_y.push(ly);
    }
    Ok(report)
}

/// Best greedy gate seen for one segment count.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BestGate {
    pub iteration: usize,
    pub fidelity: f64,
    pub leakage: f64,
    pub waveform: PwcWaveform,
}

/// Everything needed to continue a run exactly where it stopped.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainState {
    pub iteration: usize,
    pub agent_x: PolicyNet,
    pub agent_y: PolicyNet,
    pub opt_x: Optimizer,
    pub opt_y: Optimizer,
    /// Segment index of the next episode.
    pub k: usize,
    pub partial: PwcWaveform,
    pub last: Measurement,
    /// Best probe per segment count.
    pub best: BTreeMap<usize, BestGate>,
}

impl TrainState {
    pub fn new(agents: Agents, env: &GateEnv, config: &DesignerConfig) -> Self {
        let mut opt_x = Optimizer::of_kind(config.optimizer, config.learning_rate_x);
        let mut opt_y = Optimizer::of_kind(config.optimizer, config.learning_rate_y);
        opt_x.momentum = config.momentum;
        opt_y.momentum = config.momentum;
        opt_x.max_grad_norm = config.max_grad_norm;
        opt_y.max_grad_norm = config.max_grad_norm;
        Self {
            iteration: 0,
            agent_x: agents.x,
            agent_y: agents.y,
            opt_x,
            opt_y,
            k: 0,
            partial: env.empty_waveform(),
            last: env.initial,
            best: BTreeMap::new(),
        }
    }

    pub fn agents(&self) -> Agents {
        Agents {
            x: self.agent_x.clone(),
            y: self.agent_y.clone(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// One line of the training log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationLog {
    pub iter: usize,
    pub mean_reward_x: f64,
    pub mean_reward_y: f64,
    /// Exact fidelity and leakage of the greedy probe at the first probe length.
    pub probe_fidelity: f64,
    pub probe_leakage: f64,
    /// Exact fidelity of every probe, keyed by segment count.
    pub probes: BTreeMap<usize, f64>,
    pub episodes: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_ms: Option<u64>,
}

/// Runs `n_iter` iterations of the two-agent loop, calling `on_iteration`
/// after each so the caller can persist logs and state.
///
/// Each iteration plays `n_ep` episodes. An episode samples `u^x` from the
/// x-agent on `(<I>, <Q>, k)`, `u^y` from the y-agent on `(u^x, L[, k])`,
/// appends the segment, evolves a fresh `|0>` through the first `k + 1`
/// segments, measures, and scores the result with `r^x` and `r^y`. When the
/// pulse reaches `N_seg` segments it starts over. Both trajectories then
/// drive one REINFORCE step. Greedy probes run on a separate random stream.
pub fn train<F>(
    state: &mut TrainState,
    env: &mut GateEnv,
    config: &DesignerConfig,
    n_iter: usize,
    mut on_iteration: F,
) -> Result<Vec<IterationLog>>
where
    F: FnMut(&TrainState, &IterationLog) -> Result<()>,
{
    config.validate()?;
    let mut logs = Vec::with_capacity(n_iter);
    let with_k = state.agent_y.input_dim() == 3;
    for _ in 0..n_iter {
        let started = Instant::now();
        let it = state.iteration;
        let mut rng = stream_rng(config.seed, STREAM_TRAIN_BASE + 2 * it as u64);
        let mut traj_x = Trajectory::new();
        let mut traj_y = Trajectory::new();
        for _ in 0..config.n_ep {
            if state.k == config.n_seg_max {
                state.k = 0;
                state.partial = env.empty_waveform();
                state.last = env.initial;
            }
            let k = state.k;
            let sx = state_x(&state.last, k).features();
            let ix = pick(&state.agent_x, &sx, RolloutMode::Sampled, &mut rng)?;
            let ux = env.grid_x.value(ix);
            let sy = state_y(with_k, ux, &state.last, k).features();
            let iy = pick(&state.agent_y, &sy, RolloutMode::Sampled, &mut rng)?;
            state.partial.push(ux, env.grid_y.value(iy));
            let u = env.evolve(&state.partial)?;
            let m = env.measure(&u, &mut rng)?;
            state.k += 1;
            let rx = reward_x(&state_x(&m, state.k), &env.target, config.lambda, state.k);
            let ry = reward_y(&state_y(with_k, ux, &m, state.k), config.leak_max);
            if !rx.is_finite() || !ry.is_finite() {
                return Err(Error::NonFinite(format!(
                    "reward at iteration {it}, segment {k}: r_x = {rx}, r_y = {ry}"
                )));
            }
            traj_x.push(sx, ix, rx)?;
            traj_y.push(sy, iy, ry)?;
            state.last = m;
        }
        state
            .agent_x
            .reinforce_update(&traj_x, config.beta, &mut state.opt_x)
            .map_err(|e| Error::NonFinite(format!("x-agent update at iteration {it}: {e}")))?;
        state
            .agent_y
            .reinforce_update(&traj_y, config.beta, &mut state.opt_y)
            .map_err(|e| Error::NonFinite(format!("y-agent update at iteration {it}: {e}")))?;

        let mut probe_rng = stream_rng(config.seed, STREAM_TRAIN_BASE + 2 * it as u64 + 1);
        let agents = state.agents();
        let target = env.gate.target_state(env.device.levels);
        let mut probes = BTreeMap::new();
        let mut first = None;
        for &n in &config.probe_segments {
            let w = synthesize(&agents, n, RolloutMode::Greedy, env, &mut probe_rng)?;
            let u = env.evolve(&w)?;
            let (f, l) = (sim::fidelity(&u, &target), sim::leakage(&u));
            probes.insert(n, f);
            first.get_or_insert((f, l));
            let better = state.best.get(&n).is_none_or(|b| f > b.fidelity);
            if better {
                state.best.insert(
                    n,
                    BestGate {
                        iteration: it,
                        fidelity: f,
                        leakage: l,
                        waveform: w,
                    },
                );
            }
        }
        state.iteration += 1;
        let (probe_fidelity, probe_leakage) = first.unwrap_or((0.0, 0.0));
        let log = IterationLog {
            iter: it,
            mean_reward_x: traj_x.mean_reward(),
            mean_reward_y: traj_y.mean_reward(),
            probe_fidelity,
            probe_leakage,
            probes,
            episodes: config.n_ep,
            wall_ms: config
                .log_wall_time
                .then(|| started.elapsed().as_millis() as u64),
        };
        log::debug!(
            "iteration {it}: r_x {:.4} r_y {:.5} probe F {:.5}",
            log.mean_reward_x,
            log.mean_reward_y,
            log.probe_fidelity
        );
        on_iteration(state, &log)?;
        logs.push(log);
    }
    Ok(logs)
}
