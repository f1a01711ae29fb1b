//! Two-agent gate designer.
//!
//! An x-agent picks the in-phase amplitude of the next segment from the
//! averaged readout, a y-agent picks the quadrature amplitude from the
//! x-choice and the estimated leakage. Both are trained by REINFORCE on
//! trajectories gathered against a simulated qubit with shot-noise readout.

mod env;
mod eval;
mod train;

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pulse::{calibrate_drag, DragCalibration, DragSweep};
use crate::readout::ReadoutTarget;
use crate::rl::{OptimizerKind, PolicyNet};
use crate::sim::{StateVector, TransmonParams, Unitary, DEFAULT_TAU_NS};

pub use env::{GateEnv, Measurement};
pub use eval::{benchmark_gate, evaluate, BenchRow, GateReport, Variant};
pub use train::{
    pretrain, synthesize, train, BestGate, IterationLog, PretrainReport, RolloutMode, TrainState,
};

/// Target single-qubit gate acting on `|0>`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GateKind {
    #[default]
    X,
    Sx,
}

impl GateKind {
    pub fn name(self) -> &'static str {
        match self {
            GateKind::X => "x",
            GateKind::Sx => "sx",
        }
    }

    pub fn unitary(self, levels: usize) -> Unitary {
        match self {
            GateKind::X => Unitary::ideal_x(levels),
            GateKind::Sx => Unitary::ideal_sx(levels),
        }
    }

    /// Target state `G|0>`.
    pub fn target_state(self, levels: usize) -> StateVector {
        match self {
            GateKind::X => StateVector::basis(levels, 1),
            GateKind::Sx => StateVector::sx_target(levels),
        }
    }
}

impl fmt::Display for GateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GateKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "x" => Ok(GateKind::X),
            "sx" | "sqrtx" => Ok(GateKind::Sx),
            other => Err(Error::InvalidParams(format!("unknown gate {other}"))),
        }
    }
}

/// How the reward scale `sigma_T` is taken from the calibration batch.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SigmaTMode {
    /// Spread of a single shot around the target cluster.
    PerShot,
    /// Standard error of an `n_shot` average, i.e. per-shot spread / sqrt(n_shot).
    #[default]
    MeanStdError,
}

/// Hyper-parameters of the designer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DesignerConfig {
    pub n_seg_max: usize,
    pub n_ep: usize,
    pub n_iter: usize,
    pub n_shot: usize,
    pub lambda: f64,
    pub leak_max: f64,
    pub beta: f64,
    pub seed: u64,
    pub hidden: Vec<usize>,
    pub optimizer: OptimizerKind,
    pub learning_rate_x: f64,
    pub learning_rate_y: f64,
    pub momentum: f64,
    /// Global gradient-norm clip for the REINFORCE updates.
    pub max_grad_norm: Option<f64>,
    pub pretrain_passes: usize,
    /// Gaussian width of the pre-training target, in amplitude units.
    pub pretrain_width: f64,
    pub pretrain_learning_rate: f64,
    /// Full-batch optimizer steps per pre-training pass.
    pub pretrain_steps_per_pass: usize,
    pub pretrain_optimizer: OptimizerKind,
    /// Append `k / N_seg` to the y-agent state.
    pub y_state_segment: bool,
    pub sigma_t_mode: SigmaTMode,
    /// Shots per level for the discriminator and target calibration.
    pub calibration_shots: usize,
    /// Segment counts rolled out greedily after every iteration.
    pub probe_segments: Vec<usize>,
    /// Include wall-clock time in the training log (makes logs non-reproducible).
    pub log_wall_time: bool,
}

impl Default for DesignerConfig {
    fn default() -> Self {
        Self {
            n_seg_max: 20,
            n_ep: 20,
            n_iter: 200,
            n_shot: 512,
            lambda: 0.005,
            leak_max: 0.02,
            beta: 0.95,
            seed: 0,
            hidden: vec![32, 32],
            optimizer: OptimizerKind::Momentum,
            learning_rate_x: 1e-2,
            learning_rate_y: 1e-3,
            momentum: 0.9,
            max_grad_norm: Some(3.0),
            pretrain_passes: 50,
            pretrain_width: 0.01,
            pretrain_learning_rate: 1e-2,
            pretrain_steps_per_pass: 20,
            pretrain_optimizer: OptimizerKind::Adam,
            y_state_segment: true,
            sigma_t_mode: SigmaTMode::MeanStdError,
            calibration_shots: 8192,
            probe_segments: vec![20, 15, 10],
            log_wall_time: false,
        }
    }
}

impl DesignerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParams(m));
        if self.n_seg_max == 0 || self.n_ep == 0 {
            return bad("n_seg_max and n_ep must be positive".into());
        }
        if self.n_ep > self.n_seg_max || self.n_seg_max % self.n_ep != 0 {
            return bad(format!(
                "n_seg_max = {} must be a multiple of n_ep = {}",
                self.n_seg_max, self.n_ep
            ));
        }
        if !(self.lambda >= 0.0) {
            return bad(format!("lambda = {}", self.lambda));
        }
        if !(self.leak_max > 0.0 && self.leak_max < 1.0) {
            return bad(format!("leak_max = {}", self.leak_max));
        }
        if !(0.0..1.0).contains(&self.beta) {
            return bad(format!("beta = {}", self.beta));
        }
        if self.n_shot == 0 || self.calibration_shots < 10 {
            return bad("shot counts too small".into());
        }
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return bad("hidden layer sizes must be positive".into());
        }
        for lr in [
            self.learning_rate_x,
            self.learning_rate_y,
            self.pretrain_learning_rate,
        ] {
            if !(lr >= 0.0) || !lr.is_finite() {
                return bad(format!("learning rate {lr}"));
            }
        }
        if let Some(c) = self.max_grad_norm {
            if !(c > 0.0) || !c.is_finite() {
                return bad(format!("gradient clip {c}"));
            }
        }
        if let Some(n) = self
            .probe_segments
            .iter()
            .find(|n| **n == 0 || **n > self.n_seg_max)
        {
            return bad(format!("probe length {n} outside 1..={}", self.n_seg_max));
        }
        Ok(())
    }

    pub fn y_state_dim(&self) -> usize {
        if self.y_state_segment {
            3
        } else {
            2
        }
    }
}

/// `s^x = (<I>, <Q>, k)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentStateX {
    pub i_mean: f64,
    pub q_mean: f64,
    pub k: usize,
}

impl AgentStateX {
    pub fn features(&self) -> Vec<f64> {
        vec![self.i_mean, self.q_mean, self.k as f64]
    }
}

/// `s^y = (u^x, L)`, optionally with the segment index.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentStateY {
    pub ux: f64,
    pub leak: f64,
    pub k: Option<usize>,
}

impl AgentStateY {
    pub fn features(&self) -> Vec<f64> {
        let mut f = vec![self.ux, self.leak];
        if let Some(k) = self.k {
            f.push(k as f64);
        }
        f
    }
}

/// Two-qubit x-state: averaged readout of both qubits and the segment index.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentStateX2Q {
    pub i_mean_1: f64,
    pub q_mean_1: f64,
    pub i_mean_2: f64,
    pub q_mean_2: f64,
    pub k: usize,
}

/// `min{1 - lambda k, sigma_T / ||<IQ> - <IQ>_T|| - lambda k}`.
///
/// Below `sigma_T` the ratio exceeds one and the cap wins, so a vanishing
/// distance (under 1e-12) returns the cap without dividing.
pub fn reward_x(next: &AgentStateX, target: &ReadoutTarget, lambda: f64, k: usize) -> f64 {
    distance_reward([next.i_mean, next.q_mean], target, lambda, k)
}

fn distance_reward(iq: [f64; 2], target: &ReadoutTarget, lambda: f64, k: usize) -> f64 {
    let penalty = lambda * k as f64;
    let cap = 1.0 - penalty;
    let dist = (iq[0] - target.mean[0]).hypot(iq[1] - target.mean[1]);
    if dist < 1e-12 {
        return cap;
    }
    cap.min(target.sigma_t / dist - penalty)
}

/// `max{0, L_max - L}`.
pub fn reward_y(next: &AgentStateY, leak_max: f64) -> f64 {
    (leak_max - next.leak).max(0.0)
}

/// Mean of the single-qubit x-rewards of both qubits.
pub fn reward_x_2q(
    next: &AgentStateX2Q,
    target_1: &ReadoutTarget,
    target_2: &ReadoutTarget,
    lambda: f64,
    k: usize,
) -> f64 {
    0.5 * (distance_reward([next.i_mean_1, next.q_mean_1], target_1, lambda, k)
        + distance_reward([next.i_mean_2, next.q_mean_2], target_2, lambda, k))
}

/// The pair of policy networks.
#[derive(Clone, Debug, PartialEq)]
pub struct Agents {
    pub x: PolicyNet,
    pub y: PolicyNet,
}

impl Agents {
    /// Freshly initialised networks with the environment's input standardisation.
    pub fn new(config: &DesignerConfig, env: &GateEnv) -> Result<Self> {
        let mut rng = stream_rng(config.seed, STREAM_INIT);
        let mut x = PolicyNet::new(3, &config.hidden, env.grid_x.values().to_vec(), &mut rng)?;
        let mut y = PolicyNet::new(
            config.y_state_dim(),
            &config.hidden,
            env.grid_y.values().to_vec(),
            &mut rng,
        )?;
        let (sx, cx) = env.x_standardization();
        x.set_standardization(sx, cx)?;
        let (sy, cy) = env.y_standardization(config.y_state_segment);
        y.set_standardization(sy, cy)?;
        Ok(Self { x, y })
    }
}

/// Calibrated `n_seg`-segment DRAG (or, with `gaussian_only`, plain Gaussian)
/// pulse for `gate` at the default segment duration.
pub fn drag_reference(
    params: &TransmonParams,
    gate: GateKind,
    n_seg: usize,
    gaussian_only: bool,
) -> Result<DragCalibration> {
    let sweep = DragSweep {
        gaussian_only,
        ..DragSweep::default()
    };
    let target = gate.target_state(params.levels);
    calibrate_drag(
        params,
        n_seg as f64 * DEFAULT_TAU_NS,
        n_seg,
        &target,
        &sweep,
    )
}

pub const STREAM_CALIBRATION: u64 = 1;
pub const STREAM_INIT: u64 = 2;
pub const STREAM_PRETRAIN: u64 = 3;
pub const STREAM_EVAL: u64 = 4;
pub const STREAM_SYNTH: u64 = 5;
pub const STREAM_TRAIN_BASE: u64 = 1 << 32;

/// ChaCha8 generator for one named stream of a run seed.
/// Named random streams of a run seed.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    fn target(sigma: f64) -> ReadoutTarget {
        ReadoutTarget {
            mean: [0.0, 0.0],
            sigma_t: sigma,
        }
    }

    fn at(d: f64, k: usize) -> AgentStateX {
        AgentStateX {
            i_mean: d,
            q_mean: 0.0,
            k,
        }
    }

    #[test]
    fn reward_x_examples() {
        let t = target(2.0);
        assert_eq!(reward_x(&at(1.0, 0), &t, 0.005, 0), 1.0);
        assert_eq!(reward_x(&at(4.0, 0), &t, 0.0, 0), 0.5);
        assert_eq!(reward_x(&at(4.0, 10), &t, 0.01, 10), 0.4);
        assert_eq!(reward_x(&at(0.0, 3), &t, 0.01, 3), 0.97);
    }

    #[test]
    fn reward_y_examples() {
        let s = |leak| AgentStateY {
            ux: 0.1,
            leak,
            k: None,
        };
        assert_eq!(reward_y(&s(0.02), 0.02), 0.0);
        assert_eq!(reward_y(&s(0.0), 0.02), 0.02);
        assert_eq!(reward_y(&s(0.002), 0.01), 0.008);
        assert_eq!(reward_y(&s(0.5), 0.02), 0.0);
    }

    #[test]
    fn reward_x_2q_examples() {
        let t = target(2.0);
        let s = |d1: f64, d2: f64| AgentStateX2Q {
            i_mean_1: d1,
            q_mean_1: 0.0,
            i_mean_2: 0.0,
            q_mean_2: d2,
            k: 0,
        };
        assert_eq!(reward_x_2q(&s(1.0, 1.0), &t, &t, 0.0, 0), 1.0);
        assert_eq!(reward_x_2q(&s(1.0, 4.0), &t, &t, 0.0, 0), 0.75);
        assert_eq!(
            reward_x_2q(&s(1.0, 4.0), &t, &t, 0.0, 0),
            reward_x_2q(&s(4.0, 1.0), &t, &t, 0.0, 0)
        );
    }

    #[test]
    fn config_validation() {
        assert!(DesignerConfig::default().validate().is_ok());
        let c = DesignerConfig {
            n_ep: 7,
            ..Default::default()
        };
        assert!(c.validate().is_err());
        let c = DesignerConfig {
            leak_max: 1.0,
            ..Default::default()
        };
        assert!(c.validate().is_err());
        let c = DesignerConfig {
            probe_segments: vec![25],
            ..Default::default()
        };
        assert!(c.validate().is_err());
    }

    #[test]
    fn gate_names_parse() {
        assert_eq!("SX".parse::<GateKind>().unwrap(), GateKind::Sx);
        assert_eq!("x".parse::<GateKind>().unwrap(), GateKind::X);
        assert!("h".parse::<GateKind>().is_err());
    }
}
