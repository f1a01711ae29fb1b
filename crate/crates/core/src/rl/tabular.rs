use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense action-value table, row-major over `(state, action)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QTable {
    n_states: usize,
    n_actions: usize,
    values: Vec<f64>,
}

impl QTable {
    pub fn zeros(n_states: usize, n_actions: usize) -> Self {
        Self {
            n_states,
            n_actions,
            values: vec![0.0; n_states * n_actions],
        }
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn get(&self, s: usize, u: usize) -> f64 {
        self.values[s * self.n_actions + u]
    }

    pub fn set(&mut self, s: usize, u: usize, v: f64) {
        self.values[s * self.n_actions + u] = v;
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.values[s * self.n_actions..(s + 1) * self.n_actions]
    }

    pub fn max(&self, s: usize) -> f64 {
        self.row(s)
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Greedy action; ties go to the lowest index.
    pub fn argmax(&self, s: usize) -> usize {
        let row = self.row(s);
        let mut best = 0;
        for (u, v) in row.iter().enumerate() {
            if *v > row[best] {
                best = u;
            }
        }
        best
    }

    pub fn greedy_policy(&self) -> Vec<usize> {
        (0..self.n_states).map(|s| self.argmax(s)).collect()
    }

    pub fn max_abs_diff(&self, other: &QTable) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Finite MDP with kernel `T(s'|s,u)` and reward `r(s,u,s')`, both stored
/// as `[s][u][s']`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiniteMdp {
    n_states: usize,
    n_actions: usize,
    transition: Vec<f64>,
    reward: Vec<f64>,
    beta: f64,
}

impl FiniteMdp {
    /// `beta = 0` is accepted (myopic limit); otherwise `0 < beta < 1`.
    pub fn new(
        n_states: usize,
        n_actions: usize,
        transition: Vec<f64>,
        reward: Vec<f64>,
        beta: f64,
    ) -> Result<Self> {
        let len = n_states * n_actions * n_states;
        if n_states == 0 || n_actions == 0 {
            return Err(Error::InvalidInput("MDP needs states and actions".into()));
        }
        if transition.len() != len {
            return Err(Error::DimensionMismatch {
                expected: len,
                got: transition.len(),
            });
        }
        if reward.len() != len {
            return Err(Error::DimensionMismatch {
                expected: len,
                got: reward.len(),
            });
        }
        if !(0.0..1.0).contains(&beta) {
            return Err(Error::InvalidParams(format!(
                "discount {beta} outside [0, 1)"
            )));
        }
        if reward.iter().any(|r| !r.is_finite()) {
            return Err(Error::NonFinite("MDP reward".into()));
        }
        for row in transition.chunks(n_states) {
            let sum: f64 = row.iter().sum();
            if row.iter().any(|p| *p < 0.0) || (sum - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidInput(format!("transition row sums to {sum}")));
            }
        }
        Ok(Self {
            n_states,
            n_actions,
            transition,
            reward,
            beta,
        })
    }

    /// Random MDP for tests and demos. Rewards are uniform in `[0, 1)`.
    /// With `deterministic` each `(s, u)` row of the kernel is one-hot on a
    /// random successor; otherwise rows are normalised uniform draws.
    pub fn random(
        n_states: usize,
        n_actions: usize,
        beta: f64,
        deterministic: bool,
        seed: u64,
    ) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut transition = Vec::with_capacity(n_states * n_actions * n_states);
        for _ in 0..n_states * n_actions {
            if deterministic {
                let next = rng.random_range(0..n_states);
                transition.extend((0..n_states).map(|s| if s == next { 1.0 } else { 0.0 }));
            } else {
                let raw: Vec<f64> = (0..n_states).map(|_| rng.random::<f64>() + 1e-3).collect();
                let total: f64 = raw.iter().sum();
                let mut row: Vec<f64> = raw.iter().map(|p| p / total).collect();
                // fold rounding residue into the last entry so the row sums to 1 exactly enough
                let rest: f64 = row[..n_states - 1].iter().sum();
                row[n_states - 1] = 1.0 - rest;
                transition.extend(row);
            }
        }
        let reward = (0..n_states * n_actions * n_states)
            .map(|_| rng.random::<f64>())
            .collect();
        Self::new(n_states, n_actions, transition, reward, beta)
    }

    /// One state, one action, self loop with reward `r`.
    pub fn single(r: f64, beta: f64) -> Result<Self> {
        Self::new(1, 1, vec![1.0], vec![r], beta)
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    fn idx(&self, s: usize, u: usize) -> usize {
        (s * self.n_actions + u) * self.n_states
    }

    pub fn kernel(&self, s: usize, u: usize) -> &[f64] {
        let i = self.idx(s, u);
        &self.transition[i..i + self.n_states]
    }

    pub fn reward(&self, s: usize, u: usize, s_next: usize) -> f64 {
        self.reward[self.idx(s, u) + s_next]
    }

    /// Samples `(s', r)` for taking `u` in `s`.
    pub fn step<R: Rng + ?Sized>(&self, s: usize, u: usize, rng: &mut R) -> (usize, f64) {
        let row = self.kernel(s, u);
        let x: f64 = rng.random();
        let mut acc = 0.0;
        let mut next = self.n_states - 1;
        for (sp, p) in row.iter().enumerate() {
            acc += p;
            if x < acc {
                next = sp;
                break;
            }
        }
        (next, self.reward(s, u, next))
    }

    /// `(B Q)(s,u) = sum_s' T(s'|s,u) [r(s,u,s') + beta max_v Q(s',v)]`.
    pub fn bellman(&self, q: &QTable) -> QTable {
        let mut out = QTable::zeros(self.n_states, self.n_actions);
        let max_next: Vec<f64> = (0..self.n_states).map(|s| q.max(s)).collect();
        for s in 0..self.n_states {
            for u in 0..self.n_actions {
                let v = self
                    .kernel(s, u)
                    .iter()
                    .enumerate()
                    .map(|(sp, p)| p * (self.reward(s, u, sp) + self.beta * max_next[sp]))
                    .sum();
                out.set(s, u, v);
            }
        }
        out
    }
}

/// One Bellman update of entry `(s, u)`:
/// `Q(s,u) += alpha [r + beta max_v Q(s',v) - Q(s,u)]`.
pub fn q_update(q: &mut QTable, s: usize, u: usize, r: f64, s_next: usize, alpha: f64, beta: f64) {
    let old = q.get(s, u);
    let target = r + beta * q.max(s_next);
    q.set(s, u, old + alpha * (target - old));
}

/// `alpha_j = alpha0 / (1 + j / tau_decay)`. The sum of `alpha_j` diverges
/// and the sum of squares converges, as Q-learning convergence requires.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LearningSchedule {
    pub alpha0: f64,
    pub tau_decay: f64,
}

impl Default for LearningSchedule {
    fn default() -> Self {
        Self {
            alpha0: 0.5,
            tau_decay: 1e4,
        }
    }
}

impl LearningSchedule {
    pub fn alpha(&self, j: u64) -> f64 {
        self.alpha0 / (1.0 + j as f64 / self.tau_decay)
    }
}

/// Epsilon-greedy behaviour with occasional jumps to a uniformly random state.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Exploration {
    pub epsilon: f64,
    pub restart_prob: f64,
}

impl Default for Exploration {
    fn default() -> Self {
        Self {
            epsilon: 0.3,
            restart_prob: 0.05,
        }
    }
}

/// Runs `n_steps` of online Q-learning from state 0 with a ChaCha8 stream seeded by `seed`.
pub fn q_learn(
    mdp: &FiniteMdp,
    schedule: LearningSchedule,
    exploration: Exploration,
    n_steps: u64,
    seed: u64,
) -> QTable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut q = QTable::zeros(mdp.n_states, mdp.n_actions);
    let mut s = 0;
    for j in 0..n_steps {
        let u = if rng.random::<f64>() < exploration.epsilon {
            rng.random_range(0..mdp.n_actions)
        } else {
            q.argmax(s)
        };
        let (next, r) = mdp.step(s, u, &mut rng);
        q_update(&mut q, s, u, r, next, schedule.alpha(j), mdp.beta);
        s = if rng.random::<f64>() < exploration.restart_prob {
            rng.random_range(0..mdp.n_states)
        } else {
            next
        };
    }
    q
}

/// Iterates the Bellman optimality operator from zero until the sup-norm
/// change drops below `tol (1 - beta) / beta`, which bounds the distance to
/// the fixed point by `tol`.
pub fn value_iteration(mdp: &FiniteMdp, tol: f64) -> Result<QTable> {
    if !(tol > 0.0) {
        return Err(Error::InvalidInput(format!("tolerance {tol}")));
    }
    let stop = if mdp.beta > 0.0 {
        tol * (1.0 - mdp.beta) / mdp.beta
    } else {
        f64::INFINITY
    };
    let mut q = QTable::zeros(mdp.n_states, mdp.n_actions);
    loop {
        let next = mdp.bellman(&q);
        let change = next.max_abs_diff(&q);
        q = next;
        if change < stop {
            return Ok(q);
        }
    }
}
