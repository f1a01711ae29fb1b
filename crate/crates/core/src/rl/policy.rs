use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Schema tag written into every checkpoint.
pub const CHECKPOINT_SCHEMA: &str = "fastgate.policy.v1";

/// Fully connected layer, `y = W x + b` with `W` stored row-major (`out x in`).
#[derive(Clone, Debug, PartialEq)]
struct Layer {
    n_in: usize,
    n_out: usize,
    w: Vec<f64>,
    b: Vec<f64>,
}

impl Layer {
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n_out)
            .map(|o| {
                let row = &self.w[o * self.n_in..(o + 1) * self.n_in];
                self.b[o] + row.iter().zip(x).map(|(w, x)| w * x).sum::<f64>()
            })
            .collect()
    }
}

/// Feed-forward tanh MLP with a softmax head over a discrete action grid.
///
/// Inputs pass through a fixed affine map `(x - shift) / scale` before the
/// first layer. The map is part of the checkpoint.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Checkpoint", into = "Checkpoint")]
pub struct PolicyNet {
    layers: Vec<Layer>,
    grid: Vec<f64>,
    input_shift: Vec<f64>,
    input_scale: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct LayerFile {
    w: Vec<Vec<f64>>,
    b: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    schema: String,
    input_dim: usize,
    grid: Vec<f64>,
    input_shift: Vec<f64>,
    input_scale: Vec<f64>,
    layers: Vec<LayerFile>,
}

impl From<PolicyNet> for Checkpoint {
    fn from(net: PolicyNet) -> Self {
        Checkpoint {
            schema: CHECKPOINT_SCHEMA.into(),
            input_dim: net.input_dim(),
            layers: net
                .layers
                .iter()
                .map(|l| LayerFile {
                    w: l.w.chunks(l.n_in).map(<[f64]>::to_vec).collect(),
                    b: l.b.clone(),
                })
                .collect(),
            grid: net.grid,
            input_shift: net.input_shift,
            input_scale: net.input_scale,
        }
    }
}

impl TryFrom<Checkpoint> for PolicyNet {
    type Error = Error;

    fn try_from(c: Checkpoint) -> Result<Self> {
        if c.schema != CHECKPOINT_SCHEMA {
            return Err(Error::InvalidInput(format!(
                "unknown checkpoint schema {}",
                c.schema
            )));
        }
        let mut layers = Vec::with_capacity(c.layers.len());
        let mut n_in = c.input_dim;
        for lf in c.layers {
            let n_out = lf.b.len();
            if lf.w.len() != n_out || lf.w.iter().any(|r| r.len() != n_in) {
                return Err(Error::InvalidInput("inconsistent layer shapes".into()));
            }
            layers.push(Layer {
                n_in,
                n_out,
                w: lf.w.into_iter().flatten().collect(),
                b: lf.b,
            });
            n_in = n_out;
        }
        let net = PolicyNet {
            layers,
            grid: c.grid,
            input_shift: c.input_shift,
            input_scale: c.input_scale,
        };
        net.validate()?;
        Ok(net)
    }
}

/// Cached activations of one forward pass.
struct Tape {
    /// Input to each layer (standardised input first, then hidden activations).
    inputs: Vec<Vec<f64>>,
    probs: Vec<f64>,
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|z| (z - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

impl PolicyNet {
    /// Glorot-uniform hidden weights, zero biases and a zero output layer,
    /// so the initial policy is uniform.
    pub fn new<R: Rng + ?Sized>(
        input_dim: usize,
        hidden: &[usize],
        grid: Vec<f64>,
        rng: &mut R,
    ) -> Result<Self> {
        let mut net = Self::zeros(input_dim, hidden, grid)?;
        let n_hidden = net.layers.len() - 1;
        for l in &mut net.layers[..n_hidden] {
            let limit = (6.0 / (l.n_in + l.n_out) as f64).sqrt();
            for w in &mut l.w {
                *w = rng.random_range(-limit..limit);
            }
        }
        Ok(net)
    }

    /// All parameters zero: the policy is uniform for every input.
    pub fn zeros(input_dim: usize, hidden: &[usize], grid: Vec<f64>) -> Result<Self> {
        if input_dim == 0 || grid.is_empty() || hidden.contains(&0) {
            return Err(Error::InvalidInput("empty network dimension".into()));
        }
        let mut sizes = vec![input_dim];
        sizes.extend_from_slice(hidden);
        sizes.push(grid.len());
        let layers = sizes
            .windows(2)
            .map(|p| Layer {
                n_in: p[0],
                n_out: p[1],
                w: vec![0.0; p[0] * p[1]],
                b: vec![0.0; p[1]],
            })
            .collect();
        Ok(Self {
            layers,
            grid,
            input_shift: vec![0.0; input_dim],
            input_scale: vec![1.0; input_dim],
        })
    }

    fn validate(&self) -> Result<()> {
        let d = self.input_dim();
        if self.input_shift.len() != d || self.input_scale.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: self.input_shift.len().min(self.input_scale.len()),
            });
        }
        if self
            .input_scale
            .iter()
            .any(|s| !(*s > 0.0) || !s.is_finite())
        {
            return Err(Error::InvalidInput("input scale must be positive".into()));
        }
        if self.layers.last().map(|l| l.n_out) != Some(self.grid.len()) {
            return Err(Error::InvalidInput(
                "output width differs from grid size".into(),
            ));
        }
        if self.params().iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFinite("network parameters".into()));
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.layers.first().map_or(0, |l| l.n_in)
    }

    pub fn action_count(&self) -> usize {
        self.grid.len()
    }

    pub fn hidden_sizes(&self) -> Vec<usize> {
        self.layers[..self.layers.len() - 1]
            .iter()
            .map(|l| l.n_out)
            .collect()
    }

    /// Action amplitudes, one per output.
    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn set_standardization(&mut self, shift: Vec<f64>, scale: Vec<f64>) -> Result<()> {
        let old = (
            std::mem::replace(&mut self.input_shift, shift),
            std::mem::replace(&mut self.input_scale, scale),
        );
        if let Err(e) = self.validate() {
            (self.input_shift, self.input_scale) = old;
            return Err(e);
        }
        Ok(())
    }

    pub fn standardization(&self) -> (&[f64], &[f64]) {
        (&self.input_shift, &self.input_scale)
    }

    /// Adds `c` to every output bias.
    pub fn shift_output_bias(&mut self, c: f64) {
        if let Some(l) = self.layers.last_mut() {
            l.b.iter_mut().for_each(|b| *b += c);
        }
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    /// Flattened parameters: per layer, weights (row-major) then biases.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        for l in &self.layers {
            out.extend_from_slice(&l.w);
            out.extend_from_slice(&l.b);
        }
        out
    }

    pub fn set_params(&mut self, p: &[f64]) -> Result<()> {
        if p.len() != self.n_params() {
            return Err(Error::DimensionMismatch {
                expected: self.n_params(),
                got: p.len(),
            });
        }
        let mut i = 0;
        for l in &mut self.layers {
            let nw = l.w.len();
            l.w.copy_from_slice(&p[i..i + nw]);
            i += nw;
            let nb = l.b.len();
            l.b.copy_from_slice(&p[i..i + nb]);
            i += nb;
        }
        Ok(())
    }

    fn check_state(&self, state: &[f64]) -> Result<()> {
        if state.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                got: state.len(),
            });
        }
        Ok(())
    }

    fn tape(&self, state: &[f64]) -> Tape {
        let mut x: Vec<f64> = state
            .iter()
            .zip(self.input_shift.iter().zip(&self.input_scale))
            .map(|(v, (m, s))| (v - m) / s)
            .collect();
        let mut inputs = Vec::with_capacity(self.layers.len());
        let last = self.layers.len() - 1;
        for (i, l) in self.layers.iter().enumerate() {
            let z = l.apply(&x);
            inputs.push(x);
            x = if i == last {
                z
            } else {
                z.into_iter().map(f64::tanh).collect()
            };
        }
        Tape {
            inputs,
            probs: softmax(&x),
        }
    }

    /// Action distribution `pi(. | state)`.
    pub fn forward(&self, state: &[f64]) -> Result<Vec<f64>> {
        self.check_state(state)?;
        Ok(self.tape(state).probs)
    }

    /// Back-propagates `dL/dlogits` and accumulates `scale * dL/dtheta` into `grad`.
    fn backprop(&self, tape: &Tape, dlogits: Vec<f64>, scale: f64, grad: &mut [f64]) {
        let offsets: Vec<usize> = self
            .layers
            .iter()
            .scan(0, |acc, l| {
                let o = *acc;
                *acc += l.w.len() + l.b.len();
                Some(o)
            })
            .collect();
        let mut delta = dlogits;
        for (i, l) in self.layers.iter().enumerate().rev() {
            let x = &tape.inputs[i];
            let off = offsets[i];
            for o in 0..l.n_out {
                let d = scale * delta[o];
                for (j, xj) in x.iter().enumerate() {
                    grad[off + o * l.n_in + j] += d * xj;
                }
                grad[off + l.w.len() + o] += d;
            }
            if i > 0 {
                // x is tanh output of the previous layer
                delta = (0..l.n_in)
                    .map(|j| {
                        let s: f64 = (0..l.n_out).map(|o| l.w[o * l.n_in + j] * delta[o]).sum();
                        s * (1.0 - x[j] * x[j])
                    })
                    .collect();
            }
        }
    }

    /// Gradient of `log pi(action | state)`.
    pub fn log_prob_gradient(&self, state: &[f64], action: usize) -> Result<Vec<f64>> {
        self.check_state(state)?;
        self.check_action(action)?;
        let tape = self.tape(state);
        let mut grad = vec![0.0; self.n_params()];
        let dlogits = score(&tape.probs, action);
        self.backprop(&tape, dlogits, 1.0, &mut grad);
        Ok(grad)
    }

    fn check_action(&self, action: usize) -> Result<()> {
        if action >= self.action_count() {
            return Err(Error::InvalidInput(format!(
                "action {action} outside grid of {}",
                self.action_count()
            )));
        }
        Ok(())
    }

    /// Score-function gradient `sum_j (G_j - b) grad log pi(u_j | s_j)` with
    /// discounted returns-to-go `G_j` and the trajectory-mean baseline `b`.
    pub fn reinforce_gradient(&self, traj: &Trajectory, beta: f64) -> Result<Vec<f64>> {
        if traj.is_empty() {
            return Err(Error::InvalidInput("empty trajectory".into()));
        }
        let advantages = traj.advantages(beta);
        let mut grad = vec![0.0; self.n_params()];
        for (step, adv) in traj.steps().iter().zip(advantages) {
            self.check_state(&step.state)?;
            self.check_action(step.action)?;
            if adv == 0.0 {
                continue;
            }
            let tape = self.tape(&step.state);
            self.backprop(&tape, score(&tape.probs, step.action), adv, &mut grad);
        }
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite("policy gradient".into()));
        }
        Ok(grad)
    }

    /// The surrogate objective whose gradient is [`Self::reinforce_gradient`].
    pub fn reinforce_objective(&self, traj: &Trajectory, beta: f64) -> Result<f64> {
        let adv = traj.advantages(beta);
        let mut total = 0.0;
        for (step, a) in traj.steps().iter().zip(adv) {
            let p = self.forward(&step.state)?;
            self.check_action(step.action)?;
            total += a * p[step.action].ln();
        }
        Ok(total)
    }

    /// Ascends the REINFORCE objective by one optimizer step. A non-finite
    /// gradient leaves the parameters untouched and returns an error.
    pub fn reinforce_update(
        &mut self,
        traj: &Trajectory,
        beta: f64,
        opt: &mut Optimizer,
    ) -> Result<()> {
        let grad = self.reinforce_gradient(traj, beta)?;
        let descent: Vec<f64> = grad.iter().map(|g| -g).collect();
        self.apply(opt, &descent)
    }

    fn apply(&mut self, opt: &mut Optimizer, loss_grad: &[f64]) -> Result<()> {
        let mut p = self.params();
        opt.step(&mut p, loss_grad)?;
        if p.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("updated parameters".into()));
        }
        self.set_params(&p)
    }

    /// Mean squared error between `pi(. | state)` and `target`, with its gradient.
    pub fn mse_gradient(&self, state: &[f64], target: &[f64]) -> Result<(f64, Vec<f64>)> {
        self.check_state(state)?;
        if target.len() != self.action_count() {
            return Err(Error::DimensionMismatch {
                expected: self.action_count(),
                got: target.len(),
            });
        }
        let tape = self.tape(state);
        let n = target.len() as f64;
        let dp: Vec<f64> = tape
            .probs
            .iter()
            .zip(target)
            .map(|(p, t)| 2.0 * (p - t) / n)
            .collect();
        let loss = tape
            .probs
            .iter()
            .zip(target)
            .map(|(p, t)| (p - t).powi(2))
            .sum::<f64>()
            / n;
        let dot: f64 = tape.probs.iter().zip(&dp).map(|(p, d)| p * d).sum();
        let dlogits = tape
            .probs
            .iter()
            .zip(&dp)
            .map(|(p, d)| p * (d - dot))
            .collect();
        let mut grad = vec![0.0; self.n_params()];
        self.backprop(&tape, dlogits, 1.0, &mut grad);
        Ok((loss, grad))
    }

    /// One descent step on the MSE to a grid-discretised Gaussian centred at
    /// `center` with standard deviation `width`. Returns the loss before the step.
    pub fn mse_pretrain_step(
        &mut self,
        state: &[f64],
        center: f64,
        width: f64,
        opt: &mut Optimizer,
    ) -> Result<f64> {
        let target = gaussian_target(&self.grid, center, width)?;
        let (loss, grad) = self.mse_gradient(state, &target)?;
        self.apply(opt, &grad)?;
        Ok(loss)
    }

    /// Descent step on the mean MSE over a batch of `(state, center)` pairs.
    pub fn mse_pretrain_batch(
        &mut self,
        batch: &[(Vec<f64>, f64)],
        width: f64,
        opt: &mut Optimizer,
    ) -> Result<f64> {
        if batch.is_empty() {
            return Ok(0.0);
        }
        let mut total = vec![0.0; self.n_params()];
        let mut loss = 0.0;
        for (state, center) in batch {
            let target = gaussian_target(&self.grid, *center, width)?;
            let (l, g) = self.mse_gradient(state, &target)?;
            loss += l;
            total.iter_mut().zip(g).for_each(|(t, g)| *t += g);
        }
        let n = batch.len() as f64;
        total.iter_mut().for_each(|g| *g /= n);
        self.apply(opt, &total)?;
        Ok(loss / n)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// `d log softmax_u / d logits = e_u - p`.
fn score(probs: &[f64], action: usize) -> Vec<f64> {
    probs
        .iter()
        .enumerate()
        .map(|(i, p)| if i == action { 1.0 - p } else { -p })
        .collect()
}

/// `t_i ∝ exp(-(grid_i - center)^2 / (2 width^2))`, normalised. When the
/// Gaussian underflows (or `width <= 0`) the target is one-hot on the nearest point.
pub fn gaussian_target(grid: &[f64], center: f64, width: f64) -> Result<Vec<f64>> {
    let (lo, hi) = grid
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), g| {
            (a.min(*g), b.max(*g))
        });
    let slack = 1e-9 * (hi - lo).abs().max(1.0);
    if !(center >= lo - slack && center <= hi + slack) {
        return Err(Error::OutOfGrid {
            amplitude: center,
            min: lo,
            max: hi,
        });
    }
    let mut t: Vec<f64> = if width > 0.0 {
        grid.iter()
            .map(|g| (-(g - center).powi(2) / (2.0 * width * width)).exp())
            .collect()
    } else {
        vec![0.0; grid.len()]
    };
    let s: f64 = t.iter().sum();
    if s > 0.0 && s.is_finite() {
        t.iter_mut().for_each(|v| *v /= s);
    } else {
        let nearest = grid
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - center).abs().total_cmp(&(b.1 - center).abs()))
            .map(|(i, _)| i)
            .unwrap_or(0);
        t = vec![0.0; grid.len()];
        t[nearest] = 1.0;
    }
    Ok(t)
}

/// Categorical draw from `probs`.
pub fn sample_action<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let total: f64 = probs.iter().sum();
    let x = rng.random::<f64>() * total;
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if x < acc {
            return i;
        }
    }
    // rounding can leave x at the very top; return the last action with mass
    probs.iter().rposition(|p| *p > 0.0).unwrap_or(0)
}

/// Index of the most probable action; ties go to the lowest index.
pub fn greedy_action(probs: &[f64]) -> usize {
    let mut best = 0;
    for (i, p) in probs.iter().enumerate() {
        if *p > probs[best] {
            best = i;
        }
    }
    best
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub state: Vec<f64>,
    pub action: usize,
    pub reward: f64,
}

/// Ordered `(state, action, reward)` records of one agent.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    steps: Vec<Step>,
}

impl Trajectory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, state: Vec<f64>, action: usize, reward: f64) -> Result<()> {
        if !reward.is_finite() {
            return Err(Error::NonFinite(format!(
                "reward at step {}",
                self.steps.len()
            )));
        }
        self.steps.push(Step {
            state,
            action,
            reward,
        });
        Ok(())
    }

    pub fn steps(&self) -> &[Step] {
        &self.steps
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn mean_reward(&self) -> f64 {
        if self.steps.is_empty() {
            return 0.0;
        }
        self.steps.iter().map(|s| s.reward).sum::<f64>() / self.steps.len() as f64
    }

    /// `G_j = sum_{m >= j} beta^(m-j) r_m`.
    pub fn returns(&self, beta: f64) -> Vec<f64> {
        let mut g = vec![0.0; self.steps.len()];
        let mut acc = 0.0;
        for (j, s) in self.steps.iter().enumerate().rev() {
            acc = s.reward + beta * acc;
            g[j] = acc;
        }
        g
    }

    /// Returns-to-go minus their mean.
    pub fn advantages(&self, beta: f64) -> Vec<f64> {
        let g = self.returns(beta);
        if g.is_empty() {
            return g;
        }
        let b = g.iter().sum::<f64>() / g.len() as f64;
        g.into_iter().map(|v| v - b).collect()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    #[default]
    Momentum,
    Adam,
}

/// First-order optimizer with its state, minimising a loss.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Optimizer {
    pub kind: OptimizerKind,
    pub learning_rate: f64,
    pub momentum: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Rescale gradients whose Euclidean norm exceeds this value.
    #[serde(default)]
    pub max_grad_norm: Option<f64>,
    t: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Optimizer {
    pub fn sgd(learning_rate: f64, momentum: f64) -> Self {
        Self {
            kind: OptimizerKind::Momentum,
            learning_rate,
            momentum,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            max_grad_norm: None,
            t: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn adam(learning_rate: f64) -> Self {
        Self {
            kind: OptimizerKind::Adam,
            ..Self::sgd(learning_rate, 0.0)
        }
    }

    pub fn of_kind(kind: OptimizerKind, learning_rate: f64) -> Self {
        match kind {
            OptimizerKind::Momentum => Self::sgd(learning_rate, 0.9),
            OptimizerKind::Adam => Self::adam(learning_rate),
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.t
    }

    /// `params -= update(grad)`.
    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) -> Result<()> {
        if params.len() != grad.len() {
            return Err(Error::DimensionMismatch {
                expected: params.len(),
                got: grad.len(),
            });
        }
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite("gradient".into()));
        }
        let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        let clip = match self.max_grad_norm {
            Some(max) if norm > max => max / norm,
            _ => 1.0,
        };
        let clipped: Vec<f64>;
        let grad = if clip < 1.0 {
            clipped = grad.iter().map(|g| g * clip).collect();
            &clipped[..]
        } else {
            grad
        };
        if self.m.len() != params.len() {
            self.m = vec![0.0; params.len()];
            self.v = vec![0.0; params.len()];
        }
        self.t += 1;
        match self.kind {
            OptimizerKind::Momentum => {
                for ((p, g), m) in params.iter_mut().zip(grad).zip(&mut self.m) {
                    *m = self.momentum * *m + g;
                    *p -= self.learning_rate * *m;
                }
            }
            OptimizerKind::Adam => {
                let c1 = 1.0 - self.beta1.powi(self.t as i32);
                let c2 = 1.0 - self.beta2.powi(self.t as i32);
                for (((p, g), m), v) in params
                    .iter_mut()
                    .zip(grad)
                    .zip(&mut self.m)
                    .zip(&mut self.v)
                {
                    *m = self.beta1 * *m + (1.0 - self.beta1) * g;
                    *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
                    *p -= self.learning_rate * (*m / c1) / ((*v / c2).sqrt() + self.eps);
                }
            }
        }
        Ok(())
    }
}
