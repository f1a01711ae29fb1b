//! Dispersive readout in the (I, Q) plane.
//!
//! Each shot collapses onto a level drawn from the populations and returns one
//! integrated (I, Q) point from that level's Gaussian cluster. Levels are
//! recovered with a linear discriminant fitted on labelled calibration shots.

use std::f64::consts::PI;
use std::fmt::Write as _;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::Unitary;

/// Floor on the calibrated target spread.
pub const SIGMA_T_FLOOR: f64 = 1e-6;

/// Per-level Gaussian clusters: one mean and 2x2 covariance per level.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ClusterFile")]
pub struct IqClusterModel {
    pub centers: Vec<[f64; 2]>,
    pub covariances: Vec<[[f64; 2]; 2]>,
}

#[derive(Deserialize)]
struct ClusterFile {
    centers: Vec<[f64; 2]>,
    covariances: Vec<[[f64; 2]; 2]>,
}

impl TryFrom<ClusterFile> for IqClusterModel {
    type Error = Error;

    fn try_from(f: ClusterFile) -> Result<Self> {
        IqClusterModel::new(f.centers, f.covariances)
    }
}

impl IqClusterModel {
    /// Covariances must be symmetric positive semi-definite (zero spread is allowed).
    pub fn new(centers: Vec<[f64; 2]>, covariances: Vec<[[f64; 2]; 2]>) -> Result<Self> {
        if centers.is_empty() || centers.len() != covariances.len() {
            return Err(Error::InvalidInput(format!(
                "{} centers but {} covariances",
                centers.len(),
                covariances.len()
            )));
        }
        for (m, c) in covariances.iter().enumerate() {
            let (a, b, b2, d) = (c[0][0], c[0][1], c[1][0], c[1][1]);
            if b != b2 || a < 0.0 || d < 0.0 || a * d - b * b < -1e-12 {
                return Err(Error::InvalidInput(format!(
                    "covariance of level {m} is not symmetric positive semi-definite"
                )));
            }
        }
        if centers.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("cluster centers".into()));
        }
        Ok(Self {
            centers,
            covariances,
        })
    }

    /// Centers on a regular polygon with neighbouring centers `separation * sigma`
    /// apart and isotropic spread `sigma`. For three levels: an equilateral triangle.
    pub fn regular(levels: usize, sigma: f64, separation: f64) -> Self {
        let side = separation * sigma;
        let radius = side / (2.0 * (PI / levels as f64).sin());
        let centers = (0..levels)
            .map(|m| {
                let phi = PI / 2.0 + 2.0 * PI * m as f64 / levels as f64;
                [radius * phi.cos(), radius * phi.sin()]
            })
            .collect();
        let var = sigma * sigma;
        Self {
            centers,
            covariances: vec![[[var, 0.0], [0.0, var]]; levels],
        }
    }

    /// Default geometry: unit spread, centers six spreads apart.
    pub fn default_for(levels: usize) -> Self {
        Self::regular(levels, 1.0, 6.0)
    }

    /// Strongly overlapping clusters, centers three spreads apart.
    pub fn overlapping(levels: usize) -> Self {
        Self::regular(levels, 1.0, 3.0)
    }

    pub fn levels(&self) -> usize {
        self.centers.len()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    fn draw<R: Rng + ?Sized>(&self, level: usize, rng: &mut R) -> [f64; 2] {
        let [[a, b], [_, d]] = self.covariances[level];
        let z0: f64 = rng.sample(StandardNormal);
        let z1: f64 = rng.sample(StandardNormal);
        // Cholesky factor of [[a, b], [b, d]]
        let l00 = a.sqrt();
        let l10 = if l00 > 0.0 { b / l00 } else { 0.0 };
        let l11 = (d - l10 * l10).max(0.0).sqrt();
        let c = self.centers[level];
        [c[0] + l00 * z0, c[1] + l10 * z0 + l11 * z1]
    }
}

/// A batch of single-shot (I, Q) points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IqBatch {
    samples: Vec<[f64; 2]>,
}

impl IqBatch {
    pub fn new(samples: Vec<[f64; 2]>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidInput("empty readout batch".into()));
        }
        Ok(Self { samples })
    }

    pub fn samples(&self) -> &[[f64; 2]] {
        &self.samples
    }

    pub fn n_shots(&self) -> usize {
        self.samples.len()
    }

    /// Pooled per-axis standard deviation, `sqrt((var_I + var_Q) / 2)`.
    pub fn spread(&self) -> f64 {
        let [mi, mq] = batch_mean(self);
        let n = self.samples.len() as f64;
        let (vi, vq) = self.samples.iter().fold((0.0, 0.0), |(vi, vq), s| {
            (vi + (s[0] - mi).powi(2), vq + (s[1] - mq).powi(2))
        });
        (0.5 * (vi + vq) / n).sqrt()
    }

    /// Per-axis mean and standard deviation.
    pub fn axis_stats(&self) -> ([f64; 2], [f64; 2]) {
        let mean = batch_mean(self);
        let n = self.samples.len() as f64;
        let mut var = [0.0; 2];
        for s in &self.samples {
            for a in 0..2 {
                var[a] += (s[a] - mean[a]).powi(2);
            }
        }
        (mean, [(var[0] / n).sqrt(), (var[1] / n).sqrt()])
    }
}

fn validate_populations(populations: &[f64], levels: usize) -> Result<Vec<f64>> {
    if populations.len() != levels {
        return Err(Error::DimensionMismatch {
            expected: levels,
            got: populations.len(),
        });
    }
    if let Some(p) = populations.iter().find(|p| **p < -1e-12 || !p.is_finite()) {
        return Err(Error::InvalidInput(format!("population {p} is negative")));
    }
    let total: f64 = populations.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidInput(format!("populations sum to {total}")));
    }
    Ok(populations.iter().map(|p| p.max(0.0)).collect())
}

fn draw_level<R: Rng + ?Sized>(cumulative: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random::<f64>() * cumulative[cumulative.len() - 1];
    cumulative
        .iter()
        .position(|&c| u < c)
        .unwrap_or(cumulative.len() - 1)
}

/// Draws `n_shots` labelled shots: level `m ~ populations`, then `(I, Q) ~ N(center_m, cov_m)`.
pub fn sample_labeled<R: Rng + ?Sized>(
    populations: &[f64],
    model: &IqClusterModel,
    n_shots: usize,
    rng: &mut R,
) -> Result<(IqBatch, Vec<usize>)> {
    let p = validate_populations(populations, model.levels())?;
    if n_shots == 0 {
        return Err(Error::InvalidInput("need at least one shot".into()));
    }
    let cumulative: Vec<f64> = p
        .iter()
        .scan(0.0, |acc, x| {
            *acc += x;
            Some(*acc)
        })
        .collect();
    let mut samples = Vec::with_capacity(n_shots);
    let mut labels = Vec::with_capacity(n_shots);
    for _ in 0..n_shots {
        let m = draw_level(&cumulative, rng);
        samples.push(model.draw(m, rng));
        labels.push(m);
    }
    Ok((IqBatch { samples }, labels))
}

/// Readout of `n_shots` shots of a state with the given level populations.
pub fn sample_readout<R: Rng + ?Sized>(
    populations: &[f64],
    model: &IqClusterModel,
    n_shots: usize,
    rng: &mut R,
) -> Result<IqBatch> {
    sample_labeled(populations, model, n_shots, rng).map(|(b, _)| b)
}

/// `n_shots` shots with the qubit prepared in `level`.
pub fn sample_level<R: Rng + ?Sized>(
    model: &IqClusterModel,
    level: usize,
    n_shots: usize,
    rng: &mut R,
) -> Result<IqBatch> {
    let mut p = vec![0.0; model.levels()];
    *p.get_mut(level).ok_or(Error::DimensionMismatch {
        expected: model.levels(),
        got: level + 1,
    })? = 1.0;
    sample_readout(&p, model, n_shots, rng)
}

/// Arithmetic mean `(<I>, <Q>)`.
pub fn batch_mean(batch: &IqBatch) -> [f64; 2] {
    let n = batch.samples.len() as f64;
    let (si, sq) = batch
        .samples
        .iter()
        .fold((0.0, 0.0), |(a, b), s| (a + s[0], b + s[1]));
    [si / n, sq / n]
}

/// Linear discriminant with a shared (pooled) covariance:
/// `score_m(x) = w_m . x + b_m`, `w_m = S^-1 mu_m`, `b_m = -mu_m . S^-1 mu_m / 2`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Discriminator {
    weights: Vec<[f64; 2]>,
    biases: Vec<f64>,
}

impl Discriminator {
    pub fn n_classes(&self) -> usize {
        self.weights.len()
    }

    /// Index of the largest score; ties go to the lower index.
    pub fn classify(&self, x: [f64; 2]) -> usize {
        let mut best = 0;
        let mut best_score = f64::NEG_INFINITY;
        for (m, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let s = w[0] * x[0] + w[1] * x[1] + b;
            if s > best_score {
                best = m;
                best_score = s;
            }
        }
        best
    }

    /// Fraction of shots assigned to their label.
    pub fn accuracy(&self, batch: &IqBatch, labels: &[usize]) -> f64 {
        let hits = batch
            .samples
            .iter()
            .zip(labels)
            .filter(|(s, l)| self.classify(**s) == **l)
            .count();
        hits as f64 / labels.len() as f64
    }
}

/// Fits an LDA classifier from one labelled batch per level (index = level).
pub fn fit_discriminator(labeled_batches: &[IqBatch]) -> Result<Discriminator> {
    if labeled_batches.len() < 2 {
        return Err(Error::InvalidInput("need at least two classes".into()));
    }
    if let Some(b) = labeled_batches.iter().find(|b| b.n_shots() < 10) {
        return Err(Error::InvalidInput(format!(
            "class with only {} samples, need 10",
            b.n_shots()
        )));
    }
    let means: Vec<[f64; 2]> = labeled_batches.iter().map(batch_mean).collect();
    let mut s = [[0.0; 2]; 2];
    let mut n_total = 0usize;
    for (b, mu) in labeled_batches.iter().zip(&means) {
        for x in &b.samples {
            let d = [x[0] - mu[0], x[1] - mu[1]];
            for r in 0..2 {
                for c in 0..2 {
                    s[r][c] += d[r] * d[c];
                }
            }
        }
        n_total += b.n_shots();
    }
    let dof = (n_total - labeled_batches.len()) as f64;
    for row in &mut s {
        for v in row.iter_mut() {
            *v /= dof;
        }
    }
    let trace = s[0][0] + s[1][1];
    let det = s[0][0] * s[1][1] - s[0][1] * s[1][0];
    if det <= 1e-12 * trace * trace || det <= 0.0 {
        let ridge = if trace > 0.0 { 1e-6 * trace } else { 1e-12 };
        s[0][0] += ridge;
        s[1][1] += ridge;
    }
    let det = s[0][0] * s[1][1] - s[0][1] * s[1][0];
    let inv = [
        [s[1][1] / det, -s[0][1] / det],
        [-s[1][0] / det, s[0][0] / det],
    ];
    let mut weights = Vec::with_capacity(means.len());
    let mut biases = Vec::with_capacity(means.len());
    for mu in &means {
        let w = [
            inv[0][0] * mu[0] + inv[0][1] * mu[1],
            inv[1][0] * mu[0] + inv[1][1] * mu[1],
        ];
        biases.push(-0.5 * (w[0] * mu[0] + w[1] * mu[1]));
        weights.push(w);
    }
    Ok(Discriminator { weights, biases })
}

/// Fraction of shots classified into each level. Component 2 is the leakage estimate.
pub fn estimate_populations(batch: &IqBatch, disc: &Discriminator) -> Vec<f64> {
    let mut counts = vec![0usize; disc.n_classes()];
    for s in &batch.samples {
        counts[disc.classify(*s)] += 1;
    }
    let n = batch.n_shots() as f64;
    counts.into_iter().map(|c| c as f64 / n).collect()
}

/// Expected average readout after the ideal target gate, with its spread.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReadoutTarget {
    pub mean: [f64; 2],
    pub sigma_t: f64,
}

impl ReadoutTarget {
    /// Same centre, spread scaled to the standard error of an `n`-shot mean.
    pub fn for_mean_of(&self, n: usize) -> Self {
        Self {
            mean: self.mean,
            sigma_t: (self.sigma_t / (n.max(1) as f64).sqrt()).max(SIGMA_T_FLOOR),
        }
    }
}

/// Applies the ideal `reference` gate to `|0>`, samples `n_shots` and returns
/// the batch mean with its per-shot spread (floored at [`SIGMA_T_FLOOR`]).
pub fn calibrate_target<R: Rng + ?Sized>(
    reference: &Unitary,
    model: &IqClusterModel,
    n_shots: usize,
    rng: &mut R,
) -> Result<ReadoutTarget> {
    let pops = reference.ground_populations();
    let sum: f64 = pops.iter().sum();
    let pops: Vec<f64> = pops.iter().map(|p| p / sum).collect();
    let batch = sample_readout(&pops, model, n_shots, rng)?;
    Ok(ReadoutTarget {
        mean: batch_mean(&batch),
        sigma_t: batch.spread().max(SIGMA_T_FLOOR),
    })
}

/// `I,Q,label` rows for labelled calibration shots.
pub fn labeled_csv(batches: &[IqBatch]) -> String {
    let mut out = String::from("I,Q,label\n");
    for (label, b) in batches.iter().enumerate() {
        for s in &b.samples {
            let _ = writeln!(out, "{},{},{label}", s[0], s[1]);
        }
    }
    out
}
