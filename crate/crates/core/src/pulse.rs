//! Analytic baseline pulses and their discretisation onto the agents' action grids.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::{self, PwcWaveform, StateVector, TransmonParams};

/// Grid spacing shared by both quadratures.
pub const GRID_STEP: f64 = 0.01;

/// Gaussian envelope with a derivative component on the second quadrature:
/// `cx = A (g(t) - g(0))`, `cy = gamma * d(cx)/dt`, with
/// `g(t) = exp(-(t - t_g/2)^2 / (2 sigma^2))`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DragParams {
    pub amplitude: f64,
    /// ns
    pub sigma: f64,
    /// ns
    pub gamma: f64,
    /// ns
    pub t_g: f64,
}

impl DragParams {
    /// Width `t_g / 4`, no derivative term.
    pub fn gaussian(amplitude: f64, t_g: f64) -> Self {
        Self {
            amplitude,
            sigma: t_g / 4.0,
            gamma: 0.0,
            t_g,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.amplitude >= 0.0) || !(self.sigma > 0.0) || !(self.t_g > 0.0) {
            return Err(Error::InvalidInput(format!(
                "invalid DRAG parameters {self:?}"
            )));
        }
        if !self.gamma.is_finite() {
            return Err(Error::NonFinite("DRAG gamma".into()));
        }
        Ok(())
    }

    fn gauss(&self, t: f64) -> f64 {
        let x = t - 0.5 * self.t_g;
        (-x * x / (2.0 * self.sigma * self.sigma)).exp()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let p: Self = serde_json::from_str(s)?;
        p.validate()?;
        Ok(p)
    }
}

/// Evaluates `(cx, cy)` at time `t` in `[0, t_g]`.
pub fn drag_envelope(p: &DragParams, t: f64) -> Result<(f64, f64)> {
    if !(0.0..=p.t_g).contains(&t) {
        return Err(Error::TimeOutOfRange { t, t_g: p.t_g });
    }
    let g = p.gauss(t);
    let cx = p.amplitude * (g - p.gauss(0.0));
    let dg = -(t - 0.5 * p.t_g) / (p.sigma * p.sigma) * g;
    let cy = p.gamma * p.amplitude * dg;
    Ok((cx, cy))
}

/// Sorted, uniformly spaced set of allowed amplitudes. Values are stored as
/// integer multiples of [`GRID_STEP`] so that `0.15` is exactly the literal `0.15`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActionGrid {
    lo_index: i64,
    values: Vec<f64>,
}

impl ActionGrid {
    /// Grid `lo_index*0.01 ..= hi_index*0.01`.
    pub fn from_indices(lo_index: i64, hi_index: i64) -> Result<Self> {
        if hi_index <= lo_index {
            return Err(Error::InvalidInput(format!(
                "empty grid {lo_index}..={hi_index}"
            )));
        }
        let values = (lo_index..=hi_index).map(|i| i as f64 / 100.0).collect();
        Ok(Self { lo_index, values })
    }

    /// `{0.00, 0.01, ..., 0.20}`
    pub fn x_quadrature() -> Self {
        Self::from_indices(0, 20).unwrap()
    }

    /// `{-0.10, -0.09, ..., 0.10}`
    pub fn y_quadrature() -> Self {
        Self::from_indices(-10, 10).unwrap()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.values[0]
    }

    pub fn max(&self) -> f64 {
        *self.values.last().unwrap()
    }

    pub fn value(&self, index: usize) -> f64 {
        self.values[index]
    }

    /// Index of the nearest grid value, ties resolved toward zero amplitude.
    /// Amplitudes further than half a step outside the grid are rejected.
    pub fn index_of(&self, amplitude: f64) -> Result<usize> {
        let half = 0.5 * GRID_STEP + 1e-12;
        if !amplitude.is_finite() || amplitude < self.min() - half || amplitude > self.max() + half
        {
            return Err(Error::OutOfGrid {
                amplitude,
                min: self.min(),
                max: self.max(),
            });
        }
        Ok(self.nearest(amplitude))
    }

    fn nearest(&self, amplitude: f64) -> usize {
        let pos = amplitude * 100.0 - self.lo_index as f64;
        let last = self.values.len() - 1;
        let lo = (pos.floor().max(0.0) as usize).min(last);
        let hi = (lo + 1).min(last);
        let d_lo = (amplitude - self.values[lo]).abs();
        let d_hi = (self.values[hi] - amplitude).abs();
        if (d_lo - d_hi).abs() <= 1e-9 {
            if self.values[lo].abs() <= self.values[hi].abs() {
                lo
            } else {
                hi
            }
        } else if d_lo < d_hi {
            lo
        } else {
            hi
        }
    }

    /// Nearest grid value, clamped to the grid ends. Returns `(index, clamped)`.
    pub fn quantize(&self, amplitude: f64) -> (usize, bool) {
        if amplitude < self.min() {
            (0, true)
        } else if amplitude > self.max() {
            (self.values.len() - 1, true)
        } else {
            (self.nearest(amplitude), false)
        }
    }
}

/// Nearest grid index. Alias of [`ActionGrid::index_of`].
pub fn grid_index(grid: &ActionGrid, amplitude: f64) -> Result<usize> {
    grid.index_of(amplitude)
}

/// A segment whose envelope value fell outside the grid and was clamped.
#[derive(Clone, Debug, PartialEq)]
pub struct ClampWarning {
    pub segment: usize,
    /// 0 for x, 1 for y.
    pub quadrature: usize,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Discretized {
    pub waveform: PwcWaveform,
    pub warnings: Vec<ClampWarning>,
}

/// Samples the DRAG envelope at segment midpoints and rounds each quadrature
/// to its grid (nearest value, ties toward zero, clamped at the ends).
pub fn discretize(
    p: &DragParams,
    n_seg: usize,
    grid_x: &ActionGrid,
    grid_y: &ActionGrid,
    omega_d: f64,
) -> Result<Discretized> {
    p.validate()?;
    if n_seg == 0 {
        return Err(Error::InvalidInput("need at least one segment".into()));
    }
    let tau = p.t_g / n_seg as f64;
    let mut waveform = PwcWaveform::empty(tau, omega_d);
    let mut warnings = Vec::new();
    for k in 0..n_seg {
        let (cx, cy) = drag_envelope(p, (k as f64 + 0.5) * tau)?;
        let mut seg = [0.0; 2];
        for (q, (grid, v)) in [(grid_x, cx), (grid_y, cy)].into_iter().enumerate() {
            let (i, clamped) = grid.quantize(v);
            if clamped {
                log::debug!("segment {k} quadrature {q}: {v} clamped to grid");
                warnings.push(ClampWarning {
                    segment: k,
                    quadrature: q,
                    value: v,
                });
            }
            seg[q] = grid.value(i);
        }
        waveform.push(seg[0], seg[1]);
    }
    Ok(Discretized { waveform, warnings })
}

/// Midpoint-sampled envelope without rounding (free-form baseline amplitudes).
pub fn sample_continuous(p: &DragParams, n_seg: usize, omega_d: f64) -> Result<PwcWaveform> {
    p.validate()?;
    if n_seg == 0 {
        return Err(Error::InvalidInput("need at least one segment".into()));
    }
    let tau = p.t_g / n_seg as f64;
    let mut w = PwcWaveform::empty(tau, omega_d);
    for k in 0..n_seg {
        let (cx, cy) = drag_envelope(p, (k as f64 + 0.5) * tau)?;
        w.push(cx, cy);
    }
    Ok(w)
}

/// Search ranges for [`calibrate_drag`]. Defaults: amplitude step 0.001, gamma step 0.01 ns.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DragSweep {
    pub amplitude_max: f64,
    pub amplitude_step: f64,
    /// Half-width of the joint amplitude window around the gamma = 0 optimum.
    pub amplitude_window: f64,
    pub gamma_max: f64,
    pub gamma_step: f64,
    /// Keep gamma at zero (plain Gaussian baseline).
    pub gaussian_only: bool,
}

impl Default for DragSweep {
    fn default() -> Self {
        Self {
            amplitude_max: 0.30,
            amplitude_step: 0.001,
            amplitude_window: 0.01,
            gamma_max: 2.0,
            gamma_step: 0.01,
            gaussian_only: false,
        }
    }
}

/// Result of a calibration sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DragCalibration {
    pub params: DragParams,
    pub fidelity: f64,
    pub leakage: f64,
    #[serde(skip)]
    pub waveform: Option<PwcWaveform>,
}

/// Calibrates amplitude and gamma on the discretised `n_seg` waveform.
///
/// Pass 1 sweeps the amplitude at gamma = 0. Pass 2 sweeps gamma over its full
/// range jointly with the amplitude inside a window around the pass-1 optimum.
/// The objective is the exact state fidelity; lower leakage breaks ties.
pub fn calibrate_drag(
    params: &TransmonParams,
    t_g: f64,
    n_seg: usize,
    target: &StateVector,
    sweep: &DragSweep,
) -> Result<DragCalibration> {
    let gx = ActionGrid::x_quadrature();
    let gy = ActionGrid::y_quadrature();
    let mut cache: HashMap<Vec<u64>, (f64, f64)> = HashMap::new();
    let mut score = |p: &DragParams| -> Result<(f64, f64, PwcWaveform)> {
        let w = discretize(p, n_seg, &gx, &gy, params.omega_d)?.waveform;
        let key: Vec<u64> = w.segments().iter().flatten().map(|v| v.to_bits()).collect();
        if let Some(&(f, l)) = cache.get(&key) {
            return Ok((f, l, w));
        }
        let u = sim::evolve(&w, params)?;
        let r = (sim::fidelity(&u, target), sim::leakage(&u));
        cache.insert(key, r);
        Ok((r.0, r.1, w))
    };
    let better =
        |a: (f64, f64), b: (f64, f64)| a.0 > b.0 + 1e-15 || (a.0 >= b.0 - 1e-15 && a.1 < b.1);

    let n_amp = (sweep.amplitude_max / sweep.amplitude_step).round() as i64;
    let mut best: Option<(f64, f64, DragParams, PwcWaveform)> = None;
    for i in 1..=n_amp {
        let p = DragParams::gaussian(i as f64 * sweep.amplitude_step, t_g);
        let (f, l, w) = score(&p)?;
        if best.as_ref().is_none_or(|b| better((f, l), (b.0, b.1))) {
            best = Some((f, l, p, w));
        }
    }
    let mut best = best.ok_or_else(|| Error::InvalidInput("empty amplitude sweep".into()))?;

    if !sweep.gaussian_only {
        let a0 = best.2.amplitude;
        let n_win = (sweep.amplitude_window / sweep.amplitude_step).round() as i64;
        let n_gamma = (sweep.gamma_max / sweep.gamma_step).round() as i64;
        for da in -n_win..=n_win {
            let amplitude = a0 + da as f64 * sweep.amplitude_step;
            if amplitude <= 0.0 {
                continue;
            }
            for ig in -n_gamma..=n_gamma {
                let p = DragParams {
                    gamma: ig as f64 * sweep.gamma_step,
                    ..DragParams::gaussian(amplitude, t_g)
                };
                let (f, l, w) = score(&p)?;
                if better((f, l), (best.0, best.1)) {
                    best = (f, l, p, w);
                }
            }
        }
    }
    Ok(DragCalibration {
        params: best.2,
        fidelity: best.0,
        leakage: best.1,
        waveform: Some(best.3),
    })
}
