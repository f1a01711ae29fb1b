use std::f64::consts::PI;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Waveform generator sample period, ns.
pub const DT_NS: f64 = 0.222222;

/// Piecewise-constant two-quadrature control pulse.
///
/// Segment `k` holds `(ux, uy)` for `k*tau <= t < (k+1)*tau`; the drive is
/// `ux cos(omega_d t) + uy sin(omega_d t)` in the lab frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "WaveformFile", into = "WaveformFile")]
pub struct PwcWaveform {
    segments: Vec<[f64; 2]>,
    tau: f64,
    /// Drive frequency in GHz (ordinary, not angular), as stored on disk.
    drive_ghz: f64,
}

/// On-disk layout: `{"tau_ns", "omega_d_ghz", "segments": [[ux, uy], ...]}`,
/// with the drive given as an ordinary frequency in GHz.
#[derive(Serialize, Deserialize)]
struct WaveformFile {
    tau_ns: f64,
    omega_d_ghz: f64,
    segments: Vec<[f64; 2]>,
}

impl TryFrom<WaveformFile> for PwcWaveform {
    type Error = Error;

    fn try_from(f: WaveformFile) -> Result<Self> {
        let mut w = PwcWaveform::new(f.segments, f.tau_ns, 0.0)?;
        if !f.omega_d_ghz.is_finite() {
            return Err(Error::InvalidWaveform("non-finite drive frequency".into()));
        }
        w.drive_ghz = f.omega_d_ghz;
        Ok(w)
    }
}

impl From<PwcWaveform> for WaveformFile {
    fn from(w: PwcWaveform) -> Self {
        WaveformFile {
            tau_ns: w.tau,
            omega_d_ghz: w.drive_ghz,
            segments: w.segments,
        }
    }
}

impl PwcWaveform {
    pub fn new(segments: Vec<[f64; 2]>, tau: f64, omega_d: f64) -> Result<Self> {
        if !(tau > 0.0) || !tau.is_finite() {
            return Err(Error::InvalidWaveform(format!("segment duration {tau} ns")));
        }
        if !omega_d.is_finite() {
            return Err(Error::InvalidWaveform("non-finite drive frequency".into()));
        }
        if segments.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidWaveform("non-finite amplitude".into()));
        }
        Ok(Self {
            segments,
            tau,
            drive_ghz: omega_d / (2.0 * PI),
        })
    }

    pub fn empty(tau: f64, omega_d: f64) -> Self {
        Self {
            segments: Vec::new(),
            tau,
            drive_ghz: omega_d / (2.0 * PI),
        }
    }

    pub fn segments(&self) -> &[[f64; 2]] {
        &self.segments
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// Drive angular frequency, rad/ns.
    pub fn omega_d(&self) -> f64 {
        self.drive_ghz * 2.0 * PI
    }

    pub fn gate_time(&self) -> f64 {
        self.tau * self.segments.len() as f64
    }

    pub fn push(&mut self, ux: f64, uy: f64) {
        self.segments.push([ux, uy]);
    }

    /// First `n` segments.
    pub fn prefix(&self, n: usize) -> Self {
        Self {
            segments: self.segments[..n.min(self.segments.len())].to_vec(),
            tau: self.tau,
            drive_ghz: self.drive_ghz,
        }
    }

    /// `self` followed by `other`. Segment durations must agree.
    pub fn concat(&self, other: &PwcWaveform) -> Result<Self> {
        if self.tau != other.tau || self.drive_ghz != other.drive_ghz {
            return Err(Error::InvalidWaveform(
                "cannot join waveforms with different timing".into(),
            ));
        }
        let mut segments = self.segments.clone();
        segments.extend_from_slice(&other.segments);
        Ok(Self {
            segments,
            ..self.clone()
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    /// Samples per segment on the `dt` grid (8 for the default 1.78 ns segment).
    pub fn ticks_per_segment(&self) -> usize {
        ((self.tau / DT_NS).round() as usize).max(1)
    }

    /// One row per `dt` tick: `tick,t_ns,ux,uy`.
    pub fn to_csv(&self) -> String {
        let per = self.ticks_per_segment();
        let mut out = String::from("tick,t_ns,ux,uy\n");
        for (k, [ux, uy]) in self.segments.iter().enumerate() {
            for j in 0..per {
                let tick = k * per + j;
                let _ = writeln!(out, "{tick},{:.6},{ux},{uy}", tick as f64 * DT_NS);
            }
        }
        out
    }
}
