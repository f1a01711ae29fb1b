use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::env::normalized;
use super::{GateEnv, GateKind};
use crate::error::Result;
use crate::readout::{estimate_populations, sample_readout};
use crate::sim::{self, PwcWaveform};

/// Exact and shot-estimated quality of one waveform.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GateReport {
    pub waveform: PwcWaveform,
    pub fidelity: f64,
    pub leakage: f64,
    /// Classical fidelity `(sum_i sqrt(p_i q_i))^2` of discriminated vs. ideal populations.
    pub fidelity_est: f64,
    pub leakage_est: f64,
    pub n_segments: usize,
    pub gate_time_ns: f64,
}

/// Exact fidelity/leakage from the unitary plus estimates from `n_shots` readouts.
pub fn evaluate<R: Rng + ?Sized>(
    waveform: &PwcWaveform,
    env: &mut GateEnv,
    gate: GateKind,
    n_shots: usize,
    rng: &mut R,
) -> Result<GateReport> {
    let levels = env.device.levels;
    let u = if waveform.is_empty() {
        sim::Unitary::identity(levels)
    } else {
        env.evolve(waveform)?
    };
    let target = gate.target_state(levels);
    let ideal = target.populations();
    let batch = sample_readout(
        &normalized(u.ground_populations()),
        &env.model,
        n_shots,
        rng,
    )?;
    let est = estimate_populations(&batch, &env.discriminator);
    let overlap: f64 = est.iter().zip(&ideal).map(|(p, q)| (p * q).sqrt()).sum();
    Ok(GateReport {
        waveform: waveform.clone(),
        fidelity: sim::fidelity(&u, &target).clamp(0.0, 1.0),
        leakage: sim::leakage(&u).clamp(0.0, 1.0),
        fidelity_est: (overlap * overlap).clamp(0.0, 1.0),
        leakage_est: est.get(2).copied().unwrap_or(0.0),
        n_segments: waveform.len(),
        gate_time_ns: waveform.gate_time(),
    })
}

/// Pulse family of a benchmark row.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Drag,
    Gaussian,
    Rl,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Drag => "drag",
            Variant::Gaussian => "gaussian",
            Variant::Rl => "rl",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub gate: GateKind,
    pub variant: Variant,
    pub report: GateReport,
}

impl BenchRow {
    pub const CSV_HEADER: &'static str =
        "gate,variant,n_seg,t_g_ns,fidelity_exact,fidelity_est,leakage_exact,leakage_est";

    pub fn csv_line(&self) -> String {
        let r = &self.report;
        format!(
            "{},{},{},{:.1},{},{},{},{}",
            self.gate,
            self.variant,
            r.n_segments,
            r.gate_time_ns,
            r.fidelity,
            r.fidelity_est,
            r.leakage,
            r.leakage_est
        )
    }
}

/// Reports for the DRAG reference, an optional plain-Gaussian control and the
/// RL gates, all on one gate's environment.
pub fn benchmark_gate<R: Rng + ?Sized>(
    env: &mut GateEnv,
    drag: &PwcWaveform,
    gaussian: Option<&PwcWaveform>,
    rl: &[PwcWaveform],
    n_shots: usize,
    rng: &mut R,
) -> Result<Vec<BenchRow>> {
    let gate = env.gate;
    let mut rows = Vec::with_capacity(rl.len() + 2);
    let mut push = |variant, w: &PwcWaveform, env: &mut GateEnv, rng: &mut R| -> Result<()> {
        rows.push(BenchRow {
            gate,
            variant,
            report: evaluate(w, env, gate, n_shots, rng)?,
        });
        Ok(())
    };
    push(Variant::Drag, drag, env, rng)?;
    if let Some(g) = gaussian {
        push(Variant::Gaussian, g, env, rng)?;
    }
    for w in rl {
        push(Variant::Rl, w, env, rng)?;
    }
    Ok(rows)
}
