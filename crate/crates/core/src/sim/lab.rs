use num_complex::Complex64;

use super::{
    drift_diagonal, quadrature_operators, segment_propagator, CMatrix, Hamiltonian, PwcWaveform,
    TransmonParams, Unitary,
};
use crate::error::{Error, Result};

/// Output of the lab-frame integrator.
#[derive(Clone, Debug)]
pub struct LabFrameResult {
    /// Propagator moved into the frame rotating at `omega_d`, comparable with [`super::evolve`].
    pub unitary: Unitary,
    /// True when `dt * omega_q > 0.1` rad, i.e. the carrier is under-resolved.
    pub under_resolved: bool,
}

/// Integrates the lab-frame Schrodinger equation with the full carrier,
/// `H(t) = omega_q n + (alpha/2) n(n-1) + s c(t) (a + a^dag)`,
/// `c(t) = ux cos(omega_d t) + uy sin(omega_d t)`, using a fourth-order
/// commutator-free Magnus step on every substep, then applies
/// `exp(i omega_d n t_g)` to land in the rotating frame. No RWA is made.
pub fn lab_frame_evolve(
    waveform: &PwcWaveform,
    params: &TransmonParams,
    substeps_per_segment: usize,
) -> Result<LabFrameResult> {
    params.validate()?;
    if waveform.is_empty() {
        return Err(Error::InvalidWaveform("waveform has no segments".into()));
    }
    if substeps_per_segment == 0 {
        return Err(Error::InvalidInput("need at least one substep".into()));
    }
    let d = params.levels;
    let h = waveform.tau() / substeps_per_segment as f64;
    let under_resolved = h * params.omega_q.abs() > 0.1;
    if under_resolved {
        log::warn!(
            "lab-frame substep {h} ns under-resolves the carrier (dt*omega_q = {:.3} rad)",
            h * params.omega_q
        );
    }

    let drift = drift_diagonal(params, 0.0);
    let (x_op, _) = quadrature_operators(d);
    let hamiltonian = |t: f64, ux: f64, uy: f64| -> CMatrix {
        let c = ux * (params.omega_d * t).cos() + uy * (params.omega_d * t).sin();
        let mut m = &x_op * Complex64::new(params.drive_scale * c, 0.0);
        for (n, e) in drift.iter().enumerate() {
            m[(n, n)] += Complex64::new(*e, 0.0);
        }
        m
    };

    // Gauss-Legendre nodes on [0, 1].
    let off = 3f64.sqrt() / 6.0;
    let (c1, c2) = (0.5 - off, 0.5 + off);
    let comm_coef = Complex64::new(0.0, 3f64.sqrt() / 12.0 * h * h);

    let mut u = CMatrix::identity(d, d);
    for (k, &[ux, uy]) in waveform.segments().iter().enumerate() {
        let t0 = k as f64 * waveform.tau();
        for s in 0..substeps_per_segment {
            let t = t0 + s as f64 * h;
            let h1 = hamiltonian(t + c1 * h, ux, uy);
            let h2 = hamiltonian(t + c2 * h, ux, uy);
            // Omega = -i h/2 (H1 + H2) - (sqrt3/12) h^2 [H2, H1]; exp(Omega) = exp(-i K)
            // with Hermitian K = h/2 (H1 + H2) - i (sqrt3/12) h^2 [H2, H1].
            let comm = &h2 * &h1 - &h1 * &h2;
            let k_eff = (&h1 + &h2) * Complex64::new(0.5 * h, 0.0) - comm * comm_coef;
            let step = segment_propagator(&Hamiltonian(k_eff), 1.0);
            u = step.0 * u;
        }
    }

    let t_g = waveform.gate_time();
    let mut frame = CMatrix::zeros(d, d);
    for n in 0..d {
        frame[(n, n)] = Complex64::from_polar(1.0, params.omega_d * n as f64 * t_g);
    }
    Ok(LabFrameResult {
        unitary: Unitary(frame * u),
        under_resolved,
    })
}
