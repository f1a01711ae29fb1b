//! Piecewise-constant simulation of a driven multi-level transmon.
//!
//! The main path works in the frame rotating at the drive frequency with the
//! rotating-wave approximation, where each segment Hamiltonian is constant and
//! its propagator is an exact matrix exponential. [`lab_frame_evolve`] keeps the
//! full carrier and serves as an independent check of that approximation.

mod lab;
mod waveform;

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use lab::{lab_frame_evolve, LabFrameResult};
pub use waveform::{PwcWaveform, DT_NS};

pub type CMatrix = DMatrix<Complex64>;

/// Default gate duration of a 20-segment pulse, ns.
pub const DEFAULT_GATE_TIME_NS: f64 = 35.6;
/// Default segment count.
pub const DEFAULT_SEGMENTS: usize = 20;
/// Default segment duration, ns (35.6 ns / 20 = 8 dt).
pub const DEFAULT_TAU_NS: f64 = DEFAULT_GATE_TIME_NS / DEFAULT_SEGMENTS as f64;

/// Rabi rate per unit amplitude such that a baseline-subtracted Gaussian of
/// peak parameter 0.147 and sigma t_g/4 over 35.6 ns is a pi rotation.
/// 16.475990553919015 ns is the area of `exp(-(t - t_g/2)^2 / 2 sigma^2) - baseline`.
pub const DEFAULT_DRIVE_SCALE: f64 = PI / (0.147 * 16.475_990_553_919_015);

/// Physical parameters of the driven transmon. Frequencies are angular, rad/ns.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransmonParams {
    pub omega_q: f64,
    pub alpha: f64,
    /// Number of simulated levels.
    pub levels: usize,
    pub drive_scale: f64,
    pub omega_d: f64,
}

impl Default for TransmonParams {
    fn default() -> Self {
        let omega_q = 2.0 * PI * 5.0;
        Self {
            omega_q,
            alpha: 2.0 * PI * -0.330,
            levels: 3,
            drive_scale: DEFAULT_DRIVE_SCALE,
            omega_d: omega_q,
        }
    }
}

impl TransmonParams {
    pub fn validate(&self) -> Result<()> {
        if self.levels < 3 {
            return Err(Error::InvalidParams(format!(
                "need at least 3 levels, got {}",
                self.levels
            )));
        }
        if !(self.alpha < 0.0) {
            return Err(Error::InvalidParams(format!(
                "anharmonicity must be negative, got {}",
                self.alpha
            )));
        }
        if !(self.drive_scale > 0.0) {
            return Err(Error::InvalidParams(format!(
                "drive scale must be positive, got {}",
                self.drive_scale
            )));
        }
        if !self.omega_q.is_finite() || !self.omega_d.is_finite() {
            return Err(Error::InvalidParams("non-finite frequency".into()));
        }
        Ok(())
    }

    pub fn detuning(&self) -> f64 {
        self.omega_q - self.omega_d
    }

    /// Copy with the qubit frequency shifted by `delta` rad/ns, the drive left
    /// where it was calibrated. Used to emulate slow hardware drift.
    pub fn drifted(&self, delta: f64) -> Self {
        Self {
            omega_q: self.omega_q + delta,
            ..self.clone()
        }
    }
}

/// Hermitian segment Hamiltonian, rad/ns.
#[derive(Clone, Debug, PartialEq)]
pub struct Hamiltonian(pub CMatrix);

impl Hamiltonian {
    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn hermiticity_error(&self) -> f64 {
        max_abs(&(&self.0 - self.0.adjoint()))
    }
}

/// Propagator of a closed system. Unitary to round-off.
#[derive(Clone, Debug, PartialEq)]
pub struct Unitary(pub CMatrix);

impl Unitary {
    pub fn identity(levels: usize) -> Self {
        Self(CMatrix::identity(levels, levels))
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn levels(&self) -> usize {
        self.0.nrows()
    }

    /// `max |U^dagger U - I|` over entries.
    pub fn unitarity_error(&self) -> f64 {
        let n = self.levels();
        max_abs(&(self.0.adjoint() * &self.0 - CMatrix::identity(n, n)))
    }

    /// Image of the ground state, `U|0>`.
    pub fn apply_to_ground(&self) -> StateVector {
        StateVector(self.0.column(0).into_owned())
    }

    /// Level populations `|<m|U|0>|^2`.
    pub fn ground_populations(&self) -> Vec<f64> {
        self.0.column(0).iter().map(|z| z.norm_sqr()).collect()
    }

    /// Ideal qubit gate embedded in `levels` levels, identity on the rest.
    pub fn embed_qubit_gate(gate: [[Complex64; 2]; 2], levels: usize) -> Self {
        let mut m = CMatrix::identity(levels, levels);
        for r in 0..2 {
            for c in 0..2 {
                m[(r, c)] = gate[r][c];
            }
        }
        Self(m)
    }

    pub fn ideal_x(levels: usize) -> Self {
        let o = Complex64::new(0.0, 0.0);
        let l = Complex64::new(1.0, 0.0);
        Self::embed_qubit_gate([[o, l], [l, o]], levels)
    }

    pub fn ideal_sx(levels: usize) -> Self {
        let c = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        let s = Complex64::new(0.0, -std::f64::consts::FRAC_1_SQRT_2);
        Self::embed_qubit_gate([[c, s], [s, c]], levels)
    }

    /// `other * self`: apply `self` first.
    pub fn then(&self, other: &Unitary) -> Unitary {
        Unitary(&other.0 * &self.0)
    }
}

/// Normalised pure state.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector(pub DVector<Complex64>);

impl StateVector {
    pub fn new(amplitudes: Vec<Complex64>) -> Result<Self> {
        let v = DVector::from_vec(amplitudes);
        let norm = v.norm();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidInput(format!(
                "state norm {norm} differs from 1"
            )));
        }
        Ok(Self(v))
    }

    pub fn basis(levels: usize, m: usize) -> Self {
        let mut v = DVector::zeros(levels);
        v[m] = Complex64::new(1.0, 0.0);
        Self(v)
    }

    /// `(|0> - i|1>)/sqrt(2)`, the image of `|0>` under sqrt(X).
    pub fn sx_target(levels: usize) -> Self {
        let mut v = DVector::zeros(levels);
        v[0] = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        v[1] = Complex64::new(0.0, -std::f64::consts::FRAC_1_SQRT_2);
        Self(v)
    }

    pub fn levels(&self) -> usize {
        self.0.len()
    }

    pub fn populations(&self) -> Vec<f64> {
        self.0.iter().map(|z| z.norm_sqr()).collect()
    }
}

fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Annihilation operator truncated to `levels` levels.
pub fn lowering(levels: usize) -> CMatrix {
    let mut a = CMatrix::zeros(levels, levels);
    for n in 1..levels {
        a[(n - 1, n)] = Complex64::new((n as f64).sqrt(), 0.0);
    }
    a
}

/// Drift part in the frame rotating at `omega_d`: `Delta n + (alpha/2) n(n-1)`.
pub(crate) fn drift_diagonal(params: &TransmonParams, frame_omega: f64) -> Vec<f64> {
    (0..params.levels)
        .map(|n| {
            let n = n as f64;
            (params.omega_q - frame_omega) * n + 0.5 * params.alpha * n * (n - 1.0)
        })
        .collect()
}

/// Drive operators `(a + a^dag, i(a^dag - a))` for the x and y quadratures;
/// on the qubit subspace they are `sigma_x` and `sigma_y`.
pub(crate) fn quadrature_operators(levels: usize) -> (CMatrix, CMatrix) {
    let a = lowering(levels);
    let ad = a.adjoint();
    let i = Complex64::new(0.0, 1.0);
    let x = &a + &ad;
    let y = (&ad - &a) * i;
    (x, y)
}

/// Rotating-frame RWA Hamiltonian of one segment:
/// `H = Delta n + (alpha/2) a^dag a^dag a a + (s/2) (ux X_d + uy Y_d)`
/// with `X_d = a + a^dag` and `Y_d = i(a^dag - a)`, so a positive `ux`
/// rotates `|0>` toward `-i|1>`.
pub fn segment_hamiltonian(params: &TransmonParams, ux: f64, uy: f64) -> Result<Hamiltonian> {
    params.validate()?;
    Ok(segment_hamiltonian_unchecked(params, ux, uy))
}

fn segment_hamiltonian_unchecked(params: &TransmonParams, ux: f64, uy: f64) -> Hamiltonian {
    let d = params.levels;
    let (x, y) = quadrature_operators(d);
    let half = 0.5 * params.drive_scale;
    let mut h = x * Complex64::new(half * ux, 0.0) + y * Complex64::new(half * uy, 0.0);
    for (n, e) in drift_diagonal(params, params.omega_d)
        .into_iter()
        .enumerate()
    {
        h[(n, n)] += Complex64::new(e, 0.0);
    }
    Hamiltonian(h)
}

/// `exp(-i H tau)` by eigendecomposition of the Hermitian `H`.
pub fn segment_propagator(h: &Hamiltonian, tau: f64) -> Unitary {
    let eig = SymmetricEigen::new(h.0.clone());
    let v = &eig.eigenvectors;
    let phases = eig
        .eigenvalues
        .map(|e| Complex64::from_polar(1.0, -e * tau));
    let mut scaled = v.clone();
    for (c, p) in phases.iter().enumerate() {
        for r in 0..scaled.nrows() {
            scaled[(r, c)] *= *p;
        }
    }
    Unitary(scaled * v.adjoint())
}

/// Ordered product of segment propagators, last segment leftmost.
pub fn evolve(waveform: &PwcWaveform, params: &TransmonParams) -> Result<Unitary> {
    params.validate()?;
    if waveform.is_empty() {
        return Err(Error::InvalidWaveform("waveform has no segments".into()));
    }
    let mut u = CMatrix::identity(params.levels, params.levels);
    for &[ux, uy] in waveform.segments() {
        let p = segment_propagator(
            &segment_hamiltonian_unchecked(params, ux, uy),
            waveform.tau(),
        );
        u = p.0 * u;
    }
    Ok(Unitary(u))
}

/// Propagators of every prefix: element `k` equals `evolve` of the first `k + 1`
/// segments, bit for bit.
pub fn evolve_prefixes(waveform: &PwcWaveform, params: &TransmonParams) -> Result<Vec<Unitary>> {
    params.validate()?;
    let mut out = Vec::with_capacity(waveform.len());
    let mut u = CMatrix::identity(params.levels, params.levels);
    for &[ux, uy] in waveform.segments() {
        let p = segment_propagator(
            &segment_hamiltonian_unchecked(params, ux, uy),
            waveform.tau(),
        );
        u = p.0 * u;
        out.push(Unitary(u.clone()));
    }
    Ok(out)
}

/// State fidelity `|<psi_T|U|0>|^2`.
pub fn fidelity(u: &Unitary, target: &StateVector) -> f64 {
    let overlap = target.0.dotc(&u.0.column(0));
    overlap.norm_sqr().clamp(0.0, 1.0)
}

/// Which levels count as leaked.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LeakageMode {
    /// `|<2|U|0>|^2` only.
    #[default]
    SecondLevel,
    /// Sum over every level `m >= 2`.
    AllNonComputational,
}

/// Leakage population `|<2|U|0>|^2`.
pub fn leakage(u: &Unitary) -> f64 {
    leakage_with(u, LeakageMode::SecondLevel)
}

pub fn leakage_with(u: &Unitary, mode: LeakageMode) -> f64 {
    let col = u.0.column(0);
    let l: f64 = match mode {
        LeakageMode::SecondLevel => col[2].norm_sqr(),
        LeakageMode::AllNonComputational => col.iter().skip(2).map(|z| z.norm_sqr()).sum(),
    };
    l.clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn rejects_two_level_model() {
        let p = TransmonParams {
            levels: 2,
            ..Default::default()
        };
        assert!(matches!(
            segment_hamiltonian(&p, 0.0, 0.0),
            Err(Error::InvalidParams(_))
        ));
    }

    #[test]
    fn undriven_hamiltonian_is_anharmonic_term() {
        let p = TransmonParams {
            levels: 4,
            ..Default::default()
        };
        let h = segment_hamiltonian(&p, 0.0, 0.0).unwrap();
        for r in 0..4usize {
            for col in 0..4 {
                let expected = if r == col {
                    0.5 * p.alpha * (r * r.saturating_sub(1)) as f64
                } else {
                    0.0
                };
                assert_relative_eq!(h.0[(r, col)].re, expected, epsilon = 1e-14);
                assert_eq!(h.0[(r, col)].im, 0.0);
            }
        }
    }

    #[test]
    fn drive_matrix_elements_follow_ladder_operators() {
        let p = TransmonParams::default();
        let h = segment_hamiltonian(&p, 0.1, 0.0).unwrap();
        assert_relative_eq!(
            h.0[(0, 1)].norm(),
            p.drive_scale * 0.1 / 2.0,
            epsilon = 1e-15
        );
        assert_relative_eq!(
            h.0[(1, 2)].norm(),
            2f64.sqrt() * p.drive_scale * 0.1 / 2.0,
            epsilon = 1e-15
        );
        assert_eq!(h.0[(0, 2)].norm(), 0.0);
        assert!(h.hermiticity_error() == 0.0);
    }

    #[test]
    fn zero_hamiltonian_gives_identity() {
        let h = Hamiltonian(CMatrix::zeros(3, 3));
        let u = segment_propagator(&h, 1.78);
        assert!(max_abs(&(u.0 - CMatrix::identity(3, 3))) < 1e-15);
    }

    #[test]
    fn fidelity_of_ideal_gates() {
        let x = Unitary::ideal_x(3);
        assert_relative_eq!(
            fidelity(&x, &StateVector::basis(3, 1)),
            1.0,
            epsilon = 1e-15
        );
        assert_eq!(
            fidelity(&Unitary::identity(3), &StateVector::basis(3, 1)),
            0.0
        );
        let sx = Unitary::ideal_sx(3);
        assert_relative_eq!(
            fidelity(&sx, &StateVector::sx_target(3)),
            1.0,
            epsilon = 1e-15
        );
    }

    #[test]
    fn leakage_of_identity_and_swap() {
        assert_eq!(leakage(&Unitary::identity(3)), 0.0);
        let mut swap = CMatrix::identity(3, 3);
        swap[(0, 0)] = c(0.0, 0.0);
        swap[(2, 2)] = c(0.0, 0.0);
        swap[(0, 2)] = c(1.0, 0.0);
        swap[(2, 0)] = c(1.0, 0.0);
        assert_eq!(leakage(&Unitary(swap)), 1.0);
    }

    #[test]
    fn leakage_mode_sums_higher_levels() {
        let p = TransmonParams {
            levels: 5,
            ..Default::default()
        };
        let w = PwcWaveform::new(vec![[0.2, 0.1]; 20], 1.78, p.omega_d).unwrap();
        let u = evolve(&w, &p).unwrap();
        let pops = u.ground_populations();
        assert_eq!(leakage(&u), pops[2]);
        assert_relative_eq!(
            leakage_with(&u, LeakageMode::AllNonComputational),
            pops[2] + pops[3] + pops[4],
            epsilon = 1e-15
        );
    }

    #[test]
    fn empty_waveform_is_rejected() {
        let w = PwcWaveform::empty(1.78, 1.0);
        assert!(evolve(&w, &TransmonParams::default()).is_err());
    }

    #[test]
    fn zero_drive_leaves_ground_state() {
        let p = TransmonParams::default();
        let w = PwcWaveform::new(vec![[0.0, 0.0]; 20], 1.78, p.omega_d).unwrap();
        let u = evolve(&w, &p).unwrap();
        assert_relative_eq!(u.0[(0, 0)].norm(), 1.0, epsilon = 1e-14);
        assert_eq!(leakage(&u), 0.0);
        for r in 0..3 {
            for col in 0..3 {
                if r != col {
                    assert_eq!(u.0[(r, col)].norm(), 0.0);
                }
            }
        }
    }

    #[test]
    fn prefixes_match_evolve_bitwise() {
        let p = TransmonParams::default();
        let w = PwcWaveform::new(
            (0..7)
                .map(|k| [0.02 * k as f64, 0.01 * (k as f64 - 3.0)])
                .collect(),
            1.78,
            p.omega_d,
        )
        .unwrap();
        let prefixes = evolve_prefixes(&w, &p).unwrap();
        for (k, u) in prefixes.iter().enumerate() {
            assert_eq!(u, &evolve(&w.prefix(k + 1), &p).unwrap());
        }
    }
}
