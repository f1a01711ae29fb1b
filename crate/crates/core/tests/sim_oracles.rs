use std::f64::consts::PI;

use fastgate::pulse::{calibrate_drag, DragSweep};
use fastgate::sim::{
    evolve, fidelity, lab_frame_evolve, leakage, CMatrix, PwcWaveform, StateVector, TransmonParams,
    Unitary, DEFAULT_GATE_TIME_NS, DEFAULT_TAU_NS,
};
use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Rotating-frame Hamiltonian written out element by element.
fn reference_hamiltonian(p: &TransmonParams, ux: f64, uy: f64) -> DMatrix<Complex64> {
    let d = p.levels;
    let delta = p.omega_q - p.omega_d;
    let mut h = DMatrix::from_element(d, d, c(0.0, 0.0));
    for n in 0..d {
        let nf = n as f64;
        h[(n, n)] = c(delta * nf + 0.5 * p.alpha * nf * (nf - 1.0), 0.0);
    }
    let half = 0.5 * p.drive_scale;
    for n in 0..d - 1 {
        let root = ((n + 1) as f64).sqrt();
        // <n+1| (ux (a + a^dag) + uy i(a^dag - a)) |n>
        let up = c(ux, uy) * root * half;
        h[(n + 1, n)] = up;
        h[(n, n + 1)] = up.conj();
    }
    h
}

/// Classical RK4 on `dU/dt = -i H U`.
fn rk4_evolve(w: &PwcWaveform, p: &TransmonParams, substeps: usize) -> DMatrix<Complex64> {
    let d = p.levels;
    let mut u = DMatrix::<Complex64>::identity(d, d);
    let dt = w.tau() / substeps as f64;
    let mi = c(0.0, -1.0);
    for &[ux, uy] in w.segments() {
        let a = reference_hamiltonian(p, ux, uy) * mi;
        for _ in 0..substeps {
            let k1 = &a * &u;
            let k2 = &a * (&u + &k1 * c(0.5 * dt, 0.0));
            let k3 = &a * (&u + &k2 * c(0.5 * dt, 0.0));
            let k4 = &a * (&u + &k3 * c(dt, 0.0));
            u += (k1 + k2 * c(2.0, 0.0) + k3 * c(2.0, 0.0) + k4) * c(dt / 6.0, 0.0);
        }
    }
    u
}

fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn drag_x() -> (TransmonParams, PwcWaveform) {
    let params = TransmonParams::default();
    let target = StateVector::basis(3, 1);
    let cal = calibrate_drag(
        &params,
        DEFAULT_GATE_TIME_NS,
        20,
        &target,
        &DragSweep::default(),
    )
    .unwrap();
    (params, cal.waveform.unwrap())
}

#[test]
fn propagator_matches_rk4_reference() {
    let p = TransmonParams::default();
    let w = PwcWaveform::new(
        vec![[0.05, 0.01], [0.2, -0.1], [0.13, 0.07], [0.0, 0.0]],
        DEFAULT_TAU_NS,
        p.omega_d,
    )
    .unwrap();
    let u = evolve(&w, &p).unwrap();
    let r = rk4_evolve(&w, &p, 10_000);
    assert!(max_abs(&(u.0 - r)) < 1e-9);
}

#[test]
fn half_rotation_reaches_sx_target() {
    let p = TransmonParams {
        alpha: -2.0 * PI * 200.0,
        ..TransmonParams::default()
    };
    // theta = s * u * t = pi / 2
    let amp = 0.5 * PI / (p.drive_scale * 12.0 * DEFAULT_TAU_NS);
    let w = PwcWaveform::new(vec![[amp, 0.0]; 12], DEFAULT_TAU_NS, p.omega_d).unwrap();
    let u = evolve(&w, &p).unwrap();
    assert!(fidelity(&u, &StateVector::sx_target(3)) > 1.0 - 1e-4);
}

#[test]
fn detuned_propagator_matches_rk4_reference() {
    let p = TransmonParams::default().drifted(2.0 * PI * 0.01);
    let w = PwcWaveform::new(vec![[0.1, 0.03], [0.17, -0.02]], DEFAULT_TAU_NS, p.omega_d).unwrap();
    let u = evolve(&w, &p).unwrap();
    let r = rk4_evolve(&w, &p, 10_000);
    assert!(max_abs(&(u.0 - r)) < 1e-9);
}

#[test]
fn weak_rabi_drive_follows_two_level_formula() {
    // A very large anharmonicity isolates the qubit subspace.
    let p = TransmonParams {
        alpha: -2.0 * PI * 200.0,
        ..TransmonParams::default()
    };
    let amp = 0.05;
    let w = PwcWaveform::new(vec![[amp, 0.0]; 12], DEFAULT_TAU_NS, p.omega_d).unwrap();
    let u = evolve(&w, &p).unwrap();
    let theta = p.drive_scale * amp * w.gate_time();
    let expected = (0.5 * theta).sin().powi(2);
    let got = fidelity(&u, &StateVector::basis(3, 1));
    assert!((got - expected).abs() < 1e-4, "{got} vs {expected}");
}

#[test]
fn drag_x_agrees_with_lab_frame_oracle() {
    let (p, w) = drag_x();
    let rot = evolve(&w, &p).unwrap();
    let lab = lab_frame_evolve(&w, &p, 2000).unwrap();
    assert!(!lab.under_resolved);
    let target = StateVector::basis(3, 1);
    let diff = (fidelity(&rot, &target) - fidelity(&lab.unitary, &target)).abs();
    assert!(diff < 1e-3, "fidelity discrepancy {diff}");
    assert!(lab.unitary.unitarity_error() < 1e-10);
}

#[test]
fn lab_frame_oracle_self_converges() {
    let (p, w) = drag_x();
    let coarse = lab_frame_evolve(&w, &p, 1000).unwrap().unitary;
    let fine = lab_frame_evolve(&w, &p, 2000).unwrap().unitary;
    assert!(max_abs(&(coarse.0 - fine.0)) < 1e-6);
}

#[test]
fn under_resolved_lab_frame_is_flagged() {
    let (p, w) = drag_x();
    assert!(lab_frame_evolve(&w, &p, 10).unwrap().under_resolved);
}

#[test]
fn calibrated_drag_has_low_leakage() {
    let (p, w) = drag_x();
    let u = evolve(&w, &p).unwrap();
    assert!(fidelity(&u, &StateVector::basis(3, 1)) >= 0.999);
    assert!(leakage(&u) <= 1e-3);
}

fn segments(max_len: usize) -> impl Strategy<Value = Vec<[f64; 2]>> {
    prop::collection::vec(
        (0.0f64..0.2, -0.1f64..0.1).prop_map(|(x, y)| [x, y]),
        1..max_len,
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn evolution_is_unitary(segs in segments(25), levels in 3usize..6) {
        let p = TransmonParams { levels, ..TransmonParams::default() };
        let w = PwcWaveform::new(segs, DEFAULT_TAU_NS, p.omega_d).unwrap();
        let u = evolve(&w, &p).unwrap();
        prop_assert!(u.unitarity_error() < 1e-10);
        let total: f64 = u.ground_populations().iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-10);
    }

    #[test]
    fn evolution_composes(a in segments(10), b in segments(10)) {
        let p = TransmonParams::default();
        let wa = PwcWaveform::new(a, DEFAULT_TAU_NS, p.omega_d).unwrap();
        let wb = PwcWaveform::new(b, DEFAULT_TAU_NS, p.omega_d).unwrap();
        let whole = evolve(&wa.concat(&wb).unwrap(), &p).unwrap();
        let parts: Unitary = evolve(&wa, &p).unwrap().then(&evolve(&wb, &p).unwrap());
        prop_assert!(max_abs(&(whole.0 - parts.0)) < 1e-10);
    }

    #[test]
    fn fidelity_and_leakage_are_probabilities(segs in segments(25)) {
        let p = TransmonParams::default();
        let w = PwcWaveform::new(segs, DEFAULT_TAU_NS, p.omega_d).unwrap();
        let u = evolve(&w, &p).unwrap();
        let f = fidelity(&u, &StateVector::basis(3, 1));
        let l = leakage(&u);
        prop_assert!((0.0..=1.0).contains(&f) && (0.0..=1.0).contains(&l));
        prop_assert!(f + l <= 1.0 + 1e-12);
    }
}
