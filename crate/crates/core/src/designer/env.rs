use std::collections::HashMap;

use rand::Rng;

use super::{stream_rng, DesignerConfig, GateKind, SigmaTMode, STREAM_CALIBRATION};
use crate::error::{Error, Result};
use crate::pulse::ActionGrid;
use crate::readout::{
    batch_mean, calibrate_target, estimate_populations, fit_discriminator, sample_level,
    sample_readout, Discriminator, IqBatch, IqClusterModel, ReadoutTarget,
};
use crate::sim::{self, CMatrix, PwcWaveform, TransmonParams, Unitary};

/// One averaged readout: mean `(I, Q)` and the discriminated leakage.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Measurement {
    pub iq: [f64; 2],
    pub leak: f64,
}

/// Simulated device plus calibrated readout, as seen by the agents.
#[derive(Clone, Debug)]
pub struct GateEnv {
    /// Parameters the pulses are designed for (drive frequency, nominal qubit).
    pub nominal: TransmonParams,
    /// Parameters actually used to evolve the qubit.
    pub device: TransmonParams,
    pub model: IqClusterModel,
    pub gate: GateKind,
    pub discriminator: Discriminator,
    /// Target readout with `sigma_T` as used in the reward.
    pub target: ReadoutTarget,
    /// Per-shot calibration of the target.
    pub target_per_shot: ReadoutTarget,
    /// Measurement before any gate, the first x-state.
    pub initial: Measurement,
    pub n_shot: usize,
    pub tau: f64,
    pub grid_x: ActionGrid,
    pub grid_y: ActionGrid,
    n_seg_max: usize,
    leak_max: f64,
    level_means: Vec<[f64; 2]>,
    cache: HashMap<[u64; 2], CMatrix>,
}

impl GateEnv {
    /// Calibrates readout on the nominal device: fits the discriminator on
    /// labelled shots of each level, measures the target cluster after the
    /// ideal gate and takes one pre-gate measurement.
    pub fn calibrate(
        params: TransmonParams,
        model: IqClusterModel,
        gate: GateKind,
        config: &DesignerConfig,
    ) -> Result<Self> {
        params.validate()?;
        config.validate()?;
        if model.levels() != params.levels {
            return Err(Error::DimensionMismatch {
                expected: params.levels,
                got: model.levels(),
            });
        }
        let mut rng = stream_rng(config.seed, STREAM_CALIBRATION);
        let batches: Vec<IqBatch> = (0..params.levels)
            .map(|m| sample_level(&model, m, config.calibration_shots, &mut rng))
            .collect::<Result<_>>()?;
        let discriminator = fit_discriminator(&batches)?;
        let level_means = batches.iter().map(batch_mean).collect();
        let target_per_shot = calibrate_target(
            &gate.unitary(params.levels),
            &model,
            config.calibration_shots,
            &mut rng,
        )?;
        let target = match config.sigma_t_mode {
            SigmaTMode::PerShot => target_per_shot,
            SigmaTMode::MeanStdError => target_per_shot.for_mean_of(config.n_shot),
        };
        let mut env = Self {
            nominal: params,
            device: params,
            model,
            gate,
            discriminator,
            target,
            target_per_shot,
            initial: Measurement {
                iq: [0.0; 2],
                leak: 0.0,
            },
            n_shot: config.n_shot,
            tau: crate::sim::DEFAULT_TAU_NS,
            grid_x: ActionGrid::x_quadrature(),
            grid_y: ActionGrid::y_quadrature(),
            n_seg_max: config.n_seg_max,
            leak_max: config.leak_max,
            level_means,
            cache: HashMap::new(),
        };
        env.initial = env.measure(&Unitary::identity(params.levels), &mut rng)?;
        Ok(env)
    }

    /// Shifts the simulated qubit frequency by `delta` rad/ns while pulses keep
    /// the nominal drive frequency.
    pub fn with_drift(mut self, delta: f64) -> Self {
        self.device = self.nominal.drifted(delta);
        self.cache.clear();
        self
    }

    pub fn with_tau(mut self, tau: f64) -> Self {
        self.tau = tau;
        self.cache.clear();
        self
    }

    pub fn n_seg_max(&self) -> usize {
        self.n_seg_max
    }

    pub fn empty_waveform(&self) -> PwcWaveform {
        PwcWaveform::empty(self.tau, self.nominal.omega_d)
    }

    /// Propagator of the whole waveform on the device. Segment propagators
    /// are cached; the product is the same as [`sim::evolve`].
    pub fn evolve(&mut self, w: &PwcWaveform) -> Result<Unitary> {
        if w.is_empty() {
            return Ok(Unitary::identity(self.device.levels));
        }
        if w.tau() != self.tau {
            return sim::evolve(w, &self.device);
        }
        let d = self.device.levels;
        let mut u = CMatrix::identity(d, d);
        for &[ux, uy] in w.segments() {
            let key = [ux.to_bits(), uy.to_bits()];
            let p = match self.cache.get(&key) {
                Some(p) => p,
                None => {
                    let h = sim::segment_hamiltonian(&self.device, ux, uy)?;
                    let p = sim::segment_propagator(&h, self.tau).0;
                    self.cache.entry(key).or_insert(p)
                }
            };
            u = p * u;
        }
        Ok(Unitary(u))
    }

    /// Reads out `n_shot` shots of `U|0>`.
    pub fn measure<R: Rng + ?Sized>(&self, u: &Unitary, rng: &mut R) -> Result<Measurement> {
        let pops = normalized(u.ground_populations());
        let batch = sample_readout(&pops, &self.model, self.n_shot, rng)?;
        let est = estimate_populations(&batch, &self.discriminator);
        Ok(Measurement {
            iq: batch_mean(&batch),
            leak: est.get(2).copied().unwrap_or(0.0),
        })
    }

    /// Shift and scale for `(I, Q, k)`: I/Q centred between the calibrated
    /// `|0>` and `|1>` clusters, scaled by half their separation; `k` mapped onto `[-2, 2)`.
    pub fn x_standardization(&self) -> (Vec<f64>, Vec<f64>) {
        let (c0, c1) = (self.level_means[0], self.level_means[1]);
        let half = 0.5 * (c1[0] - c0[0]).hypot(c1[1] - c0[1]);
        let half = if half > 1e-9 { half } else { 1.0 };
        let n = self.n_seg_max as f64;
        (
            vec![0.5 * (c0[0] + c1[0]), 0.5 * (c0[1] + c1[1]), 0.5 * n],
            vec![half, half, 0.25 * n],
        )
    }

    /// Shift and scale for `(u^x, L[, k])`.
    pub fn y_standardization(&self, with_segment: bool) -> (Vec<f64>, Vec<f64>) {
        let mid = 0.5 * (self.grid_x.min() + self.grid_x.max());
        let half = 0.5 * (self.grid_x.max() - self.grid_x.min());
        let mut shift = vec![mid, 0.0];
        let mut scale = vec![half, self.leak_max];
        if with_segment {
            let n = self.n_seg_max as f64;
            shift.push(0.5 * n);
            scale.push(0.25 * n);
        }
        (shift, scale)
    }
}

pub(crate) fn normalized(p: Vec<f64>) -> Vec<f64> {
    let s: f64 = p.iter().sum();
    p.into_iter().map(|v| v / s).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::designer::stream_rng;

    fn env() -> GateEnv {
        GateEnv::calibrate(
            TransmonParams::default(),
            IqClusterModel::default_for(3),
            GateKind::X,
            &DesignerConfig::default(),
        )
        .unwrap()
    }

    #[test]
    fn cached_evolution_matches_simulator_bit_for_bit() {
        let mut e = env();
        let w = PwcWaveform::new(
            vec![[0.1, 0.02], [0.2, -0.05], [0.1, 0.02]],
            e.tau,
            e.nominal.omega_d,
        )
        .unwrap();
        let a = e.evolve(&w).unwrap();
        let b = sim::evolve(&w, &e.device).unwrap();
        assert_eq!(a.0, b.0);
        assert_eq!(e.evolve(&w).unwrap().0, b.0);
    }

    #[test]
    fn target_sits_on_excited_cluster() {
        let e = env();
        let c1 = e.model.centers[1];
        assert!((e.target.mean[0] - c1[0]).hypot(e.target.mean[1] - c1[1]) < 0.1);
        let expected = e.target_per_shot.sigma_t / (512f64).sqrt();
        assert!((e.target.sigma_t - expected).abs() < 1e-12);
        assert!((e.target_per_shot.sigma_t - 1.0).abs() < 0.05);
    }

    #[test]
    fn ground_measurement_has_no_leakage() {
        let e = env();
        let mut r = stream_rng(0, 99);
        let m = e.measure(&Unitary::identity(3), &mut r).unwrap();
        assert!(m.leak < 0.01);
        let c0 = e.model.centers[0];
        assert!((m.iq[0] - c0[0]).abs() < 0.3);
    }
}
