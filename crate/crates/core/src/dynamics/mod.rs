//! Time evolution of the driven device.
//!
//! A trajectory is computed piecewise. The pulsed window `[0, t_R]` is
//! integrated with adaptive Dormand-Prince stepping; after `t_R` the
//! Hamiltonian `H_lin + H_kerr` is time-independent and the state is
//! propagated exactly to each snapshot time. At `t_R` and at every snapshot
//! the full state is rotated by `exp(+i H_lin t)` into the interaction
//! picture and only then is the qubit traced out, because `H_lin` couples the
//! qubit to the resonators.

pub mod dopri;
pub mod krylov;
pub mod spectral;

use std::sync::Arc;

use faer::Mat;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{vacuum, HermitianEntries, ModeLayout, StateVector};
use crate::model::{DeviceHamiltonian, DeviceParams, DriveSchedule, StaticHamiltonian};
use crate::qinfo::{traced_first_factor, DensityMatrix};

pub use dopri::IntegrationStats;
pub use krylov::KrylovOptions;
pub use spectral::BlockSpectral;

const KRYLOV_MAX_DIM: usize = 40;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PropagatorConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Largest excitation-sector block diagonalized densely; larger
    /// operators fall back to Krylov propagation.
    pub dense_spectral_max_dim: usize,
    /// First trial step in us. Defaults to the narrowest pulse width / 50.
    pub initial_step: Option<f64>,
}

impl Default for PropagatorConfig {
    fn default() -> Self {
        Self { rel_tol: 1e-8, abs_tol: 1e-10, dense_spectral_max_dim: 4096, initial_step: None }
    }
}

impl PropagatorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return Err(Error::InvalidParameter("tolerances must be positive".into()));
        }
        if let Some(h) = self.initial_step {
            if !(h > 0.0) {
                return Err(Error::InvalidParameter(format!("initial step must be positive, got {h}")));
            }
        }
        Ok(())
    }

    fn step_control(&self, schedule: &DriveSchedule) -> dopri::StepControl {
        let narrowest = schedule.pulses.iter().map(|p| p.width).fold(f64::INFINITY, f64::min);
        let initial_step = self.initial_step.unwrap_or(if narrowest.is_finite() { narrowest / 50.0 } else { 1e-3 });
        dopri::StepControl { rel_tol: self.rel_tol, abs_tol: self.abs_tol, initial_step }
    }

    fn krylov(&self) -> KrylovOptions {
        KrylovOptions { max_dim: KRYLOV_MAX_DIM, tol: self.abs_tol }
    }
}

/// Propagator for a fixed Hermitian operator.
#[derive(Clone, Debug)]
pub enum StaticPropagator {
    Spectral(BlockSpectral),
    Krylov { hamiltonian: Arc<StaticHamiltonian>, options: KrylovOptions },
}

impl StaticPropagator {
    /// Picks the dense spectral route when every excitation sector fits
    /// within `config.dense_spectral_max_dim`.
    pub fn new(h: Arc<StaticHamiltonian>, config: &PropagatorConfig) -> Result<Self> {
        let largest = spectral::connected_blocks(h.as_ref()).iter().map(Vec::len).max().unwrap_or(0);
        if largest <= config.dense_spectral_max_dim {
            Ok(Self::Spectral(BlockSpectral::new(h.as_ref())?))
        } else {
            Ok(Self::Krylov { hamiltonian: h, options: config.krylov() })
        }
    }

    pub fn is_spectral(&self) -> bool {
        matches!(self, Self::Spectral(_))
    }

    /// `exp(-i H t) psi`; negative `t` runs backwards.
    pub fn evolve(&self, psi: &[C64], t: f64) -> Result<Vec<C64>> {
        match self {
            Self::Spectral(s) => Ok(s.evolve(psi, t)),
            Self::Krylov { hamiltonian, options } => krylov::expm_action(hamiltonian.as_ref(), psi, t, *options),
        }
    }
}

/// Interaction-picture reduced resonator states of one trajectory.
#[derive(Clone, Debug)]
pub struct TrajectoryResult {
    pub reference_time: f64,
    pub reference_state: Arc<DensityMatrix>,
    /// One entry per requested measurement time, in request order.
    /// Repeated times share the same matrix.
    pub snapshots: Vec<(f64, Arc<DensityMatrix>)>,
    /// `| |psi(t_R)| - 1 |` after the adaptive segment.
    pub norm_drift: f64,
    pub stats: IntegrationStats,
}

/// Adaptive integration of `i d psi/dt = H(t) psi` from `t0` to `t1`.
/// The state is not renormalized.
pub fn integrate_tdse(
    psi0: &StateVector,
    device: &DeviceParams,
    schedule: &DriveSchedule,
    t0: f64,
    t1: f64,
    config: &PropagatorConfig,
) -> Result<StateVector> {
    let h = DeviceHamiltonian::new(device, schedule)?;
    integrate_with(&h, psi0, t0, t1, config).map(|(s, _)| s)
}

fn integrate_with(
    h: &DeviceHamiltonian,
    psi0: &StateVector,
    t0: f64,
    t1: f64,
    config: &PropagatorConfig,
) -> Result<(StateVector, IntegrationStats)> {
    config.validate()?;
    if !(t1 > t0) {
        return Err(Error::InvalidParameter(format!("integration window [{t0}, {t1}] is empty")));
    }
    if psi0.amplitudes().len() != h.dim() {
        return Err(Error::InvalidDimension("initial state does not match the device layout".into()));
    }
    let mut y = psi0.amplitudes().to_vec();
    let minus_i = C64::new(0.0, -1.0);
    let stats = dopri::integrate(
        |t, psi, out| {
            h.apply(t, psi, out);
            out.iter_mut().for_each(|o| *o *= minus_i);
        },
        &mut y,
        t0,
        t1,
        config.step_control(h.schedule()),
    )?;
    Ok((StateVector::new(psi0.layout().clone(), y)?, stats))
}

/// `exp(-i H dt) psi` for a time-independent Hermitian `h`.
pub fn propagate_static<H: HermitianEntries + ?Sized>(
    psi: &StateVector,
    h: &H,
    dt: f64,
    config: &PropagatorConfig,
) -> Result<StateVector> {
    if dt < 0.0 {
        return Err(Error::InvalidParameter(format!("negative propagation time {dt}")));
    }
    let largest = spectral::connected_blocks(h).iter().map(Vec::len).max().unwrap_or(0);
    let amps = if largest <= config.dense_spectral_max_dim {
        BlockSpectral::new(h)?.evolve(psi.amplitudes(), dt)
    } else {
        krylov::expm_action(h, psi.amplitudes(), dt, config.krylov())?
    };
    StateVector::new(psi.layout().clone(), amps)
}

/// `exp(+i H_lin t) psi`.
pub fn to_interaction_picture(psi: &StateVector, device: &DeviceParams, t: f64) -> Result<StateVector> {
    let lin = StaticHamiltonian::linear(device)?;
    let amps = BlockSpectral::new(&lin)?.evolve(psi.amplitudes(), -t);
    StateVector::new(psi.layout().clone(), amps)
}

/// Simulates a schedule from the composite vacuum.
pub fn run_schedule(
    device: &DeviceParams,
    schedule: &DriveSchedule,
    config: &PropagatorConfig,
) -> Result<TrajectoryResult> {
    DeviceDynamics::new(device, config)?.run(schedule)
}

/// Propagators for one device, reusable across schedules.
///
/// Building this diagonalizes `H_lin` and `H_lin + H_kerr` once; every
/// later trajectory only pays for the pulsed segment and the snapshot
/// rotations. Immutable after construction and safe to share across threads.
#[derive(Clone, Debug)]
pub struct DeviceDynamics {
    device: DeviceParams,
    config: PropagatorConfig,
    undriven: Arc<StaticHamiltonian>,
    undriven_prop: StaticPropagator,
    linear_prop: StaticPropagator,
}

impl DeviceDynamics {
    pub fn new(device: &DeviceParams, config: &PropagatorConfig) -> Result<Self> {
        config.validate()?;
        let undriven = Arc::new(StaticHamiltonian::undriven(device)?);
        let linear = Arc::new(StaticHamiltonian::linear(device)?);
        let undriven_prop = StaticPropagator::new(undriven.clone(), config)?;
        let linear_prop = StaticPropagator::new(linear, config)?;
        Ok(Self { device: device.clone(), config: config.clone(), undriven, undriven_prop, linear_prop })
    }

    pub fn device(&self) -> &DeviceParams {
        &self.device
    }

    pub fn config(&self) -> &PropagatorConfig {
        &self.config
    }

    pub fn undriven_hamiltonian(&self) -> &StaticHamiltonian {
        &self.undriven
    }

    pub fn uses_spectral(&self) -> bool {
        self.undriven_prop.is_spectral() && self.linear_prop.is_spectral()
    }

    /// `exp(+i H_lin t) psi`.
    pub fn to_interaction_picture(&self, psi: &StateVector, t: f64) -> Result<StateVector> {
        StateVector::new(psi.layout().clone(), self.linear_prop.evolve(psi.amplitudes(), -t)?)
    }

    /// Lab-frame (rotating-frame) state at `t_R`, the end of the pulses.
    pub fn state_after_pulses(&self, schedule: &DriveSchedule) -> Result<(f64, StateVector, IntegrationStats)> {
        schedule.validate()?;
        let layout = &self.device.layout;
        let psi0 = vacuum(layout);
        let t_ref = schedule.pulse_end();
        if t_ref > 0.0 {
            let h = DeviceHamiltonian::with_undriven((*self.undriven).clone(), schedule);
            let (psi, stats) = integrate_with(&h, &psi0, 0.0, t_ref, &self.config)?;
            Ok((t_ref, psi, stats))
        } else {
            Ok((0.0, psi0, IntegrationStats::default()))
        }
    }

    /// Propagates from `t_ref` to `t` under the undriven Hamiltonian.
    pub fn propagate_undriven(&self, psi: &StateVector, dt: f64) -> Result<StateVector> {
        StateVector::new(psi.layout().clone(), self.undriven_prop.evolve(psi.amplitudes(), dt)?)
    }

    /// Factor `W` of the interaction-picture resonator state at `t`,
    /// `rho = W W^dagger`, one column per qubit level.
    fn factor(&self, psi: &StateVector, t: f64) -> Result<Mat<C64>> {
        traced_first_factor(&self.to_interaction_picture(psi, t)?)
    }

    fn modes_layout(&self) -> Result<ModeLayout> {
        let modes: Vec<usize> = (1..self.device.layout.n_sites()).collect();
        self.device.layout.sublayout(&modes)
    }

    /// Integrates the pulses and returns a cursor over the free evolution
    /// that follows.
    pub fn start(&self, schedule: &DriveSchedule) -> Result<TrajectoryCursor<'_>> {
        let (t_ref, psi_ref, stats) = self.state_after_pulses(schedule)?;
        let norm_drift = (psi_ref.norm() - 1.0).abs();
        // Integrator norm error is reported above and removed here.
        let psi_ref = psi_ref.normalized();
        let reference_factor = Arc::new(self.factor(&psi_ref, t_ref)?);
        Ok(TrajectoryCursor {
            dynamics: self,
            modes: self.modes_layout()?,
            t_ref,
            t: t_ref,
            psi: psi_ref.clone(),
            psi_ref,
            reference_factor,
            norm_drift,
            stats,
        })
    }

    /// Resonator-state factors at each of `times`, in request order.
    /// Repeated times share one factor.
    pub fn factors(&self, schedule: &DriveSchedule) -> Result<(TrajectoryCursor<'_>, Vec<Arc<Mat<C64>>>)> {
        let mut cursor = self.start(schedule)?;
        let mut times: Vec<f64> = schedule.measure_times.clone();
        times.sort_by(f64::total_cmp);
        times.dedup();
        let mut unique: Vec<(f64, Arc<Mat<C64>>)> = Vec::with_capacity(times.len());
        for &t in &times {
            let w = if t == cursor.t_ref { cursor.reference_factor.clone() } else { Arc::new(cursor.factor_at(t)?) };
            unique.push((t, w));
        }
        let out =
            schedule.measure_times.iter().map(|&t| unique[unique.partition_point(|(u, _)| *u < t)].1.clone()).collect();
        Ok((cursor, out))
    }

    pub fn run(&self, schedule: &DriveSchedule) -> Result<TrajectoryResult> {
        let (cursor, factors) = self.factors(schedule)?;
        let mut dense: Vec<(&Arc<Mat<C64>>, Arc<DensityMatrix>)> = Vec::new();
        let mut snapshots = Vec::with_capacity(factors.len());
        for (&t, w) in schedule.measure_times.iter().zip(&factors) {
            let rho = match dense.iter().find(|(k, _)| Arc::ptr_eq(k, w)) {
                Some((_, r)) => r.clone(),
                None => {
                    let r = Arc::new(DensityMatrix::from_factor(cursor.modes.clone(), w)?);
                    dense.push((w, r.clone()));
                    r
                }
            };
            snapshots.push((t, rho));
        }
        Ok(TrajectoryResult {
            reference_time: cursor.t_ref,
            reference_state: Arc::new(cursor.reference_state()?),
            snapshots,
            norm_drift: cursor.norm_drift,
            stats: cursor.stats,
        })
    }
}

/// Free evolution after the pulses, sampled on demand.
///
/// Requests at increasing times continue from the previous one; an earlier
/// time restarts from the reference state.
pub struct TrajectoryCursor<'a> {
    dynamics: &'a DeviceDynamics,
    modes: ModeLayout,
    t_ref: f64,
    psi_ref: StateVector,
    t: f64,
    psi: StateVector,
    reference_factor: Arc<Mat<C64>>,
    norm_drift: f64,
    stats: IntegrationStats,
}

impl TrajectoryCursor<'_> {
    pub fn reference_time(&self) -> f64 {
        self.t_ref
    }

    /// Layout of the resonator subsystem.
    pub fn modes_layout(&self) -> &ModeLayout {
        &self.modes
    }

    pub fn reference_factor(&self) -> &Arc<Mat<C64>> {
        &self.reference_factor
    }

    pub fn reference_state(&self) -> Result<DensityMatrix> {
        DensityMatrix::from_factor(self.modes.clone(), &self.reference_factor)
    }

    pub fn norm_drift(&self) -> f64 {
        self.norm_drift
    }

    pub fn stats(&self) -> IntegrationStats {
        self.stats
    }

    /// Full (lab-frame) state at `t`.
    pub fn state_at(&mut self, t: f64) -> Result<StateVector> {
        let slack = 1e-12 * self.t_ref.max(1.0);
        let t = if t < self.t_ref && t >= self.t_ref - slack { self.t_ref } else { t };
        if t < self.t_ref {
            return Err(Error::InvalidParameter(format!("time {t} precedes the end of the pulses at {}", self.t_ref)));
        }
        if t < self.t {
            self.psi = self.psi_ref.clone();
            self.t = self.t_ref;
        }
        if t > self.t {
            self.psi = self.dynamics.propagate_undriven(&self.psi, t - self.t)?;
            self.t = t;
        }
        Ok(self.psi.clone())
    }

    /// Factor of the interaction-picture resonator state at `t`.
    pub fn factor_at(&mut self, t: f64) -> Result<Mat<C64>> {
        let psi = self.state_at(t)?;
        self.dynamics.factor(&psi, t)
    }

    /// Interaction-picture resonator state at `t`.
    pub fn reduced_at(&mut self, t: f64) -> Result<DensityMatrix> {
        let w = self.factor_at(t)?;
        DensityMatrix::from_factor(self.modes.clone(), &w)
    }
}
