//! Fidelity and entanglement trajectories after a burst of resonant pulses.

use serde::{Deserialize, Serialize};

use crate::dynamics::{DeviceDynamics, PropagatorConfig};
use crate::error::{Error, Result};
use crate::model::{mhz, pulse_envelope, DeviceParams, DriveSchedule, GaussianPulse};
use crate::qinfo::{log_negativity, DensityMatrix, FidelityReference};

/// Pulse amplitudes (MHz) of the demonstration, one per resonator.
pub const DEMO_AMPLITUDES_MHZ: [f64; 3] = [8.75, 9.25, 9.75];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemoDrive {
    /// Peak amplitudes, rad/us, one per resonator.
    pub amplitudes: Vec<f64>,
    /// Pulse width, us. Pulses are centered at `3 sigma`.
    pub sigma: f64,
}

impl DemoDrive {
    pub fn standard(n: usize) -> Result<Self> {
        if n == 0 || n > DEMO_AMPLITUDES_MHZ.len() {
            return Err(Error::InvalidParameter(format!("demo drive defined for 1..=3 resonators, got {n}")));
        }
        Ok(Self { amplitudes: DEMO_AMPLITUDES_MHZ[..n].iter().map(|&a| mhz(a)).collect(), sigma: 0.08 })
    }

    /// One pulse per resonator, resonant with it.
    pub fn schedule(&self, device: &DeviceParams, measure_times: Vec<f64>) -> Result<DriveSchedule> {
        if self.amplitudes.len() != device.n_modes() {
            return Err(Error::InvalidParameter(format!(
                "{} amplitudes for {} resonators",
                self.amplitudes.len(),
                device.n_modes()
            )));
        }
        let pulses = self
            .amplitudes
            .iter()
            .zip(&device.deltas)
            .map(|(&a, &d)| GaussianPulse::new(a, d, 3.0 * self.sigma, self.sigma))
            .collect::<Result<Vec<_>>>()?;
        DriveSchedule::new(pulses, measure_times)
    }

    /// End of the pulses, `6 sigma`.
    pub fn end(&self) -> f64 {
        6.0 * self.sigma
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub t: f64,
    /// `F(rho_R, rho_t)`.
    pub fidelity: f64,
    /// Log negativity between the first resonator and the rest; absent for
    /// a single resonator.
    pub log_negativity: Option<f64>,
}

/// Evaluates the trajectory at `times` (each at or after the end of the
/// pulses), holding at most one snapshot in memory.
pub fn trajectory(
    device: &DeviceParams,
    drive: &DemoDrive,
    times: &[f64],
    config: &PropagatorConfig,
) -> Result<Vec<TrajectoryPoint>> {
    evaluate(device, drive, times, config, device.n_modes() >= 2)
}

/// As [`trajectory`] without the log negativity, which dominates the cost
/// for three or more resonators.
pub fn fidelity_trajectory(
    device: &DeviceParams,
    drive: &DemoDrive,
    times: &[f64],
    config: &PropagatorConfig,
) -> Result<Vec<TrajectoryPoint>> {
    evaluate(device, drive, times, config, false)
}

fn evaluate(
    device: &DeviceParams,
    drive: &DemoDrive,
    times: &[f64],
    config: &PropagatorConfig,
    bipartite: bool,
) -> Result<Vec<TrajectoryPoint>> {
    let dynamics = DeviceDynamics::new(device, config)?;
    let schedule = drive.schedule(device, Vec::new())?;
    let mut cursor = dynamics.start(&schedule)?;
    let reference = FidelityReference::from_factor((**cursor.reference_factor()).clone());
    times
        .iter()
        .map(|&t| {
            let w = cursor.factor_at(t)?;
            let log_negativity = if bipartite {
                let rho = DensityMatrix::from_factor(cursor.modes_layout().clone(), &w)?;
                Some(log_negativity(&rho, &[0])?)
            } else {
                None
            };
            let fidelity = reference.fidelity_with(&FidelityReference::from_factor(w))?;
            Ok(TrajectoryPoint { t, fidelity, log_negativity })
        })
        .collect()
}

/// Evenly spaced times from the end of the pulses to `t_max`.
pub fn time_grid(drive: &DemoDrive, t_max: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !(t_max >= drive.end()) {
        return Err(Error::InvalidParameter(format!("bad time grid: step {step}, t_max {t_max}")));
    }
    let start = drive.end();
    let n = ((t_max - start) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| start + i as f64 * step).collect())
}

/// First sampled time whose fidelity is strictly below `threshold`.
pub fn first_crossing(points: &[TrajectoryPoint], threshold: f64) -> Option<f64> {
    points.iter().find(|p| p.fidelity < threshold).map(|p| p.t)
}

/// Index of the first local minimum of the fidelity after it falls below
/// `threshold`.
pub fn first_dip(points: &[TrajectoryPoint], threshold: f64) -> Option<usize> {
    let start = points.iter().position(|p| p.fidelity < threshold)?;
    (start..points.len()).find(|&i| i + 1 == points.len() || points[i + 1].fidelity > points[i].fidelity)
}

/// Envelope samples `(t, W_1(t), ..., W_n(t))` in rad/us.
pub fn envelopes(schedule: &DriveSchedule, times: &[f64]) -> Vec<Vec<f64>> {
    times
        .iter()
        .map(|&t| std::iter::once(t).chain(schedule.pulses.iter().map(|p| pulse_envelope(p, t))).collect())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(t: f64, f: f64) -> TrajectoryPoint {
        TrajectoryPoint { t, fidelity: f, log_negativity: None }
    }

    #[test]
    fn dip_detection() {
        let pts: Vec<_> =
            [1.0, 0.95, 0.85, 0.7, 0.8, 0.99, 0.6].iter().enumerate().map(|(i, &f)| pt(i as f64, f)).collect();
        assert_eq!(first_crossing(&pts, 0.9), Some(2.0));
        assert_eq!(first_dip(&pts, 0.9), Some(3));
        assert_eq!(first_dip(&pts[..3], 0.5), None);
    }

    #[test]
    fn grid_and_schedule() {
        let drive = DemoDrive::standard(2).unwrap();
        let g = time_grid(&drive, 1.0, 0.26).unwrap();
        assert_eq!(g.len(), 3);
        assert!((g[0] - 0.48).abs() < 1e-15);
        let dev = DeviceParams::entanglement_demo(0.0, 2, 4).unwrap();
        let s = drive.schedule(&dev, g).unwrap();
        assert!((s.pulse_end() - 0.48).abs() < 1e-12);
        assert!((crate::model::to_mhz(s.pulses[1].amplitude) - 9.25).abs() < 1e-12);
        assert!(DemoDrive::standard(4).is_err());
    }

    #[test]
    fn single_mode_has_no_negativity() {
        let dev = DeviceParams::entanglement_demo(400.0, 1, 6).unwrap();
        let drive = DemoDrive::standard(1).unwrap();
        let pts = trajectory(&dev, &drive, &[0.48, 1.0], &PropagatorConfig::default()).unwrap();
        assert!((pts[0].fidelity - 1.0).abs() < 1e-9);
        assert!(pts.iter().all(|p| p.log_negativity.is_none()));
    }

    #[test]
    fn fidelity_only_matches_full() {
        let dev = DeviceParams::entanglement_demo(400.0, 2, 5).unwrap();
        let drive = DemoDrive::standard(2).unwrap();
        let times = [0.48, 0.9, 1.7];
        let full = trajectory(&dev, &drive, &times, &PropagatorConfig::default()).unwrap();
        let lean = fidelity_trajectory(&dev, &drive, &times, &PropagatorConfig::default()).unwrap();
        for (a, b) in full.iter().zip(&lean) {
            assert!(a.log_negativity.is_some() && b.log_negativity.is_none());
            assert_eq!(a.fidelity, b.fidelity);
        }
    }
}
