//! Pulsed integration followed by exact free evolution, and the agreement
//! of the spectral and Krylov propagators.
//!
//! cargo run --release --example propagation

use std::sync::Arc;

use mbar_kernel::dynamics::{DeviceDynamics, PropagatorConfig, StaticPropagator};
use mbar_kernel::hilbert::vacuum;
use mbar_kernel::model::{mhz, DeviceParams, DriveSchedule, GaussianPulse, StaticHamiltonian};
use mbar_kernel::qinfo::{mean_occupation, uhlmann_fidelity};

fn main() -> mbar_kernel::Result<()> {
    let device = DeviceParams::classifier(400.0, 2, 6)?;
    let pulses = device
        .deltas
        .iter()
        .map(|&d| GaussianPulse::new(mhz(7.5), d, 0.24, 0.08))
        .collect::<mbar_kernel::Result<Vec<_>>>()?;
    let schedule = DriveSchedule::new(pulses, vec![1.0, 10.0, 50.0])?;
    let dynamics = DeviceDynamics::new(&device, &PropagatorConfig::default())?;
    let traj = dynamics.run(&schedule)?;
    println!(
        "pulses end at {:.2} us after {} accepted steps; norm drift {:.1e}",
        traj.reference_time, traj.stats.accepted, traj.norm_drift
    );
    for (t, rho) in &traj.snapshots {
        println!("t = {t:>5.1} us: F(rho_R, rho_t) = {:.6}", uhlmann_fidelity(&traj.reference_state, rho)?);
    }

    let (t_ref, psi, _) = dynamics.state_after_pulses(&schedule)?;
    println!(
        "mean resonator occupations at {t_ref:.2} us: {:.4}, {:.4}",
        mean_occupation(&psi, 1)?,
        mean_occupation(&psi, 2)?
    );

    let h = Arc::new(StaticHamiltonian::undriven(&device)?);
    let spectral = StaticPropagator::new(h.clone(), &PropagatorConfig::default())?;
    let krylov = StaticPropagator::new(h, &PropagatorConfig { dense_spectral_max_dim: 1, ..Default::default() })?;
    let start = vacuum(&device.layout);
    let mut kicked = start.amplitudes().to_vec();
    kicked.rotate_right(7);
    let a = spectral.evolve(&kicked, 20.0)?;
    let b = krylov.evolve(&kicked, 20.0)?;
    let diff = a.iter().zip(&b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
    println!("spectral vs Krylov after 20 us: max difference {diff:.1e}");
    Ok(())
}
