//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use faer::Mat;
use num_complex::Complex64 as C64;

use mbar_kernel::hilbert::{vacuum, StateVector};
use mbar_kernel::model::{h_total, pulse_envelope, DeviceParams, DriveSchedule};

/// Fixed-step midpoint exponential: `psi <- exp(-i H(t + dt/2) dt) psi`,
/// with each step exponentiated through a dense eigendecomposition.
pub fn midpoint_exponential(device: &DeviceParams, schedule: &DriveSchedule, t_end: f64, steps: usize) -> StateVector {
    let psi0 = vacuum(&device.layout);
    let d = psi0.amplitudes().len();
    let mut psi = Mat::from_fn(d, 1, |i, _| psi0.amplitudes()[i]);
    let dt = t_end / steps as f64;
    for k in 0..steps {
        let h = h_total(device, schedule, (k as f64 + 0.5) * dt).unwrap();
        let m = h.mat();
        let herm = Mat::from_fn(d, d, |i, j| 0.5 * (m[(i, j)] + m[(j, i)].conj()));
        let eig = herm.self_adjoint_eigen(faer::Side::Lower).unwrap();
        let (u, s) = (eig.U(), eig.S().column_vector());
        let phased = Mat::from_fn(d, d, |i, c| u[(i, c)] * C64::from_polar(1.0, -s[c].re * dt));
        psi = &phased * (u.adjoint() * &psi);
    }
    StateVector::new(device.layout.clone(), (0..d).map(|i| psi[(i, 0)]).collect()).unwrap()
}

/// Single-particle matrix of the linear Hamiltonian: site 0 the qubit, then
/// the resonators.
fn single_particle(device: &DeviceParams) -> Mat<f64> {
    let n = device.n_modes();
    Mat::from_fn(n + 1, n + 1, |i, j| match (i, j) {
        (0, 0) => -device.delta_q,
        (0, j) => device.couplings[j - 1],
        (i, 0) => device.couplings[i - 1],
        (i, j) if i == j => -device.deltas[i - 1],
        _ => 0.0,
    })
}

/// Interaction-picture coherent amplitudes of the linear (Kerr-free,
/// untruncated) device after the pulses:
/// `v_I = -i int_0^T exp(i M s) f(s) e_0 ds` with `f(s) = sum_j W_j(s) exp(i delta_j s)`,
/// by composite Simpson on `intervals` panels (even).
pub fn linear_amplitudes(device: &DeviceParams, schedule: &DriveSchedule, intervals: usize) -> Vec<C64> {
    assert!(intervals % 2 == 0);
    let m = single_particle(device);
    let n = m.nrows();
    let eig = m.self_adjoint_eigen(faer::Side::Lower).unwrap();
    let (u, s) = (eig.U(), eig.S().column_vector());
    let t_end = schedule.pulse_end();
    let h = t_end / intervals as f64;
    let mut acc = vec![C64::new(0.0, 0.0); n];
    for k in 0..=intervals {
        let t = k as f64 * h;
        let w = if k == 0 || k == intervals {
            1.0
        } else if k % 2 == 1 {
            4.0
        } else {
            2.0
        };
        let f: C64 = schedule.pulses.iter().map(|p| C64::from_polar(pulse_envelope(p, t), p.drive_detuning * t)).sum();
        // exp(i M t) e_0 = U exp(i S t) U^T e_0
        for (r, a) in acc.iter_mut().enumerate() {
            let mut e = C64::new(0.0, 0.0);
            for c in 0..n {
                e += C64::from_polar(u[(r, c)] * u[(0, c)], s[c] * t);
            }
            *a += e * f * w;
        }
    }
    acc.iter().map(|a| C64::new(0.0, -1.0) * a * (h / 3.0)).collect()
}

/// `|<alpha|beta>|` for coherent states.
pub fn coherent_overlap(a: C64, b: C64) -> f64 {
    (-(a - b).norm_sqr() / 2.0).exp()
}
