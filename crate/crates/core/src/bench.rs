//! Classical simulation cost of one kernel entry as the number of
//! resonators and their truncation grow.

use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dynamics::{DeviceDynamics, PropagatorConfig};
use crate::error::{Error, Result};
use crate::hilbert::ModeLayout;
use crate::kernel::{FidelityProduct, KernelFunction, SampleStates};
use crate::model::{classifier_detunings_mhz, mhz, DeviceParams, DriveSchedule, GaussianPulse};

/// `(n, n_dim, n_q)` rows as published. The `(3, 12)` entry is one more
/// than `ceil(log2(2 * 12^3)) = 12`.
pub const TABLE_ROWS: [(usize, usize, u32); 9] =
    [(2, 6, 7), (2, 9, 8), (2, 12, 9), (3, 6, 9), (3, 9, 11), (3, 12, 13), (4, 6, 12), (4, 9, 14), (4, 12, 16)];

/// Two-level systems needed to hold a qubit and `n` resonators of
/// dimension `n_dim`: `ceil(log2(2 n_dim^n))`.
pub fn qubits_required(n: usize, n_dim: usize) -> Result<u32> {
    if n == 0 || n_dim < 2 {
        return Err(Error::InvalidParameter(format!("need n >= 1 and n_dim >= 2, got ({n}, {n_dim})")));
    }
    let states = (n_dim as u128)
        .checked_pow(n as u32)
        .ok_or_else(|| Error::InvalidParameter(format!("{n_dim}^{n} overflows")))?;
    // ceil(log2 N) for N >= 1 is the bit length of N - 1.
    Ok(1 + (128 - (states - 1).leading_zeros()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchProtocol {
    pub kerr_mhz: f64,
    pub qubit_dim: usize,
    pub amplitude_mhz: f64,
    pub sigma: f64,
    pub measure_time: f64,
    pub repeats: usize,
    pub propagator: PropagatorConfig,
}

impl Default for BenchProtocol {
    fn default() -> Self {
        Self {
            kerr_mhz: 400.0,
            qubit_dim: 4,
            amplitude_mhz: 5.0,
            sigma: 0.08,
            measure_time: 50.0,
            repeats: 1,
            propagator: PropagatorConfig::default(),
        }
    }
}

impl BenchProtocol {
    pub fn validate(&self) -> Result<()> {
        if self.repeats == 0 {
            return Err(Error::Config("repeats must be >= 1".into()));
        }
        if !(self.sigma > 0.0) || !(self.measure_time >= 6.0 * self.sigma) {
            return Err(Error::Config("measurement time must follow the pulses".into()));
        }
        self.propagator.validate()
    }

    /// First 16 hex digits of the SHA-256 of the protocol's JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("protocol serializes");
        Sha256::digest(&json).iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    pub fn device(&self, n: usize, n_dim: usize) -> Result<DeviceParams> {
        let layout = ModeLayout::qubit_with_modes(self.qubit_dim, n_dim, n)?;
        DeviceParams::from_mhz(self.kerr_mhz, 70.0, &classifier_detunings_mhz(n), &vec![10.0; n], layout)
    }

    /// Every resonator driven at the same amplitude, every snapshot at
    /// `measure_time`.
    pub fn schedule(&self, device: &DeviceParams) -> Result<DriveSchedule> {
        let pulses = device
            .deltas
            .iter()
            .map(|&d| GaussianPulse::new(mhz(self.amplitude_mhz), d, 3.0 * self.sigma, self.sigma))
            .collect::<Result<Vec<_>>>()?;
        DriveSchedule::new(pulses, vec![self.measure_time; device.n_modes()])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub n: usize,
    pub n_dim: usize,
    pub n_q: u32,
    /// Mean wall-clock seconds per kernel entry.
    pub t_c: f64,
    /// Sample standard deviation over repeats (0 for a single run).
    pub t_c_std: f64,
    pub repeats: usize,
    pub config_hash: String,
}

fn simulate(dynamics: &DeviceDynamics, schedule: &DriveSchedule) -> Result<SampleStates> {
    let (cursor, factors) = dynamics.factors(schedule)?;
    SampleStates::from_factors(cursor.modes_layout().clone(), &factors)
}

/// Times one kernel entry on one thread: Hamiltonian construction and
/// diagonalization, two sample simulations and the fidelity product.
pub fn time_kernel_entry(n: usize, n_dim: usize, protocol: &BenchProtocol) -> Result<ScalingRow> {
    protocol.validate()?;
    let n_q = qubits_required(n, n_dim)?;
    let device = protocol.device(n, n_dim)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let times = pool.install(|| {
        (0..protocol.repeats)
            .map(|_| {
                let start = Instant::now();
                let dynamics = DeviceDynamics::new(&device, &protocol.propagator)?;
                let schedule = protocol.schedule(&device)?;
                let a = simulate(&dynamics, &schedule)?;
                let b = simulate(&dynamics, &schedule)?;
                let k = FidelityProduct.entry(&a, &b)?;
                std::hint::black_box(k);
                Ok(start.elapsed().as_secs_f64())
            })
            .collect::<Result<Vec<f64>>>()
    })?;
    let mean = times.iter().sum::<f64>() / times.len() as f64;
    let std = if times.len() > 1 {
        (times.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (times.len() - 1) as f64).sqrt()
    } else {
        0.0
    };
    Ok(ScalingRow { n, n_dim, n_q, t_c: mean, t_c_std: std, repeats: times.len(), config_hash: protocol.hash() })
}

/// CSV with columns `n, n_dim, n_q, t_c, t_c_std, repeats, config_hash`.
pub fn write_rows<W: Write>(rows: &[ScalingRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_rows() {
        for (n, d, q) in TABLE_ROWS {
            let want = if (n, d) == (3, 12) { q - 1 } else { q };
            assert_eq!(qubits_required(n, d).unwrap(), want, "({n}, {d})");
        }
        // 2 * 12^3 = 3456 lies between 2^11 and 2^12.
        assert!(2048 < 3456 && 3456 <= 4096);
        assert_eq!(qubits_required(1, 2).unwrap(), 2);
        assert!(qubits_required(0, 4).is_err());
        assert!(qubits_required(2, 1).is_err());
    }

    #[test]
    fn closed_forms_agree() {
        for n in 1..=8usize {
            for d in 2..=16usize {
                let inside = (2.0 * (d as f64).powi(n as i32)).log2().ceil() as u32;
                let outside = (1.0 + n as f64 * (d as f64).log2()).ceil() as u32;
                let exact = qubits_required(n, d).unwrap();
                assert_eq!(inside, exact, "({n}, {d})");
                assert_eq!(outside, exact, "({n}, {d})");
            }
        }
    }

    #[test]
    fn protocol_hash_is_stable() {
        let p = BenchProtocol::default();
        assert_eq!(p.hash(), BenchProtocol::default().hash());
        assert_eq!(p.hash().len(), 16);
        let q = BenchProtocol { repeats: 2, ..BenchProtocol::default() };
        assert_ne!(p.hash(), q.hash());
    }

    #[test]
    fn small_row() {
        let p = BenchProtocol { measure_time: 2.0, ..BenchProtocol::default() };
        let row = time_kernel_entry(1, 4, &p).unwrap();
        assert_eq!(row.n_q, 3);
        assert!(row.t_c > 0.0);
        let mut buf = Vec::new();
        write_rows(&[row], &mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("n,n_dim,n_q,t_c,t_c_std,repeats,config_hash\n"));
    }
}
